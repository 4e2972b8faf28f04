//! Dissipative state engineering for frustration-free Hamiltonians.
//!
//! A Hamiltonian `H = Σ_λ H_λ` of local projectors is driven to its ground space by
//! measuring each term and, on a negative outcome, applying a correction on its support:
//! `T(ρ) = Σ_λ p_λ [P_λ ρ P_λ + (1/m) Σ_i U_{λ,i} H_λ ρ H_λ U_{λ,i}†]`.

pub mod pauli;

use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::liouville::{CpMapChannel, LindbladModel};
use crate::quantum::{
    gates, tensor_embed, trace_distance, DensityMatrix, LocalOperator, Operator, SiteLayout, SiteSystem,
};
use crate::random;

pub use pauli::{Pauli, PauliString};

pub const PROJECTOR_TOL: f64 = 1e-10;
pub const FRUSTRATION_TOL: f64 = 1e-9;
pub const CORRECTION_TOL: f64 = 1e-12;
pub const DEFAULT_ENERGY_TOL: f64 = 1e-6;
/// Largest toric-code register handled densely.
pub const TORIC_QUBIT_BUDGET: usize = 10;

/// `H = Σ_λ H_λ` with every `H_λ` a projector on a few sites.
#[derive(Clone, Debug)]
pub struct FrustrationFreeHamiltonian {
    system: SiteSystem,
    terms: Vec<LocalOperator>,
}

impl FrustrationFreeHamiltonian {
    /// Frustration-freeness is not required here; [`validate`](Self::validate) reports it.
    pub fn new(system: SiteSystem, terms: Vec<LocalOperator>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("a Hamiltonian needs at least one term"));
        }
        for (k, t) in terms.iter().enumerate() {
            t.check_within(&system)?;
            if !t.op().is_projector(PROJECTOR_TOL) {
                return Err(Error::invalid(format!("term {k} is not a projector")));
            }
        }
        Ok(FrustrationFreeHamiltonian { system, terms })
    }

    pub fn system(&self) -> &SiteSystem {
        &self.system
    }

    pub fn terms(&self) -> &[LocalOperator] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total(&self) -> Operator {
        let n = self.system.total_dim();
        let mut m: CMatrix = Array2::zeros((n, n));
        for t in &self.terms {
            let layout = SiteLayout::new(&self.system, t.support()).expect("checked at construction");
            m = m + layout.embed(t.matrix());
        }
        Operator::new(m, self.system.clone()).expect("dimensions agree")
    }

    /// `tr[Hρ]`, evaluated term by term on reduced states.
    pub fn energy(&self, rho: &DensityMatrix) -> Result<f64> {
        if rho.system() != &self.system {
            return Err(Error::mismatch("state and Hamiltonian live on different registers"));
        }
        let mut e = 0.0;
        for t in &self.terms {
            let layout = SiteLayout::new(&self.system, t.support())?;
            let local = layout.trace_rest(rho.matrix());
            e += (t.matrix() * &local.t()).sum().re;
        }
        Ok(e)
    }

    pub fn ground_space(&self) -> Result<GroundSpace> {
        let (w, v) = linalg::eigh(self.total().matrix())?;
        let e0 = w[0];
        let cols: Vec<usize> = (0..w.len()).filter(|&k| w[k] - e0 <= FRUSTRATION_TOL).collect();
        let basis = linalg::submatrix(&v, &(0..v.nrows()).collect::<Vec<_>>(), &cols);
        Ok(GroundSpace { energy: e0, basis, spectrum: w })
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        let projector_defects = self
            .terms
            .iter()
            .map(|t| {
                let m = t.matrix();
                linalg::max_abs_diff(&m.dot(m), m).max(linalg::max_abs_diff(&linalg::dagger(m), m))
            })
            .collect();
        let ground = self.ground_space()?;
        let n = self.terms.len();
        let mut commutators = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in a + 1..n {
                let x = self.commutator_norm(a, b)?;
                commutators[a][b] = x;
                commutators[b][a] = x;
            }
        }
        Ok(ValidationReport { projector_defects, min_eigenvalue: ground.energy, ground_dim: ground.dim(), commutators })
    }

    fn commutator_norm(&self, a: usize, b: usize) -> Result<f64> {
        let (ta, tb) = (&self.terms[a], &self.terms[b]);
        if !ta.support().iter().any(|s| tb.support().contains(s)) {
            return Ok(0.0);
        }
        let mut union: Vec<usize> = ta.support().iter().chain(tb.support()).copied().collect();
        union.sort_unstable();
        union.dedup();
        let ea = ta.extend_to(&self.system, &union)?;
        let eb = tb.extend_to(&self.system, &union)?;
        let comm = ea.matrix().dot(eb.matrix()) - eb.matrix().dot(ea.matrix());
        Ok(linalg::max_abs(&comm))
    }
}

/// Lowest eigenspace of `H`, together with the full spectrum.
#[derive(Clone, Debug)]
pub struct GroundSpace {
    pub energy: f64,
    pub basis: CMatrix,
    pub spectrum: Array1<f64>,
}

impl GroundSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> CMatrix {
        linalg::projector_from_columns(&self.basis)
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    /// `max(|H² - H|, |H† - H|)` per term.
    pub projector_defects: Vec<f64>,
    pub min_eigenvalue: f64,
    pub ground_dim: usize,
    /// Symmetric table of `max |[H_a, H_b]|`.
    pub commutators: Vec<Vec<f64>>,
}

impl ValidationReport {
    pub fn all_projectors(&self) -> bool {
        self.projector_defects.iter().all(|&d| d <= PROJECTOR_TOL)
    }

    pub fn is_frustration_free(&self) -> bool {
        self.min_eigenvalue.abs() <= FRUSTRATION_TOL
    }

    pub fn is_commuting(&self, tol: f64) -> bool {
        self.commutators.iter().flatten().all(|&x| x <= tol)
    }
}

/// What happens after a negative outcome on one term.
#[derive(Clone, Debug)]
pub enum Correction {
    /// Apply one of the unitaries, chosen uniformly.
    Unitaries(Vec<LocalOperator>),
    /// Replace the support by the maximally mixed state.
    Depolarizing,
}

#[derive(Clone, Debug)]
pub struct CorrectionSet {
    probabilities: Vec<f64>,
    corrections: Vec<Correction>,
}

impl CorrectionSet {
    pub fn new(probabilities: Vec<f64>, corrections: Vec<Correction>) -> Result<Self> {
        if probabilities.len() != corrections.len() {
            return Err(Error::mismatch(format!(
                "{} probabilities for {} corrections",
                probabilities.len(),
                corrections.len()
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|&p| !(p > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("term probabilities must be positive and sum to 1 (sum {total})")));
        }
        for corr in &corrections {
            if let Correction::Unitaries(us) = corr {
                if us.is_empty() {
                    return Err(Error::invalid("a correction needs at least one unitary"));
                }
                for u in us {
                    u.op().require_unitary(1e-10)?;
                }
            }
        }
        Ok(CorrectionSet { probabilities, corrections })
    }

    /// Equal probabilities `1/n`.
    pub fn uniform(corrections: Vec<Correction>) -> Result<Self> {
        let n = corrections.len();
        Self::new(vec![1.0 / n as f64; n], corrections)
    }

    pub fn depolarizing(n_terms: usize) -> Result<Self> {
        Self::uniform(vec![Correction::Depolarizing; n_terms])
    }

    /// One anticommuting single-qubit Pauli per stabilizer term.
    pub fn stabilizer(h: &FrustrationFreeHamiltonian) -> Result<Self> {
        let corr = h
            .terms()
            .iter()
            .map(|t| stabilizer_correction(t).map(|u| Correction::Unitaries(vec![u])))
            .collect::<Result<Vec<_>>>()?;
        Self::uniform(corr)
    }

    /// Every site of each stabilizer gets its own correction, chosen uniformly.
    pub fn stabilizer_walk(h: &FrustrationFreeHamiltonian) -> Result<Self> {
        let corr = h
            .terms()
            .iter()
            .map(|t| stabilizer_corrections_all(t).map(Correction::Unitaries))
            .collect::<Result<Vec<_>>>()?;
        Self::uniform(corr)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn corrections(&self) -> &[Correction] {
        &self.corrections
    }
}

/// The engineered channel with the data it was built from.
#[derive(Clone, Debug)]
pub struct DseChannel {
    hamiltonian: FrustrationFreeHamiltonian,
    corrections: CorrectionSet,
    /// Corrections re-expressed on each term's support.
    local_unitaries: Vec<Option<Vec<CMatrix>>>,
    channel: CpMapChannel,
}

impl DseChannel {
    pub fn hamiltonian(&self) -> &FrustrationFreeHamiltonian {
        &self.hamiltonian
    }

    pub fn corrections(&self) -> &CorrectionSet {
        &self.corrections
    }

    pub fn channel(&self) -> &CpMapChannel {
        &self.channel
    }

    pub fn into_channel(self) -> CpMapChannel {
        self.channel
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.channel.apply(rho)
    }

    /// The correction map on term `k`'s support, applied to a local operator.
    fn correct_locally(&self, k: usize, x: &CMatrix) -> CMatrix {
        match &self.local_unitaries[k] {
            Some(us) => {
                let mut out: CMatrix = Array2::zeros(x.raw_dim());
                for u in us {
                    out = out + u.dot(x).dot(&linalg::dagger(u));
                }
                out.mapv(|z| z / us.len() as f64)
            }
            None => {
                let d = x.nrows();
                linalg::identity(d).mapv(|z| z * linalg::trace(x) / d as f64)
            }
        }
    }
}

/// Builds the channel with one trace-preserving branch per term.
pub fn dse_channel(h: &FrustrationFreeHamiltonian, corr: &CorrectionSet) -> Result<DseChannel> {
    if corr.corrections.len() != h.n_terms() {
        return Err(Error::mismatch(format!("{} corrections for {} terms", corr.corrections.len(), h.n_terms())));
    }
    let system = h.system().clone();
    let mut branches = Vec::new();
    let mut local_unitaries = Vec::with_capacity(h.n_terms());
    for ((term, &p), kind) in h.terms().iter().zip(&corr.probabilities).zip(&corr.corrections) {
        let support = term.support().to_vec();
        let k = term.matrix().nrows();
        let hm = term.matrix();
        let pm = linalg::identity(k) - hm;
        let p_op = LocalOperator::on(&system, pm, support.clone())?;
        match kind {
            Correction::Unitaries(us) => {
                let mut locals = Vec::with_capacity(us.len());
                let mut ops = vec![p_op];
                let weight = c(1.0 / (us.len() as f64).sqrt(), 0.0);
                for u in us {
                    if !u.support().iter().all(|s| support.contains(s)) {
                        return Err(Error::mismatch(format!(
                            "correction on sites {:?} leaves the term support {:?}",
                            u.support(),
                            support
                        )));
                    }
                    let ul = u.extend_to(&system, &support)?.matrix().clone();
                    ops.push(LocalOperator::on(&system, ul.dot(hm).mapv(|z| z * weight), support.clone())?);
                    locals.push(ul);
                }
                branches.push((p, ops));
                local_unitaries.push(Some(locals));
            }
            Correction::Depolarizing => {
                let mut ops = vec![p_op];
                let scale = c(1.0 / (k as f64).sqrt(), 0.0);
                for a in 0..k {
                    for b in 0..k {
                        // |a⟩⟨b| H keeps only row b of H.
                        let mut m: CMatrix = Array2::zeros((k, k));
                        m.row_mut(a).assign(&hm.row(b).mapv(|z| z * scale));
                        if linalg::max_abs(&m) > 0.0 {
                            ops.push(LocalOperator::on(&system, m, support.clone())?);
                        }
                    }
                }
                branches.push((p, ops));
                local_unitaries.push(None);
            }
        }
    }
    let channel = CpMapChannel::new(system, branches)?;
    Ok(DseChannel { hamiltonian: h.clone(), corrections: corr.clone(), local_unitaries, channel })
}

/// One iteration of [`run_to_convergence`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub energy: f64,
    pub ground_overlap: f64,
    /// Trace distance to the previous step; zero for the initial record.
    pub change: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTrace {
    pub records: Vec<StepRecord>,
    /// First step with energy at or below the threshold.
    pub converged_at: Option<usize>,
    pub final_state: DensityMatrix,
}

impl ConvergenceTrace {
    pub fn converged(&self) -> bool {
        self.converged_at.is_some()
    }

    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("initial record always present")
    }

    /// Largest decrease of the ground overlap between consecutive steps.
    pub fn worst_overlap_drop(&self) -> f64 {
        self.records.windows(2).map(|w| w[0].ground_overlap - w[1].ground_overlap).fold(0.0, f64::max)
    }
}

/// Iterates `ch` until `tr[Hρ] ≤ tol` or `max_steps` applications.
pub fn run_to_convergence(
    ch: &CpMapChannel,
    h: &FrustrationFreeHamiltonian,
    rho0: &DensityMatrix,
    tol: f64,
    max_steps: usize,
) -> Result<ConvergenceTrace> {
    run_with_projector(ch, h, &h.ground_space()?.projector(), rho0, tol, max_steps, true)
}

/// Fixed-length iteration that does not stop at the threshold.
pub fn run_for(
    ch: &CpMapChannel,
    h: &FrustrationFreeHamiltonian,
    rho0: &DensityMatrix,
    steps: usize,
) -> Result<ConvergenceTrace> {
    run_with_projector(ch, h, &h.ground_space()?.projector(), rho0, DEFAULT_ENERGY_TOL, steps, false)
}

pub(crate) fn run_with_projector(
    ch: &CpMapChannel,
    h: &FrustrationFreeHamiltonian,
    ground: &CMatrix,
    rho0: &DensityMatrix,
    tol: f64,
    max_steps: usize,
    stop: bool,
) -> Result<ConvergenceTrace> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if ch.system() != h.system() || rho0.system() != h.system() {
        return Err(Error::mismatch("channel, Hamiltonian and state must share a register"));
    }
    let record = |step: usize, rho: &DensityMatrix, change: f64| -> Result<StepRecord> {
        Ok(StepRecord { step, energy: h.energy(rho)?, ground_overlap: rho.expectation(ground).re, change })
    };
    let mut rho = rho0.clone();
    let mut records = vec![record(0, &rho, 0.0)?];
    let mut converged_at = (records[0].energy <= tol).then_some(0);
    for step in 1..=max_steps {
        if stop && converged_at.is_some() {
            break;
        }
        let next = ch.apply(&rho)?;
        let change = trace_distance(&next, &rho)?;
        rho = next;
        let r = record(step, &rho, change)?;
        if converged_at.is_none() && r.energy <= tol {
            converged_at = Some(step);
        }
        records.push(r);
    }
    Ok(ConvergenceTrace { records, converged_at, final_state: rho })
}

const Q_TRAJECTORY_STEPS: usize = 8;

/// Largest observed probability of a second negative outcome on the same term right
/// after its correction. Zero without sampling when every correction satisfies `HUH = 0`.
pub fn estimate_q(dse: &DseChannel, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("estimate_q needs at least one sample"));
    }
    let h = dse.hamiltonian();
    let certified = h.terms().iter().zip(&dse.local_unitaries).all(|(t, us)| match us {
        Some(us) => us.iter().all(|u| linalg::max_abs(&t.matrix().dot(u).dot(t.matrix())) <= CORRECTION_TOL),
        None => false,
    });
    if certified {
        return Ok(0.0);
    }
    let layouts = h.terms().iter().map(|t| SiteLayout::new(h.system(), t.support())).collect::<Result<Vec<_>>>()?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut q: f64 = 0.0;
    for _ in 0..samples {
        let mut rho = random::pure_state(h.system(), &mut rng);
        for _ in 0..Q_TRAJECTORY_STEPS {
            for (k, (t, layout)) in h.terms().iter().zip(&layouts).enumerate() {
                let hm = t.matrix();
                let local = layout.trace_rest(rho.matrix());
                let excited = hm.dot(&local).dot(hm);
                let p_neg = linalg::trace(&excited).re;
                if p_neg <= 1e-12 {
                    continue;
                }
                let corrected = dse.correct_locally(k, &excited);
                let again = linalg::trace(&hm.dot(&corrected)).re / p_neg;
                q = q.max(again);
            }
            rho = dse.channel().apply_sampled(&rho, &mut rng)?;
        }
    }
    Ok(q.clamp(0.0, 1.0))
}

/// `(1 - S)/2` for a Hermitian Pauli string `S` read on `support`.
pub fn stabilizer_projector(system: &SiteSystem, s: &PauliString, support: Vec<usize>) -> Result<LocalOperator> {
    if s.len() != support.len() {
        return Err(Error::mismatch(format!("Pauli string of length {} on {} sites", s.len(), support.len())));
    }
    let ph = s.phase();
    if ph.im != 0.0 {
        return Err(Error::invalid(format!("{s} is not Hermitian")));
    }
    let k = 1usize << s.len();
    let m = (linalg::identity(k) - s.matrix()).mapv(|z| z * 0.5);
    LocalOperator::on(system, m, support)
}

/// `(1 - S)/2` for a register-wide Pauli string, kept on the sites where `S` is not the identity.
pub fn stabilizer_term(system: &SiteSystem, s: &PauliString) -> Result<LocalOperator> {
    if s.len() != system.n_sites() {
        return Err(Error::mismatch(format!("Pauli string of length {} on {} sites", s.len(), system.n_sites())));
    }
    let support = s.support();
    stabilizer_projector(system, &restrict(s, &support), support)
}

fn term_pauli(term: &LocalOperator) -> Result<PauliString> {
    let k = term.matrix().nrows();
    if term.op().system().dims().iter().any(|&d| d != 2) {
        return Err(Error::invalid("stabilizer terms act on qubits"));
    }
    let s = linalg::identity(k) - term.matrix().mapv(|z| z * 2.0);
    let p = PauliString::from_matrix(&s, 1e-10)
        .ok_or_else(|| Error::invalid("term is not of the form (1 - S)/2 for a Pauli string S"))?;
    if p.is_identity() {
        return Err(Error::invalid("the identity string has no anticommuting partner"));
    }
    Ok(p)
}

fn anticommuting_partner(p: Pauli) -> Option<Pauli> {
    match p {
        Pauli::X | Pauli::Y => Some(Pauli::Z),
        Pauli::Z => Some(Pauli::X),
        Pauli::I => None,
    }
}

fn single_qubit(term: &LocalOperator, site: usize, p: Pauli) -> Result<LocalOperator> {
    let u = LocalOperator::new(Operator::on_qubits(p.matrix())?, vec![term.support()[site]])?;
    let sub = term.op().system();
    let inner = LocalOperator::new(u.op().clone(), vec![site])?;
    let ul = tensor_embed(&inner, sub)?;
    let hm = term.matrix();
    let defect = linalg::max_abs(&hm.dot(ul.matrix()).dot(hm));
    if defect > CORRECTION_TOL {
        return Err(Error::numerical(format!("correction leaves |HUH| = {defect:.3e}")));
    }
    Ok(u)
}

/// A single-qubit Pauli `U` on the term's support with `H U H = 0`.
///
/// Sites carrying `X` are preferred, then `Y`, then `Z`.
pub fn stabilizer_correction(term: &LocalOperator) -> Result<LocalOperator> {
    let s = term_pauli(term)?;
    let f = s.factors();
    let site = [Pauli::X, Pauli::Y, Pauli::Z]
        .iter()
        .find_map(|want| f.iter().position(|p| p == want))
        .expect("non-identity string");
    single_qubit(term, site, anticommuting_partner(f[site]).expect("non-identity factor"))
}

/// One anticommuting single-qubit Pauli for every site in the string's support.
pub fn stabilizer_corrections_all(term: &LocalOperator) -> Result<Vec<LocalOperator>> {
    let s = term_pauli(term)?;
    s.support()
        .into_iter()
        .map(|site| single_qubit(term, site, anticommuting_partner(s.factors()[site]).expect("in support")))
        .collect()
}

/// Undirected simple graph on `0..n_vertices`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphSpec {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl GraphSpec {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::invalid("a graph needs at least one vertex"));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::SiteOutOfRange { site: a.max(b), n_sites: n_vertices });
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop on vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if norm.contains(&e) {
                return Err(Error::invalid(format!("duplicate edge {e:?}")));
            }
            norm.push(e);
        }
        norm.sort_unstable();
        Ok(GraphSpec { n_vertices, edges: norm })
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|k| (k - 1, k)).collect())
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let mut edges: Vec<_> = (1..n).map(|k| (k - 1, k)).collect();
        if n >= 3 {
            edges.push((n - 1, 0));
        }
        Self::new(n, edges)
    }

    /// Every labelled graph on `n` vertices.
    pub fn all_graphs(n: usize) -> Result<Vec<Self>> {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        (0..1u64 << pairs.len())
            .map(|mask| {
                let edges = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &e)| e).collect();
                Self::new(n, edges)
            })
            .collect()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.edges.iter().filter_map(|&(a, b)| (a == v).then_some(b).or((b == v).then_some(a))).collect();
        out.sort_unstable();
        out
    }

    /// `X_v Π_{μ ~ v} Z_μ` on the whole register.
    pub fn stabilizer(&self, v: usize) -> PauliString {
        let mut f = vec![Pauli::I; self.n_vertices];
        f[v] = Pauli::X;
        for u in self.neighbors(v) {
            f[u] = Pauli::Z;
        }
        PauliString::new(f)
    }
}

fn restrict(s: &PauliString, sites: &[usize]) -> PauliString {
    PauliString::new(sites.iter().map(|&k| s.factors()[k]).collect())
}

/// One term `(1 - X_v Π Z_μ)/2` per vertex.
pub fn graph_hamiltonian(g: &GraphSpec) -> Result<FrustrationFreeHamiltonian> {
    let system = SiteSystem::qubits(g.n_vertices())?;
    let terms = (0..g.n_vertices())
        .map(|v| {
            let mut support = g.neighbors(v);
            support.push(v);
            support.sort_unstable();
            stabilizer_projector(&system, &restrict(&g.stabilizer(v), &support), support)
        })
        .collect::<Result<Vec<_>>>()?;
    FrustrationFreeHamiltonian::new(system, terms)
}

/// `Π_{(a,b)} CZ_{ab} |+⟩^{⊗n}`.
pub fn graph_state(g: &GraphSpec) -> CVector {
    let n = g.n_vertices();
    let amp = (0.5f64).powf(n as f64 / 2.0);
    Array1::from_shape_fn(1 << n, |x| {
        let bit = |v: usize| x >> (n - 1 - v) & 1;
        let parity: usize = g.edges().iter().map(|&(a, b)| bit(a) * bit(b)).sum();
        c(if parity.is_multiple_of(2) { amp } else { -amp }, 0.0)
    })
}

/// `σ_z` on each vertex.
pub fn graph_corrections(g: &GraphSpec) -> Result<CorrectionSet> {
    let system = SiteSystem::qubits(g.n_vertices())?;
    let corr = (0..g.n_vertices())
        .map(|v| Ok(Correction::Unitaries(vec![LocalOperator::on(&system, gates::pauli_z(), vec![v])?])))
        .collect::<Result<Vec<_>>>()?;
    CorrectionSet::uniform(corr)
}

/// Continuous-time version with jumps `σ_z^{(v)} H_v` and no Hamiltonian part.
pub fn graph_liouvillian(g: &GraphSpec) -> Result<LindbladModel> {
    let h = graph_hamiltonian(g)?;
    let system = h.system().clone();
    let jumps = h
        .terms()
        .iter()
        .enumerate()
        .map(|(v, t)| {
            let z = LocalOperator::on(&system, gates::pauli_z(), vec![v])?;
            let zl = z.extend_to(&system, t.support())?;
            let l = LocalOperator::on(&system, zl.matrix().dot(t.matrix()), t.support().to_vec())?;
            tensor_embed(&l, &system)
        })
        .collect::<Result<Vec<_>>>()?;
    LindbladModel::new(system, None, jumps)
}

/// Star and plaquette operators of the `lx × ly` torus, stars first.
///
/// Horizontal edge `(x, y)` is qubit `2(y·lx + x)`, the vertical one is the next qubit.
pub fn toric_stabilizers(lx: usize, ly: usize) -> Result<Vec<PauliString>> {
    if lx < 2 || ly < 2 {
        return Err(Error::invalid(format!("toric code needs lx, ly >= 2, got {lx}x{ly}")));
    }
    let n = 2 * lx * ly;
    let h = |x: usize, y: usize| 2 * ((y % ly) * lx + (x % lx));
    let v = |x: usize, y: usize| h(x, y) + 1;
    let mut out = Vec::with_capacity(2 * lx * ly);
    for y in 0..ly {
        for x in 0..lx {
            let star = [h(x, y), h(x + lx - 1, y), v(x, y), v(x, y + ly - 1)];
            out.push(PauliString::on_sites(n, &star, Pauli::X)?);
        }
    }
    for y in 0..ly {
        for x in 0..lx {
            let plaq = [h(x, y), h(x, y + 1), v(x, y), v(x + 1, y)];
            out.push(PauliString::on_sites(n, &plaq, Pauli::Z)?);
        }
    }
    Ok(out)
}

pub fn toric_code(lx: usize, ly: usize) -> Result<FrustrationFreeHamiltonian> {
    let stabs = toric_stabilizers(lx, ly)?;
    let n = 2 * lx * ly;
    if n > TORIC_QUBIT_BUDGET {
        return Err(Error::BudgetExceeded {
            what: format!("{lx}x{ly} toric code qubits"),
            required: n,
            budget: TORIC_QUBIT_BUDGET,
        });
    }
    let system = SiteSystem::qubits(n)?;
    let terms = stabs.iter().map(|s| stabilizer_term(&system, s)).collect::<Result<Vec<_>>>()?;
    FrustrationFreeHamiltonian::new(system, terms)
}

/// Replaces each group of terms by the projector onto the range of their sum.
///
/// The zero-energy space is unchanged; the grouped term acts on the union of supports.
pub fn regroup(h: &FrustrationFreeHamiltonian, groups: &[Vec<usize>]) -> Result<FrustrationFreeHamiltonian> {
    let mut used = vec![false; h.n_terms()];
    let mut terms = Vec::new();
    for group in groups {
        let mut support = Vec::new();
        for &k in group {
            let t = h.terms().get(k).ok_or_else(|| Error::invalid(format!("no term {k}")))?;
            if std::mem::replace(&mut used[k], true) {
                return Err(Error::invalid(format!("term {k} appears in two groups")));
            }
            support.extend_from_slice(t.support());
        }
        support.sort_unstable();
        support.dedup();
        let dim: usize = support.iter().map(|&s| h.system().local_dim(s)).product();
        let mut sum: CMatrix = Array2::zeros((dim, dim));
        for &k in group {
            sum += h.terms()[k].extend_to(h.system(), &support)?.matrix();
        }
        let range = linalg::range_basis(&sum, 1e-10)?;
        terms.push(LocalOperator::on(h.system(), linalg::projector_from_columns(&range), support)?);
    }
    for (k, t) in h.terms().iter().enumerate() {
        if !used[k] {
            terms.push(t.clone());
        }
    }
    FrustrationFreeHamiltonian::new(h.system().clone(), terms)
}

/// Steps to threshold for cluster chains and the fitted exponent of steps against `N ln N`.
#[derive(Clone, Debug)]
pub struct ScalingProbe {
    pub sizes: Vec<usize>,
    pub steps: Vec<usize>,
    pub exponent: f64,
}

/// Runs the graph channel on 1D cluster chains from the maximally mixed state.
pub fn cluster_scaling_probe(sizes: &[usize], tol: f64, max_steps: usize) -> Result<ScalingProbe> {
    if sizes.len() < 2 || sizes.iter().any(|&n| n < 2) {
        return Err(Error::invalid("the probe needs at least two chain lengths of 2 or more"));
    }
    let mut steps = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let g = GraphSpec::path(n)?;
        let h = graph_hamiltonian(&g)?;
        let ch = dse_channel(&h, &graph_corrections(&g)?)?;
        let rho0 = DensityMatrix::maximally_mixed(h.system());
        let trace = run_to_convergence(ch.channel(), &h, &rho0, tol, max_steps)?;
        let k = trace.converged_at.ok_or_else(|| Error::numerical(format!("N = {n} did not reach {tol}")))?;
        steps.push(k);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64 * (n as f64).ln()).ln()).collect();
    let ys: Vec<f64> = steps.iter().map(|&k| (k.max(1) as f64).ln()).collect();
    Ok(ScalingProbe { sizes: sizes.to_vec(), steps, exponent: linalg::linear_fit(&xs, &ys).0 })
}
