//! Dissipative quantum computation: a circuit becomes a Lindblad model whose steady state
//! holds the whole computation history, tagged by a clock register.
//!
//! Layout: logical qubits come first, the clock last. The direct encoding uses one clock site of
//! dimension `T+1`. The unary encoding uses `T+1` clock qubits and represents time `t` by `t+1`
//! leading ones (`|10…0⟩` is `t = 0`, `|11…1⟩` is `t = T`), so every clock pattern in the valid
//! subspace has its first clock qubit set.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64};
use crate::liouville::{multiset_distance, LindbladModel, SpectrumReport, Superoperator};
use crate::quantum::{gates, tensor_embed, DensityMatrix, LocalOperator, SiteSystem};
use crate::random;

pub const UNITARITY_TOL: f64 = 1e-10;

/// Strength of the qubit-reset jumps; with 2 the generator reproduces the analytic block form.
pub const DEFAULT_RESET_RATE: f64 = 2.0;

/// Largest total dimension accepted by [`compile_unary`] by default.
pub const DEFAULT_UNARY_BUDGET: usize = 256;

#[derive(Clone, Debug)]
pub struct Gate {
    support: Vec<usize>,
    unitary: CMatrix,
    label: String,
}

impl Gate {
    pub fn new(label: impl Into<String>, support: Vec<usize>, unitary: CMatrix) -> Result<Self> {
        let arity = support.len();
        if !(1..=2).contains(&arity) {
            return Err(Error::invalid(format!("gates act on 1 or 2 qubits, got {arity}")));
        }
        if arity == 2 && support[0] == support[1] {
            return Err(Error::DuplicateSite(support[0]));
        }
        let dim = 1 << arity;
        if unitary.dim() != (dim, dim) {
            return Err(Error::mismatch(format!(
                "a {arity}-qubit gate needs a {dim}x{dim} matrix, got {:?}",
                unitary.dim()
            )));
        }
        let defect = linalg::unitarity_defect(&unitary);
        if defect > UNITARITY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Gate { support, unitary, label: label.into() })
    }

    /// Named gates: `I`, `X`, `Y`, `Z`, `H`, `CNOT`, `CZ`, `RZ` (needs an angle).
    pub fn named(name: &str, support: Vec<usize>, angle: Option<f64>) -> Result<Self> {
        let upper = name.to_ascii_uppercase();
        let matrix = match (upper.as_str(), angle) {
            ("X", None) => gates::pauli_x(),
            ("Y", None) => gates::pauli_y(),
            ("Z", None) => gates::pauli_z(),
            ("H", None) => gates::hadamard(),
            ("I", None) => linalg::identity(1 << support.len().clamp(1, 2)),
            ("CNOT", None) => gates::cnot(),
            ("CZ", None) => gates::cz(),
            ("RZ", Some(theta)) => gates::rz(theta),
            ("RZ", None) => return Err(Error::invalid("RZ needs an angle")),
            (_, Some(_)) => return Err(Error::invalid(format!("gate {name} takes no angle"))),
            _ => return Err(Error::invalid(format!("unknown gate {name}"))),
        };
        let label = match angle {
            Some(theta) => format!("{upper}({theta})"),
            None => upper,
        };
        Self::new(label, support, matrix)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// An ordered gate sequence on `n_qubits` qubits, all starting in `|0⟩`.
#[derive(Clone, Debug)]
pub struct QuantumCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl QuantumCircuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("a circuit needs at least one qubit"));
        }
        if gates.is_empty() {
            return Err(Error::invalid("a circuit needs at least one gate"));
        }
        for g in &gates {
            if let Some(&s) = g.support.iter().find(|&&s| s >= n_qubits) {
                return Err(Error::SiteOutOfRange { site: s, n_sites: n_qubits });
            }
        }
        Ok(QuantumCircuit { n_qubits, gates })
    }

    /// Haar-random gates. Two-qubit gates on random pairs when `n_qubits ≥ 2`.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, steps: usize, rng: &mut R) -> Result<Self> {
        let mut gates = Vec::with_capacity(steps);
        for _ in 0..steps {
            let support = if n_qubits >= 2 {
                let a = rng.random_range(0..n_qubits);
                let mut b = rng.random_range(0..n_qubits - 1);
                if b >= a {
                    b += 1;
                }
                vec![a, b]
            } else {
                vec![0]
            };
            let u = random::haar_unitary(1 << support.len(), rng);
            gates.push(Gate::new("haar", support, u)?);
        }
        Self::new(n_qubits, gates)
    }

    /// Same supports, every gate replaced by the identity.
    pub fn identity_like(&self) -> QuantumCircuit {
        let gates = self
            .gates
            .iter()
            .map(|g| Gate {
                support: g.support.clone(),
                unitary: linalg::identity(g.unitary.nrows()),
                label: "I".into(),
            })
            .collect();
        QuantumCircuit { n_qubits: self.n_qubits, gates }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of gates `T`.
    pub fn steps(&self) -> usize {
        self.gates.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn logical_system(&self) -> SiteSystem {
        SiteSystem::qubits(self.n_qubits).expect("n_qubits >= 1")
    }

    fn embedded(&self, gate: &Gate) -> CMatrix {
        let sys = self.logical_system();
        let local = LocalOperator::on(&sys, gate.unitary.clone(), gate.support.clone()).expect("validated gate");
        tensor_embed(&local, &sys).expect("validated gate").into_matrix()
    }

    /// `ψ_0, …, ψ_T` by state-vector simulation.
    pub fn history(&self) -> Vec<CVector> {
        let dim = 1usize << self.n_qubits;
        let mut psi = gates::ket(dim, 0);
        let mut out = vec![psi.clone()];
        for g in &self.gates {
            psi = self.embedded(g).dot(&psi);
            out.push(psi.clone());
        }
        out
    }

    pub fn final_state(&self) -> CVector {
        self.history().pop().expect("non-empty history")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockEncoding {
    Direct,
    Unary,
}

/// A compiled circuit together with the register layout of its clock.
#[derive(Clone, Debug)]
pub struct CompiledDQC {
    model: LindbladModel,
    encoding: ClockEncoding,
    n_qubits: usize,
    steps: usize,
    clock_sites: Vec<usize>,
}

impl CompiledDQC {
    pub fn model(&self) -> &LindbladModel {
        &self.model
    }

    pub fn encoding(&self) -> ClockEncoding {
        self.encoding
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Register sites forming the clock.
    pub fn clock_sites(&self) -> &[usize] {
        &self.clock_sites
    }

    pub fn system(&self) -> &SiteSystem {
        self.model.system()
    }

    pub fn generator(&self) -> Result<Superoperator> {
        self.model.generator()
    }

    /// Basis index of the clock value `t` within the clock factor.
    pub fn clock_index(&self, t: usize) -> usize {
        match self.encoding {
            ClockEncoding::Direct => t,
            ClockEncoding::Unary => {
                let n = self.steps + 1;
                // t+1 leading ones, most significant clock qubit first.
                ((1usize << (t + 1)) - 1) << (n - t - 1)
            }
        }
    }

    fn clock_dim(&self) -> usize {
        match self.encoding {
            ClockEncoding::Direct => self.steps + 1,
            ClockEncoding::Unary => 1 << (self.steps + 1),
        }
    }

    /// Global basis indices of the valid subspace, ordered as (logical, t) with t fastest.
    pub fn valid_indices(&self) -> Vec<usize> {
        let cd = self.clock_dim();
        let mut out = Vec::new();
        for l in 0..(1usize << self.n_qubits) {
            for t in 0..=self.steps {
                out.push(l * cd + self.clock_index(t));
            }
        }
        out
    }

    /// Restriction of a state to the valid subspace, in the direct-encoding layout, with the
    /// weight that was found there.
    pub fn to_direct_layout(&self, rho: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
        if rho.system() != self.system() {
            return Err(Error::mismatch("state does not live on the compiled register"));
        }
        let idx = self.valid_indices();
        let block = linalg::submatrix(rho.matrix(), &idx, &idx);
        let weight = linalg::trace(&block).re;
        if weight < 1e-12 {
            return Err(Error::numerical("state has no weight on the valid clock subspace"));
        }
        let sys = direct_system(self.n_qubits, self.steps)?;
        Ok((DensityMatrix::trusted(block.mapv(|z| z / weight), sys), weight))
    }

    /// Eigenvalues of the generator restricted to operators with at least one index outside
    /// the valid subspace.
    pub fn wrong_subspace_eigenvalues(&self) -> Result<Vec<C64>> {
        let n = self.system().total_dim();
        let valid = self.valid_indices();
        let mut is_valid = vec![false; n];
        valid.iter().for_each(|&i| is_valid[i] = true);
        let wrong: Vec<usize> = (0..n * n).filter(|&k| !(is_valid[k % n] && is_valid[k / n])).collect();
        let s = self.generator()?;
        let m = linalg::submatrix(s.matrix(), &wrong, &wrong);
        let mut out = Vec::with_capacity(wrong.len());
        for block in linalg::block_partition(m.view(), 1e-15) {
            if block.len() == 1 {
                out.push(m[[block[0], block[0]]]);
            } else {
                out.extend(linalg::eigvals(&linalg::submatrix(&m, &block, &block))?);
            }
        }
        Ok(out)
    }
}

fn direct_system(n_qubits: usize, steps: usize) -> Result<SiteSystem> {
    let mut dims = vec![2; n_qubits];
    dims.push(steps + 1);
    SiteSystem::new(dims)
}

/// Direct clock encoding with the default reset strength.
pub fn compile_direct(circuit: &QuantumCircuit) -> Result<CompiledDQC> {
    compile_direct_with_rate(circuit, DEFAULT_RESET_RATE)
}

/// Jumps: `√γ |0⟩_i⟨1| ⊗ |0⟩⟨0|_clock` per qubit, and for `t = 1..T`
/// `U_t ⊗ |t⟩⟨t-1| + U_t† ⊗ |t-1⟩⟨t|`.
pub fn compile_direct_with_rate(circuit: &QuantumCircuit, reset_rate: f64) -> Result<CompiledDQC> {
    check_rate(reset_rate)?;
    let n = circuit.n_qubits;
    let steps = circuit.steps();
    let system = direct_system(n, steps)?;
    let clock = n;
    let mut jumps = Vec::with_capacity(n + steps);
    let reset = gates::sigma_minus().mapv(|z| z * reset_rate.sqrt());
    let at_start = gates::unit(steps + 1, 0, 0);
    for i in 0..n {
        let local = LocalOperator::on(&system, linalg::kron(&reset, &at_start), vec![i, clock])?;
        jumps.push(tensor_embed(&local, &system)?);
    }
    for (k, g) in circuit.gates.iter().enumerate() {
        let t = k + 1;
        let forward = gates::unit(steps + 1, t, t - 1);
        let m = linalg::kron(&g.unitary, &forward)
            + linalg::kron(&linalg::dagger(&g.unitary), &linalg::transpose(&forward));
        let mut support = g.support.clone();
        support.push(clock);
        jumps.push(tensor_embed(&LocalOperator::on(&system, m, support)?, &system)?);
    }
    Ok(CompiledDQC {
        model: LindbladModel::new(system, None, jumps)?,
        encoding: ClockEncoding::Direct,
        n_qubits: n,
        steps,
        clock_sites: vec![clock],
    })
}

pub fn compile_unary(circuit: &QuantumCircuit) -> Result<CompiledDQC> {
    compile_unary_with(circuit, DEFAULT_RESET_RATE, DEFAULT_UNARY_BUDGET)
}

/// Unary clock encoding. Every jump touches at most one gate support and three clock qubits:
/// - qubit reset `√γ σ₋ ⊗ |0⟩⟨0|` on clock qubit 1 (the clock reads `t = 0`),
/// - clock step `U_t ⊗ |1⟩⟨1|_{t-1} |1⟩⟨0|_t |0⟩⟨0|_{t+1}` plus its reverse with `U_t†`,
/// - relaxation `|0⟩⟨0|_{j-1} |0⟩⟨1|_j` of stray ones, and `|1⟩⟨0|` on clock qubit 0.
pub fn compile_unary_with(circuit: &QuantumCircuit, reset_rate: f64, budget: usize) -> Result<CompiledDQC> {
    check_rate(reset_rate)?;
    let n = circuit.n_qubits;
    let steps = circuit.steps();
    let clock_qubits = steps + 1;
    let required = 1usize
        .checked_shl((n + clock_qubits) as u32)
        .filter(|&d| d > 0 && n + clock_qubits < usize::BITS as usize)
        .unwrap_or(usize::MAX);
    if required > budget {
        return Err(Error::BudgetExceeded { what: "unary clock register".into(), required, budget });
    }
    let system = SiteSystem::qubits(n + clock_qubits)?;
    let clock = |j: usize| n + j;
    let p0 = gates::unit(2, 0, 0);
    let p1 = gates::unit(2, 1, 1);
    let raise = gates::sigma_plus();
    let lower = gates::sigma_minus();
    let mut jumps = Vec::new();

    let reset = gates::sigma_minus().mapv(|z| z * reset_rate.sqrt());
    for i in 0..n {
        let local = LocalOperator::on(&system, linalg::kron(&reset, &p0), vec![i, clock(1)])?;
        jumps.push(tensor_embed(&local, &system)?);
    }
    for (k, g) in circuit.gates.iter().enumerate() {
        let t = k + 1;
        let mut support = g.support.clone();
        support.push(clock(t - 1));
        support.push(clock(t));
        let mut fwd = linalg::kron(&p1, &raise);
        let mut bwd = linalg::kron(&p1, &lower);
        if t + 1 < clock_qubits {
            support.push(clock(t + 1));
            fwd = linalg::kron(&fwd, &p0);
            bwd = linalg::kron(&bwd, &p0);
        }
        let m = linalg::kron(&g.unitary, &fwd) + linalg::kron(&linalg::dagger(&g.unitary), &bwd);
        jumps.push(tensor_embed(&LocalOperator::on(&system, m, support)?, &system)?);
    }
    for j in 1..clock_qubits {
        let local = LocalOperator::on(&system, linalg::kron(&p0, &lower), vec![clock(j - 1), clock(j)])?;
        jumps.push(tensor_embed(&local, &system)?);
    }
    jumps.push(tensor_embed(&LocalOperator::on(&system, raise, vec![clock(0)])?, &system)?);

    Ok(CompiledDQC {
        model: LindbladModel::new(system, None, jumps)?,
        encoding: ClockEncoding::Unary,
        n_qubits: n,
        steps,
        clock_sites: (0..clock_qubits).map(clock).collect(),
    })
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::invalid(format!("reset rate must be positive, got {rate}")));
    }
    Ok(())
}

/// `(1/(T+1)) Σ_t |ψ_t⟩⟨ψ_t| ⊗ |t⟩⟨t|` in the direct layout.
pub fn expected_fixed_point(circuit: &QuantumCircuit) -> DensityMatrix {
    let steps = circuit.steps();
    let sys = direct_system(circuit.n_qubits, steps).expect("valid circuit");
    let weight = 1.0 / (steps + 1) as f64;
    let mut m: CMatrix = Array2::zeros((sys.total_dim(), sys.total_dim()));
    for (t, psi) in circuit.history().iter().enumerate() {
        let clock = gates::unit(steps + 1, t, t);
        m = m + linalg::kron(&linalg::outer(psi, psi), &clock).mapv(|z| z * weight);
    }
    DensityMatrix::trusted(m, sys)
}

#[derive(Clone, Debug)]
pub struct Readout {
    /// Probability of finding the clock at `t = T`.
    pub p_final: f64,
    /// Logical state conditioned on that outcome.
    pub final_state: DensityMatrix,
}

/// Measures the clock of a direct-layout state and keeps the `t = T` branch.
pub fn readout(rho: &DensityMatrix, circuit: &QuantumCircuit) -> Result<Readout> {
    let steps = circuit.steps();
    let sys = direct_system(circuit.n_qubits, steps)?;
    if rho.system() != &sys {
        return Err(Error::mismatch(format!(
            "state on {:?}, circuit register is {:?}",
            rho.system().dims(),
            sys.dims()
        )));
    }
    let cd = steps + 1;
    let ld = 1usize << circuit.n_qubits;
    let idx: Vec<usize> = (0..ld).map(|l| l * cd + steps).collect();
    let block = linalg::submatrix(rho.matrix(), &idx, &idx);
    let p_final = linalg::trace(&block).re;
    if p_final < 1e-12 {
        return Err(Error::numerical(format!("final clock value has probability {p_final:.3e}")));
    }
    Ok(Readout { p_final, final_state: DensityMatrix::trusted(block.mapv(|z| z / p_final), circuit.logical_system()) })
}

/// Labels of one family of invariant blocks: Hamming weights of the two logical bit strings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockSpec {
    pub lambda_i: usize,
    pub lambda_j: usize,
    pub steps: usize,
    pub reset_rate: f64,
}

impl BlockSpec {
    pub fn new(n_qubits: usize, lambda_i: usize, lambda_j: usize, steps: usize) -> Result<Self> {
        if lambda_i > n_qubits || lambda_j > n_qubits {
            return Err(Error::invalid(format!("Hamming weights ({lambda_i}, {lambda_j}) exceed {n_qubits} qubits")));
        }
        if steps == 0 {
            return Err(Error::invalid("need at least one step"));
        }
        Ok(BlockSpec { lambda_i, lambda_j, steps, reset_rate: DEFAULT_RESET_RATE })
    }

    pub fn with_reset_rate(mut self, rate: f64) -> Self {
        self.reset_rate = rate;
        self
    }

    fn reset_shift(&self, lambda: usize) -> f64 {
        0.5 * self.reset_rate * lambda as f64
    }

    /// The `(T+1)`-dimensional tridiagonal member of the family.
    pub fn tridiagonal(&self) -> Array2<f64> {
        let n = self.steps + 1;
        let mut m = Array2::zeros((n, n));
        for k in 0..n {
            m[[k, k]] = if k == 0 {
                -(1.0 + self.reset_shift(self.lambda_i) + self.reset_shift(self.lambda_j))
            } else if k == n - 1 {
                -1.0
            } else {
                -2.0
            };
            if k + 1 < n {
                m[[k, k + 1]] = 1.0;
                m[[k + 1, k]] = 1.0;
            }
        }
        m
    }
}

/// Eigenvalues of the tridiagonal block, ascending.
pub fn analytic_block_eigenvalues(spec: &BlockSpec) -> Vec<f64> {
    let m = spec.tridiagonal().mapv(|x| c(x, 0.0));
    let mut ev: Vec<f64> = linalg::eigvalsh(&m).expect("small symmetric eigensolve").to_vec();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// The one-dimensional blocks `-2`, `-1-λ_i`, `-1-λ_j` (reset shifts scale with the rate).
pub fn scalar_block_eigenvalues(spec: &BlockSpec) -> Vec<f64> {
    vec![-2.0, -1.0 - spec.reset_shift(spec.lambda_i), -1.0 - spec.reset_shift(spec.lambda_j)]
}

/// Eigenvalues of the two-dimensional blocks `[[-1-λ_i, 1], [1, -1-λ_j]]` and `[[-2, 1], [2, -2]]`.
pub fn pair_block_eigenvalues(spec: &BlockSpec) -> Vec<C64> {
    let a = -1.0 - spec.reset_shift(spec.lambda_i);
    let d = -1.0 - spec.reset_shift(spec.lambda_j);
    let mut out = two_by_two(a, 1.0, 1.0, d).to_vec();
    out.extend(two_by_two(-2.0, 1.0, 2.0, -2.0));
    out
}

fn two_by_two(a: f64, b: f64, cc: f64, d: f64) -> [C64; 2] {
    let mean = 0.5 * (a + d);
    let disc = C64::new(0.25 * (a - d) * (a - d) + b * cc, 0.0).sqrt();
    [C64::new(mean, 0.0) + disc, C64::new(mean, 0.0) - disc]
}

/// `2(1 - cos(π/(2T+3)))`.
pub fn closed_form_gap(steps: usize) -> f64 {
    2.0 * (1.0 - (std::f64::consts::PI / (2 * steps + 3) as f64).cos())
}

/// Second eigenvalue magnitude of the `(0,0)` block: `2(1 - cos(π/(T+1)))`.
pub fn zero_sector_gap(steps: usize) -> f64 {
    2.0 * (1.0 - (std::f64::consts::PI / (steps + 1) as f64).cos())
}

/// The quadratic approximation `π²/(2T+3)²` of [`closed_form_gap`].
pub fn quadratic_gap_estimate(steps: usize) -> f64 {
    let x = std::f64::consts::PI / (2 * steps + 3) as f64;
    x * x
}

/// True iff the generator's spectrum equals that of the identity-gate circuit of the same shape.
pub fn gauge_transform_check(circuit: &QuantumCircuit) -> Result<bool> {
    Ok(gauge_spectrum_distance(circuit)? <= 1e-8)
}

/// Matching distance between the spectra of the circuit and its identity-gate counterpart.
pub fn gauge_spectrum_distance(circuit: &QuantumCircuit) -> Result<f64> {
    let a = compile_direct(circuit)?.generator()?.eigenvalues()?;
    let b = compile_direct(&circuit.identity_like())?.generator()?.eigenvalues()?;
    Ok(multiset_distance(&a, &b))
}

/// Spectrum report of a compiled circuit, for convenience.
pub fn spectrum(compiled: &CompiledDQC) -> Result<SpectrumReport> {
    compiled.generator()?.spectrum()
}

/// A Bell-pair preparation circuit (`H` then `CNOT`).
pub fn bell_circuit() -> QuantumCircuit {
    QuantumCircuit::new(
        2,
        vec![
            Gate::named("H", vec![0], None).expect("named gate"),
            Gate::named("CNOT", vec![0, 1], None).expect("named gate"),
        ],
    )
    .expect("valid circuit")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{fidelity, pure_fidelity, trace_distance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(name: &str) -> QuantumCircuit {
        QuantumCircuit::new(1, vec![Gate::named(name, vec![0], None).unwrap()]).unwrap()
    }

    fn long_time_limit(compiled: &CompiledDQC, rho: &DensityMatrix) -> DensityMatrix {
        let gap = spectrum(compiled).unwrap().gap;
        compiled.generator().unwrap().evolve(rho, 60.0 / gap).unwrap()
    }

    #[test]
    fn gate_validation() {
        assert!(matches!(Gate::new("bad", vec![0], gates::sigma_minus()), Err(Error::NotUnitary(_))));
        assert!(Gate::named("RZ", vec![0], None).is_err());
        assert!(Gate::named("FOO", vec![0], None).is_err());
        assert!(Gate::named("CNOT", vec![1, 1], None).is_err());
        let g = Gate::named("CZ", vec![0, 3], None).unwrap();
        assert!(matches!(QuantumCircuit::new(2, vec![g]), Err(Error::SiteOutOfRange { site: 3, .. })));
        assert!(QuantumCircuit::new(1, vec![]).is_err());
    }

    #[test]
    fn x_circuit_fixed_point() {
        let circuit = single("X");
        let compiled = compile_direct(&circuit).unwrap();
        assert_eq!(compiled.model().jumps().len(), 2);
        let rho0 = expected_fixed_point(&circuit);
        let mut want: CMatrix = Array2::zeros((4, 4));
        want[[0, 0]] = c(0.5, 0.0);
        want[[3, 3]] = c(0.5, 0.0);
        assert!(linalg::max_abs_diff(rho0.matrix(), &want) < 1e-15);
        let s = compiled.generator().unwrap();
        assert!(linalg::max_abs(&s.apply(rho0.matrix())) < 1e-12);
        let limit = long_time_limit(&compiled, &DensityMatrix::maximally_mixed(compiled.system()));
        assert!(fidelity(&limit, &rho0).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn single_step_circuits_keep_the_history_state() {
        // With T = 1 the clock jump satisfies L†L = 1 and also fixes the history vector.
        let circuit = single("H");
        let compiled = compile_direct(&circuit).unwrap();
        assert_eq!(spectrum(&compiled).unwrap().steady_dim, 2);
        let hist = circuit.history();
        let mut eta = CVector::zeros(4);
        for (t, psi) in hist.iter().enumerate() {
            for l in 0..2 {
                eta[l * 2 + t] = psi[l];
            }
        }
        let eta = DensityMatrix::pure(compiled.system(), &eta).unwrap();
        assert!(linalg::max_abs(&compiled.generator().unwrap().apply(eta.matrix())) < 1e-12);
    }

    #[test]
    fn identity_circuit_fixed_point() {
        let circuit = single("I");
        let rho0 = expected_fixed_point(&circuit);
        let want = linalg::kron(&gates::unit(2, 0, 0), &linalg::identity(2).mapv(|z| z * 0.5));
        assert!(linalg::max_abs_diff(rho0.matrix(), &want) < 1e-15);
        let compiled = compile_direct(&circuit).unwrap();
        let limit = long_time_limit(&compiled, &DensityMatrix::maximally_mixed(compiled.system()));
        assert!(fidelity(&limit, &rho0).unwrap() > 1.0 - 1e-8);
        let r = readout(&rho0, &circuit).unwrap();
        assert!((r.p_final - 0.5).abs() < 1e-12);
        assert!((r.final_state.matrix()[[0, 0]].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_two_qubit_circuit_has_unique_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let circuit = QuantumCircuit::random(2, 2, &mut rng).unwrap();
        let compiled = compile_direct(&circuit).unwrap();
        let s = compiled.generator().unwrap();
        let ss = s.steady_states().unwrap();
        assert_eq!(ss.kernel_dim, 1);
        let rho0 = expected_fixed_point(&circuit);
        assert!(fidelity(&ss.states[0], &rho0).unwrap() >= 1.0 - 1e-8);
        assert!(linalg::max_abs(&s.apply(rho0.matrix())) <= 1e-10);
        let r = readout(&ss.states[0], &circuit).unwrap();
        assert!((r.p_final - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn bell_readout() {
        let circuit = bell_circuit();
        let r = readout(&expected_fixed_point(&circuit), &circuit).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = ndarray::array![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)];
        assert!(pure_fidelity(&r.final_state, &bell).unwrap() >= 1.0 - 1e-8);
        assert!((r.p_final - 1.0 / 3.0).abs() < 1e-12);
        let empty = DensityMatrix::basis_state(&direct_system(2, 2).unwrap(), 0).unwrap();
        assert!(matches!(readout(&empty, &circuit), Err(Error::Numerical(_))));
    }

    #[test]
    fn analytic_blocks() {
        for steps in 1..=6 {
            let zero = analytic_block_eigenvalues(&BlockSpec::new(1, 0, 0, steps).unwrap());
            let top = zero[zero.len() - 1];
            assert!(top.abs() < 1e-12);
            if steps >= 1 {
                let second = zero[zero.len() - 2];
                assert!((second + zero_sector_gap(steps)).abs() < 1e-12);
            }
            let one = analytic_block_eigenvalues(&BlockSpec::new(1, 1, 0, steps).unwrap());
            assert!((one[one.len() - 1] + closed_form_gap(steps)).abs() < 1e-12);
            assert!(closed_form_gap(steps) >= 0.95 * quadratic_gap_estimate(steps));
        }
        let pairs = pair_block_eigenvalues(&BlockSpec::new(1, 0, 0, 1).unwrap());
        let s2 = 2f64.sqrt();
        assert!((pairs[2] - c(-2.0 + s2, 0.0)).norm() < 1e-14);
        assert!((pairs[3] - c(-2.0 - s2, 0.0)).norm() < 1e-14);
        assert!(BlockSpec::new(1, 2, 0, 3).is_err());
    }

    #[test]
    fn gap_matches_closed_form_and_is_independent_of_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for steps in 1..=3 {
            let mut gaps = Vec::new();
            for n in 1..=2 {
                let circuit = QuantumCircuit::random(n, steps, &mut rng).unwrap();
                gaps.push(spectrum(&compile_direct(&circuit).unwrap()).unwrap().gap);
            }
            for g in &gaps {
                assert!((g - closed_form_gap(steps)).abs() < 1e-8, "T={steps}: {g}");
            }
        }
    }

    #[test]
    fn unit_reset_rate_follows_its_own_oracle() {
        let circuit = single("X");
        let gap = spectrum(&compile_direct_with_rate(&circuit, 1.0).unwrap()).unwrap().gap;
        let spec = BlockSpec::new(1, 1, 0, 1).unwrap().with_reset_rate(1.0);
        let top = *analytic_block_eigenvalues(&spec).last().unwrap();
        assert!((gap + top).abs() < 1e-10);
        assert!(compile_direct_with_rate(&circuit, 0.0).is_err());
    }

    #[test]
    fn analytic_blocks_are_in_the_spectrum() {
        for n in 1..=2 {
            for steps in 1..=2 {
                let mut gs = Vec::new();
                for k in 0..steps {
                    gs.push(Gate::named("I", vec![k % n], None).unwrap());
                }
                let circuit = QuantumCircuit::new(n, gs).unwrap();
                let ev = spectrum(&compile_direct(&circuit).unwrap()).unwrap().eigenvalues;
                let contains = |x: C64| ev.iter().any(|z| (z - x).norm() < 1e-7);
                for li in 0..=n {
                    for lj in 0..=n {
                        let spec = BlockSpec::new(n, li, lj, steps).unwrap();
                        for x in analytic_block_eigenvalues(&spec) {
                            assert!(contains(c(x, 0.0)), "N={n} T={steps} ({li},{lj}) {x}");
                        }
                        for x in scalar_block_eigenvalues(&spec) {
                            assert!(contains(c(x, 0.0)), "scalar {x}");
                        }
                        if steps == 1 {
                            for x in pair_block_eigenvalues(&spec) {
                                assert!(contains(x), "pair {x}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gauge_transform_preserves_the_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let circuit = QuantumCircuit::random(1, 2, &mut rng).unwrap();
        assert!(gauge_transform_check(&circuit).unwrap());
        assert!(gauge_transform_check(&circuit.identity_like()).unwrap());
        let cnot = QuantumCircuit::new(
            2,
            vec![Gate::named("H", vec![1], None).unwrap(), Gate::named("CNOT", vec![1, 0], None).unwrap()],
        )
        .unwrap();
        assert!(gauge_transform_check(&cnot).unwrap());
    }

    #[test]
    fn unary_encoding() {
        let circuit = single("X");
        let unary = compile_unary(&circuit).unwrap();
        assert_eq!(unary.system().total_dim(), 8);
        assert_eq!(unary.clock_index(0), 0b10);
        assert_eq!(unary.clock_index(1), 0b11);
        let limit = long_time_limit(&unary, &DensityMatrix::maximally_mixed(unary.system()));
        let (direct, weight) = unary.to_direct_layout(&limit).unwrap();
        assert!(weight > 1.0 - 1e-8);
        assert!(fidelity(&direct, &expected_fixed_point(&circuit)).unwrap() > 1.0 - 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for steps in 1..=2 {
            let circuit = QuantumCircuit::random(1, steps, &mut rng).unwrap();
            let u = compile_unary(&circuit).unwrap();
            let d = compile_direct(&circuit).unwrap();
            let gu = spectrum(&u).unwrap().gap;
            let gd = spectrum(&d).unwrap().gap;
            assert!((gu - gd).abs() < 1e-8);
            let worst = u.wrong_subspace_eigenvalues().unwrap().iter().map(|z| z.re).fold(f64::MIN, f64::max);
            assert!(worst <= -1.0 + 1e-8, "wrong block reaches {worst}");
        }
        let big = QuantumCircuit::random(3, 6, &mut rng).unwrap();
        assert!(matches!(compile_unary(&big), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn convergence_envelope() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let circuit = QuantumCircuit::random(1, 3, &mut rng).unwrap();
        let compiled = compile_direct(&circuit).unwrap();
        let s = compiled.generator().unwrap();
        let gap = s.spectrum().unwrap().gap;
        let rho0 = expected_fixed_point(&circuit);
        let start = crate::random::density_matrix(compiled.system(), &mut rng);
        let horizon = 40.0 / gap;
        let dt = horizon / 40.0;
        let step = s.propagator(dt).unwrap();
        let mut rho = start;
        for k in 0..=40 {
            let t = k as f64 * dt;
            let d = trace_distance(&rho, &rho0).unwrap();
            assert!(d <= 10.0 * (-gap * t).exp() + 1e-12, "t={t}: {d}");
            rho = step.apply(&rho).unwrap();
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]

            #[test]
            fn gap_depends_only_on_depth(seed in any::<u64>(), n in 1usize..=2, steps in 2usize..=3) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let circuit = QuantumCircuit::random(n, steps, &mut rng).unwrap();
                let report = spectrum(&compile_direct(&circuit).unwrap()).unwrap();
                prop_assert!((report.gap - closed_form_gap(steps)).abs() < 1e-8);
                prop_assert_eq!(report.steady_dim, 1);
                prop_assert!(report.max_real_part() <= 1e-9);
            }

            #[test]
            fn fixed_point_is_annihilated(seed in any::<u64>(), n in 1usize..=2, steps in 1usize..=3) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let circuit = QuantumCircuit::random(n, steps, &mut rng).unwrap();
                let compiled = compile_direct(&circuit).unwrap();
                let rho0 = expected_fixed_point(&circuit);
                prop_assert!(linalg::max_abs(&compiled.generator().unwrap().apply(rho0.matrix())) <= 1e-10);
                let r = readout(&rho0, &circuit).unwrap();
                prop_assert!((r.p_final - 1.0 / (steps as f64 + 1.0)).abs() < 1e-12);
            }
        }
    }
}
