//! Translationally invariant matrix product states on a ring and their dissipative
//! preparation by a tree of two-site channels.
//!
//! Sites are numbered `1..=N` in the public API; pair `k` is `(k, k+1)` with `N+1 ≡ 1`.

use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dse::FrustrationFreeHamiltonian;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, ZERO};
use crate::liouville::CpMapChannel;
use crate::quantum::{reduced_state, DensityMatrix, LocalOperator, SiteLayout, SiteSystem};

/// Largest Hilbert-space dimension `d^N` handled as a dense density matrix.
pub const MPS_DIM_BUDGET: usize = 1024;
/// Cap on the default number of channel applications.
pub const STEP_CAP: u64 = 1_000_000;
/// Largest restricted superoperator block powered densely.
pub const DENSE_BLOCK_BUDGET: usize = 2048;
pub const DEFAULT_C: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Aklt,
    Ghz,
    WLike,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "aklt" => Ok(Preset::Aklt),
            "ghz" => Ok(Preset::Ghz),
            "wlike" | "w" => Ok(Preset::WLike),
            _ => Err(Error::invalid(format!("unknown MPS preset {s:?}"))),
        }
    }
}

/// `|Ψ⟩ = Σ tr(A_{i1} … A_{iN}) |i1 … iN⟩`.
#[derive(Clone, Debug)]
pub struct MatrixProductState {
    tensors: Vec<CMatrix>,
    n_sites: usize,
}

impl MatrixProductState {
    pub fn new(tensors: Vec<CMatrix>, n_sites: usize) -> Result<Self> {
        let bond = tensors.first().map(|a| a.nrows()).ok_or_else(|| Error::invalid("no MPS tensors"))?;
        if bond == 0 || tensors.iter().any(|a| a.dim() != (bond, bond)) {
            return Err(Error::mismatch("MPS tensors must all be D x D with D >= 1"));
        }
        if tensors.len() < 2 {
            return Err(Error::invalid("physical dimension must be at least 2"));
        }
        if n_sites < 2 {
            return Err(Error::invalid("an MPS ring needs at least 2 sites"));
        }
        Ok(MatrixProductState { tensors, n_sites })
    }

    pub fn preset(preset: Preset, n_sites: usize) -> Result<Self> {
        let r = |x: f64| c(x, 0.0);
        let m = |a: [[f64; 2]; 2]| Array2::from_shape_fn((2, 2), |(i, j)| r(a[i][j]));
        let tensors = match preset {
            Preset::Aklt => {
                let (a, b) = ((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt());
                vec![m([[0.0, a], [0.0, 0.0]]), m([[-b, 0.0], [0.0, b]]), m([[0.0, 0.0], [-a, 0.0]])]
            }
            Preset::Ghz => vec![m([[1.0, 0.0], [0.0, 0.0]]), m([[0.0, 0.0], [0.0, 1.0]])],
            Preset::WLike => vec![m([[1.0, 0.0], [0.0, 1.0]]), m([[0.0, 1.0], [0.0, 0.0]])],
        };
        Self::new(tensors, n_sites)
    }

    pub fn physical_dim(&self) -> usize {
        self.tensors.len()
    }

    pub fn bond_dim(&self) -> usize {
        self.tensors[0].nrows()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn tensors(&self) -> &[CMatrix] {
        &self.tensors
    }

    pub fn system(&self) -> Result<SiteSystem> {
        SiteSystem::uniform(self.n_sites, self.physical_dim())
    }

    /// Rank of `X ↦ Σ_{ij} tr[X A_i A_j] |ij⟩`.
    pub fn two_site_rank(&self) -> Result<usize> {
        let (d, bd) = (self.physical_dim(), self.bond_dim());
        let mut map: CMatrix = Array2::zeros((d * d, bd * bd));
        for i in 0..d {
            for j in 0..d {
                let prod = self.tensors[i].dot(&self.tensors[j]);
                for a in 0..bd {
                    for b in 0..bd {
                        map[[i * d + j, a * bd + b]] = prod[[b, a]];
                    }
                }
            }
        }
        linalg::rank(&map, 1e-10)
    }

    pub fn is_injective(&self) -> Result<bool> {
        Ok(self.two_site_rank()? == self.bond_dim().pow(2))
    }

    pub fn require_injective(&self) -> Result<()> {
        let rank = self.two_site_rank()?;
        let expected = self.bond_dim().pow(2);
        if rank != expected {
            return Err(Error::NotInjective { rank, expected });
        }
        Ok(())
    }

    fn hilbert_dim(&self) -> Result<usize> {
        let d = self.physical_dim();
        let dim = (0..self.n_sites).try_fold(1usize, |acc, _| acc.checked_mul(d));
        match dim {
            Some(n) if n <= MPS_DIM_BUDGET => Ok(n),
            _ => Err(Error::BudgetExceeded {
                what: format!("{}^{} MPS amplitudes", d, self.n_sites),
                required: dim.unwrap_or(usize::MAX),
                budget: MPS_DIM_BUDGET,
            }),
        }
    }

    /// The normalized state vector.
    pub fn to_vector(&self) -> Result<CVector> {
        let dim = self.hilbert_dim()?;
        let (d, n) = (self.physical_dim(), self.n_sites);
        let mut psi = Array1::zeros(dim);
        for (index, amp) in psi.iter_mut().enumerate() {
            let mut prod = linalg::identity(self.bond_dim());
            for site in 0..n {
                let digit = index / d.pow((n - 1 - site) as u32) % d;
                prod = prod.dot(&self.tensors[digit]);
            }
            *amp = linalg::trace(&prod);
        }
        let norm = psi.iter().map(|z: &C64| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= 1e-300 {
            return Err(Error::numerical("MPS contraction vanishes identically"));
        }
        Ok(psi.mapv(|z| z / norm))
    }
}

pub fn mps_to_state(mps: &MatrixProductState) -> Result<DensityMatrix> {
    DensityMatrix::pure(&mps.system()?, &mps.to_vector()?)
}

/// Range and kernel projectors of the two-site reduced state on one ring pair.
#[derive(Clone, Debug)]
pub struct PairProjector {
    /// 1-based pair index `k`, acting on sites `(k, k+1)`.
    pub pair: usize,
    pub range: LocalOperator,
    pub kernel: LocalOperator,
    range_basis: CMatrix,
    kernel_basis: CMatrix,
}

/// `P_k` and `H_k = 1 - P_k` for every ring pair `k = 1..=N`.
pub fn two_site_projectors(mps: &MatrixProductState) -> Result<Vec<PairProjector>> {
    mps.require_injective()?;
    let target = mps_to_state(mps)?;
    let system = target.system().clone();
    let n = mps.n_sites();
    let expected = mps.bond_dim().pow(2);
    (1..=n)
        .map(|k| {
            let support = pair_sites(k, n);
            let rho2 = reduced_state(&target, &support)?;
            let range = linalg::range_basis(rho2.matrix(), 1e-10)?;
            if range.ncols() != expected {
                return Err(Error::NotInjective { rank: range.ncols(), expected });
            }
            let p = linalg::projector_from_columns(&range);
            let h = linalg::identity(p.nrows()) - &p;
            let kernel = linalg::range_basis(&h, 1e-10)?;
            Ok(PairProjector {
                pair: k,
                range: LocalOperator::on(&system, p, support.clone())?,
                kernel: LocalOperator::on(&system, h, support)?,
                range_basis: range,
                kernel_basis: kernel,
            })
        })
        .collect()
}

/// 0-based sites of pair `k`.
fn pair_sites(k: usize, n: usize) -> Vec<usize> {
    vec![k - 1, k % n]
}

/// `Σ_k H_k` over all ring pairs.
pub fn parent_hamiltonian(mps: &MatrixProductState) -> Result<FrustrationFreeHamiltonian> {
    let projectors = two_site_projectors(mps)?;
    FrustrationFreeHamiltonian::new(mps.system()?, projectors.into_iter().map(|p| p.kernel).collect())
}

fn log2_sites(n: usize) -> Result<u32> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("the preparation tree needs N = 2^n sites, got {n}")));
    }
    Ok(n.trailing_zeros())
}

/// `M = C N²`, `ε_{r+1} = 1/M^r`, `L_r = 1/(2 ε_{r+1})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleParams {
    c: f64,
    n_sites: usize,
    levels: u32,
}

impl ScheduleParams {
    pub fn new(c: f64, n_sites: usize) -> Result<Self> {
        let levels = log2_sites(n_sites)?;
        if !(c.is_finite() && c * (n_sites * n_sites) as f64 > 1.0) {
            return Err(Error::invalid(format!("C must make C N^2 > 1, got C = {c}")));
        }
        Ok(ScheduleParams { c, n_sites, levels })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `n = log2 N`.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn m(&self) -> f64 {
        self.c * (self.n_sites * self.n_sites) as f64
    }

    /// `ε_r = 1/M^{r-1}` for `r = 2..=n+1`.
    pub fn epsilon(&self, r: u32) -> f64 {
        self.m().powi(-(r as i32 - 1))
    }

    pub fn repetitions(&self, r: u32) -> u64 {
        (0.5 / self.epsilon(r + 1)).ceil() as u64
    }

    /// `⌈N^{log2 N + log2 C}⌉`, capped.
    pub fn step_budget(&self) -> u64 {
        let n = self.n_sites as f64;
        let exponent = self.levels as f64 + self.c.log2();
        let steps = n.powf(exponent).ceil();
        if steps >= STEP_CAP as f64 {
            STEP_CAP
        } else {
            (steps as u64).max(1)
        }
    }
}

/// Flattened mixture `Σ w (r, c)` of two-site channels.
fn s_weights(r: u32, c: usize, p: &ScheduleParams) -> Vec<((u32, usize), f64)> {
    if r == 1 {
        return vec![((1, c), 1.0)];
    }
    let e = p.epsilon(r);
    let mut out: Vec<_> = s_weights(r - 1, 2 * c - 1, p)
        .into_iter()
        .chain(s_weights(r - 1, 2 * c, p))
        .map(|(rc, w)| (rc, w * (1.0 - e) / 2.0))
        .collect();
    out.push(((r, c), e));
    out
}

fn t_weights(p: &ScheduleParams) -> Vec<((u32, usize), f64)> {
    let n = p.levels();
    let e = p.epsilon(n + 1);
    let mut out: Vec<_> = s_weights(n, 1, p).into_iter().map(|(rc, w)| (rc, w * (1.0 - e))).collect();
    out.push(((n, 2), e));
    out
}

/// 1-based pair `k = 2^{r-1}(2c - 1)`; `(n, 2)` is the pair `(N, 1)` closing the ring.
pub fn pair_index(r: u32, c: usize, n_sites: usize) -> Result<usize> {
    let n = log2_sites(n_sites)?;
    if r == n && c == 2 {
        return Ok(n_sites);
    }
    if r == 0 || r > n || c == 0 || c > 1 << (n - r) {
        return Err(Error::invalid(format!("no two-site channel R_({r},{c}) for N = {n_sites}")));
    }
    Ok((1 << (r - 1)) * (2 * c - 1))
}

/// Kraus set `{P_k} ∪ {|φ_a⟩⟨ψ_b|/D}`.
fn r_kraus(pp: &PairProjector, bond: usize, system: &SiteSystem) -> Result<Vec<LocalOperator>> {
    let support = pp.range.support().to_vec();
    let mut ops = vec![pp.range.clone()];
    let scale = 1.0 / bond as f64;
    for a in 0..pp.range_basis.ncols() {
        for b in 0..pp.kernel_basis.ncols() {
            let phi = pp.range_basis.column(a).to_owned();
            let psi = pp.kernel_basis.column(b).to_owned();
            let k = linalg::outer(&phi, &psi).mapv(|z| z * scale);
            ops.push(LocalOperator::on(system, k, support.clone())?);
        }
    }
    Ok(ops)
}

/// Everything needed to assemble the preparation channels of one MPS.
#[derive(Clone, Debug)]
pub struct PreparationModel {
    mps: MatrixProductState,
    system: SiteSystem,
    target: CVector,
    projectors: Vec<PairProjector>,
    kraus: Vec<Vec<LocalOperator>>,
}

impl PreparationModel {
    pub fn new(mps: &MatrixProductState) -> Result<Self> {
        log2_sites(mps.n_sites())?;
        let projectors = two_site_projectors(mps)?;
        let system = mps.system()?;
        let kraus = projectors.iter().map(|pp| r_kraus(pp, mps.bond_dim(), &system)).collect::<Result<Vec<_>>>()?;
        Ok(PreparationModel { mps: mps.clone(), system, target: mps.to_vector()?, projectors, kraus })
    }

    pub fn mps(&self) -> &MatrixProductState {
        &self.mps
    }

    pub fn system(&self) -> &SiteSystem {
        &self.system
    }

    pub fn target(&self) -> &CVector {
        &self.target
    }

    pub fn projectors(&self) -> &[PairProjector] {
        &self.projectors
    }

    fn mixture(&self, weights: Vec<((u32, usize), f64)>) -> Result<CpMapChannel> {
        let n = self.mps.n_sites();
        let branches = weights
            .into_iter()
            .map(|((r, c), w)| Ok((w, self.kraus[pair_index(r, c, n)? - 1].clone())))
            .collect::<Result<Vec<_>>>()?;
        CpMapChannel::new(self.system.clone(), branches)
    }

    pub fn channel_r(&self, r: u32, c: usize) -> Result<CpMapChannel> {
        self.mixture(vec![((r, c), 1.0)])
    }

    pub fn channel_s(&self, r: u32, c: usize, params: &ScheduleParams) -> Result<CpMapChannel> {
        self.check_params(params)?;
        if r == 0 || r > params.levels() || c == 0 || c > 1 << (params.levels() - r) {
            return Err(Error::invalid(format!("no channel S_({r},{c}) for N = {}", params.n_sites())));
        }
        self.mixture(s_weights(r, c, params))
    }

    pub fn channel_t(&self, params: &ScheduleParams) -> Result<CpMapChannel> {
        self.check_params(params)?;
        self.mixture(t_weights(params))
    }

    fn check_params(&self, params: &ScheduleParams) -> Result<()> {
        if params.n_sites() != self.mps.n_sites() {
            return Err(Error::mismatch(format!(
                "schedule for N = {}, MPS has N = {}",
                params.n_sites(),
                self.mps.n_sites()
            )));
        }
        Ok(())
    }

    /// Complement projectors `q_r` for `r = 1..=n` (open chains of `2^r` sites) and the ring.
    pub fn level_projectors(&self) -> Result<Vec<CMatrix>> {
        let n = log2_sites(self.mps.n_sites())?;
        let dim = self.system.total_dim();
        let mut out = Vec::with_capacity(n as usize + 1);
        let complement = |terms: Vec<LocalOperator>| -> Result<CMatrix> {
            let h = FrustrationFreeHamiltonian::new(self.system.clone(), terms)?;
            Ok(linalg::identity(dim) - h.ground_space()?.projector())
        };
        for r in 1..=n {
            let terms = self.projectors[..(1usize << r) - 1].iter().map(|p| p.kernel.clone()).collect();
            out.push(complement(terms)?);
        }
        out.push(complement(self.projectors.iter().map(|p| p.kernel.clone()).collect())?);
        Ok(out)
    }
}

pub fn channel_r(mps: &MatrixProductState, r: u32, c: usize) -> Result<CpMapChannel> {
    PreparationModel::new(mps)?.channel_r(r, c)
}

pub fn channel_s(mps: &MatrixProductState, r: u32, c: usize, params: &ScheduleParams) -> Result<CpMapChannel> {
    PreparationModel::new(mps)?.channel_s(r, c, params)
}

pub fn channel_t(mps: &MatrixProductState, params: &ScheduleParams) -> Result<CpMapChannel> {
    PreparationModel::new(mps)?.channel_t(params)
}

/// `μ_r = tr[q_r ρ]` for `r = 1..=n`, then the ring level `1 - ⟨Ψ|ρ|Ψ⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelErrorTrace {
    pub levels: Vec<f64>,
}

impl LevelErrorTrace {
    pub fn ring(&self) -> f64 {
        *self.levels.last().expect("at least one level")
    }
}

pub fn level_errors(rho: &DensityMatrix, mps: &MatrixProductState) -> Result<LevelErrorTrace> {
    let model = PreparationModel::new(mps)?;
    level_errors_with(rho, &model.level_projectors()?)
}

fn level_errors_with(rho: &DensityMatrix, projectors: &[CMatrix]) -> Result<LevelErrorTrace> {
    if projectors.first().map(|q| q.nrows()) != Some(rho.dim()) {
        return Err(Error::mismatch("state dimension differs from the level projectors"));
    }
    let levels = projectors.iter().map(|q| rho.expectation(q).re.clamp(0.0, 1.0)).collect();
    Ok(LevelErrorTrace { levels })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreparationMode {
    /// Exact powers of the channel on the invariant block containing the input.
    Deterministic,
    /// Average over trajectories that draw one two-site channel per step.
    Sampled { trajectories: usize, seed: u64 },
    /// Deterministic when the block fits the budget, sampled otherwise.
    Auto { trajectories: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub step: u64,
    pub fidelity: f64,
    pub errors: LevelErrorTrace,
}

#[derive(Clone, Debug)]
pub struct PreparationReport {
    pub params: ScheduleParams,
    pub steps: u64,
    /// Mode actually used; `Auto` resolves to one of the other two.
    pub mode: PreparationMode,
    /// Steps 0, 1, 2, 4, … and the final step.
    pub checkpoints: Vec<Checkpoint>,
    pub final_state: DensityMatrix,
}

impl PreparationReport {
    pub fn final_fidelity(&self) -> f64 {
        self.checkpoints.last().expect("initial checkpoint").fidelity
    }
}

fn checkpoint_steps(steps: u64) -> Vec<u64> {
    let mut out = vec![0];
    let mut s = 1;
    while s < steps {
        out.push(s);
        s *= 2;
    }
    if steps > 0 {
        out.push(steps);
    }
    out
}

/// Iterates the preparation channel `steps` times from `rho0`.
pub fn prepare(
    model: &PreparationModel,
    params: &ScheduleParams,
    rho0: &DensityMatrix,
    steps: u64,
    mode: PreparationMode,
) -> Result<PreparationReport> {
    model.check_params(params)?;
    if rho0.system() != model.system() {
        return Err(Error::mismatch("initial state lives on a different register"));
    }
    let projectors = model.level_projectors()?;
    let weights = t_weights(params);
    let n = model.mps.n_sites();
    let pairs: Vec<(usize, f64)> =
        weights.iter().map(|&((r, c), w)| Ok((pair_index(r, c, n)? - 1, w))).collect::<Result<_>>()?;
    let states = match mode {
        PreparationMode::Deterministic => {
            let block = InvariantBlock::new(model, &pairs, rho0)?;
            if block.size() > DENSE_BLOCK_BUDGET {
                return Err(Error::BudgetExceeded {
                    what: "invariant superoperator block".into(),
                    required: block.size(),
                    budget: DENSE_BLOCK_BUDGET,
                });
            }
            block.run(rho0, steps)?
        }
        PreparationMode::Sampled { trajectories, seed } => run_sampled(model, &pairs, rho0, steps, trajectories, seed)?,
        PreparationMode::Auto { trajectories, seed } => {
            let block = InvariantBlock::new(model, &pairs, rho0)?;
            if block.size() <= DENSE_BLOCK_BUDGET {
                let out = block.run(rho0, steps)?;
                return finish(model, params, steps, PreparationMode::Deterministic, out, &projectors);
            }
            let out = run_sampled(model, &pairs, rho0, steps, trajectories, seed)?;
            return finish(model, params, steps, PreparationMode::Sampled { trajectories, seed }, out, &projectors);
        }
    };
    finish(model, params, steps, mode, states, &projectors)
}

fn finish(
    model: &PreparationModel,
    params: &ScheduleParams,
    steps: u64,
    mode: PreparationMode,
    states: Vec<(u64, DensityMatrix)>,
    projectors: &[CMatrix],
) -> Result<PreparationReport> {
    let psi = model.target();
    let checkpoints = states
        .iter()
        .map(|(step, rho)| {
            Ok(Checkpoint {
                step: *step,
                fidelity: crate::quantum::pure_fidelity(rho, psi)?.clamp(0.0, 1.0),
                errors: level_errors_with(rho, projectors)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let final_state = states.into_iter().last().expect("initial state recorded").1;
    Ok(PreparationReport { params: *params, steps, mode, checkpoints, final_state })
}

/// The channel restricted to the operator-space block reachable from the input.
struct InvariantBlock {
    /// Column-stacked indices `i + j·dim` of the block.
    indices: Vec<usize>,
    matrix: CMatrix,
    dim: usize,
}

impl InvariantBlock {
    fn new(model: &PreparationModel, pairs: &[(usize, f64)], rho0: &DensityMatrix) -> Result<Self> {
        let dim = model.system().total_dim();
        let mut triplets: Vec<(usize, usize, C64)> = Vec::new();
        for &(k, w) in pairs {
            let ops = &model.kraus[k];
            let layout = SiteLayout::new(model.system(), ops[0].support())?;
            let lo = layout.local_offsets();
            let kd = lo.len();
            // Local superoperator entries (a', b', a, b) with value Σ K[a',a] conj(K[b',b]).
            let mut local = vec![ZERO; kd * kd * kd * kd];
            for op in ops {
                let m = op.matrix();
                for ((a1, a), &x) in m.indexed_iter() {
                    if x == ZERO {
                        continue;
                    }
                    for ((b1, b), &y) in m.indexed_iter() {
                        if y != ZERO {
                            local[((a1 * kd + b1) * kd + a) * kd + b] += x * y.conj() * w;
                        }
                    }
                }
            }
            // Rounding noise in the projector bases would otherwise couple symmetry sectors.
            let cut = 1e-14 * local.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            for (idx, &v) in local.iter().enumerate() {
                if v.norm() <= cut {
                    continue;
                }
                let b = idx % kd;
                let a = idx / kd % kd;
                let b1 = idx / (kd * kd) % kd;
                let a1 = idx / (kd * kd * kd);
                for &r in layout.rest_offsets() {
                    for &s in layout.rest_offsets() {
                        let row = lo[a1] + r + (lo[b1] + s) * dim;
                        let col = lo[a] + r + (lo[b] + s) * dim;
                        triplets.push((row, col, v));
                    }
                }
            }
        }
        let components = linalg::components_from_edges(dim * dim, triplets.iter().map(|&(i, j, _)| (i, j)));
        let start: Vec<usize> = linalg::vectorize(rho0.matrix())
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(i, _)| i)
            .collect();
        let mut member = vec![usize::MAX; dim * dim];
        let mut indices = Vec::new();
        for comp in components {
            if comp.iter().any(|i| start.binary_search(i).is_ok()) {
                indices.extend(comp);
            }
        }
        indices.sort_unstable();
        for (pos, &i) in indices.iter().enumerate() {
            member[i] = pos;
        }
        let mut matrix: CMatrix = Array2::zeros((indices.len(), indices.len()));
        for (i, j, v) in triplets {
            if member[i] != usize::MAX && member[j] != usize::MAX {
                matrix[[member[i], member[j]]] += v;
            }
        }
        Ok(InvariantBlock { indices, matrix, dim })
    }

    fn size(&self) -> usize {
        self.indices.len()
    }

    fn restrict(&self, rho: &DensityMatrix) -> CVector {
        let v = linalg::vectorize(rho.matrix());
        Array1::from_iter(self.indices.iter().map(|&i| v[i]))
    }

    fn expand(&self, v: &CVector, system: &SiteSystem) -> DensityMatrix {
        let mut full = Array1::zeros(self.dim * self.dim);
        for (&i, &z) in self.indices.iter().zip(v) {
            full[i] = z;
        }
        DensityMatrix::trusted(linalg::unvectorize(&full, self.dim), system.clone())
    }

    /// States at the checkpoints, by repeated squaring of the block.
    fn run(&self, rho0: &DensityMatrix, steps: u64) -> Result<Vec<(u64, DensityMatrix)>> {
        let system = rho0.system();
        let v0 = self.restrict(rho0);
        let mut out = vec![(0, rho0.clone())];
        if steps == 0 {
            return Ok(out);
        }
        // Round j holds power = T^(2^j) and probe at step 2^j.
        let mut power = self.matrix.clone();
        let mut probe = power.dot(&v0);
        let mut last = v0;
        let mut j = 0u32;
        loop {
            let span = 1u64 << j;
            if span < steps {
                out.push((span, self.expand(&probe, system)));
            }
            if steps >> j & 1 == 1 {
                last = power.dot(&last);
            }
            if steps >> (j + 1) == 0 {
                break;
            }
            if span * 2 < steps {
                probe = power.dot(&probe);
            }
            power = power.dot(&power);
            j += 1;
        }
        out.push((steps, self.expand(&last, system)));
        Ok(out)
    }
}

fn run_sampled(
    model: &PreparationModel,
    pairs: &[(usize, f64)],
    rho0: &DensityMatrix,
    steps: u64,
    trajectories: usize,
    seed: u64,
) -> Result<Vec<(u64, DensityMatrix)>> {
    if trajectories == 0 {
        return Err(Error::invalid("sampled preparation needs at least one trajectory"));
    }
    let system = model.system();
    let channels: Vec<CpMapChannel> = pairs
        .iter()
        .map(|&(k, _)| CpMapChannel::new(system.clone(), vec![(1.0, model.kraus[k].clone())]))
        .collect::<Result<_>>()?;
    let cumulative: Vec<f64> = pairs
        .iter()
        .scan(0.0, |acc, &(_, w)| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let marks = checkpoint_steps(steps);
    let n = system.total_dim();
    let mut sums: Vec<CMatrix> = vec![Array2::zeros((n, n)); marks.len()];
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..trajectories {
        let mut rho = rho0.matrix().clone();
        let mut mark = 0;
        for step in 0..=steps {
            if mark < marks.len() && marks[mark] == step {
                sums[mark] += &rho;
                mark += 1;
            }
            if step == steps {
                break;
            }
            let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
            let pick = cumulative.iter().position(|&x| u < x).unwrap_or(channels.len() - 1);
            rho = channels[pick].apply_matrix(&rho);
        }
    }
    let scale = c(1.0 / trajectories as f64, 0.0);
    Ok(marks
        .into_iter()
        .zip(sums)
        .map(|(step, s)| (step, DensityMatrix::trusted(s.mapv(|z| z * scale), system.clone())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::TRACE_PRESERVATION_TOL;
    use crate::quantum::{tensor_embed, trace_distance, Operator};
    use crate::random;
    use rand_chacha::ChaCha8Rng;

    fn aklt(n: usize) -> MatrixProductState {
        MatrixProductState::preset(Preset::Aklt, n).unwrap()
    }

    /// Projector onto total spin 2 of two spin-1 particles, basis (+1, 0, -1).
    fn spin_two_projector() -> CMatrix {
        let r2 = 2f64.sqrt();
        let mut sp: CMatrix = Array2::zeros((3, 3));
        sp[[0, 1]] = c(r2, 0.0);
        sp[[1, 2]] = c(r2, 0.0);
        let sm = linalg::dagger(&sp);
        let sz = Array2::from_diag(&ndarray::array![c(1.0, 0.0), ZERO, c(-1.0, 0.0)]);
        let id = linalg::identity(3);
        let tot = |a: &CMatrix| linalg::kron(a, &id) + linalg::kron(&id, a);
        let (zp, pp, mm) = (tot(&sz), tot(&sp), tot(&sm));
        let s2 = zp.dot(&zp) + (pp.dot(&mm) + mm.dot(&pp)).mapv(|z| z * 0.5);
        let shifted = &s2 - &linalg::identity(9).mapv(|z| z * 2.0);
        s2.dot(&shifted).mapv(|z| z / 24.0)
    }

    fn model(n: usize) -> PreparationModel {
        PreparationModel::new(&aklt(n)).unwrap()
    }

    #[test]
    fn contraction_examples() {
        let ghz = MatrixProductState::preset(Preset::Ghz, 3).unwrap().to_vector().unwrap();
        let h = 0.5f64.sqrt();
        for (i, z) in ghz.iter().enumerate() {
            let want = if i == 0 || i == 7 { h } else { 0.0 };
            assert!((z - c(want, 0.0)).norm() < 1e-15);
        }
        let product = MatrixProductState::new(vec![ndarray::array![[c(0.6, 0.0)]], ndarray::array![[c(0.0, 0.8)]]], 3)
            .unwrap()
            .to_vector()
            .unwrap();
        let single = [c(0.6, 0.0), c(0.0, 0.8)];
        for (i, z) in product.iter().enumerate() {
            let want = single[i >> 2] * single[i >> 1 & 1] * single[i & 1];
            assert!((z - want).norm() < 1e-15);
        }
        let zero = MatrixProductState::new(vec![linalg::identity(1), linalg::identity(1).mapv(|z| -z)], 2).unwrap();
        let nilpotent = vec![Array2::zeros((2, 2)), ndarray::array![[ZERO, c(1.0, 0.0)], [ZERO, ZERO]]];
        assert!(zero.to_vector().is_ok());
        assert!(matches!(MatrixProductState::new(nilpotent, 2).unwrap().to_vector(), Err(Error::Numerical(_))));
        assert!(matches!(aklt(8).to_vector(), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn aklt_is_annihilated_by_spin_two_projectors() {
        let psi = aklt(4).to_vector().unwrap();
        let system = SiteSystem::uniform(4, 3).unwrap();
        let p2 = Operator::new(spin_two_projector(), SiteSystem::uniform(2, 3).unwrap()).unwrap();
        for k in 0..4 {
            let local = LocalOperator::new(p2.clone(), vec![k, (k + 1) % 4]).unwrap();
            let full = tensor_embed(&local, &system).unwrap();
            let out = full.matrix().dot(&psi);
            assert!(out.iter().all(|z| z.norm() < 1e-10));
        }
    }

    #[test]
    fn parent_projectors() {
        let mps = aklt(4);
        assert_eq!(mps.two_site_rank().unwrap(), 4);
        let projectors = two_site_projectors(&mps).unwrap();
        assert_eq!(projectors.len(), 4);
        for pp in &projectors {
            assert!((linalg::trace(pp.range.matrix()).re - 4.0).abs() < 1e-10);
            assert!(linalg::max_abs_diff(pp.kernel.matrix(), &spin_two_projector()) < 1e-8);
        }
        assert_eq!(projectors[3].range.support(), &[3, 0]);
        let h = parent_hamiltonian(&mps).unwrap();
        let report = h.validate().unwrap();
        assert!(report.is_frustration_free());
        assert_eq!(report.ground_dim, 1);

        for preset in [Preset::Ghz, Preset::WLike] {
            let bad = MatrixProductState::preset(preset, 4).unwrap();
            assert!(!bad.is_injective().unwrap());
            assert!(matches!(two_site_projectors(&bad), Err(Error::NotInjective { rank: 2, expected: 4 })));
        }
    }

    #[test]
    fn schedule_parameters() {
        let p = ScheduleParams::new(50.0, 4).unwrap();
        assert_eq!(p.levels(), 2);
        assert_eq!(p.m(), 800.0);
        assert!(p.epsilon(2) > p.epsilon(3) && p.epsilon(3) > 0.0 && p.epsilon(2) < 1.0);
        assert_eq!(p.repetitions(1), 400);
        assert_eq!(p.step_budget(), 40_000);
        assert_eq!(ScheduleParams::new(10.0, 4).unwrap().step_budget(), 1600);
        assert_eq!(ScheduleParams::new(50.0, 64).unwrap().step_budget(), STEP_CAP);
        assert!(ScheduleParams::new(50.0, 6).is_err());
        assert!(ScheduleParams::new(0.0, 4).is_err());
    }

    #[test]
    fn pair_indices() {
        assert_eq!(pair_index(1, 1, 4).unwrap(), 1);
        assert_eq!(pair_index(1, 2, 4).unwrap(), 3);
        assert_eq!(pair_index(2, 1, 4).unwrap(), 2);
        assert_eq!(pair_index(2, 2, 4).unwrap(), 4);
        assert_eq!(pair_index(3, 1, 8).unwrap(), 4);
        assert!(pair_index(1, 3, 4).is_err());
        assert!(pair_index(3, 1, 4).is_err());
        assert!(pair_index(1, 1, 6).is_err());
    }

    #[test]
    fn two_site_channels() {
        let m = model(4);
        let psi = mps_to_state(m.mps()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (r, c) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let ch = m.channel_r(r, c).unwrap();
            assert!(ch.trace_defect() < 1e-10);
            let rho = random::density_matrix(m.system(), &mut rng);
            let out = ch.apply(&rho).unwrap();
            assert!((out.trace() - 1.0).abs() < 1e-10);
            assert!(out.eigenvalues().unwrap()[0] >= -1e-9);
            assert!(trace_distance(&ch.apply(&psi).unwrap(), &psi).unwrap() < 1e-10);
        }
        // A product input already in range(P_1) on sites 1, 2 is untouched.
        let pp = &m.projectors()[0];
        let phi = pp.range_basis.column(1).to_owned();
        let pair = DensityMatrix::pure(&SiteSystem::uniform(2, 3).unwrap(), &phi).unwrap();
        let rest = random::density_matrix(&SiteSystem::uniform(2, 3).unwrap(), &mut rng);
        let rho = pair.tensor(&rest);
        let out = m.channel_r(1, 1).unwrap().apply(&rho).unwrap();
        assert!(linalg::max_abs_diff(out.matrix(), rho.matrix()) < 1e-12);
    }

    #[test]
    fn tree_recursion() {
        let m = model(4);
        let p = ScheduleParams::new(3.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let probes: Vec<CMatrix> = (0..3).map(|_| random::ginibre(81, 81, &mut rng)).collect();
        let s11 = m.channel_s(1, 1, &p).unwrap();
        let r11 = m.channel_r(1, 1).unwrap();
        for x in &probes {
            assert!(linalg::max_abs_diff(&s11.apply_matrix(x), &r11.apply_matrix(x)) < 1e-14);
        }

        let e2 = p.epsilon(2);
        let (r12, r21) = (m.channel_r(1, 2).unwrap(), m.channel_r(2, 1).unwrap());
        let s21 = m.channel_s(2, 1, &p).unwrap();
        let total: f64 = s21.branches().iter().map(|b| b.probability()).sum();
        assert!((total - 1.0).abs() < 1e-15);
        for x in &probes {
            let want = (r11.apply_matrix(x) + r12.apply_matrix(x)).mapv(|z| z * (1.0 - e2) / 2.0)
                + r21.apply_matrix(x).mapv(|z| z * e2);
            assert!(linalg::max_abs_diff(&s21.apply_matrix(x), &want) < 1e-13);
        }
        assert!(m.channel_s(2, 2, &p).is_err());

        let t = m.channel_t(&p).unwrap();
        assert!(t.trace_defect() < TRACE_PRESERVATION_TOL);
        let psi = mps_to_state(m.mps()).unwrap();
        assert!(trace_distance(&t.apply(&psi).unwrap(), &psi).unwrap() <= 1e-10);
    }

    #[test]
    fn level_error_examples() {
        let mps = aklt(4);
        let psi = mps_to_state(&mps).unwrap();
        for mu in level_errors(&psi, &mps).unwrap().levels {
            assert!(mu.abs() < 1e-10);
        }
        let mixed = DensityMatrix::maximally_mixed(&mps.system().unwrap());
        let errors = level_errors(&mixed, &mps).unwrap();
        assert_eq!(errors.levels.len(), 3);
        assert!((errors.levels[0] - (1.0 - 4.0 / 9.0)).abs() < 1e-12);
        assert!((errors.ring() - (1.0 - 1.0 / 81.0)).abs() < 1e-12);
    }

    #[test]
    fn block_powering_matches_direct_iteration() {
        let m = model(4);
        let p = ScheduleParams::new(2.0, 4).unwrap();
        let t = m.channel_t(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // Dephase a random state in total S_z so it lives in one invariant block.
        let sz = |i: usize| m.system().digits(i).iter().map(|&d| 1 - d as i64).sum::<i64>();
        let mut dephased = random::density_matrix(m.system(), &mut rng).into_matrix();
        dephased.indexed_iter_mut().filter(|((i, j), _)| sz(*i) != sz(*j)).for_each(|(_, z)| *z = ZERO);
        let rho0 = DensityMatrix::from_matrix(dephased, m.system()).unwrap();
        let report = prepare(&m, &p, &rho0, 13, PreparationMode::Deterministic).unwrap();
        let steps: Vec<u64> = report.checkpoints.iter().map(|c| c.step).collect();
        assert_eq!(steps, vec![0, 1, 2, 4, 8, 13]);
        let mut rho = rho0.clone();
        let mut k = 0;
        for step in 0..=13 {
            if let Some(cp) = report.checkpoints.iter().find(|c| c.step == step) {
                let f = crate::quantum::pure_fidelity(&rho, m.target()).unwrap();
                assert!((cp.fidelity - f).abs() < 1e-12, "step {step}");
                k += 1;
            }
            rho = t.apply(&rho).unwrap();
        }
        assert_eq!(k, 6);
        let direct = (0..13).try_fold(rho0, |r, _| t.apply(&r)).unwrap();
        assert!(trace_distance(&direct, &report.final_state).unwrap() < 1e-12);
    }

    #[test]
    fn sampled_mode_agrees_with_deterministic() {
        let m = model(4);
        let p = ScheduleParams::new(2.0, 4).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(m.system());
        let exact = prepare(&m, &p, &rho0, p.step_budget(), PreparationMode::Deterministic).unwrap();
        let sampled =
            prepare(&m, &p, &rho0, p.step_budget(), PreparationMode::Sampled { trajectories: 200, seed: 3 }).unwrap();
        for (a, b) in exact.checkpoints.iter().zip(&sampled.checkpoints) {
            assert_eq!(a.step, b.step);
            assert!((a.fidelity - b.fidelity).abs() < 0.03, "step {}: {} vs {}", a.step, a.fidelity, b.fidelity);
        }
        let auto = prepare(&m, &p, &rho0, 4, PreparationMode::Auto { trajectories: 1, seed: 0 }).unwrap();
        assert_eq!(auto.mode, PreparationMode::Deterministic);
    }

    #[test]
    fn lower_levels_settle_first() {
        let m = model(4);
        let p = ScheduleParams::new(5.0, 4).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(m.system());
        let report = prepare(&m, &p, &rho0, p.step_budget(), PreparationMode::Deterministic).unwrap();
        let settled: Vec<_> = report.checkpoints.iter().filter(|c| c.step >= p.repetitions(1)).collect();
        assert!(settled.len() >= 2);
        for w in settled.windows(2) {
            assert!(w[1].errors.levels[0] <= w[0].errors.levels[0] + 1e-12);
        }
        for c in &report.checkpoints {
            assert!(c.errors.levels.iter().all(|&mu| (0.0..=1.0).contains(&mu)));
        }
    }
}
