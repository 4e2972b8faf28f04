//! Lindblad generators as dense superoperators: assembly, spectra, steady states and evolution.
//!
//! Operators are vectorized by stacking columns, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, I, ONE, ZERO};
use crate::quantum::{DensityMatrix, Operator, SiteSystem, HERMITIAN_TOL};

mod channel;

pub use channel::{channel_adjoint, channel_to_generator, CpMapChannel, KrausBranch, TRACE_PRESERVATION_TOL};

/// Largest Hilbert dimension for which a dense superoperator is built (4096 x 4096 entries).
pub const SUPEROPERATOR_DIM_BUDGET: usize = 64;

pub(crate) fn check_superoperator_budget(system: &SiteSystem) -> Result<()> {
    let n = system.total_dim();
    if n > SUPEROPERATOR_DIM_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "dense superoperator".into(),
            required: n,
            budget: SUPEROPERATOR_DIM_BUDGET,
        });
    }
    Ok(())
}

/// Eigenvalues with modulus at or below this count as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;

/// Entries this small relative to the largest are dropped when splitting into blocks.
const BLOCK_CUTOFF: f64 = 1e-15;

#[derive(Clone, Debug)]
pub struct LindbladModel {
    system: SiteSystem,
    hamiltonian: Option<Operator>,
    jumps: Vec<Operator>,
}

impl LindbladModel {
    pub fn new(system: SiteSystem, hamiltonian: Option<Operator>, jumps: Vec<Operator>) -> Result<Self> {
        let n = system.total_dim();
        if let Some(h) = &hamiltonian {
            if h.dim() != n {
                return Err(Error::mismatch(format!("Hamiltonian has dimension {}, system {n}", h.dim())));
            }
            if !h.is_hermitian(HERMITIAN_TOL) {
                return Err(Error::invalid("Hamiltonian is not Hermitian"));
            }
        }
        if let Some((k, l)) = jumps.iter().enumerate().find(|(_, l)| l.dim() != n) {
            return Err(Error::mismatch(format!("jump {k} has dimension {}, system {n}", l.dim())));
        }
        Ok(LindbladModel { system, hamiltonian, jumps })
    }

    pub fn system(&self) -> &SiteSystem {
        &self.system
    }

    pub fn hamiltonian(&self) -> Option<&Operator> {
        self.hamiltonian.as_ref()
    }

    pub fn jumps(&self) -> &[Operator] {
        &self.jumps
    }

    /// `L(ρ)` evaluated directly, without a superoperator.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out: CMatrix = Array2::zeros(rho.raw_dim());
        if let Some(h) = &self.hamiltonian {
            let hm = h.matrix();
            out = out + (hm.dot(rho) - rho.dot(hm)).mapv(|z| -I * z);
        }
        for l in &self.jumps {
            let lm = l.matrix();
            let ld = linalg::dagger(lm);
            let ldl = ld.dot(lm);
            out = out + lm.dot(rho).dot(&ld) - (ldl.dot(rho) + rho.dot(&ldl)).mapv(|z| z * 0.5);
        }
        out
    }

    pub fn generator(&self) -> Result<Superoperator> {
        assemble_generator(self)
    }
}

/// Superoperator of `ρ ↦ -i[H,ρ] + Σ_k L_k ρ L_k† - ½{L_k†L_k, ρ}`.
pub fn assemble_generator(model: &LindbladModel) -> Result<Superoperator> {
    check_superoperator_budget(&model.system)?;
    let n = model.system.total_dim();
    let eye = linalg::identity(n);
    let mut s: CMatrix = Array2::zeros((n * n, n * n));
    let mut decay: CMatrix = Array2::zeros((n, n));
    for l in &model.jumps {
        let lm = l.matrix();
        linalg::add_kron(&mut s, ONE, &linalg::conj(lm), lm);
        decay = decay + linalg::dagger(lm).dot(lm);
    }
    // Effective non-Hermitian part: K = -iH - ½ Σ L†L acts as K ρ + ρ K†.
    let mut k = decay.mapv(|z| -0.5 * z);
    if let Some(h) = &model.hamiltonian {
        k = k + h.matrix().mapv(|z| -I * z);
    }
    linalg::add_kron(&mut s, ONE, &eye, &k);
    linalg::add_kron(&mut s, ONE, &linalg::conj(&k), &eye);
    Ok(Superoperator { matrix: s, system: model.system.clone() })
}

/// Linear map on operators of a register, as a matrix on column-stacked vectors.
#[derive(Clone, Debug)]
pub struct Superoperator {
    matrix: CMatrix,
    system: SiteSystem,
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<C64>,
    /// Smallest `|Re λ|` over eigenvalues that are not zero.
    pub gap: f64,
    /// Number of eigenvalues identified as zero.
    pub steady_dim: usize,
}

#[derive(Clone, Debug)]
pub struct SteadyStates {
    pub kernel_dim: usize,
    pub states: Vec<DensityMatrix>,
}

impl Superoperator {
    pub fn new(matrix: CMatrix, system: SiteSystem) -> Result<Self> {
        let n = system.total_dim();
        if matrix.dim() != (n * n, n * n) {
            return Err(Error::mismatch(format!("superoperator is {:?}, expected {}x{}", matrix.dim(), n * n, n * n)));
        }
        Ok(Superoperator { matrix, system })
    }

    pub fn identity(system: &SiteSystem) -> Self {
        let n = system.total_dim();
        Superoperator { matrix: linalg::identity(n * n), system: system.clone() }
    }

    pub fn zero(system: &SiteSystem) -> Self {
        let n = system.total_dim();
        Superoperator { matrix: Array2::zeros((n * n, n * n)), system: system.clone() }
    }

    /// `X ↦ A X B`.
    pub fn sandwich(a: &Operator, b: &Operator) -> Result<Self> {
        if a.system() != b.system() {
            return Err(Error::mismatch("sandwich factors act on different systems"));
        }
        Ok(Superoperator {
            matrix: linalg::kron(&linalg::transpose(b.matrix()), a.matrix()),
            system: a.system().clone(),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn system(&self) -> &SiteSystem {
        &self.system
    }

    pub fn hilbert_dim(&self) -> usize {
        self.system.total_dim()
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let n = self.hilbert_dim();
        linalg::unvectorize(&self.matrix.dot(&linalg::vectorize(x)), n)
    }

    /// Hilbert-Schmidt adjoint: `tr[A† S(B)] = tr[S†(A)† B]`.
    pub fn adjoint(&self) -> Superoperator {
        Superoperator { matrix: linalg::dagger(&self.matrix), system: self.system.clone() }
    }

    pub fn scaled(&self, factor: f64) -> Superoperator {
        Superoperator { matrix: self.matrix.mapv(|z| z * factor), system: self.system.clone() }
    }

    pub fn add(&self, other: &Superoperator) -> Result<Superoperator> {
        if self.system != other.system {
            return Err(Error::mismatch("superoperators act on different systems"));
        }
        Ok(Superoperator { matrix: &self.matrix + &other.matrix, system: self.system.clone() })
    }

    pub fn compose(&self, other: &Superoperator) -> Result<Superoperator> {
        if self.system != other.system {
            return Err(Error::mismatch("superoperators act on different systems"));
        }
        Ok(Superoperator { matrix: self.matrix.dot(&other.matrix), system: self.system.clone() })
    }

    /// `max |S†(1)|`: zero for trace-preserving generators.
    pub fn generator_trace_defect(&self) -> f64 {
        let eye = linalg::identity(self.hilbert_dim());
        linalg::max_abs(&self.adjoint().apply(&eye))
    }

    /// `max |S†(1) - 1|`: zero for trace-preserving channels.
    pub fn channel_trace_defect(&self) -> f64 {
        let eye = linalg::identity(self.hilbert_dim());
        linalg::max_abs_diff(&self.adjoint().apply(&eye), &eye)
    }

    /// Invariant index sets of the vectorized space (connected components of the pattern).
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        linalg::block_partition(self.matrix.view(), BLOCK_CUTOFF)
    }

    /// All eigenvalues, computed block by block.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let mut out = Vec::with_capacity(self.matrix.nrows());
        for block in self.blocks() {
            if block.len() == 1 {
                out.push(self.matrix[[block[0], block[0]]]);
            } else {
                out.extend(linalg::eigvals(&linalg::submatrix(&self.matrix, &block, &block))?);
            }
        }
        Ok(out)
    }

    pub fn spectrum(&self) -> Result<SpectrumReport> {
        let eigenvalues = self.eigenvalues()?;
        Ok(SpectrumReport::from_eigenvalues(eigenvalues))
    }

    /// Orthonormal kernel basis, one column per vectorized kernel element.
    pub fn kernel(&self) -> Result<CMatrix> {
        let dim = self.matrix.nrows();
        let mut columns: Vec<CVector> = Vec::new();
        for block in self.blocks() {
            let sub = linalg::submatrix(&self.matrix, &block, &block);
            let scale = linalg::max_abs(&sub).max(1.0);
            let null = linalg::null_space(&sub, ZERO_EIGENVALUE_TOL * scale)?;
            for col in null.columns() {
                let mut v = CVector::zeros(dim);
                for (k, &idx) in block.iter().enumerate() {
                    v[idx] = col[k];
                }
                columns.push(v);
            }
        }
        let mut out = Array2::zeros((dim, columns.len()));
        for (j, v) in columns.iter().enumerate() {
            out.column_mut(j).assign(v);
        }
        Ok(out)
    }

    /// A basis of the kernel made of density matrices.
    ///
    /// Kernel elements are split into Hermitian parts and then into positive and negative parts,
    /// which stay stationary for generators of completely positive semigroups; a linearly
    /// independent subset of these is returned.
    pub fn steady_states(&self) -> Result<SteadyStates> {
        let kernel = self.kernel()?;
        let kernel_dim = kernel.ncols();
        if kernel_dim == 0 {
            return Err(Error::numerical("generator has no stationary state"));
        }
        let n = self.hilbert_dim();
        let mut candidates: Vec<CMatrix> = Vec::new();
        for col in kernel.columns() {
            let x = linalg::unvectorize(&col.to_owned(), n);
            let xd = linalg::dagger(&x);
            let re = (&x + &xd).mapv(|z| z * 0.5);
            let im = (&x - &xd).mapv(|z| z * c(0.0, -0.5));
            for h in [re, im] {
                if linalg::max_abs(&h) < 1e-12 {
                    continue;
                }
                let (w, v) = linalg::eigh(&h)?;
                for sign in [1.0, -1.0] {
                    let mut part: CMatrix = Array2::zeros((n, n));
                    let mut weight = 0.0;
                    for (k, &x) in w.iter().enumerate() {
                        let x = sign * x;
                        if x > 0.0 {
                            let vk = v.column(k).to_owned();
                            part = part + linalg::outer(&vk, &vk).mapv(|z| z * x);
                            weight += x;
                        }
                    }
                    if weight > 1e-10 {
                        candidates.push(part.mapv(|z| z / weight));
                    }
                }
            }
        }
        // Smaller rank first, so extreme points are preferred in degenerate kernels.
        candidates.sort_by(|a, b| {
            let pa: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            let pb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
            pb.partial_cmp(&pa).unwrap_or(std::cmp::Ordering::Equal)
        });
        let residual_tol = 1e-8 * linalg::max_abs(&self.matrix).max(1.0);
        let mut basis: Vec<CVector> = Vec::new();
        let mut states = Vec::new();
        for cand in candidates {
            if states.len() == kernel_dim {
                break;
            }
            let v = linalg::vectorize(&cand);
            let residual = self.matrix.dot(&v).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if residual > residual_tol {
                continue;
            }
            let mut w = v.clone();
            for b in &basis {
                let proj: C64 = b.iter().zip(w.iter()).map(|(x, y)| x.conj() * y).sum();
                w = w - b.mapv(|z| z * proj);
            }
            let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 * vnorm {
                basis.push(w.mapv(|z| z / norm));
                states.push(DensityMatrix::trusted(cand, self.system.clone()));
            }
        }
        Ok(SteadyStates { kernel_dim, states })
    }

    /// `exp(t S)`, kept block-diagonal.
    pub fn propagator(&self, t: f64) -> Result<Propagator> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("evolution time {t} must be finite and non-negative")));
        }
        let mut blocks = Vec::new();
        for block in self.blocks() {
            let sub = linalg::submatrix(&self.matrix, &block, &block).mapv(|z| z * t);
            blocks.push((block, linalg::expm(&sub)?));
        }
        Ok(Propagator { blocks, system: self.system.clone() })
    }

    pub fn exp(&self, t: f64) -> Result<Superoperator> {
        Ok(self.propagator(t)?.to_superoperator())
    }

    pub fn evolve(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        self.propagator(t)?.apply(rho)
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ S(|i⟩⟨j|)`.
    pub fn choi(&self) -> CMatrix {
        let n = self.hilbert_dim();
        let mut out = Array2::zeros((n * n, n * n));
        for i in 0..n {
            for j in 0..n {
                let col = i + j * n;
                for k in 0..n {
                    for l in 0..n {
                        out[[i * n + k, j * n + l]] = self.matrix[[k + l * n, col]];
                    }
                }
            }
        }
        out
    }
}

impl SpectrumReport {
    pub fn from_eigenvalues(eigenvalues: Vec<C64>) -> Self {
        let steady_dim = eigenvalues.iter().filter(|z| z.norm() <= ZERO_EIGENVALUE_TOL).count();
        let gap = eigenvalues
            .iter()
            .filter(|z| z.norm() > ZERO_EIGENVALUE_TOL)
            .map(|z| z.re.abs())
            .fold(f64::INFINITY, f64::min);
        SpectrumReport { eigenvalues, gap: if gap.is_finite() { gap } else { 0.0 }, steady_dim }
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Eigenvalues sorted by real part (descending), then imaginary part.
    pub fn sorted(&self) -> Vec<C64> {
        let mut v = self.eigenvalues.clone();
        sort_spectrum(&mut v);
        v
    }
}

pub fn sort_spectrum(v: &mut [C64]) {
    v.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Greedy matching distance between two eigenvalue multisets (`∞` if sizes differ).
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].re.partial_cmp(&a[j].re).unwrap_or(std::cmp::Ordering::Equal));
    for i in order {
        let (mut best, mut best_d) = (usize::MAX, f64::INFINITY);
        for (j, z) in b.iter().enumerate() {
            if !used[j] {
                let d = (a[i] - z).norm();
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
        }
        used[best] = true;
        worst = worst.max(best_d);
    }
    worst
}

/// Block-diagonal `exp(tS)` for repeated application.
#[derive(Clone, Debug)]
pub struct Propagator {
    blocks: Vec<(Vec<usize>, CMatrix)>,
    system: SiteSystem,
}

impl Propagator {
    pub fn apply_matrix(&self, x: &CMatrix) -> CMatrix {
        let n = self.system.total_dim();
        let v = linalg::vectorize(x);
        let mut out = CVector::zeros(v.len());
        for (idx, m) in &self.blocks {
            let sub: CVector = idx.iter().map(|&i| v[i]).collect();
            if sub.iter().all(|z| *z == ZERO) {
                continue;
            }
            let res = m.dot(&sub);
            for (k, &i) in idx.iter().enumerate() {
                out[i] = res[k];
            }
        }
        linalg::unvectorize(&out, n)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.system() != &self.system {
            return Err(Error::mismatch("state and propagator act on different systems"));
        }
        Ok(DensityMatrix::trusted(self.apply_matrix(rho.matrix()), self.system.clone()))
    }

    pub fn to_superoperator(&self) -> Superoperator {
        let n = self.system.total_dim();
        let mut m = Array2::zeros((n * n, n * n));
        for (idx, b) in &self.blocks {
            for (r, &i) in idx.iter().enumerate() {
                for (c, &j) in idx.iter().enumerate() {
                    m[[i, j]] = b[[r, c]];
                }
            }
        }
        Superoperator { matrix: m, system: self.system.clone() }
    }
}
