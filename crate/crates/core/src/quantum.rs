//! Multi-site operators and states.
//!
//! Basis convention: the global basis index of a configuration `(i_0, ..., i_{n-1})` is the
//! mixed-radix integer with site 0 most significant.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, ONE, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_FLOOR: f64 = -1e-9;

/// Local dimensions of a register of distinguishable sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SiteSystem {
    dims: Vec<usize>,
}

impl SiteSystem {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("a system needs at least one site"));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::invalid(format!("local dimension {d} is below 2")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid("total dimension overflows"))?;
        Ok(SiteSystem { dims })
    }

    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn uniform(n: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn local_dim(&self, site: usize) -> usize {
        self.dims[site]
    }

    /// The system made of the listed sites, in the listed order.
    pub fn subsystem(&self, sites: &[usize]) -> Result<SiteSystem> {
        check_support(self, sites)?;
        SiteSystem::new(sites.iter().map(|&s| self.dims[s]).collect())
    }

    /// `self ⊗ other`, with `other`'s sites appended.
    pub fn join(&self, other: &SiteSystem) -> SiteSystem {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SiteSystem { dims }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Digits of a basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        out
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }
}

fn check_support(system: &SiteSystem, support: &[usize]) -> Result<()> {
    for (k, &s) in support.iter().enumerate() {
        if s >= system.n_sites() {
            return Err(Error::SiteOutOfRange { site: s, n_sites: system.n_sites() });
        }
        if support[..k].contains(&s) {
            return Err(Error::DuplicateSite(s));
        }
    }
    Ok(())
}

/// Dense square matrix tagged with the system it acts on.
#[derive(Clone, Debug)]
pub struct Operator {
    matrix: CMatrix,
    system: SiteSystem,
}

impl Operator {
    pub fn new(matrix: CMatrix, system: SiteSystem) -> Result<Self> {
        let n = system.total_dim();
        if matrix.dim() != (n, n) {
            return Err(Error::mismatch(format!("matrix is {:?} but the system has dimension {n}", matrix.dim())));
        }
        Ok(Operator { matrix, system })
    }

    /// An operator on a single site of dimension `matrix.nrows()`.
    pub fn single_site(matrix: CMatrix) -> Result<Self> {
        let system = SiteSystem::new(vec![matrix.nrows()])?;
        Self::new(matrix, system)
    }

    pub fn on_qubits(matrix: CMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::mismatch(format!("dimension {n} is not a qubit register")));
        }
        Self::new(matrix, SiteSystem::qubits(n.trailing_zeros() as usize)?)
    }

    pub fn identity(system: &SiteSystem) -> Self {
        Operator { matrix: linalg::identity(system.total_dim()), system: system.clone() }
    }

    pub fn zeros(system: &SiteSystem) -> Self {
        let n = system.total_dim();
        Operator { matrix: Array2::zeros((n, n)), system: system.clone() }
    }

    pub(crate) fn trusted(matrix: CMatrix, system: SiteSystem) -> Self {
        debug_assert_eq!(matrix.nrows(), system.total_dim());
        Operator { matrix, system }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn system(&self) -> &SiteSystem {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Operator {
        Operator { matrix: linalg::dagger(&self.matrix), system: self.system.clone() }
    }

    pub fn dot(&self, other: &Operator) -> Result<Operator> {
        self.same_shape(other)?;
        Ok(Operator { matrix: self.matrix.dot(&other.matrix), system: self.system.clone() })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.same_shape(other)?;
        Ok(Operator { matrix: &self.matrix + &other.matrix, system: self.system.clone() })
    }

    pub fn scaled(&self, factor: C64) -> Operator {
        Operator { matrix: self.matrix.mapv(|z| z * factor), system: self.system.clone() }
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Operator { matrix: linalg::kron(&self.matrix, &other.matrix), system: self.system.join(&other.system) }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::is_hermitian(&self.matrix, tol)
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.matrix)
    }

    pub fn require_unitary(&self, tol: f64) -> Result<()> {
        let defect = self.unitarity_defect();
        if defect > tol {
            return Err(Error::NotUnitary(defect));
        }
        Ok(())
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && linalg::max_abs_diff(&self.matrix.dot(&self.matrix), &self.matrix) <= tol
    }

    fn same_shape(&self, other: &Operator) -> Result<()> {
        if self.system != other.system {
            return Err(Error::mismatch(format!(
                "operators act on {:?} and {:?}",
                self.system.dims, other.system.dims
            )));
        }
        Ok(())
    }
}

/// An operator acting on an ordered list of sites of a larger register.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    op: Operator,
    support: Vec<usize>,
}

impl LocalOperator {
    /// `op` is interpreted with its first factor on `support[0]`, and so on.
    pub fn new(op: Operator, support: Vec<usize>) -> Result<Self> {
        if op.system().n_sites() != support.len() {
            return Err(Error::mismatch(format!(
                "operator has {} factors but the support lists {} sites",
                op.system().n_sites(),
                support.len()
            )));
        }
        for (k, &s) in support.iter().enumerate() {
            if support[..k].contains(&s) {
                return Err(Error::DuplicateSite(s));
            }
        }
        Ok(LocalOperator { op, support })
    }

    /// Builds the operator from a raw matrix, reading the local dimensions off `system`.
    pub fn on(system: &SiteSystem, matrix: CMatrix, support: Vec<usize>) -> Result<Self> {
        let sub = system.subsystem(&support)?;
        Self::new(Operator::new(matrix, sub)?, support)
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn dagger(&self) -> LocalOperator {
        LocalOperator { op: self.op.dagger(), support: self.support.clone() }
    }

    pub fn scaled(&self, factor: C64) -> LocalOperator {
        LocalOperator { op: self.op.scaled(factor), support: self.support.clone() }
    }

    /// Checks the support and local dimensions against a register.
    pub fn check_within(&self, system: &SiteSystem) -> Result<()> {
        check_support(system, &self.support)?;
        for (k, &s) in self.support.iter().enumerate() {
            if system.local_dim(s) != self.op.system().local_dim(k) {
                return Err(Error::mismatch(format!(
                    "site {s} has dimension {} but the operator factor has {}",
                    system.local_dim(s),
                    self.op.system().local_dim(k)
                )));
            }
        }
        Ok(())
    }

    /// Product of two local operators on the same support.
    pub fn dot(&self, other: &LocalOperator) -> Result<LocalOperator> {
        if self.support != other.support {
            return Err(Error::mismatch("local operators have different supports"));
        }
        Ok(LocalOperator { op: self.op.dot(&other.op)?, support: self.support.clone() })
    }

    /// Re-expresses the operator on a larger ordered support containing the current one.
    pub fn extend_to(&self, system: &SiteSystem, support: &[usize]) -> Result<LocalOperator> {
        self.check_within(system)?;
        let sub = system.subsystem(support)?;
        let positions: Vec<usize> = self
            .support
            .iter()
            .map(|s| {
                support
                    .iter()
                    .position(|t| t == s)
                    .ok_or_else(|| Error::mismatch(format!("site {s} missing from the new support")))
            })
            .collect::<Result<_>>()?;
        let inner = LocalOperator { op: self.op.clone(), support: positions };
        Ok(LocalOperator { op: tensor_embed(&inner, &sub)?, support: support.to_vec() })
    }
}

/// Precomputed index bookkeeping for acting on a subset of sites.
///
/// The global index of (local configuration `a`, remaining configuration `r`) is
/// `local_offsets[a] + rest_offsets[r]`.
#[derive(Clone, Debug)]
pub struct SiteLayout {
    local_offsets: Vec<usize>,
    rest_offsets: Vec<usize>,
}

impl SiteLayout {
    pub fn new(system: &SiteSystem, support: &[usize]) -> Result<Self> {
        check_support(system, support)?;
        let strides = system.strides();
        let offsets = |sites: &[usize]| -> Vec<usize> {
            let mut out = vec![0usize];
            for &s in sites {
                let mut next = Vec::with_capacity(out.len() * system.dims[s]);
                for &base in &out {
                    for i in 0..system.dims[s] {
                        next.push(base + i * strides[s]);
                    }
                }
                out = next;
            }
            out
        };
        let rest: Vec<usize> = (0..system.n_sites()).filter(|s| !support.contains(s)).collect();
        Ok(SiteLayout { local_offsets: offsets(support), rest_offsets: offsets(&rest) })
    }

    pub fn local_dim(&self) -> usize {
        self.local_offsets.len()
    }

    pub fn rest_dim(&self) -> usize {
        self.rest_offsets.len()
    }

    pub fn local_offsets(&self) -> &[usize] {
        &self.local_offsets
    }

    pub fn rest_offsets(&self) -> &[usize] {
        &self.rest_offsets
    }

    pub fn embed(&self, local: &CMatrix) -> CMatrix {
        let n = self.local_dim() * self.rest_dim();
        let mut full = Array2::zeros((n, n));
        for ((a, b), &x) in local.indexed_iter() {
            if x == ZERO {
                continue;
            }
            let (oa, ob) = (self.local_offsets[a], self.local_offsets[b]);
            for &r in &self.rest_offsets {
                full[[oa + r, ob + r]] = x;
            }
        }
        full
    }

    /// `(K ⊗ 1) X` without forming the global operator.
    pub fn left_mul(&self, local: &CMatrix, x: &CMatrix) -> CMatrix {
        let mut out = Array2::zeros(x.raw_dim());
        self.left_mul_into(local, x, &mut out);
        out
    }

    fn left_mul_into(&self, local: &CMatrix, x: &CMatrix, out: &mut CMatrix) {
        let k = self.local_dim();
        let nonzeros: Vec<(usize, usize, C64)> =
            local.indexed_iter().filter(|(_, z)| **z != ZERO).map(|((a, b), &z)| (a, b, z)).collect();
        if nonzeros.len() * 4 <= k * k {
            // Row updates for sparse local factors such as Pauli strings and projectors.
            for &r in &self.rest_offsets {
                for &(a, b, z) in &nonzeros {
                    let src = x.row(self.local_offsets[b] + r);
                    out.row_mut(self.local_offsets[a] + r).scaled_add(z, &src);
                }
            }
            return;
        }
        let n = x.ncols();
        let mut block = Array2::zeros((k, n));
        for &r in &self.rest_offsets {
            for (a, &o) in self.local_offsets.iter().enumerate() {
                block.row_mut(a).assign(&x.row(o + r));
            }
            let res = local.dot(&block);
            for (a, &o) in self.local_offsets.iter().enumerate() {
                out.row_mut(o + r).scaled_add(ONE, &res.row(a));
            }
        }
    }

    /// `X (K ⊗ 1)`.
    pub fn right_mul(&self, x: &CMatrix, local: &CMatrix) -> CMatrix {
        // (X K)ᵀ = Kᵀ Xᵀ, so the column action is a row action on the transpose.
        let xt = x.t().as_standard_layout().into_owned();
        let mut out = Array2::zeros(xt.raw_dim());
        self.left_mul_into(&local.t().to_owned(), &xt, &mut out);
        out.reversed_axes().as_standard_layout().into_owned()
    }

    /// `(K ⊗ 1) X (K ⊗ 1)†`.
    pub fn conjugate(&self, local: &CMatrix, x: &CMatrix) -> CMatrix {
        let mut out = Array2::zeros(x.raw_dim());
        self.conjugate_add(local, x, &mut out);
        out
    }

    /// Adds `(K ⊗ 1) X (K ⊗ 1)†` to `out`.
    pub fn conjugate_add(&self, local: &CMatrix, x: &CMatrix, out: &mut CMatrix) {
        let left = self.left_mul(local, x);
        let k = self.local_dim();
        let nonzeros: Vec<(usize, usize, C64)> = local
            .indexed_iter()
            .filter(|(_, z)| **z != ZERO)
            .map(|((a, b), &z)| (self.local_offsets[a], self.local_offsets[b], z.conj()))
            .collect();
        if nonzeros.len() * 4 <= k * k {
            for (yrow, mut orow) in left.rows().into_iter().zip(out.rows_mut()) {
                for &r in &self.rest_offsets {
                    for &(oa, ob, z) in &nonzeros {
                        orow[oa + r] += yrow[ob + r] * z;
                    }
                }
            }
            return;
        }
        // ((K X) K†)ᵀ = conj(K) (K X)ᵀ.
        let lt = left.reversed_axes().as_standard_layout().into_owned();
        let mut acc = Array2::zeros(lt.raw_dim());
        self.left_mul_into(&local.mapv(|z| z.conj()), &lt, &mut acc);
        *out += &acc.t();
    }

    /// Trace over the remaining sites, leaving an operator on the support.
    pub fn trace_rest(&self, x: &CMatrix) -> CMatrix {
        let k = self.local_dim();
        let mut out = Array2::zeros((k, k));
        for (a, &oa) in self.local_offsets.iter().enumerate() {
            for (b, &ob) in self.local_offsets.iter().enumerate() {
                let mut acc = ZERO;
                for &r in &self.rest_offsets {
                    acc += x[[oa + r, ob + r]];
                }
                out[[a, b]] = acc;
            }
        }
        out
    }

    /// Trace over the support, leaving an operator on the remaining sites.
    pub fn trace_local(&self, x: &CMatrix) -> CMatrix {
        let m = self.rest_dim();
        let mut out = Array2::zeros((m, m));
        for (r, &or) in self.rest_offsets.iter().enumerate() {
            for (q, &oq) in self.rest_offsets.iter().enumerate() {
                let mut acc = ZERO;
                for &a in &self.local_offsets {
                    acc += x[[a + or, a + oq]];
                }
                out[[r, q]] = acc;
            }
        }
        out
    }

    /// `S ⊗ Y` with `S` on the support and `Y` on the remaining sites.
    pub fn tensor(&self, local: &CMatrix, rest: &CMatrix) -> CMatrix {
        let n = self.local_dim() * self.rest_dim();
        let mut out = Array2::zeros((n, n));
        for ((a, b), &s) in local.indexed_iter() {
            if s == ZERO {
                continue;
            }
            let (oa, ob) = (self.local_offsets[a], self.local_offsets[b]);
            for ((r, q), &y) in rest.indexed_iter() {
                out[[oa + self.rest_offsets[r], ob + self.rest_offsets[q]]] = s * y;
            }
        }
        out
    }
}

/// The operator acting as `local` on its support and as the identity elsewhere.
pub fn tensor_embed(local: &LocalOperator, system: &SiteSystem) -> Result<Operator> {
    local.check_within(system)?;
    let layout = SiteLayout::new(system, local.support())?;
    Ok(Operator::trusted(layout.embed(local.matrix()), system.clone()))
}

/// A validated density matrix.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        let m = op.matrix();
        let herm = linalg::max_abs_diff(m, &linalg::dagger(m));
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:.3e})")));
        }
        let tr = linalg::trace(m);
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let lowest = linalg::eigvalsh(m)?[0];
        if lowest < POSITIVITY_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {lowest:.3e}")));
        }
        Ok(DensityMatrix { op })
    }

    pub fn from_matrix(matrix: CMatrix, system: &SiteSystem) -> Result<Self> {
        Self::new(Operator::new(matrix, system.clone())?)
    }

    /// Skips validation; only re-symmetrizes. For results of maps known to be CPTP.
    pub(crate) fn trusted(matrix: CMatrix, system: SiteSystem) -> Self {
        DensityMatrix { op: Operator::trusted(linalg::hermitian_part(&matrix), system) }
    }

    /// `|ψ⟩⟨ψ|` for a non-zero vector, normalized.
    pub fn pure(system: &SiteSystem, psi: &CVector) -> Result<Self> {
        if psi.len() != system.total_dim() {
            return Err(Error::mismatch(format!(
                "vector of length {} for dimension {}",
                psi.len(),
                system.total_dim()
            )));
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-300) {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = psi.mapv(|z| z / norm);
        Ok(DensityMatrix { op: Operator::trusted(linalg::outer(&v, &v), system.clone()) })
    }

    pub fn basis_state(system: &SiteSystem, index: usize) -> Result<Self> {
        let n = system.total_dim();
        if index >= n {
            return Err(Error::invalid(format!("basis index {index} out of range {n}")));
        }
        let mut m = Array2::zeros((n, n));
        m[[index, index]] = ONE;
        Ok(DensityMatrix { op: Operator::trusted(m, system.clone()) })
    }

    pub fn maximally_mixed(system: &SiteSystem) -> Self {
        let n = system.total_dim();
        let m = linalg::identity(n).mapv(|z| z / n as f64);
        DensityMatrix { op: Operator::trusted(m, system.clone()) }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.op.into_matrix()
    }

    pub fn system(&self) -> &SiteSystem {
        self.op.system()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(self.matrix()).re
    }

    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        linalg::eigvalsh(self.matrix())
    }

    pub fn purity(&self) -> f64 {
        self.matrix().iter().map(|z| z.norm_sqr()).sum()
    }

    /// `tr[ρ A]` for any operator, complex in general.
    pub fn expectation(&self, a: &CMatrix) -> C64 {
        trace_of_product(self.matrix(), a)
    }

    /// `ρ ⊗ σ`.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { op: self.op.kron(&other.op) }
    }
}

fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = ZERO;
    for ((i, j), &x) in a.indexed_iter() {
        acc += x * b[[j, i]];
    }
    acc
}

/// Reduced state on `kept` sites, ordered as listed.
pub fn reduced_state(rho: &DensityMatrix, kept: &[usize]) -> Result<DensityMatrix> {
    if kept.is_empty() {
        return Err(Error::invalid("cannot trace out every site"));
    }
    let sub = rho.system().subsystem(kept)?;
    let layout = SiteLayout::new(rho.system(), kept)?;
    Ok(DensityMatrix::trusted(layout.trace_rest(rho.matrix()), sub))
}

/// Traces out the listed sites; the remaining sites keep their relative order.
pub fn partial_trace(rho: &DensityMatrix, traced_sites: &[usize]) -> Result<DensityMatrix> {
    check_support(rho.system(), traced_sites)?;
    let kept: Vec<usize> = (0..rho.system().n_sites()).filter(|s| !traced_sites.contains(s)).collect();
    reduced_state(rho, &kept)
}

/// `tr[ρ P]` for a Hermitian operator `P`.
pub fn overlap(rho: &DensityMatrix, proj: &Operator) -> Result<f64> {
    if proj.dim() != rho.dim() {
        return Err(Error::mismatch(format!(
            "operator of dimension {} against a state of dimension {}",
            proj.dim(),
            rho.dim()
        )));
    }
    if !proj.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::invalid("overlap needs a Hermitian operator"));
    }
    Ok(rho.expectation(proj.matrix()).re)
}

/// Half the trace norm of the difference.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::mismatch(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    let diff = a.matrix() - b.matrix();
    let ev = linalg::eigvalsh(&diff)?;
    Ok((0.5 * ev.iter().map(|x| x.abs()).sum::<f64>()).min(1.0))
}

fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (w, v) = linalg::eigh(m)?;
    let mut scaled = v.clone();
    for (j, &x) in w.iter().enumerate() {
        let s = x.max(0.0).sqrt();
        scaled.column_mut(j).mapv_inplace(|z| z * s);
    }
    Ok(scaled.dot(&linalg::dagger(&v)))
}

/// Uhlmann fidelity `(tr √(√a b √a))²`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::mismatch(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    let sa = psd_sqrt(a.matrix())?;
    let inner = sa.dot(b.matrix()).dot(&sa);
    let ev = linalg::eigvalsh(&inner)?;
    let root: f64 = ev.iter().map(|&x| x.max(0.0).sqrt()).sum();
    Ok((root * root).min(1.0))
}

/// `⟨ψ|ρ|ψ⟩` for a normalized vector.
pub fn pure_fidelity(rho: &DensityMatrix, psi: &CVector) -> Result<f64> {
    if psi.len() != rho.dim() {
        return Err(Error::mismatch("state vector length differs from the density matrix"));
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let v = rho.matrix().dot(psi);
    let num: C64 = psi.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(num.re / norm)
}

/// Standard single- and two-qubit matrices.
pub mod gates {
    use super::*;
    use ndarray::array;

    pub fn pauli_x() -> CMatrix {
        array![[ZERO, ONE], [ONE, ZERO]]
    }

    pub fn pauli_y() -> CMatrix {
        array![[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]]
    }

    pub fn pauli_z() -> CMatrix {
        array![[ONE, ZERO], [ZERO, c(-1.0, 0.0)]]
    }

    /// `|0⟩⟨1|`: lowers `|1⟩` to `|0⟩`.
    pub fn sigma_minus() -> CMatrix {
        array![[ZERO, ONE], [ZERO, ZERO]]
    }

    pub fn sigma_plus() -> CMatrix {
        array![[ZERO, ZERO], [ONE, ZERO]]
    }

    pub fn hadamard() -> CMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        array![[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
    }

    pub fn rz(theta: f64) -> CMatrix {
        let p = C64::from_polar(1.0, -theta / 2.0);
        array![[p, ZERO], [ZERO, p.conj()]]
    }

    /// Control on the first factor.
    pub fn cnot() -> CMatrix {
        let mut m = Array2::zeros((4, 4));
        m[[0, 0]] = ONE;
        m[[1, 1]] = ONE;
        m[[2, 3]] = ONE;
        m[[3, 2]] = ONE;
        m
    }

    pub fn cz() -> CMatrix {
        let mut m = linalg::identity(4);
        m[[3, 3]] = c(-1.0, 0.0);
        m
    }

    /// `|i⟩⟨j|` in dimension `d`.
    pub fn unit(d: usize, i: usize, j: usize) -> CMatrix {
        let mut m = Array2::zeros((d, d));
        m[[i, j]] = ONE;
        m
    }

    pub fn ket(d: usize, i: usize) -> CVector {
        let mut v = Array1::zeros(d);
        v[i] = ONE;
        v
    }
}

#[cfg(test)]
mod tests {
    use super::gates::*;
    use super::*;
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubits(n: usize) -> SiteSystem {
        SiteSystem::qubits(n).unwrap()
    }

    /// Embedding by explicit basis bookkeeping, independent of [`SiteLayout`].
    fn embed_oracle(local: &CMatrix, support: &[usize], system: &SiteSystem) -> CMatrix {
        let n = system.total_dim();
        let sub = system.subsystem(support).unwrap();
        let mut out = Array2::zeros((n, n));
        for row in 0..n {
            for col in 0..n {
                let dr = system.digits(row);
                let dc = system.digits(col);
                let rest_equal = (0..system.n_sites()).filter(|s| !support.contains(s)).all(|s| dr[s] == dc[s]);
                if !rest_equal {
                    continue;
                }
                let a = sub.index_of(&support.iter().map(|&s| dr[s]).collect::<Vec<_>>());
                let b = sub.index_of(&support.iter().map(|&s| dc[s]).collect::<Vec<_>>());
                out[[row, col]] = local[[a, b]];
            }
        }
        out
    }

    #[test]
    fn embed_single_site() {
        let sys = qubits(2);
        let z = LocalOperator::on(&sys, pauli_z(), vec![0]).unwrap();
        let full = tensor_embed(&z, &sys).unwrap();
        assert!(linalg::max_abs_diff(full.matrix(), &linalg::kron(&pauli_z(), &linalg::identity(2))) < 1e-15);
    }

    #[test]
    fn embed_identity_gives_identity() {
        let sys = SiteSystem::new(vec![2, 3, 2]).unwrap();
        let id = LocalOperator::on(&sys, linalg::identity(6), vec![2, 1]).unwrap();
        let full = tensor_embed(&id, &sys).unwrap();
        assert!(linalg::max_abs_diff(full.matrix(), &linalg::identity(12)) < 1e-15);
    }

    #[test]
    fn embed_permuted_cnot() {
        let sys = qubits(3);
        let op = LocalOperator::on(&sys, cnot(), vec![2, 0]).unwrap();
        let full = tensor_embed(&op, &sys).unwrap();
        // Control on qubit 2, target qubit 0: flip the most significant bit when the lowest is set.
        let mut want = Array2::zeros((8, 8));
        for i in 0..8usize {
            let j = if i & 1 == 1 { i ^ 4 } else { i };
            want[[j, i]] = ONE;
        }
        assert!(linalg::max_abs_diff(full.matrix(), &want) < 1e-15);
        assert!(linalg::max_abs_diff(full.matrix(), &embed_oracle(&cnot(), &[2, 0], &sys)) < 1e-15);
    }

    #[test]
    fn embed_errors() {
        let sys = qubits(2);
        assert!(matches!(LocalOperator::on(&sys, pauli_x(), vec![5]), Err(Error::SiteOutOfRange { site: 5, .. })));
        assert!(matches!(
            LocalOperator::new(Operator::on_qubits(cnot()).unwrap(), vec![1, 1]),
            Err(Error::DuplicateSite(1))
        ));
        let wrong = LocalOperator::new(Operator::single_site(linalg::identity(3)).unwrap(), vec![0]).unwrap();
        assert!(matches!(tensor_embed(&wrong, &sys), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let sys1 = qubits(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random::density_matrix(&sys1, &mut rng);
        let b = random::density_matrix(&sys1, &mut rng);
        let ab = a.tensor(&b);
        let ra = partial_trace(&ab, &[1]).unwrap();
        assert!(linalg::max_abs_diff(ra.matrix(), a.matrix()) < 1e-14);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = Array1::from(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)]);
        let rho = DensityMatrix::pure(&qubits(2), &bell).unwrap();
        let r = partial_trace(&rho, &[1]).unwrap();
        assert!(linalg::max_abs_diff(r.matrix(), &linalg::identity(2).mapv(|z| z * 0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_matches_index_summation() {
        let sys = SiteSystem::new(vec![2, 3, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random::density_matrix(&sys, &mut rng);
        for traced in [vec![0], vec![1], vec![2], vec![0, 2], vec![1, 0]] {
            let got = partial_trace(&rho, &traced).unwrap();
            let kept: Vec<usize> = (0..3).filter(|s| !traced.contains(s)).collect();
            let sub = sys.subsystem(&kept).unwrap();
            let mut want = Array2::zeros((sub.total_dim(), sub.total_dim()));
            for i in 0..sys.total_dim() {
                for j in 0..sys.total_dim() {
                    let (di, dj) = (sys.digits(i), sys.digits(j));
                    if traced.iter().all(|&s| di[s] == dj[s]) {
                        let a = sub.index_of(&kept.iter().map(|&s| di[s]).collect::<Vec<_>>());
                        let b = sub.index_of(&kept.iter().map(|&s| dj[s]).collect::<Vec<_>>());
                        want[[a, b]] += rho.matrix()[[i, j]];
                    }
                }
            }
            assert!(linalg::max_abs_diff(got.matrix(), &want) < 1e-14);
            assert!((got.trace() - 1.0).abs() < 1e-12);
        }
        assert!(partial_trace(&rho, &[0, 1, 2]).is_err());
        assert!(partial_trace(&rho, &[3]).is_err());
    }

    #[test]
    fn overlap_cases() {
        let sys = qubits(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random::density_matrix(&sys, &mut rng);
        assert!((overlap(&rho, &Operator::identity(&sys)).unwrap() - 1.0).abs() < 1e-12);
        let zero = DensityMatrix::basis_state(&sys, 0).unwrap();
        let p1 = Operator::new(unit(2, 1, 1), sys.clone()).unwrap();
        assert_eq!(overlap(&zero, &p1).unwrap(), 0.0);
        assert!(overlap(&zero, &Operator::identity(&qubits(2))).is_err());
    }

    #[test]
    fn overlap_matches_spectral_sum() {
        let sys = qubits(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = random::density_matrix(&sys, &mut rng);
        let u = random::haar_unitary(8, &mut rng);
        let cols = u.slice(ndarray::s![.., ..3]).to_owned();
        let proj = Operator::new(linalg::projector_from_columns(&cols), sys).unwrap();
        // Σ_k p_k ⟨e_k|P|e_k⟩ over the eigenbasis of ρ.
        let (w, v) = linalg::eigh(rho.matrix()).unwrap();
        let pv = proj.matrix().dot(&v);
        let mut want = 0.0;
        for k in 0..8 {
            let e = v.column(k);
            let q: C64 = e.iter().zip(pv.column(k).iter()).map(|(a, b)| a.conj() * b).sum();
            want += w[k] * q.re;
        }
        assert!((overlap(&rho, &proj).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_cases() {
        let sys = qubits(1);
        let zero = DensityMatrix::basis_state(&sys, 0).unwrap();
        let one = DensityMatrix::basis_state(&sys, 1).unwrap();
        assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-15);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-15);
        // Bloch-vector oracle for qubits: |r_a - r_b| / 2.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random::density_matrix(&sys, &mut rng);
        let b = random::density_matrix(&sys, &mut rng);
        let bloch = |r: &DensityMatrix| [pauli_x(), pauli_y(), pauli_z()].map(|p| r.expectation(&p).re);
        let (ra, rb) = (bloch(&a), bloch(&b));
        let want = 0.5 * ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!((trace_distance(&a, &b).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_pure_states() {
        let sys = qubits(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi = random::pure_vector(4, &mut rng);
        let phi = random::pure_vector(4, &mut rng);
        let a = DensityMatrix::pure(&sys, &psi).unwrap();
        let b = DensityMatrix::pure(&sys, &phi).unwrap();
        let ov: C64 = psi.iter().zip(phi.iter()).map(|(x, y)| x.conj() * y).sum();
        assert!((fidelity(&a, &b).unwrap() - ov.norm_sqr()).abs() < 1e-9);
        assert!((pure_fidelity(&b, &psi).unwrap() - ov.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn density_validation() {
        let sys = qubits(1);
        let bad = Operator::new(unit(2, 0, 1), sys.clone()).unwrap();
        assert!(matches!(DensityMatrix::new(bad), Err(Error::InvalidState(_))));
        let neg = Operator::new(Array2::from_diag(&Array1::from(vec![c(1.5, 0.0), c(-0.5, 0.0)])), sys).unwrap();
        assert!(DensityMatrix::new(neg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn embedding_is_multiplicative(seed in any::<u64>(), a in 0usize..3, b in 0usize..3) {
            prop_assume!(a != b);
            let sys = qubits(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random::ginibre(4, 4, &mut rng);
            let y = random::ginibre(4, 4, &mut rng);
            let lx = LocalOperator::on(&sys, x.clone(), vec![a, b]).unwrap();
            let ly = LocalOperator::on(&sys, y.clone(), vec![a, b]).unwrap();
            let lxy = LocalOperator::on(&sys, x.dot(&y), vec![a, b]).unwrap();
            let ex = tensor_embed(&lx, &sys).unwrap();
            let ey = tensor_embed(&ly, &sys).unwrap();
            let exy = tensor_embed(&lxy, &sys).unwrap();
            prop_assert!(linalg::max_abs_diff(&ex.matrix().dot(ey.matrix()), exy.matrix()) < 1e-12);
            prop_assert!(linalg::max_abs_diff(ex.matrix(), &embed_oracle(&x, &[a, b], &sys)) < 1e-14);
        }

        #[test]
        fn partial_trace_commutes_with_kept_operators(seed in any::<u64>(), keep in 0usize..3) {
            let sys = qubits(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random::density_matrix(&sys, &mut rng);
            let x = random::ginibre(2, 2, &mut rng);
            let ex = tensor_embed(&LocalOperator::on(&sys, x.clone(), vec![keep]).unwrap(), &sys).unwrap();
            let layout = SiteLayout::new(&sys, &[keep]).unwrap();
            let lhs = layout.trace_rest(&ex.matrix().dot(rho.matrix()));
            let rhs = x.dot(reduced_state(&rho, &[keep]).unwrap().matrix());
            prop_assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-12);
        }

        #[test]
        fn trace_distance_is_a_unitarily_invariant_metric(seed in any::<u64>()) {
            let sys = qubits(2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random::density_matrix(&sys, &mut rng);
            let b = random::density_matrix(&sys, &mut rng);
            let cc = random::density_matrix(&sys, &mut rng);
            let dab = trace_distance(&a, &b).unwrap();
            let dbc = trace_distance(&b, &cc).unwrap();
            let dac = trace_distance(&a, &cc).unwrap();
            prop_assert!(dac <= dab + dbc + 1e-12);
            prop_assert!((0.0..=1.0).contains(&dab));
            let u = random::haar_unitary(4, &mut rng);
            let rot = |r: &DensityMatrix| DensityMatrix::trusted(u.dot(r.matrix()).dot(&linalg::dagger(&u)), sys.clone());
            prop_assert!((trace_distance(&rot(&a), &rot(&b)).unwrap() - dab).abs() < 1e-12);
        }

        #[test]
        fn local_multiplication_matches_embedding(seed in any::<u64>(), a in 0usize..3, b in 0usize..3) {
            prop_assume!(a != b);
            let sys = SiteSystem::new(vec![2, 3, 2]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = sys.local_dim(a) * sys.local_dim(b);
            let x = random::ginibre(k, k, &mut rng);
            let m = random::ginibre(12, 12, &mut rng);
            let layout = SiteLayout::new(&sys, &[a, b]).unwrap();
            let full = layout.embed(&x);
            prop_assert!(linalg::max_abs_diff(&layout.left_mul(&x, &m), &full.dot(&m)) < 1e-12);
            prop_assert!(linalg::max_abs_diff(&layout.right_mul(&m, &x), &m.dot(&full)) < 1e-12);
        }
    }
}
