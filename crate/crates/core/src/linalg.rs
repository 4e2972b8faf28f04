//! Dense complex linear algebra helpers shared by every module.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{EigVals, EigValsh, Eigh, Inverse, OperationNorm, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    Array2::eye(n)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn conj(a: &CMatrix) -> CMatrix {
    a.mapv(|z| z.conj())
}

pub fn transpose(a: &CMatrix) -> CMatrix {
    a.t().to_owned()
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diag().sum()
}

/// Largest absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + &dagger(a)).mapv(|z| z * 0.5)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]).zip_mut_with(b, |o, &y| *o = x * y);
    }
    out
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors.into_iter().fold(Array2::from_elem((1, 1), ONE), |acc, f| kron(&acc, f))
}

/// `out += coeff * (a ⊗ b)` without materializing the product.
pub fn add_kron(out: &mut CMatrix, coeff: C64, a: &CMatrix, b: &CMatrix) {
    let (br, bc) = b.dim();
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        let f = coeff * x;
        out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]).zip_mut_with(b, |o, &y| *o += f * y);
    }
}

pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    Array2::from_shape_fn((u.len(), v.len()), |(i, j)| u[i] * v[j].conj())
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    a.is_square() && max_abs_diff(a, &dagger(a)) <= tol
}

pub fn unitarity_defect(u: &CMatrix) -> f64 {
    max_abs_diff(&dagger(u).dot(u), &identity(u.nrows()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    // Column-major input: the row-major path returns eigenvectors of the conjugate matrix.
    let mut h = Array2::zeros(a.raw_dim().f());
    h.assign(&hermitian_part(a));
    Ok(h.eigh(UPLO::Lower)?)
}

pub fn eigvalsh(a: &CMatrix) -> Result<Array1<f64>> {
    Ok(hermitian_part(a).eigvalsh(UPLO::Lower)?)
}

pub fn eigvals(a: &CMatrix) -> Result<Vec<C64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    Ok(a.eigvals()?.to_vec())
}

pub fn one_norm(a: &CMatrix) -> Result<f64> {
    Ok(a.opnorm_one()?)
}

pub fn singular_values(a: &CMatrix) -> Result<Array1<f64>> {
    Ok(a.svd(false, false)?.1)
}

/// Numerical rank with a relative singular-value cutoff.
pub fn rank(a: &CMatrix, rel_tol: f64) -> Result<usize> {
    let sv = singular_values(a)?;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    Ok(sv.iter().filter(|&&x| x > rel_tol * top.max(1e-300)).count())
}

/// Orthonormal basis (as columns) of the kernel; singular values at or below `tol` count as zero.
pub fn null_space(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    let n = a.ncols();
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    // Pad to square so the full right-singular basis is returned.
    let padded;
    let m = if a.nrows() < n {
        let mut p = Array2::zeros((n, n));
        p.slice_mut(s![..a.nrows(), ..]).assign(a);
        padded = p;
        &padded
    } else {
        a
    };
    let (_, sv, vt) = m.svd(false, true)?;
    let vt = vt.ok_or_else(|| Error::numerical("svd returned no right vectors"))?;
    let mut cols = Vec::new();
    for k in 0..n {
        let sigma = if k < sv.len() { sv[k] } else { 0.0 };
        if sigma <= tol {
            cols.push(k);
        }
    }
    let mut out = Array2::zeros((n, cols.len()));
    for (j, &k) in cols.iter().enumerate() {
        for i in 0..n {
            out[[i, j]] = vt[[k, i]].conj();
        }
    }
    Ok(out)
}

/// Orthonormal basis of the column space, columns with singular value above `rel_tol * max`.
pub fn range_basis(a: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    let (u, sv, _) = a.svd(true, false)?;
    let u = u.ok_or_else(|| Error::numerical("svd returned no left vectors"))?;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let keep = sv.iter().filter(|&&x| x > rel_tol * top.max(1e-300)).count();
    Ok(u.slice(s![.., ..keep]).to_owned())
}

/// Projector onto the span of orthonormal columns.
pub fn projector_from_columns(v: &CMatrix) -> CMatrix {
    v.dot(&dagger(v))
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    Ok(a.inv()?)
}

/// Column-stacking vectorization: `vec(X)[i + j*n] = X[i, j]`.
pub fn vectorize(x: &CMatrix) -> CVector {
    x.t().iter().cloned().collect()
}

pub fn unvectorize(v: &CVector, n: usize) -> CMatrix {
    let mut x = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            x[[i, j]] = v[i + j * n];
        }
    }
    x
}

/// Connected components of the symmetrized nonzero pattern of a square matrix.
/// Entries with magnitude at most `rel_tol * max|a|` are treated as structural zeros.
pub fn block_partition(a: ArrayView2<C64>, rel_tol: f64) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let cut = rel_tol * scale;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, row) in a.axis_iter(Axis(0)).enumerate() {
        for (j, z) in row.iter().enumerate() {
            if i != j && z.norm() > cut {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    group_by_root(&mut parent)
}

/// Same as [`block_partition`] for a pattern given as index pairs.
pub fn components_from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    group_by_root(&mut parent)
}

fn group_by_root(parent: &mut [usize]) -> Vec<Vec<usize>> {
    let n = parent.len();
    let mut roots = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        if roots[r] == usize::MAX {
            roots[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[roots[r]].push(i);
    }
    blocks
}

pub fn submatrix(a: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| a[[rows[i], cols[j]]])
}

const PADE_THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120., 60., 12., 1.],
        5 => &[30240., 15120., 3360., 420., 30., 1.],
        7 => &[17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.],
        9 => &[17643225600., 8821612800., 2075673600., 302702400., 30270240., 2162160., 110880., 3960., 90., 1.],
        _ => &[
            64764752532480000.,
            32382376266240000.,
            7771770303897600.,
            1187353796428800.,
            129060195264000.,
            10559470521600.,
            670442572800.,
            33522128640.,
            1323241920.,
            40840800.,
            960960.,
            16380.,
            182.,
            1.,
        ],
    }
}

/// Ordinary least-squares line through `(xs, ys)`, as `(slope, intercept)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Matrix exponential by Padé scaling and squaring.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a)?;
    if !norm.is_finite() {
        return Err(Error::numerical("matrix exponential of a non-finite matrix"));
    }
    let eye = identity(n);
    let a2 = a.dot(a);
    let scale_c = |x: &CMatrix, f: f64| x.mapv(|z| z * f);

    for &(m, theta) in &PADE_THETA[..4] {
        if norm <= theta {
            let b = pade_coefficients(m);
            let mut powers = vec![eye.clone(), a2.clone()];
            while powers.len() <= m / 2 {
                let next = powers.last().unwrap().dot(&a2);
                powers.push(next);
            }
            let mut u_inner = Array2::zeros((n, n));
            let mut v = Array2::zeros((n, n));
            for (k, p) in powers.iter().enumerate() {
                u_inner = u_inner + scale_c(p, b[2 * k + 1]);
                v = v + scale_c(p, b[2 * k]);
            }
            let u = a.dot(&u_inner);
            return pade_solve(&u, &v);
        }
    }

    let theta13 = PADE_THETA[4].1;
    let squarings = if norm > theta13 { (norm / theta13).log2().ceil().max(0.0) as u32 } else { 0 };
    if squarings > 200 {
        return Err(Error::numerical("matrix exponential needs too many squarings"));
    }
    let f = 0.5f64.powi(squarings as i32);
    let a1 = scale_c(a, f);
    let a2 = scale_c(&a2, f * f);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let b = pade_coefficients(13);
    let u_hi = scale_c(&a6, b[13]) + scale_c(&a4, b[11]) + scale_c(&a2, b[9]);
    let u_lo = scale_c(&a6, b[7]) + scale_c(&a4, b[5]) + scale_c(&a2, b[3]) + scale_c(&eye, b[1]);
    let u = a1.dot(&(a6.dot(&u_hi) + u_lo));
    let v_hi = scale_c(&a6, b[12]) + scale_c(&a4, b[10]) + scale_c(&a2, b[8]);
    let v_lo = scale_c(&a6, b[6]) + scale_c(&a4, b[4]) + scale_c(&a2, b[2]) + scale_c(&eye, b[0]);
    let v = a6.dot(&v_hi) + v_lo;
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numerical("matrix exponential overflowed"));
    }
    Ok(r)
}

fn pade_solve(u: &CMatrix, v: &CMatrix) -> Result<CMatrix> {
    let q = v - u;
    let p = v + u;
    Ok(inverse(&q)?.dot(&p))
}

/// `a^k` by repeated squaring.
pub fn matrix_power(a: &CMatrix, mut k: u64) -> CMatrix {
    let mut result = identity(a.nrows());
    let mut base = a.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = result.dot(&base);
        }
        k >>= 1;
        if k > 0 {
            base = base.dot(&base);
        }
    }
    result
}


#[cfg(test)]
mod decomposition_tests {
    use super::*;
    use ndarray::array;

    fn sample() -> CMatrix {
        array![
            [c(2.0, 0.0), c(0.0, 1.0), c(1.0, -0.5)],
            [c(0.0, -1.0), c(3.0, 0.0), c(0.2, 0.3)],
            [c(1.0, 0.5), c(0.2, -0.3), c(-1.0, 0.0)]
        ]
    }

    #[test]
    fn eigh_vectors_are_eigenvectors() {
        let a = sample();
        let (w, v) = eigh(&a).unwrap();
        for k in 0..3 {
            let av = a.dot(&v.column(k));
            for i in 0..3 {
                assert!((av[i] - v[[i, k]] * w[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn null_space_of_complex_matrix() {
        let a = sample();
        let (w, _) = eigh(&a).unwrap();
        let shifted = &a - &identity(3).mapv(|z| z * w[1]);
        let k = null_space(&shifted, 1e-10).unwrap();
        assert_eq!(k.ncols(), 1);
        assert!(frobenius(&shifted.dot(&k)) < 1e-12);
    }

    #[test]
    fn range_basis_spans_columns() {
        let u = array![[c(1.0, 0.0)], [c(0.0, 1.0)], [c(0.5, -0.5)]];
        let v = array![[c(0.3, 0.1), c(0.0, 2.0), c(1.0, 0.0)]];
        let a = u.dot(&v);
        let b = range_basis(&a, 1e-12).unwrap();
        assert_eq!(b.ncols(), 1);
        let p = projector_from_columns(&b);
        assert!(max_abs_diff(&p.dot(&a), &a) < 1e-12);
    }
}
