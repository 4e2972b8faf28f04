//! Random matrices and states for tests, examples and sampled diagnostics.

use ndarray::{Array1, Array2};
use ndarray_linalg::QR;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, c, CMatrix, CVector};
use crate::quantum::{DensityMatrix, SiteSystem};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix of i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    Array2::from_shape_simple_fn((rows, cols), || gaussian(rng))
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase of R's diagonal removed.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = ginibre(n, n, rng);
    let (mut q, r) = z.qr().expect("QR of a square Gaussian matrix");
    for j in 0..n {
        let d = r[[j, j]];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        q.column_mut(j).mapv_inplace(|x| x * phase);
    }
    q
}

pub fn pure_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let v: CVector = Array1::from_shape_simple_fn(n, || gaussian(rng));
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv(|z| z / norm)
}

pub fn pure_state<R: Rng + ?Sized>(system: &SiteSystem, rng: &mut R) -> DensityMatrix {
    DensityMatrix::pure(system, &pure_vector(system.total_dim(), rng)).expect("non-zero vector")
}

/// Hilbert-Schmidt random density matrix (full rank almost surely).
pub fn density_matrix<R: Rng + ?Sized>(system: &SiteSystem, rng: &mut R) -> DensityMatrix {
    let n = system.total_dim();
    let g = ginibre(n, n, rng);
    let m = g.dot(&linalg::dagger(&g));
    let tr = linalg::trace(&m).re;
    DensityMatrix::trusted(m.mapv(|z| z / tr), system.clone())
}

pub fn hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    linalg::hermitian_part(&ginibre(n, n, rng))
}
