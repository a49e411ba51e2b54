//! Small dense-matrix helpers shared by the Fock-space and master-equation code.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub(crate) fn trace(m: &DMatrix<C64>) -> C64 {
    m.diagonal().iter().sum()
}

/// Largest entry of `|M − M†|`.
pub(crate) fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub(crate) fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()).scale(0.5);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Replace `m` with its Hermitian part.
pub(crate) fn symmetrize(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}
