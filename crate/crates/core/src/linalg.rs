//! Small dense linear-algebra helpers shared by the model modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Block-diagonal symplectic form for `n` modes in (x, p) ordering,
/// `[v_i, v_j] = 2i Omega_ij`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Smallest eigenvalue of the Hermitian matrix `m`.
pub fn min_hermitian_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let h = (m + m.transpose()) * 0.5;
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Eigenvector of `a` for the (approximate) eigenvalue `lambda` by inverse iteration.
pub fn eigenvector_near(a: &DMatrix<Complex64>, lambda: Complex64) -> DVector<Complex64> {
    let n = a.nrows();
    let scale = a.norm().max(1.0);
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let shifted = a - DMatrix::<Complex64>::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.3));
    for _ in 0..8 {
        match lu.solve(&v) {
            Some(w) => {
                let norm = w.norm();
                if norm == 0.0 || !norm.is_finite() {
                    break;
                }
                v = w / Complex64::new(norm, 0.0);
            }
            None => break,
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symplectic_form_squares_to_minus_identity() {
        let o = symplectic_form(3);
        let sq = &o * &o;
        assert_eq!(sq, -DMatrix::<f64>::identity(6, 6));
        assert_eq!(o.transpose(), -o);
    }

    #[test]
    fn inverse_iteration_finds_eigenvector() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let ac = to_complex(&a);
        let v = eigenvector_near(&ac, Complex64::new(0.0, 1.0));
        let r = &ac * &v - &v * Complex64::new(0.0, 1.0);
        assert!(r.norm() < 1e-8);
    }
}
