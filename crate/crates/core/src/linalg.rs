//! Thin wrappers over the dense kernels the rest of the crate needs.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("dense eigensolver failed to converge on a {0}x{0} matrix")]
pub struct EigenFailure(pub usize);

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: MatRef<'_, C64>) -> Result<Vec<f64>, EigenFailure> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| EigenFailure(a.nrows()))
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(a: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>), EigenFailure> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| EigenFailure(n))?;
    let vals = evd.S().column_vector().iter().map(|x| x.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Largest singular value.
pub fn spectral_norm(a: MatRef<'_, C64>) -> Result<f64, EigenFailure> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let s = a
        .singular_values()
        .map_err(|_| EigenFailure(a.nrows().max(a.ncols())))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// Spectral norm of a Hermitian matrix via its extreme eigenvalues.
pub fn hermitian_norm(a: MatRef<'_, C64>) -> Result<f64, EigenFailure> {
    let ev = hermitian_eigenvalues(a)?;
    Ok(ev.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

pub fn max_abs(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// `max |A - A^†|`.
pub fn hermiticity_defect(a: MatRef<'_, C64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in j..n {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `max |A + A^†|`.
pub fn skewness_defect(a: MatRef<'_, C64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in j..n {
            m = m.max((a[(i, j)] + a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `(A + A^†) / 2`.
pub fn hermitian_part(a: MatRef<'_, C64>) -> Mat<C64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// `exp(Z)` for anti-Hermitian `Z`, through the eigendecomposition of `iZ`.
pub fn expm_skew(z: MatRef<'_, C64>) -> Result<Mat<C64>, EigenFailure> {
    let n = z.nrows();
    let h = Mat::from_fn(n, n, |i, j| {
        let v = (z[(i, j)] - z[(j, i)].conj()) * 0.5;
        C64::new(-v.im, v.re)
    });
    let (vals, w) = hermitian_eigen(h.as_ref())?;
    // exp(Z) = exp(-i H) = W diag(exp(-i mu)) W^dagger
    let phases: Vec<C64> = vals.iter().map(|&mu| C64::new(0.0, -mu).exp()).collect();
    let scaled = Mat::from_fn(n, n, |i, j| w[(i, j)] * phases[j]);
    Ok(&scaled * w.adjoint())
}

/// Spectral norm of an `n x r` matrix with small `r`, from its Gram matrix.
pub fn tall_norm(cols: MatRef<'_, C64>) -> Result<f64, EigenFailure> {
    let gram = cols.adjoint() * cols;
    let top = hermitian_eigenvalues(gram.as_ref())?
        .last()
        .copied()
        .unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expm_of_rotation_generator() {
        // exp([[0, -a],[a, 0]]) is a rotation by a
        let a = 0.7;
        let z = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(-a, 0.0),
            (1, 0) => C64::new(a, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        let u = expm_skew(z.as_ref()).unwrap();
        assert_abs_diff_eq!(u[(0, 0)].re, a.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(1, 0)].re, a.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(0, 1)].re, -a.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(0, 0)].im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn tall_norm_matches_svd() {
        let a = Mat::from_fn(7, 2, |i, j| C64::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        let direct = spectral_norm(a.as_ref()).unwrap();
        assert_abs_diff_eq!(tall_norm(a.as_ref()).unwrap(), direct, epsilon = 1e-12);
    }
}
