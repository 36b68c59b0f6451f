//! Low-lying spectra: dense eigensolves for small blocks and a restarted
//! Lanczos solver with locking for the chains that do not fit densely.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, EigenFailure};
use crate::operator::{sz, LocalOperator, OperatorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("requested {wanted} eigenvalues of a {dim}-dimensional operator")]
    TooMany { wanted: usize, dim: usize },
    #[error("Lanczos did not converge eigenvalue {index} after {restarts} restarts (residual {residual:.3e})")]
    NotConverged { index: usize, restarts: usize, residual: f64 },
    #[error("dimension {dim} exceeds the iterative limit {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Eigen(#[from] EigenFailure),
}

/// A Hermitian operator known only through its action on vectors.
pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

impl HermitianOperator for LocalOperator {
    fn dim(&self) -> usize {
        LocalOperator::dim(self)
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        self.apply_embedded(self.support(), x, y)
            .expect("operator applied on its own support");
    }
}

/// Open XXZ chain `-J sum sz sz - h sum sz + hop * sum (s+ s- + s- s+)`,
/// applied without storing a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct XxzChain {
    pub n_sites: usize,
    pub j: f64,
    pub h: f64,
    pub hop: f64,
    diag: Vec<f64>,
}

impl XxzChain {
    pub fn new(n_sites: usize, j: f64, h: f64, hop: f64) -> Self {
        let diag = (0..1usize << n_sites)
            .map(|b| {
                let bonds: f64 = (0..n_sites - 1).map(|i| sz(b, i) * sz(b, i + 1)).sum();
                let field: f64 = (0..n_sites).map(|i| sz(b, i)).sum();
                -j * bonds - h * field
            })
            .collect();
        Self { n_sites, j, h, hop, diag }
    }

    /// Dense matrix of the chain on sites `[1, n]`.
    pub fn to_dense(&self) -> Mat<C64> {
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for b in 0..d {
            m[(b, b)] = C64::new(self.diag[b], 0.0);
            for i in 0..self.n_sites - 1 {
                let mask = 0b11 << i;
                if (b & mask).count_ones() == 1 {
                    m[(b ^ mask, b)] += C64::new(self.hop, 0.0);
                }
            }
        }
        m
    }
}

impl HermitianOperator for XxzChain {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (b, yb) in y.iter_mut().enumerate() {
            let mut acc = x[b] * self.diag[b];
            for i in 0..self.n_sites - 1 {
                let mask = 0b11usize << i;
                if (b & mask).count_ones() == 1 {
                    acc += x[b ^ mask] * self.hop;
                }
            }
            *yb = acc;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Residual tolerance relative to `max(1, |theta|)`.
    pub tol: f64,
    pub seed: u64,
    pub max_dim: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { max_basis: 80, max_restarts: 300, tol: 1e-10, seed: 0x5eed, max_dim: 1 << 22 }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn orthogonalize(v: &mut [C64], basis: &[Vec<C64>]) {
    // two passes of classical Gram-Schmidt keep the basis orthogonal to
    // working precision
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
    }
}

/// Lowest Ritz pair of the projection `Q^dagger A Q`, given `A q_j`.
fn rayleigh_ritz_lowest(basis: &[Vec<C64>], images: &[Vec<C64>]) -> Result<(f64, Vec<C64>), EigenFailure> {
    let m = basis.len();
    let h = Mat::from_fn(m, m, |i, j| {
        0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]).conj())
    });
    let (vals, vecs) = linalg::hermitian_eigen(h.as_ref())?;
    Ok((vals[0], (0..m).map(|i| vecs[(i, 0)]).collect()))
}

/// The `count` lowest eigenvalues, ascending, by Lanczos with full
/// reorthogonalization, explicit restarts, and locking of converged vectors.
pub fn lowest_eigenvalues(
    op: &dyn HermitianOperator,
    count: usize,
    opts: &KrylovOptions,
) -> Result<Vec<f64>, SpectrumError> {
    let dim = op.dim();
    if count > dim {
        return Err(SpectrumError::TooMany { wanted: count, dim });
    }
    if dim > opts.max_dim {
        return Err(SpectrumError::DimensionCap { dim, cap: opts.max_dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Vec<C64>> = Vec::new();
    let mut values = Vec::with_capacity(count);
    let mut w = vec![C64::new(0.0, 0.0); dim];
    for index in 0..count {
        let mut start: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut last_residual = f64::INFINITY;
        let mut converged = false;
        for _restart in 0..opts.max_restarts {
            orthogonalize(&mut start, &locked);
            let nrm = norm(&start);
            start.iter_mut().for_each(|x| *x /= nrm);
            let room = dim - locked.len();
            let m_max = opts.max_basis.min(room);
            let mut basis: Vec<Vec<C64>> = vec![start.clone()];
            let mut images: Vec<Vec<C64>> = Vec::new();
            loop {
                let j = basis.len() - 1;
                op.apply(&basis[j], &mut w);
                images.push(w.clone());
                let before = norm(&w);
                orthogonalize(&mut w, &locked);
                orthogonalize(&mut w, &basis);
                let b = norm(&w);
                // an invariant subspace has been reached once the new
                // direction is at rounding level relative to A q_j
                if basis.len() == m_max || b <= 1e-13 * before {
                    break;
                }
                // re-project after normalizing, so tiny directions do not
                // drag amplified rounding errors into the basis
                let mut q: Vec<C64> = w.iter().map(|x| x / b).collect();
                orthogonalize(&mut q, &locked);
                orthogonalize(&mut q, &basis);
                let qn = norm(&q);
                q.iter_mut().for_each(|x| *x /= qn);
                basis.push(q);
            }
            let (theta, s) = rayleigh_ritz_lowest(&basis, &images)?;
            let mut ritz = vec![C64::new(0.0, 0.0); dim];
            for (coef, q) in s.iter().zip(&basis) {
                ritz.iter_mut().zip(q).for_each(|(r, qi)| *r += qi * *coef);
            }
            orthogonalize(&mut ritz, &locked);
            let rn = norm(&ritz);
            ritz.iter_mut().for_each(|x| *x /= rn);
            op.apply(&ritz, &mut w);
            orthogonalize(&mut w, &locked);
            let theta_r = dot(&ritz, &w).re;
            let residual = w
                .iter()
                .zip(&ritz)
                .map(|(a, r)| (a - r * theta_r).norm_sqr())
                .sum::<f64>()
                .sqrt();
            last_residual = residual;
            if residual <= opts.tol * theta.abs().max(1.0) {
                locked.push(ritz);
                values.push(theta_r);
                converged = true;
                break;
            }
            start = ritz;
        }
        if !converged {
            return Err(SpectrumError::NotConverged {
                index,
                restarts: opts.max_restarts,
                residual: last_residual,
            });
        }
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// All eigenvalues of a dense Hermitian operator, ascending.
pub fn dense_eigenvalues(op: &LocalOperator) -> Result<Vec<f64>, SpectrumError> {
    Ok(linalg::hermitian_eigenvalues(op.matrix())?)
}
