//! Dense operators on contiguous blocks of the chain.
//!
//! Basis convention: a basis state of the sites `[lo, hi]` is labelled by
//! `b = sum_i bit(i) * 2^(i - lo)` where `bit = 0` is spin up and `bit = 1`
//! is spin down, so `sigma_z |up> = +|up>`.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::MicroRange;
use crate::linalg::{self, EigenFailure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("supports {0} and {1} do not form a contiguous range")]
    NonContiguous(MicroRange, MicroRange),
    #[error("site {site} is outside the support {support}")]
    SiteOutside { site: usize, support: MicroRange },
    #[error("target {target} does not contain support {support}")]
    TargetTooSmall { target: MicroRange, support: MicroRange },
    #[error("matrix of size {rows}x{cols} does not match support {support} (dimension {dim})")]
    DimensionMismatch { rows: usize, cols: usize, support: MicroRange, dim: usize },
    #[error("operator is not Hermitian: defect {defect:.3e} exceeds {tol:.1e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("operator is not anti-Hermitian: defect {defect:.3e} exceeds {tol:.1e}")]
    NotSkew { defect: f64, tol: f64 },
    #[error("states passed to a projector are not orthonormal (defect {0:.3e})")]
    NotOrthonormal(f64),
    #[error("support of {0} sites exceeds the dense limit of {1} sites")]
    TooLarge(usize, usize),
    #[error(transparent)]
    Eigen(#[from] EigenFailure),
}

/// Sites beyond which a dense operator is refused outright (2^14 x 2^14 complex
/// entries is already 4 GiB).
pub const MAX_DENSE_SITES: usize = 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Spin of a single site in the computational basis.
pub fn spin_up(b: usize, offset: usize) -> bool {
    (b >> offset) & 1 == 0
}

/// `sigma_z` eigenvalue of site `offset` in basis state `b`.
pub fn sz(b: usize, offset: usize) -> f64 {
    if spin_up(b, offset) {
        1.0
    } else {
        -1.0
    }
}

/// Vector in the Hilbert space of a block of sites.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub support: MicroRange,
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn basis(support: MicroRange, index: usize) -> Self {
        let dim = 1usize << support.len();
        assert!(index < dim, "basis index {index} out of range for {support}");
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { support, amplitudes }
    }

    /// Product state with the given spins, listed left to right (`true` = up).
    pub fn product(support: MicroRange, up: &[bool]) -> Self {
        assert_eq!(up.len(), support.len());
        let index = up
            .iter()
            .enumerate()
            .filter(|(_, &u)| !u)
            .map(|(i, _)| 1usize << i)
            .sum();
        Self::basis(support, index)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.support, other.support);
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct LocalOperator {
    support: MicroRange,
    matrix: Mat<C64>,
}

impl PartialEq for LocalOperator {
    fn eq(&self, other: &Self) -> bool {
        self.support == other.support && self.matrix == other.matrix
    }
}

fn dim_of(support: MicroRange) -> Result<usize, OperatorError> {
    if support.len() > MAX_DENSE_SITES {
        return Err(OperatorError::TooLarge(support.len(), MAX_DENSE_SITES));
    }
    Ok(1usize << support.len())
}

/// Adds `scale * embed(src)` into `dst`, where `src` acts on the sites
/// starting `offset` positions above the lowest site of `dst`'s block.
fn accumulate_embedded(dst: &mut Mat<C64>, src: MatRef<'_, C64>, offset: usize, scale: C64) {
    let ws = src.nrows().trailing_zeros() as usize;
    let total = dst.nrows().trailing_zeros() as usize;
    let high_bits = total - ws - offset;
    let low_mask = (1usize << offset) - 1;
    let ds = src.nrows();
    for outer in 0..(1usize << (offset + high_bits)) {
        let base = (outer & low_mask) | ((outer >> offset) << (offset + ws));
        for mc in 0..ds {
            let c = base | (mc << offset);
            for mr in 0..ds {
                let v = src[(mr, mc)];
                if v.re != 0.0 || v.im != 0.0 {
                    dst[(base | (mr << offset), c)] += scale * v;
                }
            }
        }
    }
}

impl LocalOperator {
    pub fn zeros(support: MicroRange) -> Self {
        let d = dim_of(support).expect("dense support too large");
        Self { support, matrix: Mat::zeros(d, d) }
    }

    pub fn identity(support: MicroRange) -> Self {
        let d = dim_of(support).expect("dense support too large");
        Self { support, matrix: Mat::identity(d, d) }
    }

    pub fn from_matrix(support: MicroRange, matrix: Mat<C64>) -> Result<Self, OperatorError> {
        let dim = dim_of(support)?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(OperatorError::DimensionMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                support,
                dim,
            });
        }
        Ok(Self { support, matrix })
    }

    /// Diagonal operator with entries `f(b)` in the computational basis.
    pub fn diagonal(support: MicroRange, f: impl Fn(usize) -> f64) -> Self {
        let mut op = Self::zeros(support);
        for b in 0..op.dim() {
            op.matrix[(b, b)] = C64::new(f(b), 0.0);
        }
        op
    }

    /// Pauli matrix on `site`, embedded in `support`.
    pub fn pauli(site: usize, axis: Axis, support: MicroRange) -> Result<Self, OperatorError> {
        if !support.contains_site(site) {
            return Err(OperatorError::SiteOutside { site, support });
        }
        let off = site - support.lo;
        let mut op = Self::zeros(support);
        for b in 0..op.dim() {
            let flipped = b ^ (1 << off);
            match axis {
                Axis::Z => op.matrix[(b, b)] = C64::new(sz(b, off), 0.0),
                Axis::X => op.matrix[(flipped, b)] = C64::new(1.0, 0.0),
                // sigma_y |up> = i |down>, sigma_y |down> = -i |up>
                Axis::Y => op.matrix[(flipped, b)] = C64::new(0.0, sz(b, off)),
            }
        }
        Ok(op)
    }

    pub fn support(&self) -> MicroRange {
        self.support
    }

    pub fn n_sites(&self) -> usize {
        self.support.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.matrix.as_ref()
    }

    pub fn matrix_mut(&mut self) -> &mut Mat<C64> {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    /// `A ⊗ 1` on the larger block `target`.
    pub fn embed(&self, target: MicroRange) -> Result<Self, OperatorError> {
        if target == self.support {
            return Ok(self.clone());
        }
        let mut out = Self::zeros_checked(target)?;
        out.add_embedded(self, C64::new(1.0, 0.0))?;
        Ok(out)
    }

    fn zeros_checked(support: MicroRange) -> Result<Self, OperatorError> {
        let d = dim_of(support)?;
        Ok(Self { support, matrix: Mat::zeros(d, d) })
    }

    /// `self += scale * (other ⊗ 1)`, with `other` supported inside `self`.
    pub fn add_embedded(&mut self, other: &LocalOperator, scale: C64) -> Result<(), OperatorError> {
        if !self.support.contains(&other.support) {
            return Err(OperatorError::TargetTooSmall {
                target: self.support,
                support: other.support,
            });
        }
        let offset = other.support.lo - self.support.lo;
        accumulate_embedded(&mut self.matrix, other.matrix.as_ref(), offset, scale);
        Ok(())
    }

    fn union_support(&self, other: &LocalOperator) -> Result<MicroRange, OperatorError> {
        self.support
            .union(&other.support)
            .ok_or(OperatorError::NonContiguous(self.support, other.support))
    }

    fn lift_pair(&self, other: &LocalOperator) -> Result<(Self, Self), OperatorError> {
        let u = self.union_support(other)?;
        Ok((self.embed(u)?, other.embed(u)?))
    }

    pub fn add(&self, other: &LocalOperator) -> Result<Self, OperatorError> {
        let u = self.union_support(other)?;
        let mut out = self.embed(u)?;
        out.add_embedded(other, C64::new(1.0, 0.0))?;
        Ok(out)
    }

    pub fn sub(&self, other: &LocalOperator) -> Result<Self, OperatorError> {
        let u = self.union_support(other)?;
        let mut out = self.embed(u)?;
        out.add_embedded(other, C64::new(-1.0, 0.0))?;
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { support: self.support, matrix: &self.matrix * faer::Scale(C64::new(c, 0.0)) }
    }

    pub fn mul(&self, other: &LocalOperator) -> Result<Self, OperatorError> {
        let (a, b) = self.lift_pair(other)?;
        Ok(Self { support: a.support, matrix: &a.matrix * &b.matrix })
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &LocalOperator) -> Result<Self, OperatorError> {
        let (a, b) = self.lift_pair(other)?;
        let ab = &a.matrix * &b.matrix;
        let ba = &b.matrix * &a.matrix;
        Ok(Self { support: a.support, matrix: ab - ba })
    }

    pub fn adjoint(&self) -> Self {
        Self { support: self.support, matrix: self.matrix.adjoint().to_owned() }
    }

    /// Same matrix on a support moved by `by` sites.
    pub fn shifted(&self, by: i64) -> Option<Self> {
        Some(Self { support: self.support.shifted(by)?, matrix: self.matrix.clone() })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.matrix.as_ref())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Replaces the operator by its Hermitian part, refusing if the
    /// anti-Hermitian part exceeds `tol`.
    pub fn symmetrized(&self, tol: f64) -> Result<Self, OperatorError> {
        let defect = self.hermiticity_defect();
        if defect > tol {
            return Err(OperatorError::NotHermitian { defect, tol });
        }
        Ok(Self { support: self.support, matrix: linalg::hermitian_part(self.matrix.as_ref()) })
    }

    /// Spectral norm. Hermitian operators go through their eigenvalues.
    pub fn op_norm(&self) -> Result<f64, OperatorError> {
        let scale = self.max_abs().max(1.0);
        if self.hermiticity_defect() <= 1e-13 * scale {
            Ok(linalg::hermitian_norm(self.matrix.as_ref())?)
        } else {
            Ok(linalg::spectral_norm(self.matrix.as_ref())?)
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.matrix.norm_l2()
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(self.matrix.as_ref())
    }

    /// Ascending eigenvalues; the operator must be Hermitian to `tol`.
    pub fn eigenvalues(&self, tol: f64) -> Result<Vec<f64>, OperatorError> {
        let defect = self.hermiticity_defect();
        if defect > tol {
            return Err(OperatorError::NotHermitian { defect, tol });
        }
        Ok(linalg::hermitian_eigenvalues(self.matrix.as_ref())?)
    }

    /// `exp(self)` for an anti-Hermitian operator.
    pub fn expm_skew(&self, tol: f64) -> Result<Self, OperatorError> {
        let defect = linalg::skewness_defect(self.matrix.as_ref());
        if defect > tol {
            return Err(OperatorError::NotSkew { defect, tol });
        }
        Ok(Self { support: self.support, matrix: linalg::expm_skew(self.matrix.as_ref())? })
    }

    /// `<b|self|b>` for a computational basis state.
    pub fn diagonal_entry(&self, b: usize) -> f64 {
        self.matrix[(b, b)].re
    }

    pub fn expectation(&self, state: &StateVector) -> Result<C64, OperatorError> {
        if state.support != self.support {
            return Err(OperatorError::TargetTooSmall { target: self.support, support: state.support });
        }
        let psi = &state.amplitudes;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..self.dim() {
            if psi[j] == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..self.dim() {
                acc += psi[i].conj() * self.matrix[(i, j)] * psi[j];
            }
        }
        Ok(acc)
    }

    /// `y += (self ⊗ 1) x` on the Hilbert space of `target`.
    pub fn apply_embedded(&self, target: MicroRange, x: &[C64], y: &mut [C64]) -> Result<(), OperatorError> {
        if !target.contains(&self.support) {
            return Err(OperatorError::TargetTooSmall { target, support: self.support });
        }
        let offset = self.support.lo - target.lo;
        let ws = self.support.len();
        let high_bits = target.len() - ws - offset;
        let low_mask = (1usize << offset) - 1;
        let ds = self.dim();
        for outer in 0..(1usize << (offset + high_bits)) {
            let base = (outer & low_mask) | ((outer >> offset) << (offset + ws));
            for mc in 0..ds {
                let xv = x[base | (mc << offset)];
                if xv.re == 0.0 && xv.im == 0.0 {
                    continue;
                }
                for mr in 0..ds {
                    y[base | (mr << offset)] += self.matrix[(mr, mc)] * xv;
                }
            }
        }
        Ok(())
    }
}

/// `U A U^†` on the union of both supports.
pub fn conjugate(u: &LocalOperator, a: &LocalOperator) -> Result<LocalOperator, OperatorError> {
    let (u, a) = u.lift_pair(a)?;
    let ua = &u.matrix * &a.matrix;
    Ok(LocalOperator { support: u.support, matrix: &ua * u.matrix.adjoint() })
}

/// `sum_i |psi_i><psi_i|` for orthonormal states on a common support.
pub fn projector_from_states(states: &[StateVector]) -> Result<LocalOperator, OperatorError> {
    let support = states.first().map(|s| s.support).expect("at least one state");
    let mut defect = 0.0f64;
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((a.inner(b) - C64::new(want, 0.0)).norm());
        }
    }
    if defect > 1e-12 {
        return Err(OperatorError::NotOrthonormal(defect));
    }
    let mut p = LocalOperator::zeros_checked(support)?;
    for s in states {
        for (i, ai) in s.amplitudes.iter().enumerate() {
            for (j, aj) in s.amplitudes.iter().enumerate() {
                p.matrix[(i, j)] += ai * aj.conj();
            }
        }
    }
    Ok(p)
}
