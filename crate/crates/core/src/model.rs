//! The XXZ Hamiltonian split into its Ising part and the local hopping
//! potentials, plus the reference (Ising ground) states and spectral gaps.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Interval, LatticeError, MacroLattice, MicroRange};
use crate::operator::{sz, LocalOperator, OperatorError, StateVector};
use crate::spectrum::{self, HermitianOperator, KrylovOptions, SpectrumError, XxzChain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("Ising coupling J must be nonzero")]
    ZeroCoupling,
    #[error("magnetic field h must be nonnegative, got {0}")]
    NegativeField(f64),
    #[error("hopping t must be nonnegative and finite, got {0}")]
    BadHopping(f64),
    #[error("antiferromagnetic regime needs h < |J|, got h={h}, J={j}")]
    FieldTooStrong { j: f64, h: f64 },
    #[error("ferromagnetic reference state is degenerate at h = 0")]
    DegenerateFerro,
    #[error("a gap above {wanted} states needs at least {needed} eigenvalues, operator has {dim}")]
    GapUndefined { wanted: usize, needed: usize, dim: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Ferro,
    Antiferro,
}

impl Regime {
    pub fn of(j: f64) -> Self {
        if j > 0.0 {
            Regime::Ferro
        } else {
            Regime::Antiferro
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Ferro => "ferro",
            Regime::Antiferro => "antiferro",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_sites: usize,
    pub xi: usize,
    pub j: f64,
    pub h: f64,
    pub t: f64,
}

/// Ratio below which `t` counts as small against the Ising gap scale.
pub const SMALL_HOPPING_RATIO: f64 = 0.1;

impl ModelParams {
    pub fn new(n_sites: usize, xi: usize, j: f64, h: f64, t: f64) -> Self {
        Self { n_sites, xi, j, h, t }
    }

    pub fn with_t(&self, t: f64) -> Self {
        Self { t, ..*self }
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.j)
    }

    pub fn lattice(&self) -> Result<MacroLattice, LatticeError> {
        MacroLattice::new(self.n_sites, self.xi)
    }

    /// Coupling constant of the potentials, `xi * t`.
    pub fn lambda(&self) -> f64 {
        self.xi as f64 * self.t
    }

    /// Hard constraints, plus the soft ones returned as warnings.
    pub fn validate(&self) -> Result<Vec<String>, ModelError> {
        self.lattice()?;
        if self.j == 0.0 || !self.j.is_finite() {
            return Err(ModelError::ZeroCoupling);
        }
        if !(self.h >= 0.0) || !self.h.is_finite() {
            return Err(ModelError::NegativeField(self.h));
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(ModelError::BadHopping(self.t));
        }
        let mut warnings = Vec::new();
        match self.regime() {
            Regime::Antiferro => {
                let aj = self.j.abs();
                if self.h >= aj {
                    return Err(ModelError::FieldTooStrong { j: self.j, h: self.h });
                }
                if self.h >= aj / 2.0 {
                    warnings.push(format!(
                        "h = {} is not below |J|/2 = {}; gap bounds may not hold",
                        self.h,
                        aj / 2.0
                    ));
                }
                if self.t > SMALL_HOPPING_RATIO * (aj - self.h) {
                    warnings.push(format!(
                        "t = {} is not small against |J| - h = {}",
                        self.t,
                        aj - self.h
                    ));
                }
            }
            Regime::Ferro => {
                if self.h == 0.0 {
                    return Err(ModelError::DegenerateFerro);
                }
                if self.t > SMALL_HOPPING_RATIO * (self.j + self.h) {
                    warnings.push(format!("t = {} is not small against J + h = {}", self.t, self.j + self.h));
                }
                if (self.xi as f64) <= self.j / self.h {
                    warnings.push(format!(
                        "xi = {} does not exceed J/h = {}; the boundary gap of short blocks is not guaranteed",
                        self.xi,
                        self.j / self.h
                    ));
                }
            }
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(warnings)
    }
}

/// `-J sum sz_i sz_{i+1} - h sum sz_i` on `range`.
pub fn h0(range: MicroRange, j: f64, h: f64) -> LocalOperator {
    let n = range.len();
    LocalOperator::diagonal(range, |b| {
        let bonds: f64 = (0..n - 1).map(|i| sz(b, i) * sz(b, i + 1)).sum();
        let field: f64 = (0..n).map(|i| sz(b, i)).sum();
        -j * bonds - h * field
    })
}

/// Ising Hamiltonian with the field split evenly over bonds, so that edge
/// sites feel only half of it.
pub fn hc(range: MicroRange, j: f64, h: f64) -> LocalOperator {
    let n = range.len();
    LocalOperator::diagonal(range, |b| {
        -(0..n - 1)
            .map(|i| j * sz(b, i) * sz(b, i + 1) + 0.5 * h * (sz(b, i) + sz(b, i + 1)))
            .sum::<f64>()
    })
}

/// Energy of a basis state under `h0` on a block of `n` sites, without
/// building the operator.
pub fn h0_energy(b: usize, n: usize, j: f64, h: f64) -> f64 {
    let bonds: f64 = (0..n - 1).map(|i| sz(b, i) * sz(b, i + 1)).sum();
    let field: f64 = (0..n).map(|i| sz(b, i)).sum();
    -j * bonds - h * field
}

/// `(1 / (2 xi)) sum (sx sx + sy sy)` over the bonds of `range`.
pub fn hopping(range: MicroRange, xi: usize) -> LocalOperator {
    let mut op = LocalOperator::zeros(range);
    let amp = num_complex::Complex64::new(1.0 / xi as f64, 0.0);
    for b in 0..op.dim() {
        for i in 0..range.len() - 1 {
            let mask = 0b11usize << i;
            if (b & mask).count_ones() == 1 {
                op.matrix_mut()[(b ^ mask, b)] += amp;
            }
        }
    }
    op
}

/// Initial potential of a unit interval; longer intervals start at zero.
pub fn v_interval(lattice: &MacroLattice, i: Interval) -> Result<LocalOperator, ModelError> {
    let range = lattice.micro(i)?;
    Ok(if i.k == 1 {
        hopping(range, lattice.xi())
    } else {
        LocalOperator::zeros(range)
    })
}

/// The full Hamiltonian `H0 + xi t sum_I V_I` as a dense operator.
pub fn k_lambda(p: &ModelParams) -> Result<LocalOperator, ModelError> {
    let lattice = p.lattice()?;
    let full = lattice.full_range();
    let mut k = h0(full, p.j, p.h);
    for q in 1..=lattice.n_edges() {
        let v = v_interval(&lattice, Interval::new(q, 1))?;
        k.add_embedded(&v, num_complex::Complex64::new(p.lambda(), 0.0))?;
    }
    Ok(k)
}

/// The same Hamiltonian as a matrix-free chain operator.
pub fn xxz_chain(p: &ModelParams) -> XxzChain {
    XxzChain::new(p.n_sites, p.j, p.h, p.t)
}

/// Nearest-neighbour Ising bonds `(i, i+1)` sticking out of `range` on
/// either side, where the chain continues.
pub fn hooked_bonds(range: MicroRange, n_sites: usize) -> Vec<(usize, usize)> {
    let mut bonds = Vec::with_capacity(2);
    if range.lo > 1 {
        bonds.push((range.lo - 1, range.lo));
    }
    if range.hi < n_sites {
        bonds.push((range.hi, range.hi + 1));
    }
    bonds
}

/// `sum sz_i sz_{i+1}` over `bonds`, on `support`.
pub fn ising_bonds(bonds: &[(usize, usize)], support: MicroRange) -> Result<LocalOperator, ModelError> {
    let mut op = LocalOperator::zeros(support);
    for &(a, b) in bonds {
        for s in [a, b] {
            if !support.contains_site(s) {
                return Err(OperatorError::SiteOutside { site: s, support }.into());
            }
        }
        let (oa, ob) = (a - support.lo, b - support.lo);
        for x in 0..op.dim() {
            op.matrix_mut()[(x, x)] += num_complex::Complex64::new(sz(x, oa) * sz(x, ob), 0.0);
        }
    }
    Ok(op)
}

/// Computational basis index of the Néel state starting with spin up
/// (`A`) or spin down (`B`) on the leftmost site of an `n`-site block.
pub fn neel_index(n: usize, starts_up: bool) -> usize {
    let odd: usize = (0..n).filter(|i| i % 2 == 1).map(|i| 1usize << i).sum();
    if starts_up {
        odd
    } else {
        odd ^ ((1usize << n) - 1)
    }
}

/// Reference states of a block: the ground space of its Ising Hamiltonian
/// with halved edge fields. All of them are computational basis states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundData {
    pub regime: Regime,
    pub range: MicroRange,
    /// Basis indices; one for the ferromagnet, `[A, B]` for the antiferromagnet.
    pub indices: Vec<usize>,
    /// Energies of the reference states under `h0` on the same block.
    pub h0_energies: Vec<f64>,
}

impl GroundData {
    pub fn states(&self) -> Vec<StateVector> {
        self.indices.iter().map(|&b| StateVector::basis(self.range, b)).collect()
    }

    pub fn projector(&self) -> LocalOperator {
        LocalOperator::diagonal(self.range, |b| if self.indices.contains(&b) { 1.0 } else { 0.0 })
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }
}

pub fn ground_data(range: MicroRange, j: f64, h: f64) -> Result<GroundData, ModelError> {
    if j == 0.0 {
        return Err(ModelError::ZeroCoupling);
    }
    if h < 0.0 {
        return Err(ModelError::NegativeField(h));
    }
    let regime = Regime::of(j);
    let n = range.len();
    let indices = match regime {
        Regime::Ferro => {
            if h == 0.0 {
                return Err(ModelError::DegenerateFerro);
            }
            vec![0]
        }
        Regime::Antiferro => {
            if h >= j.abs() {
                return Err(ModelError::FieldTooStrong { j, h });
            }
            vec![neel_index(n, true), neel_index(n, false)]
        }
    };
    let h0_energies = indices.iter().map(|&b| h0_energy(b, n, j, h)).collect();
    Ok(GroundData { regime, range, indices, h0_energies })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapMode {
    /// Distance from the ground energy to the first strictly higher level.
    AboveGroundState,
    /// Distance from the ground energy to the `d`-th eigenvalue (0-based),
    /// i.e. above a `d`-dimensional low-lying subspace.
    AboveSubspace(usize),
}

/// Levels within this relative distance of the ground energy are degenerate with it.
pub const DEGENERACY_TOL: f64 = 1e-9;

pub fn gap_from_sorted(ev: &[f64], mode: GapMode) -> Result<f64, ModelError> {
    let e0 = ev[0];
    match mode {
        GapMode::AboveGroundState => {
            let thr = DEGENERACY_TOL * e0.abs().max(1.0);
            ev.iter()
                .find(|&&e| e - e0 > thr)
                .map(|e| e - e0)
                .ok_or(ModelError::GapUndefined { wanted: ev.len(), needed: ev.len() + 1, dim: ev.len() })
        }
        GapMode::AboveSubspace(d) => ev
            .get(d)
            .map(|e| e - e0)
            .ok_or(ModelError::GapUndefined { wanted: d, needed: d + 1, dim: ev.len() }),
    }
}

/// Spectral gap of a Hermitian operator; dense up to `dense_cap`, Lanczos above.
pub fn gap_exact(op: &LocalOperator, mode: GapMode, dense_cap: usize) -> Result<f64, ModelError> {
    if op.dim() <= dense_cap {
        let ev = op.eigenvalues(1e-10)?;
        return gap_from_sorted(&ev, mode);
    }
    gap_iterative(op, mode, &KrylovOptions::default())
}

/// Gap from the lowest few eigenvalues of a matrix-free operator. Requests
/// more eigenvalues until the degenerate ground cluster has been passed.
pub fn gap_iterative(
    op: &dyn HermitianOperator,
    mode: GapMode,
    opts: &KrylovOptions,
) -> Result<f64, ModelError> {
    let mut count = match mode {
        GapMode::AboveSubspace(d) => d + 1,
        GapMode::AboveGroundState => 2,
    };
    loop {
        let count_now = count.min(op.dim());
        let ev = spectrum::lowest_eigenvalues(op, count_now, opts)?;
        match gap_from_sorted(&ev, mode) {
            Err(ModelError::GapUndefined { .. }) if count_now < op.dim() => count *= 2,
            other => return other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HamiltonianKind {
    Bare,
    HalfField,
}

/// Closed-form gaps of the Ising Hamiltonians on a block of `n` sites.
///
/// Ferro, bare: `2J + 2h`; ferro, half-field: `2J + h`. Antiferro, bare:
/// `2|J| - 2h` above the degenerate pair (even `n`), `2|J|` from the ground
/// state to the complement of both Néel states (odd `n`). Antiferro,
/// half-field: `2|J| - h` above the Néel pair.
pub fn gap_formula(kind: HamiltonianKind, regime: Regime, n: usize, j: f64, h: f64) -> f64 {
    let aj = j.abs();
    match (kind, regime) {
        (HamiltonianKind::Bare, Regime::Ferro) => 2.0 * aj + 2.0 * h,
        (HamiltonianKind::HalfField, Regime::Ferro) => 2.0 * aj + h,
        (HamiltonianKind::Bare, Regime::Antiferro) if n % 2 == 0 => 2.0 * aj - 2.0 * h,
        (HamiltonianKind::Bare, Regime::Antiferro) => 2.0 * aj,
        (HamiltonianKind::HalfField, Regime::Antiferro) => 2.0 * aj - h,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Axis;
    use approx::assert_abs_diff_eq;

    fn r(lo: usize, hi: usize) -> MicroRange {
        MicroRange::new(lo, hi)
    }

    #[test]
    fn h0_on_two_sites() {
        let ev = h0(r(1, 2), 1.0, 0.5).eigenvalues(1e-12).unwrap();
        assert_eq!(ev, vec![-2.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn neel_energies_on_three_sites() {
        let g = ground_data(r(4, 6), -1.0, 0.3).unwrap();
        assert_abs_diff_eq!(g.h0_energies[0], -2.3, epsilon = 1e-14);
        assert_abs_diff_eq!(g.h0_energies[1], -1.7, epsilon = 1e-14);
        let h = h0(r(4, 6), -1.0, 0.3);
        for (&b, &e) in g.indices.iter().zip(&g.h0_energies) {
            assert_eq!(h.diagonal_entry(b), e);
        }
    }

    #[test]
    fn ferro_reference_energy() {
        let g = ground_data(r(1, 5), 1.0, 0.4).unwrap();
        assert_eq!(g.indices, vec![0]);
        assert_abs_diff_eq!(g.h0_energies[0], -(4.0 * 1.0 + 5.0 * 0.4), epsilon = 1e-14);
    }

    #[test]
    fn ground_data_rejects_strong_field() {
        assert!(matches!(ground_data(r(1, 4), -1.0, 1.2), Err(ModelError::FieldTooStrong { .. })));
        assert!(matches!(ground_data(r(1, 4), 1.0, 0.0), Err(ModelError::DegenerateFerro)));
    }

    #[test]
    fn hopping_norm_on_unit_interval() {
        // free-fermion spectrum of four sites: sum of positive 2cos(k pi/5), over xi
        let v = hopping(r(1, 4), 3);
        assert_abs_diff_eq!(v.op_norm().unwrap(), 5f64.sqrt() / 3.0, epsilon = 1e-12);
        assert!(v.is_hermitian(0.0));
    }

    #[test]
    fn hopping_from_paulis() {
        let s = r(1, 3);
        let mut want = LocalOperator::zeros(s);
        for i in 1..3 {
            for ax in [Axis::X, Axis::Y] {
                let a = LocalOperator::pauli(i, ax, s).unwrap();
                let b = LocalOperator::pauli(i + 1, ax, s).unwrap();
                want.add_embedded(&a.mul(&b).unwrap(), num_complex::Complex64::new(1.0 / 6.0, 0.0)).unwrap();
            }
        }
        assert!(hopping(s, 3).sub(&want).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn k_lambda_matches_chain() {
        let p = ModelParams::new(7, 3, -1.0, 0.2, 0.05);
        let k = k_lambda(&p).unwrap();
        let direct = LocalOperator::from_matrix(r(1, 7), xxz_chain(&p).to_dense()).unwrap();
        assert!(k.sub(&direct).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn gaps_of_small_blocks() {
        let g = gap_exact(&h0(r(1, 6), -1.0, 0.3), GapMode::AboveGroundState, 1 << 12).unwrap();
        assert_abs_diff_eq!(g, 1.4, epsilon = 1e-12);
        let g = gap_exact(&h0(r(1, 7), -1.0, 0.3), GapMode::AboveSubspace(2), 1 << 12).unwrap();
        assert_abs_diff_eq!(g, 2.0, epsilon = 1e-12);
        let g = gap_exact(&hc(r(1, 5), 1.0, 0.4), GapMode::AboveGroundState, 1 << 12).unwrap();
        assert_abs_diff_eq!(g, 2.4, epsilon = 1e-12);
    }

    #[test]
    fn iterative_gap_passes_degenerate_cluster() {
        let h = h0(r(1, 6), -1.0, 0.3);
        let g = gap_iterative(&h, GapMode::AboveGroundState, &KrylovOptions::default()).unwrap();
        assert_abs_diff_eq!(g, 1.4, epsilon = 1e-9);
    }

    #[test]
    fn validation() {
        assert!(ModelParams::new(10, 3, 1.0, 0.4, 1e-3).validate().unwrap().is_empty());
        let w = ModelParams::new(10, 3, -1.0, 0.6, 1e-3).validate().unwrap();
        assert_eq!(w.len(), 1);
        assert!(ModelParams::new(10, 3, -1.0, 1.0, 1e-3).validate().is_err());
        assert!(ModelParams::new(10, 3, 1.0, 0.4, -1.0).validate().is_err());
        assert!(ModelParams::new(11, 3, 1.0, 0.4, 0.0).validate().is_err());
        let w = ModelParams::new(10, 3, 1.0, 0.2, 1e-3).validate().unwrap();
        assert!(w[0].contains("J/h"));
    }

    #[test]
    fn hooked_bonds_omitted_at_edges() {
        assert_eq!(hooked_bonds(r(1, 5), 10), vec![(5, 6)]);
        assert_eq!(hooked_bonds(r(3, 8), 10), vec![(2, 3), (8, 9)]);
        assert!(hooked_bonds(r(1, 10), 10).is_empty());
    }
}
