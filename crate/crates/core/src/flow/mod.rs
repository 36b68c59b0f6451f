//! The local flow: visits the intervals of the macro lattice in order, and at
//! each one conjugates the current Hamiltonian by a local unitary that
//! block-diagonalizes the interval's potential against the Ising reference
//! states of its enlargement.

pub mod series;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use series::{
    first_order_diag, lie_schwinger, low_rank_unitary, solve as solve_sectors, Generator, LsOutcome,
    Sector, SectorBlock, SectorProblem, SeriesError, SeriesOptions,
};

use crate::lattice::{Interval, LatticeError, MacroLattice, MicroRange};
use crate::linalg;
use crate::model::{self, ground_data, ModelError, ModelParams};
use crate::operator::{conjugate, sz, LocalOperator, OperatorError, MAX_DENSE_SITES};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("step {interval}: {source}")]
    Series { interval: Interval, source: SeriesError },
    #[error("all proper steps are done; only the full chain remains")]
    Finished,
    #[error("step {interval} needs {sites} sites densely, above the cap of {cap}")]
    SupportCap { interval: Interval, sites: usize, cap: usize },
    #[error("step {interval} needs the potential {missing}, which was dropped by the support cap")]
    Untracked { interval: Interval, missing: Interval },
    #[error("potential {interval} lost hermiticity (defect {defect:.3e})")]
    NotHermitian { interval: Interval, defect: f64 },
    #[error("the flow was truncated by the support cap; the full-chain Hamiltonian is unavailable")]
    Truncated,
    #[error("full chain of {n_sites} sites exceeds the dense limit ({cap} dimensions)")]
    DenseCap { n_sites: usize, cap: usize },
}

impl From<linalg::EigenFailure> for FlowError {
    fn from(e: linalg::EigenFailure) -> Self {
        FlowError::Operator(OperatorError::Eigen(e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Potentials on more sites than this are not stored; the flow then
    /// continues as far as it can and is marked truncated.
    pub max_support_sites: usize,
    /// Largest full-chain dimension handled with dense matrices.
    pub dense_cap: usize,
    /// Check the conjugation identity after every step.
    pub check_consistency: bool,
    /// Random vectors used when the full chain is too large for dense checks.
    pub sampled_vectors: usize,
    pub seed: u64,
    pub hermiticity_tol: f64,
    pub series: SeriesOptions,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            max_support_sites: 11,
            dense_cap: 1 << 12,
            check_consistency: true,
            sampled_vectors: 20,
            seed: 0,
            hermiticity_tol: 1e-10,
            series: SeriesOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    Dense,
    Sampled,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub interval: Interval,
    pub star: MicroRange,
    pub bar_star: MicroRange,
    pub tilde_star: Interval,
    /// Energies of the reference states under `G` (one ferro, `[A, B]` antiferro).
    pub energies: Vec<f64>,
    pub gap_g_plus: f64,
    pub v_norm: f64,
    pub z_norm: f64,
    /// `‖Z‖ / (ξt ‖V‖)`.
    pub z_ratio: Option<f64>,
    /// `‖P⁺ [Z/ξt, σσ_hooked] P⁻‖ / ‖V‖` on the bar enlargement.
    pub hooked_ratio: Option<f64>,
    pub diag_potential_norm: Option<f64>,
    pub series_terms_used: usize,
    pub post_check_residual: f64,
    pub consistency_residual: Option<f64>,
    pub consistency: CheckMode,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalReport {
    pub energies: Vec<f64>,
    /// Eigenvalues of the reference block of the final Hamiltonian.
    pub p_minus_eigenvalues: Vec<f64>,
    /// Bottom of the spectrum on the complement of the references.
    pub p_plus_bottom: f64,
    pub gap_g_plus: f64,
    pub z_norm: f64,
    pub series_terms_used: usize,
    pub post_check_residual: f64,
}

type Potentials = BTreeMap<Interval, Arc<LocalOperator>>;

/// Active potentials right after a step.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub after: Interval,
    pub active: Potentials,
}

#[derive(Clone, Debug)]
pub struct FlowState {
    params: ModelParams,
    lattice: MacroLattice,
    config: FlowConfig,
    current: Option<Interval>,
    active: Potentials,
    diag: Potentials,
    dropped_active: BTreeSet<Interval>,
    dropped_diag: BTreeSet<Interval>,
    truncated: bool,
    reports: Vec<StepReport>,
    history: Vec<Snapshot>,
    warnings: Vec<String>,
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Zeroes the couplings between the listed basis states and the rest,
/// keeping `P⁺ A P⁺` (`keep_refs = false`) or `P⁻ A P⁺ + P⁺ A P⁻` (`true`).
fn project(a: &LocalOperator, refs: &[usize], off_diagonal: bool) -> LocalOperator {
    let n = a.dim();
    let mut out = if off_diagonal { LocalOperator::zeros(a.support()) } else { a.clone() };
    let is_ref: Vec<bool> = (0..n).map(|b| refs.contains(&b)).collect();
    let src = a.matrix();
    let m = out.matrix_mut();
    for j in 0..n {
        for i in 0..n {
            let mixed = is_ref[i] != is_ref[j];
            if off_diagonal {
                if mixed {
                    m[(i, j)] = src[(i, j)];
                }
            } else if is_ref[i] || is_ref[j] {
                m[(i, j)] = c(0.0);
            }
        }
    }
    out
}

/// `‖P⁺ [Y, D] P⁻‖` on `bar`, for `D = Σ_bonds σᶻσᶻ` diagonal and the reference
/// states of `bar` restricting to references of the generator's support.
/// Only the generator columns are touched, so `bar` may be far too large
/// for dense matrices.
pub fn hooked_commutator_norm(
    gen: &Generator,
    bar: MicroRange,
    bonds: &[(usize, usize)],
    bar_refs: &[usize],
) -> Result<f64, FlowError> {
    let star = gen.support;
    let off = star.lo - bar.lo;
    let inner_mask = ((1usize << star.len()) - 1) << off;
    let d = |b: usize| -> f64 {
        bonds.iter().map(|&(x, y)| sz(b, x - bar.lo) * sz(b, y - bar.lo)).sum()
    };
    let nb = 1usize << bar.len();
    let mut cols = faer::Mat::<C64>::zeros(nb, bar_refs.len());
    for (k, &cref) in bar_refs.iter().enumerate() {
        let inner = (cref & inner_mask) >> off;
        let outer = cref & !inner_mask;
        let Some(a) = gen.refs.iter().position(|&e| e == inner) else {
            continue;
        };
        let dc = d(cref);
        for s in 0..gen.dim() {
            let y = gen.cols[(s, a)];
            if y.re == 0.0 && y.im == 0.0 {
                continue;
            }
            let b = outer | (s << off);
            cols[(b, k)] = y * (dc - d(b));
        }
    }
    Ok(linalg::tall_norm(cols.as_ref())?)
}

impl FlowState {
    pub fn new(params: ModelParams, config: FlowConfig) -> Result<Self, FlowError> {
        let warnings = params.validate()?;
        let lattice = params.lattice()?;
        let mut active = Potentials::new();
        let mut dropped_active = BTreeSet::new();
        for i in lattice.intervals() {
            let range = lattice.micro(i)?;
            if range.len() > config.max_support_sites {
                dropped_active.insert(i);
            } else if i.k == 1 {
                active.insert(i, Arc::new(model::v_interval(&lattice, i)?));
            }
        }
        let truncated = !dropped_active.is_empty();
        Ok(Self {
            params,
            lattice,
            config,
            current: None,
            active,
            diag: Potentials::new(),
            dropped_active,
            dropped_diag: BTreeSet::new(),
            truncated,
            reports: Vec::new(),
            history: Vec::new(),
            warnings,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn lattice(&self) -> &MacroLattice {
        &self.lattice
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn current(&self) -> Option<Interval> {
        self.current
    }

    pub fn active(&self) -> &Potentials {
        &self.active
    }

    pub fn diagonal(&self) -> &Potentials {
        &self.diag
    }

    pub fn reports(&self) -> &[StepReport] {
        &self.reports
    }

    pub fn history(&self) -> &[Snapshot] {
        &self.history
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Whether some potential was dropped by the support cap.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_dropped(&self, i: Interval) -> bool {
        self.dropped_active.contains(&i) || self.dropped_diag.contains(&i)
    }

    /// Next interval to process, or `None` once only the full chain is left.
    pub fn next_interval(&self) -> Option<Interval> {
        self.lattice
            .successor(self.current)
            .filter(|&i| i != self.lattice.full())
    }

    fn full_dense_ok(&self) -> bool {
        self.params.n_sites <= MAX_DENSE_SITES && (1usize << self.params.n_sites) <= self.config.dense_cap
    }

    fn check_mode(&self) -> CheckMode {
        if !self.config.check_consistency || self.truncated {
            CheckMode::Skipped
        } else if self.full_dense_ok() {
            CheckMode::Dense
        } else {
            CheckMode::Sampled
        }
    }

    /// `H⁰_Λ + ξt (Σ diagonal + Σ active)` on the full chain.
    pub fn assemble_k(&self) -> Result<LocalOperator, FlowError> {
        if self.truncated {
            return Err(FlowError::Truncated);
        }
        if !self.full_dense_ok() {
            return Err(FlowError::DenseCap { n_sites: self.params.n_sites, cap: self.config.dense_cap });
        }
        let full = self.lattice.full_range();
        let mut k = model::h0(full, self.params.j, self.params.h);
        let lam = c(self.params.lambda());
        for v in self.diag.values().chain(self.active.values()) {
            k.add_embedded(v, lam)?;
        }
        Ok(k)
    }

    /// `y = K x` on the full chain without forming `K`.
    pub fn apply_k(&self, x: &[C64], y: &mut [C64]) -> Result<(), FlowError> {
        if self.truncated {
            return Err(FlowError::Truncated);
        }
        apply_potentials(&self.params, &self.lattice, &self.diag, &self.active, x, y)
    }

    /// `H⁰_{I*} + ξt Σ_{K processed, K̄* ⊆ I*} V_{K̄*}`.
    pub fn assemble_g(&self, i: Interval) -> Result<LocalOperator, FlowError> {
        let star = self.lattice.star(i)?;
        let mut g = model::h0(star, self.params.j, self.params.h);
        let lam = c(self.params.lambda());
        for k in self.lattice.intervals().into_iter().filter(|&k| k < i) {
            if !star.contains(&self.lattice.bar_star(k)?) {
                continue;
            }
            match self.diag.get(&k) {
                Some(v) => g.add_embedded(v, lam)?,
                None if self.dropped_diag.contains(&k) => {
                    return Err(FlowError::Untracked { interval: i, missing: k })
                }
                None => {}
            }
        }
        Ok(g)
    }

    fn zero_on(&self, i: Interval) -> Result<LocalOperator, FlowError> {
        Ok(LocalOperator::zeros(self.lattice.micro(i)?))
    }

    /// Processes the next interval.
    pub fn apply_step(&mut self) -> Result<&StepReport, FlowError> {
        let i = self.next_interval().ok_or(FlowError::Finished)?;
        let lat = self.lattice;
        let p = self.params;
        let lambda = p.lambda();
        let cap = self.config.max_support_sites;
        let star = lat.star(i)?;
        let bar = lat.bar_star(i)?;
        let tilde = lat.tilde_star(i)?;
        if star.len() > cap {
            return Err(FlowError::SupportCap { interval: i, sites: star.len(), cap });
        }
        if self.dropped_active.contains(&i) {
            return Err(FlowError::Untracked { interval: i, missing: i });
        }
        let mode = self.check_mode();
        let before = match mode {
            CheckMode::Dense => Some(Before::Dense(self.assemble_k()?)),
            CheckMode::Sampled => Some(Before::Sampled(self.diag.clone(), self.active.clone())),
            CheckMode::Skipped => None,
        };

        let v_i = match self.active.get(&i) {
            Some(v) => (**v).clone(),
            None => self.zero_on(i)?,
        };
        let v_norm = v_i.op_norm()?;
        let g = self.assemble_g(i)?;
        let refs = ground_data(star, p.j, p.h)?.indices;
        let v_star = v_i.embed(star)?;
        let ls = lie_schwinger(&g, &v_star, &refs, lambda, &self.config.series)
            .map_err(|source| FlowError::Series { interval: i, source })?;
        let u = ls.generator.unitary(lambda)?;
        let moves = lambda != 0.0 && !ls.generator.is_zero();

        let bonds = model::hooked_bonds(star, p.n_sites);
        let bar_tracked = bar.len() <= cap;
        let bar_refs = ground_data(bar, p.j, p.h)?.indices;
        let hooked_ratio = if bonds.is_empty() || v_norm == 0.0 {
            None
        } else {
            Some(hooked_commutator_norm(&ls.generator, bar, &bonds, &bar_refs)? / v_norm)
        };

        let mut contrib: BTreeMap<Interval, LocalOperator> = BTreeMap::new();
        let mut poisoned: BTreeSet<Interval> = BTreeSet::new();
        let mut lost = false;
        let dropped_targets = &self.dropped_active;
        // Returns false when the target is beyond the support cap.
        let add = |target: Interval, op: LocalOperator, contrib: &mut BTreeMap<Interval, LocalOperator>| -> Result<bool, FlowError> {
            if dropped_targets.contains(&target) {
                return Ok(false);
            }
            let range = lat.micro(target)?;
            let slot = contrib.entry(target).or_insert_with(|| LocalOperator::zeros(range));
            slot.add_embedded(&op, c(1.0))?;
            Ok(true)
        };

        // New diagonal potential on the bar enlargement, and the parts of the
        // hooked Ising bonds' conjugation that leave it.
        let new_diag = if bar_tracked {
            let mut d = first_order_diag(&v_star, &refs).embed(bar)?;
            if moves && !bonds.is_empty() {
                let hook = model::ising_bonds(&bonds, bar)?.scaled(-p.j);
                let y = ls.generator.dense().embed(bar)?;
                let ad = y.commutator(&hook)?;
                d.add_embedded(&project(&ad, &bar_refs, false), c(1.0))?;
                lost |= !add(tilde, project(&ad, &bar_refs, true), &mut contrib)?;
                let mut rem = conjugate(&u, &hook)?.sub(&hook)?;
                rem.add_embedded(&ad, c(-lambda))?;
                lost |= !add(tilde, rem.scaled(1.0 / lambda), &mut contrib)?;
            }
            Some(d)
        } else {
            lost = true;
            None
        };
        if moves {
            lost |= !add(tilde, ls.higher_order_diag(), &mut contrib)?;
        }

        // Potentials not yet processed.
        let mut replaced: Vec<(Interval, LocalOperator)> = Vec::new();
        let others: Vec<Interval> = lat.intervals().into_iter().filter(|&k| k > i).collect();
        for k in others {
            let mk = lat.micro(k)?;
            if !moves || !mk.intersects(&star) {
                continue;
            }
            let dropped = self.dropped_active.contains(&k);
            if mk.contains(&star) {
                if let (false, Some(vk)) = (dropped, self.active.get(&k)) {
                    replaced.push((k, conjugate(&u, vk)?));
                }
                continue;
            }
            let target = lat.active_target(k, i)?;
            if dropped {
                poisoned.insert(target);
            } else if let Some(vk) = self.active.get(&k) {
                if !self.dropped_active.contains(&target) {
                    lost |= !add(target, conjugate(&u, vk)?.sub(vk)?, &mut contrib)?;
                } else {
                    lost = true;
                }
            }
        }

        // Diagonal potentials of earlier steps that reach into the enlargement.
        let earlier: Vec<Interval> = lat.intervals().into_iter().filter(|&k| k < i).collect();
        for k in earlier {
            if !moves {
                break;
            }
            let target = if lat.is_nested_overhang(k, i)? {
                tilde
            } else if lat.is_hooked(k, i)? {
                lat.hooked_target(k, i)?
            } else {
                continue;
            };
            if self.dropped_active.contains(&target) {
                lost = true;
            } else if self.dropped_diag.contains(&k) {
                poisoned.insert(target);
            } else if let Some(vd) = self.diag.get(&k) {
                lost |= !add(target, conjugate(&u, vd)?.sub(vd)?, &mut contrib)?;
            }
        }

        // Commit.
        self.active.remove(&i);
        let tol = self.config.hermiticity_tol;
        let sym = |k: Interval, op: &LocalOperator| -> Result<LocalOperator, FlowError> {
            op.symmetrized(tol).map_err(|e| match e {
                OperatorError::NotHermitian { defect, .. } => FlowError::NotHermitian { interval: k, defect },
                other => other.into(),
            })
        };
        for (k, op) in replaced {
            self.active.insert(k, Arc::new(sym(k, &op)?));
        }
        for (k, op) in contrib {
            if poisoned.contains(&k) {
                continue;
            }
            let mut cur = match self.active.get(&k) {
                Some(v) => (**v).clone(),
                None => self.zero_on(k)?,
            };
            cur.add_embedded(&op, c(1.0))?;
            self.active.insert(k, Arc::new(sym(k, &cur)?));
        }
        for k in poisoned {
            log::warn!("potential {k} receives a contribution from a dropped potential; dropping it");
            self.active.remove(&k);
            self.dropped_active.insert(k);
            lost = true;
        }
        let diag_potential_norm = match new_diag {
            Some(d) => {
                let d = sym(i, &d)?;
                let nrm = d.op_norm()?;
                self.diag.insert(i, Arc::new(d));
                Some(nrm)
            }
            None => {
                self.dropped_diag.insert(i);
                None
            }
        };
        self.truncated |= lost;
        self.current = Some(i);

        let (consistency_residual, consistency) = match before {
            Some(_) if self.truncated => (None, CheckMode::Skipped),
            Some(Before::Dense(k_prev)) => {
                let k_new = self.assemble_k()?;
                let full = lat.full_range();
                let rotated = conjugate(&u.embed(full)?, &k_prev)?;
                (Some(k_new.sub(&rotated)?.frobenius()), CheckMode::Dense)
            }
            Some(Before::Sampled(diag, active)) => {
                (Some(self.sampled_residual(&u, &diag, &active)?), CheckMode::Sampled)
            }
            None => (None, CheckMode::Skipped),
        };

        let z_ratio = (lambda > 0.0 && v_norm > 0.0).then(|| ls.z_norm / (lambda * v_norm));
        self.reports.push(StepReport {
            interval: i,
            star,
            bar_star: bar,
            tilde_star: tilde,
            energies: ls.energies.clone(),
            gap_g_plus: ls.gap,
            v_norm,
            z_norm: ls.z_norm,
            z_ratio,
            hooked_ratio,
            diag_potential_norm,
            series_terms_used: ls.terms_used,
            post_check_residual: ls.off_diagonal_residual,
            consistency_residual,
            consistency,
            truncated: self.truncated,
        });
        self.history.push(Snapshot { after: i, active: self.active.clone() });
        Ok(self.reports.last().expect("just pushed"))
    }

    /// Largest `‖(K_new - U K_old U^†) v‖` over random unit vectors.
    fn sampled_residual(&self, u: &LocalOperator, diag: &Potentials, active: &Potentials) -> Result<f64, FlowError> {
        let full = self.lattice.full_range();
        let dim = 1usize << full.len();
        let ud = u.adjoint();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ self.reports.len() as u64);
        let mut worst = 0.0f64;
        for _ in 0..self.config.sampled_vectors {
            let mut v: Vec<C64> = (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= nv);
            let mut a = vec![c(0.0); dim];
            self.apply_k(&v, &mut a)?;
            let mut w = vec![c(0.0); dim];
            ud.apply_embedded(full, &v, &mut w)?;
            let mut kw = vec![c(0.0); dim];
            apply_potentials(&self.params, &self.lattice, diag, active, &w, &mut kw)?;
            let mut b = vec![c(0.0); dim];
            u.apply_embedded(full, &kw, &mut b)?;
            let r = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(r);
        }
        Ok(worst)
    }

    /// Runs every proper step.
    pub fn run(&mut self) -> Result<(), FlowError> {
        while self.next_interval().is_some() {
            self.apply_step()?;
        }
        Ok(())
    }

    /// Block-diagonalizes the full chain against its reference states.
    pub fn finalize(&self) -> Result<FinalReport, FlowError> {
        if self.next_interval().is_some() {
            return Err(FlowError::Untracked { interval: self.lattice.full(), missing: self.next_interval().unwrap() });
        }
        if self.truncated {
            return Err(FlowError::Truncated);
        }
        if !self.full_dense_ok() {
            return Err(FlowError::DenseCap { n_sites: self.params.n_sites, cap: self.config.dense_cap });
        }
        let p = self.params;
        let full = self.lattice.full_range();
        let lam = p.lambda();
        let mut g = model::h0(full, p.j, p.h);
        for v in self.diag.values() {
            g.add_embedded(v, c(lam))?;
        }
        let v = match self.active.get(&self.lattice.full()) {
            Some(v) => (**v).clone(),
            None => LocalOperator::zeros(full),
        };
        let refs = ground_data(full, p.j, p.h)?.indices;
        let ls = lie_schwinger(&g, &v, &refs, lam, &self.config.series)
            .map_err(|source| FlowError::Series { interval: self.lattice.full(), source })?;
        let mut k = g;
        k.add_embedded(&ls.diag_series(&v), c(lam))?;
        let r = refs.len();
        let block = faer::Mat::from_fn(r, r, |a, b| k.get(refs[a], refs[b]));
        let p_minus_eigenvalues = linalg::hermitian_eigenvalues(linalg::hermitian_part(block.as_ref()).as_ref())?;
        let rest: Vec<usize> = (0..k.dim()).filter(|b| !refs.contains(b)).collect();
        let km = k.matrix();
        let sub = faer::Mat::from_fn(rest.len(), rest.len(), |a, b| km[(rest[a], rest[b])]);
        let p_plus_bottom = linalg::hermitian_eigenvalues(linalg::hermitian_part(sub.as_ref()).as_ref())?[0];
        Ok(FinalReport {
            energies: ls.energies.clone(),
            p_minus_eigenvalues,
            p_plus_bottom,
            gap_g_plus: ls.gap,
            z_norm: ls.z_norm,
            series_terms_used: ls.terms_used,
            post_check_residual: ls.off_diagonal_residual,
        })
    }
}

enum Before {
    Dense(LocalOperator),
    Sampled(Potentials, Potentials),
}

fn apply_potentials(
    p: &ModelParams,
    lattice: &MacroLattice,
    diag: &Potentials,
    active: &Potentials,
    x: &[C64],
    y: &mut [C64],
) -> Result<(), FlowError> {
    let full = lattice.full_range();
    let n = full.len();
    for (b, yb) in y.iter_mut().enumerate() {
        *yb = x[b] * model::h0_energy(b, n, p.j, p.h);
    }
    let lam = p.lambda();
    let mut tmp = vec![c(0.0); x.len()];
    for v in diag.values().chain(active.values()) {
        v.apply_embedded(full, x, &mut tmp)?;
    }
    for (yb, t) in y.iter_mut().zip(&tmp) {
        *yb += t * lam;
    }
    Ok(())
}

/// Starts a flow; shorthand for [`FlowState::new`].
pub fn init_flow(params: ModelParams, config: FlowConfig) -> Result<FlowState, FlowError> {
    FlowState::new(params, config)
}
