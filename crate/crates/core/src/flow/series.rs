//! Order-by-order Lie-Schwinger block diagonalization of `G + λV` with
//! respect to a projector onto computational basis states.
//!
//! The generator `Z = Σ_a (x_a e_a^† - e_a x_a^†)` only has rows and columns
//! at the reference indices `e_a`, so it is stored by its columns `x_a` and
//! every commutator with it costs `O(n² r)` instead of a dense product.
//! All operators involved conserve the total magnetization, so the series
//! is solved separately inside each sector that holds a reference state.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::MicroRange;
use crate::linalg::{self, EigenFailure};
use crate::operator::LocalOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("reference state {index} is not an eigenvector of G (off-diagonal weight {defect:.3e})")]
    NotEigenvector { index: usize, defect: f64 },
    #[error("G or V mixes magnetization sectors (weight {0:.3e})")]
    MixesSectors(f64),
    #[error("spectral gap {gap:.3e} of G above the reference energies is below {floor:.1e}")]
    GapTooSmall { gap: f64, floor: f64 },
    #[error("series did not reach relative size {tol:.1e} within {max_order} orders (last ratio {ratio:.3e})")]
    NotConverged { max_order: usize, tol: f64, ratio: f64 },
    #[error("block-diagonality check failed: off-diagonal residual {residual:.3e} exceeds {tol:.1e}")]
    PostCheck { residual: f64, tol: f64 },
    #[error("operators live on different supports {0} and {1}")]
    SupportMismatch(MicroRange, MicroRange),
    #[error(transparent)]
    Eigen(#[from] EigenFailure),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesOptions {
    /// Stop once `‖λ^j Z_j‖ < rel_tol ‖λ Z_1‖`.
    pub rel_tol: f64,
    pub max_order: usize,
    pub gap_floor: f64,
    /// Allowed off-diagonal weight in the reference columns of `G`.
    pub eigvec_tol: f64,
    /// Allowed coupling between the blocks after conjugation.
    pub post_check_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-14, max_order: 40, gap_floor: 1e-6, eigvec_tol: 1e-10, post_check_tol: 1e-9 }
    }
}

/// One magnetization sector holding at least one reference state.
#[derive(Clone, Debug)]
pub struct Sector {
    /// Basis indices of the sector, ascending.
    pub indices: Vec<usize>,
    /// `(slot of the reference in the global list, position inside the sector)`.
    pub refs: Vec<(usize, usize)>,
    pub g: Mat<C64>,
    pub v: Mat<C64>,
}

/// The series problem restricted to the sectors that matter.
#[derive(Clone, Debug)]
pub struct SectorProblem {
    pub support: MicroRange,
    pub refs: Vec<usize>,
    pub energies: Vec<f64>,
    pub sectors: Vec<Sector>,
    /// Lowest eigenvalue of `G` in the sectors without reference states.
    pub outside_min: f64,
}

fn popcount_sectors(n_sites: usize) -> Vec<Vec<usize>> {
    let mut by = vec![Vec::new(); n_sites + 1];
    for b in 0..1usize << n_sites {
        by[b.count_ones() as usize].push(b);
    }
    by
}

fn sub_matrix(a: MatRef<'_, C64>, idx: &[usize]) -> Mat<C64> {
    Mat::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

impl SectorProblem {
    /// Splits dense `G` and `V` on a common support into magnetization sectors.
    pub fn from_dense(g: &LocalOperator, v: &LocalOperator, refs: &[usize], opts: &SeriesOptions) -> Result<Self, SeriesError> {
        if g.support() != v.support() {
            return Err(SeriesError::SupportMismatch(g.support(), v.support()));
        }
        let support = g.support();
        let (gm, vm) = (g.matrix(), v.matrix());
        let n = gm.nrows();
        let scale = g.max_abs().max(v.max_abs()).max(1.0);
        let mut leak = 0.0f64;
        for c in 0..n {
            for b in 0..n {
                if b.count_ones() != c.count_ones() {
                    leak = leak.max(gm[(b, c)].norm()).max(vm[(b, c)].norm());
                }
            }
        }
        if leak > opts.eigvec_tol * scale {
            return Err(SeriesError::MixesSectors(leak));
        }
        Self::from_fn(support, refs, |b, c| gm[(b, c)], |b, c| vm[(b, c)])
    }

    /// Builds the sectors from matrix entries `g(row, col)` and `v(row, col)`
    /// without ever forming the full matrices, which keeps supports of 13 to
    /// 15 sites within reach. Entries between different sectors are never
    /// read and are assumed to vanish.
    pub fn from_fn(
        support: MicroRange,
        refs: &[usize],
        g: impl Fn(usize, usize) -> C64,
        v: impl Fn(usize, usize) -> C64,
    ) -> Result<Self, SeriesError> {
        let energies: Vec<f64> = refs.iter().map(|&b| g(b, b).re).collect();
        let mut sectors = Vec::new();
        let mut outside_min = f64::INFINITY;
        for indices in popcount_sectors(support.len()) {
            let gs = Mat::from_fn(indices.len(), indices.len(), |i, j| g(indices[i], indices[j]));
            let mine: Vec<(usize, usize)> = refs
                .iter()
                .enumerate()
                .filter_map(|(slot, &b)| indices.binary_search(&b).ok().map(|pos| (slot, pos)))
                .collect();
            if mine.is_empty() {
                let n = indices.len();
                let diagonal = (0..n).all(|j| (0..n).all(|i| i == j || gs[(i, j)] == C64::new(0.0, 0.0)));
                let lo = if diagonal {
                    (0..n).map(|i| gs[(i, i)].re).fold(f64::INFINITY, f64::min)
                } else {
                    linalg::hermitian_eigenvalues(gs.as_ref())?[0]
                };
                outside_min = outside_min.min(lo);
            } else {
                let vs = Mat::from_fn(indices.len(), indices.len(), |i, j| v(indices[i], indices[j]));
                sectors.push(Sector { indices, refs: mine, g: gs, v: vs });
            }
        }
        Ok(Self { support, refs: refs.to_vec(), energies, sectors, outside_min })
    }
}

/// Anti-Hermitian generator `Y = Σ_a (y_a e_a^† - e_a y_a^†)` with
/// `y_a ⟂ e_b` for all references.
#[derive(Clone, Debug)]
pub struct Generator {
    pub support: MicroRange,
    pub refs: Vec<usize>,
    /// Column `a` is `y_a`, over the full basis of `support`.
    pub cols: Mat<C64>,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.cols.nrows()
    }

    pub fn norm(&self) -> Result<f64, EigenFailure> {
        // Y^† Y acts as Σ y y^† on the complement and as the Gram matrix of
        // the columns on the reference span, so both share the top eigenvalue.
        linalg::tall_norm(self.cols.as_ref())
    }

    pub fn is_zero(&self) -> bool {
        linalg::max_abs(self.cols.as_ref()) == 0.0
    }

    pub fn dense(&self) -> LocalOperator {
        let n = self.dim();
        let mut m = Mat::zeros(n, n);
        for (a, &e) in self.refs.iter().enumerate() {
            for i in 0..n {
                let y = self.cols[(i, a)];
                m[(i, e)] += y;
                m[(e, i)] -= y.conj();
            }
        }
        LocalOperator::from_matrix(self.support, m).expect("generator dimension matches support")
    }

    /// `exp(λ Y)`.
    pub fn unitary(&self, lambda: f64) -> Result<LocalOperator, EigenFailure> {
        let u = low_rank_unitary(&self.refs, self.cols.as_ref(), lambda)?;
        Ok(LocalOperator::from_matrix(self.support, u).expect("generator dimension matches support"))
    }
}

/// `exp(λ Y)` for `Y = Σ_a (y_a e_a^† - e_a y_a^†)`. `Y` maps the span of the
/// `e_a` and `y_a` into itself and annihilates its complement, so only a
/// small block needs exponentiating.
pub fn low_rank_unitary(refs: &[usize], cols: MatRef<'_, C64>, lambda: f64) -> Result<Mat<C64>, EigenFailure> {
    let n = cols.nrows();
    let mut u = Mat::<C64>::identity(n, n);
    if lambda == 0.0 || linalg::max_abs(cols) == 0.0 {
        return Ok(u);
    }
    let mut q: Vec<Vec<C64>> = Vec::new();
    let mut candidates: Vec<Vec<C64>> = refs
        .iter()
        .map(|&e| {
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[e] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    candidates.extend((0..refs.len()).map(|a| (0..n).map(|i| cols[(i, a)]).collect()));
    for mut v in candidates {
        for _ in 0..2 {
            for b in &q {
                let c: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                v.iter_mut().zip(b).for_each(|(x, bi)| *x -= c * bi);
            }
        }
        let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nv > 1e-14 {
            v.iter_mut().for_each(|x| *x /= nv);
            q.push(v);
        }
    }
    let k = q.len();
    let qm = Mat::from_fn(n, k, |i, j| q[j][i]);
    // Q^† (λY) Q, with Y Q assembled column by column
    let mut yq = Mat::<C64>::zeros(n, k);
    for c in 0..k {
        for (a, &e) in refs.iter().enumerate() {
            let qe = qm[(e, c)];
            let yq_dot: C64 = (0..n).map(|i| cols[(i, a)].conj() * qm[(i, c)]).sum();
            for i in 0..n {
                yq[(i, c)] += cols[(i, a)] * qe;
            }
            yq[(e, c)] -= yq_dot;
        }
    }
    let small = Mat::from_fn(k, k, |i, j| {
        (0..n).map(|r| qm[(r, i)].conj() * yq[(r, j)]).sum::<C64>() * lambda
    });
    let mut m = linalg::expm_skew(small.as_ref())?;
    for i in 0..k {
        m[(i, i)] -= C64::new(1.0, 0.0);
    }
    u += &qm * (&m * qm.adjoint());
    Ok(u)
}

/// Magnetization sector block of an operator, over the basis indices `indices`.
#[derive(Clone, Debug)]
pub struct SectorBlock {
    pub indices: Vec<usize>,
    pub block: Mat<C64>,
}

/// Result of block-diagonalizing `G + λV` against the reference projector.
#[derive(Clone, Debug)]
pub struct LsOutcome {
    pub support: MicroRange,
    pub lambda: f64,
    pub refs: Vec<usize>,
    /// `<e_a|G|e_a>` for each reference.
    pub energies: Vec<f64>,
    /// Distance from the reference energies to the rest of the spectrum of
    /// `G`, minimized over references.
    pub gap: f64,
    /// `Z / λ`.
    pub generator: Generator,
    /// `Σ_{j≥2} λ^{j-1} V_j^diag`, sector by sector.
    pub higher: Vec<SectorBlock>,
    pub terms_used: usize,
    pub z_norm: f64,
    /// Norm of the coupling between the blocks left after conjugation.
    pub off_diagonal_residual: f64,
}

impl LsOutcome {
    pub fn higher_order_diag(&self) -> LocalOperator {
        let mut op = LocalOperator::zeros(self.support);
        let m = op.matrix_mut();
        for s in &self.higher {
            for (j, &bj) in s.indices.iter().enumerate() {
                for (i, &bi) in s.indices.iter().enumerate() {
                    m[(bi, bj)] = s.block[(i, j)];
                }
            }
        }
        op
    }

    /// `Σ_j λ^{j-1} V_j^diag`, including the first order taken from `v`.
    pub fn diag_series(&self, v: &LocalOperator) -> LocalOperator {
        let mut d = first_order_diag(v, &self.refs);
        d.add_embedded(&self.higher_order_diag(), C64::new(1.0, 0.0))
            .expect("same support");
        d
    }
}

/// `P⁺ V P⁺ + P⁻ V P⁻` for the projector onto the listed basis states.
pub fn first_order_diag(v: &LocalOperator, refs: &[usize]) -> LocalOperator {
    let mut d = v.clone();
    let n = d.dim();
    let m = d.matrix_mut();
    for &e in refs {
        for i in 0..n {
            if !refs.contains(&i) {
                m[(i, e)] = C64::new(0.0, 0.0);
                m[(e, i)] = C64::new(0.0, 0.0);
            }
        }
    }
    d
}

/// `[Z, A]` for `Z = Σ_a (x_a e_a^† - e_a x_a^†)`.
fn ad_low_rank(x: MatRef<'_, C64>, pos: &[usize], a: MatRef<'_, C64>) -> Mat<C64> {
    let m = a.nrows();
    let r = pos.len();
    let a_rows = Mat::from_fn(r, m, |k, j| a[(pos[k], j)]);
    let a_cols = Mat::from_fn(m, r, |i, k| a[(i, pos[k])]);
    // X (E^† A) + (A E) X^† - E (X^† A) - (A X) E^†
    let mut out = x * a_rows.as_ref();
    out += a_cols.as_ref() * x.adjoint();
    let xa = x.adjoint() * a;
    let ax = a * x;
    for (k, &p) in pos.iter().enumerate() {
        for j in 0..m {
            out[(p, j)] -= xa[(k, j)];
        }
        for i in 0..m {
            out[(i, p)] -= ax[(i, k)];
        }
    }
    out
}

fn add_scaled(dst: &mut Mat<C64>, src: MatRef<'_, C64>, c: f64) {
    let m = dst.nrows();
    for j in 0..m {
        for i in 0..m {
            dst[(i, j)] += src[(i, j)] * c;
        }
    }
}

struct SectorSolution {
    cols: Mat<C64>,
    higher: Mat<C64>,
    terms: usize,
    gap: f64,
    residual: f64,
}

fn solve_sector(s: &Sector, energies: &[f64], lambda: f64, opts: &SeriesOptions) -> Result<SectorSolution, SeriesError> {
    let m = s.indices.len();
    let pos: Vec<usize> = s.refs.iter().map(|&(_, p)| p).collect();
    let r = pos.len();
    let scale = linalg::max_abs(s.g.as_ref()).max(1.0);
    for &(slot, p) in &s.refs {
        let defect = (0..m)
            .filter(|&i| i != p)
            .fold(0.0f64, |d, i| d.max(s.g[(i, p)].norm()));
        if defect > opts.eigvec_tol * scale {
            return Err(SeriesError::NotEigenvector { index: slot, defect });
        }
    }
    let rest: Vec<usize> = (0..m).filter(|i| !pos.contains(i)).collect();
    let g_rest = sub_matrix(s.g.as_ref(), &rest);
    let (mu, w) = linalg::hermitian_eigen(g_rest.as_ref())?;
    let e: Vec<f64> = s.refs.iter().map(|&(slot, _)| energies[slot]).collect();
    let gap = match mu.first() {
        Some(&lo) => e.iter().map(|&ea| lo - ea).fold(f64::INFINITY, f64::min),
        None => f64::INFINITY,
    };
    let mut higher = Mat::<C64>::zeros(m, m);
    let mut cols = Mat::<C64>::zeros(m, r);
    if rest.is_empty() {
        return Ok(SectorSolution { cols, higher, terms: 0, gap, residual: 0.0 });
    }
    if gap < opts.gap_floor {
        return Err(SeriesError::GapTooSmall { gap, floor: opts.gap_floor });
    }

    // Resolvent applied to the P⁺ part of column p of V_j, returned as
    // an m-vector vanishing at the reference positions.
    let resolve = |vj: &Mat<C64>, k: usize| -> Vec<C64> {
        let p = pos[k];
        let rhs: Vec<C64> = rest.iter().map(|&i| vj[(i, p)]).collect();
        let mut coef = vec![C64::new(0.0, 0.0); rest.len()];
        for (c, cf) in coef.iter_mut().enumerate() {
            let dot: C64 = (0..rest.len()).map(|i| w[(i, c)].conj() * rhs[i]).sum();
            *cf = dot / (mu[c] - e[k]);
        }
        let mut out = vec![C64::new(0.0, 0.0); m];
        for (i, &ri) in rest.iter().enumerate() {
            out[ri] = (0..rest.len()).map(|c| w[(i, c)] * coef[c]).sum();
        }
        out
    };

    let mut fact = vec![1.0f64; opts.max_order + 2];
    for p in 1..fact.len() {
        fact[p] = fact[p - 1] * p as f64;
    }
    // tg[p][s] = coefficient of λ^s in (ad Z)^p G, tv likewise for V
    let empty = || -> Vec<Vec<Option<Mat<C64>>>> { vec![Vec::new(); opts.max_order + 2] };
    let mut tg = empty();
    let mut tv = empty();
    let put = |t: &mut Vec<Vec<Option<Mat<C64>>>>, p: usize, s: usize, v: Mat<C64>| {
        if t[p].len() <= s {
            t[p].resize(s + 1, None);
        }
        t[p][s] = Some(v);
    };
    put(&mut tg, 0, 0, s.g.clone());
    put(&mut tv, 0, 0, s.v.clone());
    let mut zs: Vec<Mat<C64>> = vec![Mat::zeros(0, 0)];

    let mut reference = 0.0;
    let mut terms = 0;
    let mut last_ratio = f64::NAN;
    let mut converged = false;
    for j in 1..=opts.max_order {
        let vj = if j == 1 {
            s.v.clone()
        } else {
            for p in 1..j {
                let mut acc = Mat::<C64>::zeros(m, m);
                for rr in 1..=(j - p) {
                    if let Some(Some(prev)) = tv[p - 1].get(j - 1 - rr) {
                        acc += ad_low_rank(zs[rr].as_ref(), &pos, prev.as_ref());
                    }
                }
                put(&mut tv, p, j - 1, acc);
            }
            for p in 2..=j {
                let mut acc = Mat::<C64>::zeros(m, m);
                for rr in 1..=(j - p + 1) {
                    if let Some(Some(prev)) = tg[p - 1].get(j - rr) {
                        acc += ad_low_rank(zs[rr].as_ref(), &pos, prev.as_ref());
                    }
                }
                put(&mut tg, p, j, acc);
            }
            let mut vj = Mat::<C64>::zeros(m, m);
            for p in 2..=j {
                add_scaled(&mut vj, tg[p][j].as_ref().unwrap().as_ref(), 1.0 / fact[p]);
            }
            for p in 1..j {
                add_scaled(&mut vj, tv[p][j - 1].as_ref().unwrap().as_ref(), 1.0 / fact[p]);
            }
            vj
        };
        let mut xj = Mat::<C64>::zeros(m, r);
        for k in 0..r {
            let col = resolve(&vj, k);
            for i in 0..m {
                xj[(i, k)] = col[i];
            }
        }
        if j >= 2 {
            // V_j^diag: drop the couplings between references and the rest
            let mut d = vj;
            for &p in &pos {
                for &i in &rest {
                    d[(i, p)] = C64::new(0.0, 0.0);
                    d[(p, i)] = C64::new(0.0, 0.0);
                }
            }
            add_scaled(&mut higher, d.as_ref(), lambda.powi(j as i32 - 1));
        }
        add_scaled_cols(&mut cols, xj.as_ref(), lambda.powi(j as i32 - 1));
        terms = j;
        let size = lambda.powi(j as i32) * linalg::tall_norm(xj.as_ref())?;
        if j == 1 {
            reference = size;
            if reference == 0.0 {
                converged = true;
                break;
            }
        } else {
            last_ratio = size / reference;
            if last_ratio < opts.rel_tol {
                converged = true;
                break;
            }
        }
        let adg = ad_low_rank(xj.as_ref(), &pos, s.g.as_ref());
        put(&mut tg, 1, j, adg);
        zs.push(xj);
    }
    if !converged {
        return Err(SeriesError::NotConverged { max_order: opts.max_order, tol: opts.rel_tol, ratio: last_ratio });
    }
    let residual = sector_post_check(s, &pos, &rest, cols.as_ref(), lambda)?;
    Ok(SectorSolution { cols, higher, terms, gap, residual })
}

fn add_scaled_cols(dst: &mut Mat<C64>, src: MatRef<'_, C64>, c: f64) {
    for j in 0..dst.ncols() {
        for i in 0..dst.nrows() {
            dst[(i, j)] += src[(i, j)] * c;
        }
    }
}

/// `‖P⁺ e^{λY} (G + λV) e^{-λY} P⁻‖` inside one sector.
fn sector_post_check(s: &Sector, pos: &[usize], rest: &[usize], cols: MatRef<'_, C64>, lambda: f64) -> Result<f64, SeriesError> {
    let m = s.indices.len();
    let u = low_rank_unitary(pos, cols, lambda)?;
    let k = Mat::from_fn(m, m, |i, j| s.g[(i, j)] + s.v[(i, j)] * lambda);
    let ucols = Mat::from_fn(m, pos.len(), |i, a| u[(pos[a], i)].conj());
    let kc = k.as_ref() * ucols.as_ref();
    let out = u.as_ref() * kc.as_ref();
    let off = Mat::from_fn(rest.len(), pos.len(), |i, a| out[(rest[i], a)]);
    Ok(linalg::tall_norm(off.as_ref())?)
}

/// Runs the series in every sector holding a reference state.
pub fn solve(problem: &SectorProblem, lambda: f64, opts: &SeriesOptions) -> Result<LsOutcome, SeriesError> {
    let n = 1usize << problem.support.len();
    let r = problem.refs.len();
    let mut cols = Mat::<C64>::zeros(n, r);
    let mut higher = Vec::new();
    let mut terms = 0;
    let mut residual = 0.0f64;
    let mut gap = problem
        .energies
        .iter()
        .map(|&e| problem.outside_min - e)
        .fold(f64::INFINITY, f64::min);
    for s in &problem.sectors {
        let sol = solve_sector(s, &problem.energies, lambda, opts)?;
        for (k, &(slot, _)) in s.refs.iter().enumerate() {
            for (i, &bi) in s.indices.iter().enumerate() {
                cols[(bi, slot)] = sol.cols[(i, k)];
            }
        }
        // references of other sectors also see this sector's spectrum
        gap = gap.min(sol.gap);
        terms = terms.max(sol.terms);
        residual = residual.max(sol.residual);
        higher.push(SectorBlock { indices: s.indices.clone(), block: sol.higher });
    }
    let other_gaps = cross_sector_gaps(problem)?;
    gap = gap.min(other_gaps);
    if gap < opts.gap_floor {
        return Err(SeriesError::GapTooSmall { gap, floor: opts.gap_floor });
    }
    if residual > opts.post_check_tol {
        return Err(SeriesError::PostCheck { residual, tol: opts.post_check_tol });
    }
    let generator = Generator { support: problem.support, refs: problem.refs.clone(), cols };
    let z_norm = lambda * generator.norm()?;
    Ok(LsOutcome {
        support: problem.support,
        lambda,
        refs: problem.refs.clone(),
        energies: problem.energies.clone(),
        gap,
        generator,
        higher,
        terms_used: terms,
        z_norm,
        off_diagonal_residual: residual,
    })
}

/// Gaps between a reference energy and the non-reference spectrum of
/// another reference's sector.
fn cross_sector_gaps(problem: &SectorProblem) -> Result<f64, EigenFailure> {
    let mut gap = f64::INFINITY;
    if problem.sectors.len() < 2 {
        return Ok(gap);
    }
    for s in &problem.sectors {
        let pos: Vec<usize> = s.refs.iter().map(|&(_, p)| p).collect();
        let rest: Vec<usize> = (0..s.indices.len()).filter(|i| !pos.contains(i)).collect();
        if rest.is_empty() {
            continue;
        }
        let lo = linalg::hermitian_eigenvalues(sub_matrix(s.g.as_ref(), &rest).as_ref())?[0];
        for (slot, &e) in problem.energies.iter().enumerate() {
            if !s.refs.iter().any(|&(sl, _)| sl == slot) {
                gap = gap.min(lo - e);
            }
        }
    }
    Ok(gap)
}

/// Block-diagonalizes `G + λV` (both dense on the same support) against the
/// projector onto the basis states `refs`.
pub fn lie_schwinger(
    g: &LocalOperator,
    v: &LocalOperator,
    refs: &[usize],
    lambda: f64,
    opts: &SeriesOptions,
) -> Result<LsOutcome, SeriesError> {
    let problem = SectorProblem::from_dense(g, v, refs, opts)?;
    solve(&problem, lambda, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, ground_data};
    use approx::assert_abs_diff_eq;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    /// AF block of five sites: Ising part plus a hopping that acts only
    /// away from the Néel states, so those stay eigenvectors of `G`.
    fn af_problem() -> (LocalOperator, LocalOperator, Vec<usize>) {
        let r = MicroRange::new(1, 5);
        let refs = ground_data(r, -1.0, 0.2).unwrap().indices;
        let mut g = model::h0(r, -1.0, 0.2);
        let hop = model::hopping(r, 3);
        let mut plus = hop.clone();
        for &e in &refs {
            for i in 0..32 {
                plus.matrix_mut()[(i, e)] = c(0.0);
                plus.matrix_mut()[(e, i)] = c(0.0);
            }
        }
        g.add_embedded(&plus, c(0.05)).unwrap();
        let v = model::hopping(MicroRange::new(2, 4), 3).embed(r).unwrap();
        (g, v, refs)
    }

    #[test]
    fn conjugation_block_diagonalizes() {
        let (g, v, refs) = af_problem();
        let lambda = 0.03;
        let ls = lie_schwinger(&g, &v, &refs, lambda, &SeriesOptions::default()).unwrap();
        assert!(ls.off_diagonal_residual < 1e-12);
        let u = ls.generator.unitary(lambda).unwrap();
        let k = g.add(&v.scaled(lambda)).unwrap();
        let rotated = crate::operator::conjugate(&u, &k).unwrap();
        // the rotated Hamiltonian is G plus the diagonal series
        let mut expect = g.clone();
        expect.add_embedded(&ls.diag_series(&v), c(lambda)).unwrap();
        assert!(rotated.sub(&expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn low_rank_commutator_matches_dense() {
        let (g, v, refs) = af_problem();
        let ls = lie_schwinger(&g, &v, &refs, 0.05, &SeriesOptions::default()).unwrap();
        let y = ls.generator.dense();
        let a = g.add(&v).unwrap();
        let fast = ad_low_rank(ls.generator.cols.as_ref(), &refs, a.matrix());
        let slow = y.commutator(&a).unwrap();
        let diff = LocalOperator::from_matrix(a.support(), fast).unwrap().sub(&slow).unwrap();
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn low_rank_unitary_matches_dense_exponential() {
        let (g, v, refs) = af_problem();
        let lambda = 0.07;
        let ls = lie_schwinger(&g, &v, &refs, lambda, &SeriesOptions::default()).unwrap();
        let fast = ls.generator.unitary(lambda).unwrap();
        let slow = ls.generator.dense().scaled(lambda).expm_skew(1e-12).unwrap();
        assert!(fast.sub(&slow).unwrap().max_abs() < 1e-13);
        assert!(ls.generator.dense().adjoint().add(&ls.generator.dense()).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn first_order_matches_spectral_sum() {
        let (g, v, refs) = af_problem();
        let ls = lie_schwinger(&g, &v, &refs, 0.0, &SeriesOptions::default()).unwrap();
        assert_eq!(ls.z_norm, 0.0);
        assert_eq!(ls.higher_order_diag().max_abs(), 0.0);
        // x_a = Σ_k u_k <u_k|V|e_a> / (μ_k - E_a) over eigenpairs of G off the references
        let rest: Vec<usize> = (0..32).filter(|b| !refs.contains(b)).collect();
        let sub = Mat::from_fn(rest.len(), rest.len(), |i, j| g.get(rest[i], rest[j]));
        let (mu, w) = linalg::hermitian_eigen(sub.as_ref()).unwrap();
        for (a, &e) in refs.iter().enumerate() {
            let ea = g.get(e, e).re;
            for (i, &bi) in rest.iter().enumerate() {
                let mut x = c(0.0);
                for k in 0..rest.len() {
                    let proj: C64 = (0..rest.len()).map(|l| w[(l, k)].conj() * v.get(rest[l], e)).sum();
                    x += w[(i, k)] * proj / (mu[k] - ea);
                }
                assert_abs_diff_eq!((ls.generator.cols[(bi, a)] - x).norm(), 0.0, epsilon = 1e-14);
            }
            for &eb in &refs {
                assert_eq!(ls.generator.cols[(eb, a)], c(0.0));
            }
        }
    }

    #[test]
    fn ferro_generator_vanishes() {
        let r = MicroRange::new(1, 5);
        let g = model::h0(r, 1.0, 0.4);
        let v = model::hopping(MicroRange::new(2, 4), 3).embed(r).unwrap();
        let ls = lie_schwinger(&g, &v, &[0], 0.1, &SeriesOptions::default()).unwrap();
        assert!(ls.generator.is_zero());
        assert_eq!(ls.terms_used, 0);
    }

    #[test]
    fn errors_are_reported() {
        let (g, v, refs) = af_problem();
        let short = SeriesOptions { max_order: 2, rel_tol: 1e-30, ..Default::default() };
        assert!(matches!(lie_schwinger(&g, &v, &refs, 0.05, &short), Err(SeriesError::NotConverged { .. })));

        let flat = LocalOperator::zeros(g.support());
        assert!(matches!(
            lie_schwinger(&flat, &v, &refs, 0.05, &SeriesOptions::default()),
            Err(SeriesError::GapTooSmall { .. })
        ));

        let mut skew = g.clone();
        let other = (0..32).find(|b| !refs.contains(b) && b.count_ones() == refs[0].count_ones()).unwrap();
        skew.matrix_mut()[(other, refs[0])] = c(0.1);
        skew.matrix_mut()[(refs[0], other)] = c(0.1);
        assert!(matches!(
            lie_schwinger(&skew, &v, &refs, 0.05, &SeriesOptions::default()),
            Err(SeriesError::NotEigenvector { .. })
        ));

        let mut leak = g.clone();
        leak.matrix_mut()[(0, 1)] = c(0.1);
        leak.matrix_mut()[(1, 0)] = c(0.1);
        assert!(matches!(
            lie_schwinger(&leak, &v, &refs, 0.05, &SeriesOptions::default()),
            Err(SeriesError::MixesSectors(_))
        ));
    }

    #[test]
    fn sector_construction_matches_dense() {
        let (g, v, refs) = af_problem();
        let dense = SectorProblem::from_dense(&g, &v, &refs, &SeriesOptions::default()).unwrap();
        let lazy = SectorProblem::from_fn(g.support(), &refs, |i, j| g.get(i, j), |i, j| v.get(i, j)).unwrap();
        assert_eq!(dense.sectors.len(), lazy.sectors.len());
        assert_eq!(dense.outside_min, lazy.outside_min);
        let a = solve(&dense, 0.02, &SeriesOptions::default()).unwrap();
        let b = solve(&lazy, 0.02, &SeriesOptions::default()).unwrap();
        assert_eq!(a.generator.cols, b.generator.cols);
    }
}
