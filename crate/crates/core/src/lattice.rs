//! Macro lattice geometry: intervals of the coarse grid, their micro-site
//! ranges, the enlargements used by the flow, and the total order in which
//! the flow visits intervals.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("coarse-graining scale xi must be a positive multiple of 3, got {0}")]
    BadScale(usize),
    #[error("chain length {n} is not of the form 1 + (M-1)*{xi} with M >= 2")]
    BadLength { n: usize, xi: usize },
    #[error("interval {0} does not lie inside the lattice")]
    OutOfLattice(Interval),
    #[error("growth sets need I to precede J, got I={i}, J={j}")]
    NotPreceding { i: Interval, j: Interval },
    #[error("growth sets need the enlargement of {i} to be contained in {j}")]
    NotContained { i: Interval, j: Interval },
}

/// Contiguous range of micro sites `[lo, hi]`, 1-based and inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MicroRange {
    pub lo: usize,
    pub hi: usize,
}

impl MicroRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        assert!(lo >= 1 && lo <= hi, "invalid micro range [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains_site(&self, site: usize) -> bool {
        self.lo <= site && site <= self.hi
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &MicroRange) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &MicroRange) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Union of two ranges when it is itself contiguous (overlapping or adjacent).
    pub fn union(&self, other: &MicroRange) -> Option<MicroRange> {
        if self.lo > other.hi + 1 || other.lo > self.hi + 1 {
            return None;
        }
        Some(MicroRange::new(self.lo.min(other.lo), self.hi.max(other.hi)))
    }

    /// Smallest range covering both, whether or not they touch.
    pub fn hull(&self, other: &MicroRange) -> MicroRange {
        MicroRange::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn shifted(&self, by: i64) -> Option<MicroRange> {
        let lo = self.lo as i64 + by;
        let hi = self.hi as i64 + by;
        (lo >= 1).then(|| MicroRange::new(lo as usize, hi as usize))
    }

    pub fn sites(&self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }
}

impl fmt::Display for MicroRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Interval of the macro lattice: `k` consecutive edges starting at macro site `q`.
///
/// The derived order is the flow order: shorter intervals first, and among
/// intervals of equal length the one further left first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub q: usize,
    pub k: usize,
}

impl Interval {
    pub const fn new(q: usize, k: usize) -> Self {
        Self { q, k }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }
}

impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.k.cmp(&other.k).then(self.q.cmp(&other.q))
    }
}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.q, self.k)
    }
}

/// Total order on intervals; `Greater` means `a` is visited after `b`.
pub fn compare(a: Interval, b: Interval) -> Ordering {
    a.cmp(&b)
}

/// The three families of already-processed potentials whose conjugation by a
/// step generator lands in a given active target.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GrowthSets {
    /// Active intervals `K` overlapping the enlargement without containing it.
    pub active: Vec<Interval>,
    /// Diagonalized intervals whose potentials poke into the enlargement
    /// from outside.
    pub hooked: Vec<Interval>,
    /// Diagonalized intervals nested in the enlargement whose potential
    /// support sticks out of it.
    pub nested: Vec<Interval>,
}

impl GrowthSets {
    pub fn is_empty(&self) -> bool {
        self.active.is_empty() && self.hooked.is_empty() && self.nested.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacroLattice {
    n_sites: usize,
    xi: usize,
}

impl MacroLattice {
    pub fn new(n_sites: usize, xi: usize) -> Result<Self, LatticeError> {
        if xi == 0 || xi % 3 != 0 {
            return Err(LatticeError::BadScale(xi));
        }
        if n_sites < 1 + xi || (n_sites - 1) % xi != 0 {
            return Err(LatticeError::BadLength { n: n_sites, xi });
        }
        Ok(Self { n_sites, xi })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn xi(&self) -> usize {
        self.xi
    }

    /// Number of macro edges, `M - 1`.
    pub fn n_edges(&self) -> usize {
        (self.n_sites - 1) / self.xi
    }

    pub fn n_macro_sites(&self) -> usize {
        self.n_edges() + 1
    }

    /// Number of sites added on each side by the star enlargement.
    pub fn margin(&self) -> usize {
        self.xi / 3
    }

    pub fn full(&self) -> Interval {
        Interval::new(1, self.n_edges())
    }

    pub fn full_range(&self) -> MicroRange {
        MicroRange::new(1, self.n_sites)
    }

    pub fn contains(&self, a: Interval) -> bool {
        a.k >= 1 && a.q >= 1 && a.q + a.k - 1 <= self.n_edges()
    }

    fn check(&self, a: Interval) -> Result<(), LatticeError> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(LatticeError::OutOfLattice(a))
        }
    }

    /// Every interval of the lattice in flow order, ending with the full chain.
    pub fn intervals(&self) -> Vec<Interval> {
        let e = self.n_edges();
        (1..=e)
            .flat_map(|k| (1..=e - k + 1).map(move |q| Interval::new(q, k)))
            .collect()
    }

    /// Intervals processed by proper flow steps (all but the full chain).
    pub fn proper_intervals(&self) -> Vec<Interval> {
        let full = self.full();
        self.intervals().into_iter().filter(|&a| a != full).collect()
    }

    /// Next interval in flow order; `None` after the full chain.
    /// `None` as input stands for the sentinel before the first interval.
    pub fn successor(&self, a: Option<Interval>) -> Option<Interval> {
        let Some(a) = a else {
            return Some(Interval::new(1, 1));
        };
        let e = self.n_edges();
        if a.q + a.k - 1 < e {
            Some(Interval::new(a.q + 1, a.k))
        } else if a.k < e {
            Some(Interval::new(1, a.k + 1))
        } else {
            None
        }
    }

    pub fn predecessor(&self, a: Interval) -> Option<Interval> {
        if a.q > 1 {
            Some(Interval::new(a.q - 1, a.k))
        } else if a.k > 1 {
            let k = a.k - 1;
            Some(Interval::new(self.n_edges() - k + 1, k))
        } else {
            None
        }
    }

    pub fn is_boundary(&self, a: Interval) -> bool {
        a.q == 1 || a.q + a.k - 1 == self.n_edges()
    }

    pub fn micro(&self, a: Interval) -> Result<MicroRange, LatticeError> {
        self.check(a)?;
        Ok(MicroRange::new(
            1 + (a.q - 1) * self.xi,
            1 + (a.q + a.k - 1) * self.xi,
        ))
    }

    fn widen(&self, r: MicroRange, by: usize) -> MicroRange {
        MicroRange::new(r.lo.saturating_sub(by).max(1), (r.hi + by).min(self.n_sites))
    }

    /// Micro range widened by `xi/3` on each side, clipped to the chain.
    pub fn star(&self, a: Interval) -> Result<MicroRange, LatticeError> {
        Ok(self.widen(self.micro(a)?, self.margin()))
    }

    /// Star range widened by two more sites on each side, clipped.
    pub fn bar_star(&self, a: Interval) -> Result<MicroRange, LatticeError> {
        Ok(self.widen(self.star(a)?, 2))
    }

    /// Smallest lattice interval whose micro range contains the star range.
    pub fn tilde_star(&self, a: Interval) -> Result<Interval, LatticeError> {
        Ok(self.cover(self.star(a)?))
    }

    /// Smallest lattice interval whose micro range contains `r`.
    pub fn cover(&self, r: MicroRange) -> Interval {
        let left = (r.lo - 1) / self.xi;
        let right = (r.hi - 1).div_ceil(self.xi).max(left + 1);
        Interval::new(left + 1, right - left)
    }

    /// Lattice interval with exactly this micro range, if any.
    pub fn interval_of(&self, r: MicroRange) -> Option<Interval> {
        let a = self.cover(r);
        (self.contains(a) && self.micro(a).ok() == Some(r)).then_some(a)
    }

    /// Shift by `by` macro edges, if the image stays inside the lattice.
    pub fn translate(&self, a: Interval, by: i64) -> Option<Interval> {
        let q = a.q as i64 + by;
        if q < 1 {
            return None;
        }
        let b = Interval::new(q as usize, a.k);
        self.contains(b).then_some(b)
    }

    /// Whether the diagonal potential produced when `k` was processed
    /// interacts with the step generator of `i`: its support reaches into
    /// the enlargement of `i`, while `k*` itself is not nested in it.
    pub fn is_hooked(&self, k: Interval, i: Interval) -> Result<bool, LatticeError> {
        let i_star = self.star(i)?;
        Ok(self.bar_star(k)?.intersects(&i_star) && !i_star.contains(&self.star(k)?))
    }

    /// Diagonal potentials of `k` whose star is nested in the star of `i` but
    /// whose support sticks out of it.
    pub fn is_nested_overhang(&self, k: Interval, i: Interval) -> Result<bool, LatticeError> {
        let i_star = self.star(i)?;
        Ok(i_star.contains(&self.star(k)?) && !i_star.contains(&self.bar_star(k)?))
    }

    /// Target interval receiving the conjugation remainder of a hooked
    /// diagonal potential `k` at step `i`.
    pub fn hooked_target(&self, k: Interval, i: Interval) -> Result<Interval, LatticeError> {
        let a = self.micro(self.tilde_star(i)?)?;
        let b = self.micro(self.tilde_star(k)?)?;
        Ok(self.cover(a.hull(&b)))
    }

    /// Target interval receiving the conjugation remainder of an active
    /// potential `k` overlapping the enlargement of `i` without containing it.
    pub fn active_target(&self, k: Interval, i: Interval) -> Result<Interval, LatticeError> {
        let a = self.micro(self.tilde_star(i)?)?;
        Ok(self.cover(a.hull(&self.micro(k)?)))
    }

    /// Sets of potentials whose conjugation at step `i` contributes to the
    /// active target `j`.
    pub fn growth_sets(&self, i: Interval, j: Interval) -> Result<GrowthSets, LatticeError> {
        self.check(i)?;
        self.check(j)?;
        if i >= j {
            return Err(LatticeError::NotPreceding { i, j });
        }
        let i_star = self.star(i)?;
        if !self.micro(j)?.contains(&i_star) {
            return Err(LatticeError::NotContained { i, j });
        }
        let mut sets = GrowthSets::default();
        for k in self.intervals() {
            match k.cmp(&i) {
                Ordering::Greater => {
                    if k != j
                        && self.micro(k)?.intersects(&i_star)
                        && !self.micro(k)?.contains(&i_star)
                        && self.active_target(k, i)? == j
                    {
                        sets.active.push(k);
                    }
                }
                Ordering::Less => {
                    if self.is_hooked(k, i)? && self.hooked_target(k, i)? == j {
                        sets.hooked.push(k);
                    }
                    if self.tilde_star(i)? == j && self.is_nested_overhang(k, i)? {
                        sets.nested.push(k);
                    }
                }
                Ordering::Equal => {}
            }
        }
        Ok(sets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lat(n: usize, xi: usize) -> MacroLattice {
        MacroLattice::new(n, xi).unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert_eq!(MacroLattice::new(10, 4), Err(LatticeError::BadScale(4)));
        assert!(matches!(MacroLattice::new(11, 3), Err(LatticeError::BadLength { .. })));
        assert!(MacroLattice::new(4, 3).is_ok());
        assert!(MacroLattice::new(1, 3).is_err());
    }

    #[test]
    fn micro_ranges() {
        let l = lat(13, 3);
        assert_eq!(l.micro(Interval::new(2, 1)).unwrap(), MicroRange::new(4, 7));
        assert_eq!(l.micro(Interval::new(1, 4)).unwrap(), MicroRange::new(1, 13));
        assert!(l.micro(Interval::new(3, 3)).is_err());
    }

    #[test]
    fn enlargements_at_n10() {
        let l = lat(10, 3);
        let i = Interval::new(2, 1);
        assert_eq!(l.star(i).unwrap(), MicroRange::new(3, 8));
        assert_eq!(l.bar_star(i).unwrap(), MicroRange::new(1, 10));
        assert_eq!(l.tilde_star(i).unwrap(), Interval::new(1, 3));
        assert_eq!(l.star(Interval::new(1, 1)).unwrap(), MicroRange::new(1, 5));
        assert_eq!(l.tilde_star(Interval::new(1, 1)).unwrap(), Interval::new(1, 2));
    }

    #[test]
    fn enlargement_clipped_at_right_edge() {
        let l = lat(13, 3);
        let i = Interval::new(4, 1);
        assert_eq!(l.star(i).unwrap(), MicroRange::new(9, 13));
        assert_eq!(l.tilde_star(i).unwrap(), Interval::new(3, 2));
    }

    #[test]
    fn order_at_n10() {
        let l = lat(10, 3);
        let want = [(1, 1), (2, 1), (3, 1), (1, 2), (2, 2), (1, 3)];
        let got: Vec<_> = l.intervals().iter().map(|a| (a.q, a.k)).collect();
        assert_eq!(got, want);
        assert_eq!(compare(Interval::new(1, 2), Interval::new(3, 1)), Ordering::Greater);
        assert_eq!(l.successor(None), Some(Interval::new(1, 1)));
        assert_eq!(l.successor(Some(Interval::new(3, 1))), Some(Interval::new(1, 2)));
        assert_eq!(l.successor(Some(l.full())), None);
        assert_eq!(l.predecessor(Interval::new(1, 2)), Some(Interval::new(3, 1)));
    }

    #[test]
    fn growth_sets_example() {
        let l = lat(13, 3);
        let sets = l.growth_sets(Interval::new(2, 1), Interval::new(1, 3)).unwrap();
        assert!(sets.active.contains(&Interval::new(1, 2)));
        assert_eq!(sets.nested, vec![]);
        assert!(sets.hooked.contains(&Interval::new(1, 1)));
        assert!(matches!(
            l.growth_sets(Interval::new(1, 3), Interval::new(2, 1)),
            Err(LatticeError::NotPreceding { .. })
        ));
    }

    #[test]
    fn cover_and_interval_of() {
        let l = lat(13, 3);
        assert_eq!(l.cover(MicroRange::new(3, 8)), Interval::new(1, 3));
        assert_eq!(l.interval_of(MicroRange::new(4, 10)), Some(Interval::new(2, 2)));
        assert_eq!(l.interval_of(MicroRange::new(4, 9)), None);
    }

    fn lattices() -> impl Strategy<Value = MacroLattice> {
        (prop_oneof![Just(3usize), Just(6), Just(9)], 2usize..7)
            .prop_map(|(xi, m)| MacroLattice::new(1 + (m - 1) * xi, xi).unwrap())
    }

    proptest! {
        #[test]
        fn order_is_total_and_successor_walks_it(l in lattices()) {
            let all = l.intervals();
            for w in all.windows(2) {
                prop_assert_eq!(compare(w[1], w[0]), Ordering::Greater);
                prop_assert_eq!(l.successor(Some(w[0])), Some(w[1]));
                prop_assert_eq!(l.predecessor(w[1]), Some(w[0]));
            }
            prop_assert_eq!(*all.last().unwrap(), l.full());
            prop_assert_eq!(all.len(), l.n_edges() * (l.n_edges() + 1) / 2);
        }

        #[test]
        fn enlargements_nest(l in lattices()) {
            for a in l.intervals() {
                let m = l.micro(a).unwrap();
                let s = l.star(a).unwrap();
                let b = l.bar_star(a).unwrap();
                let t = l.micro(l.tilde_star(a).unwrap()).unwrap();
                prop_assert!(s.contains(&m) && b.contains(&s) && t.contains(&s));
                prop_assert!(t.contains(&b));
                let c = l.cover(s);
                prop_assert!(l.contains(c));
                prop_assert_eq!(c, l.tilde_star(a).unwrap());
            }
        }

        #[test]
        fn translation_shifts_micro_ranges(l in lattices(), by in -3i64..4) {
            for a in l.intervals() {
                if let Some(b) = l.translate(a, by) {
                    let shift = by * l.xi() as i64;
                    prop_assert_eq!(l.micro(a).unwrap().shifted(shift), Some(l.micro(b).unwrap()));
                }
            }
        }
    }
}
