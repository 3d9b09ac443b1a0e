//! Exact cube arithmetic for the standard dyadic grid and its 2^n
//! one-third-shifted companions.
//!
//! A grid cube is `2^{-k}([0,1)^n + j + (-1)^k t)` with level `k`, integer
//! index vector `j` and shift `t in {0, 1/3}^n`. The sign alternation makes
//! consecutive levels of a shifted grid nest. All endpoints are rationals
//! with denominator `3 * 2^k`, so membership and containment tests are exact.

use crate::{Error, Result};
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Exact scalar used for all cube geometry.
pub type Rat = Ratio<i128>;

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rat {
    Ratio::new(num as i128, den as i128)
}

/// `2^k` as an exact rational, `k` of either sign.
pub fn pow2(k: i32) -> Rat {
    if k >= 0 {
        Ratio::from_integer(1i128 << k)
    } else {
        Ratio::new(1, 1i128 << (-k))
    }
}

/// Floor of a rational to an integer.
pub fn rat_floor(r: Rat) -> i128 {
    r.numer().div_euclid(*r.denom())
}

/// Ceiling of a rational to an integer.
pub fn rat_ceil(r: Rat) -> i128 {
    -rat_floor(-r)
}

pub fn rat_to_f64(r: Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Shift selector: bit `i` set means coordinate `i` uses the 1/3 shift.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Shift(pub u32);

impl Shift {
    pub const NONE: Shift = Shift(0);

    /// All `2^n` shifts, the unshifted grid first.
    pub fn all(n: usize) -> impl Iterator<Item = Shift> {
        (0..(1u32 << n)).map(Shift)
    }

    pub fn is_third(self, axis: usize) -> bool {
        self.0 >> axis & 1 == 1
    }

    /// Signed shift offset `(-1)^k t_i` at level `k`.
    pub fn offset(self, axis: usize, level: i32) -> Rat {
        if !self.is_third(axis) {
            return Rat::zero();
        }
        let sign = if level.rem_euclid(2) == 0 { 1 } else { -1 };
        Ratio::new(sign, 3)
    }

    /// Digits for the serialized form, one per axis: `0` or `1`.
    pub fn digits(self, n: usize) -> String {
        (0..n)
            .map(|i| if self.is_third(i) { '1' } else { '0' })
            .collect()
    }

    pub fn from_digits(s: &str) -> Result<Shift> {
        let mut bits = 0u32;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << i,
                _ => return Err(Error::Parse(format!("bad shift digits {s:?}"))),
            }
        }
        Ok(Shift(bits))
    }
}

impl fmt::Debug for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Shift({:b})", self.0)
    }
}

/// Half-open cube of one of the shifted dyadic grids.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: i32,
    pub index: Vec<i64>,
    pub shift: Shift,
}

impl DyadicCube {
    pub fn new(level: i32, index: Vec<i64>, shift: Shift) -> Self {
        DyadicCube { level, index, shift }
    }

    pub fn n(&self) -> usize {
        self.index.len()
    }

    /// Side length `2^{-level}`.
    pub fn side(&self) -> Rat {
        pow2(-self.level)
    }

    pub fn volume(&self) -> Rat {
        pow2(-self.level * self.n() as i32)
    }

    pub fn lower(&self, axis: usize) -> Rat {
        (Rat::from_integer(self.index[axis] as i128) + self.shift.offset(axis, self.level))
            * self.side()
    }

    pub fn upper(&self, axis: usize) -> Rat {
        (Rat::from_integer(self.index[axis] as i128 + 1) + self.shift.offset(axis, self.level))
            * self.side()
    }

    pub fn contains_point(&self, x: &[Rat]) -> bool {
        debug_assert_eq!(x.len(), self.n());
        (0..self.n()).all(|i| self.lower(i) <= x[i] && x[i] < self.upper(i))
    }

    /// Containment as half-open boxes. Works across grids.
    pub fn contains_cube(&self, other: &DyadicCube) -> bool {
        (0..self.n())
            .all(|i| self.lower(i) <= other.lower(i) && other.upper(i) <= self.upper(i))
    }

    pub fn center(&self) -> Vec<Rat> {
        (0..self.n())
            .map(|i| (self.lower(i) + self.upper(i)) / 2)
            .collect()
    }

    /// Parent cube in the same grid (pure grid operation, no root bound).
    pub fn parent_cube(&self) -> DyadicCube {
        let k = self.level;
        let idx = self
            .index
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                // First child of parent p has index 2p + (-1)^{k-1} e_i, so
                // p = floor((j + (-1)^k e_i) / 2) with e_i the 1/3 indicator.
                let e = if self.shift.is_third(i) {
                    if k.rem_euclid(2) == 0 {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                };
                (j + e).div_euclid(2)
            })
            .collect();
        DyadicCube::new(k - 1, idx, self.shift)
    }

    /// The `2^n` children that partition this cube at the next level.
    pub fn children(&self) -> Vec<DyadicCube> {
        let n = self.n();
        let k = self.level;
        let first: Vec<i64> = self
            .index
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let e = if self.shift.is_third(i) {
                    if k.rem_euclid(2) == 0 {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                };
                2 * j + e
            })
            .collect();
        (0..(1usize << n))
            .map(|mask| {
                let idx = (0..n)
                    .map(|i| first[i] + ((mask >> i) & 1) as i64)
                    .collect();
                DyadicCube::new(k + 1, idx, self.shift)
            })
            .collect()
    }
}

impl fmt::Debug for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q[k={} t={}", self.level, self.shift.digits(self.n()))?;
        for i in 0..self.n() {
            write!(f, " {}..{}", self.lower(i), self.upper(i))?;
        }
        write!(f, "]")
    }
}

/// Cube of grid `shift` at level `level` containing the point `x`.
///
/// Total: every point lies in exactly one cube per (level, shift).
pub fn cube_at(x: &[Rat], level: i32, shift: Shift) -> DyadicCube {
    let scale = pow2(level);
    let index = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let j = rat_floor(xi * scale - shift.offset(i, level));
            i64::try_from(j).expect("cube index overflow")
        })
        .collect();
    DyadicCube::new(level, index, shift)
}

/// Finite analysis window: a root box with integer corners carrying a dyadic
/// mesh at `max_level`. All cube scans stay inside the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootSystem {
    n: usize,
    corner: Vec<i64>,
    side: i64,
    max_level: u32,
}

impl RootSystem {
    pub fn new(corner: Vec<i64>, side: i64, max_level: u32) -> Result<Arc<RootSystem>> {
        let n = corner.len();
        if n == 0 {
            return Err(Error::InvalidExponents("dimension must be >= 1".into()));
        }
        if side < 1 {
            return Err(Error::InvalidExponents("root side must be >= 1".into()));
        }
        let per_axis = (side as u128) << max_level;
        let cells = per_axis.checked_pow(n as u32).filter(|&c| c <= 1 << 28);
        if cells.is_none() {
            return Err(Error::InvalidExponents(format!(
                "mesh too fine: ({side} * 2^{max_level})^{n} cells"
            )));
        }
        Ok(Arc::new(RootSystem { n, corner, side, max_level }))
    }

    /// One-dimensional system `[lo, hi)`, the common experimental setup.
    pub fn interval(lo: i64, hi: i64, max_level: u32) -> Result<Arc<RootSystem>> {
        if hi <= lo {
            return Err(Error::InvalidExponents(format!("empty root [{lo}, {hi})")));
        }
        RootSystem::new(vec![lo], hi - lo, max_level)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_level(&self) -> i32 {
        self.max_level as i32
    }

    pub fn side(&self) -> i64 {
        self.side
    }

    pub fn corner(&self, axis: usize) -> i64 {
        self.corner[axis]
    }

    pub fn root_lower(&self, axis: usize) -> Rat {
        Rat::from_integer(self.corner[axis] as i128)
    }

    pub fn root_upper(&self, axis: usize) -> Rat {
        Rat::from_integer((self.corner[axis] + self.side) as i128)
    }

    /// Mesh cells per axis: `side * 2^max_level`.
    pub fn cells_per_axis(&self) -> i64 {
        self.side << self.max_level
    }

    pub fn num_cells(&self) -> usize {
        (self.cells_per_axis() as usize).pow(self.n as u32)
    }

    /// Mesh cell width `2^{-max_level}`.
    pub fn cell_side(&self) -> Rat {
        pow2(-(self.max_level as i32))
    }

    pub fn cell_volume(&self) -> f64 {
        rat_to_f64(self.cell_side()).powi(self.n as i32)
    }

    pub fn contains_cube(&self, q: &DyadicCube) -> bool {
        q.n() == self.n
            && (0..self.n)
                .all(|i| self.root_lower(i) <= q.lower(i) && q.upper(i) <= self.root_upper(i))
    }

    pub fn contains_point(&self, x: &[Rat]) -> bool {
        (0..self.n).all(|i| self.root_lower(i) <= x[i] && x[i] < self.root_upper(i))
    }

    /// Parent within the system; stepping past the root is an error.
    pub fn parent(&self, q: &DyadicCube) -> Result<DyadicCube> {
        let p = q.parent_cube();
        if self.contains_cube(&p) {
            Ok(p)
        } else {
            Err(Error::OutOfSystem(format!("parent of {q:?} leaves the root")))
        }
    }

    /// Coarsest level at which some cube of `shift` fits inside the root.
    /// Returns `None` when even single mesh cells do not fit (cannot happen
    /// for valid systems).
    pub fn coarsest_level(&self, shift: Shift) -> Option<i32> {
        // Smallest k with 2^{-k} <= side; shifted grids may need one more.
        let mut k = -(63 - (self.side as u64).leading_zeros() as i32);
        while k <= self.max_level() {
            if !self.level_range(k, shift).is_empty() {
                return Some(k);
            }
            k += 1;
        }
        None
    }

    /// Per-axis index ranges `[jmin, jmax)` of level-`k` cubes of grid
    /// `shift` lying fully inside the root.
    pub fn level_range(&self, k: i32, shift: Shift) -> LevelRange {
        let scale = pow2(k);
        let mut jmin = Vec::with_capacity(self.n);
        let mut jmax = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let off = shift.offset(i, k);
            // lower >= root_lower  <=>  j >= root_lower * 2^k - off
            let lo = rat_ceil(self.root_lower(i) * scale - off);
            // upper <= root_upper  <=>  j <= root_upper * 2^k - off - 1
            let hi = rat_floor(self.root_upper(i) * scale - off) - 1;
            jmin.push(lo as i64);
            jmax.push(hi as i64 + 1);
        }
        LevelRange { level: k, shift, jmin, jmax }
    }

    /// Flat row-major index of the mesh cell containing `x`, if inside.
    pub fn cell_of_point(&self, x: &[Rat]) -> Option<usize> {
        let scale = pow2(self.max_level());
        let per = self.cells_per_axis();
        let mut flat = 0usize;
        for i in 0..self.n {
            let c = rat_floor((x[i] - self.root_lower(i)) * scale);
            if c < 0 || c >= per as i128 {
                return None;
            }
            flat = flat * per as usize + c as usize;
        }
        Some(flat)
    }

    /// Multi-index of a flat mesh cell.
    pub fn cell_coords(&self, flat: usize) -> Vec<i64> {
        let per = self.cells_per_axis() as usize;
        let mut rem = flat;
        let mut out = vec![0i64; self.n];
        for i in (0..self.n).rev() {
            out[i] = (rem % per) as i64;
            rem /= per;
        }
        out
    }

    pub fn cell_lower(&self, coords: &[i64]) -> Vec<Rat> {
        coords
            .iter()
            .enumerate()
            .map(|(i, &c)| self.root_lower(i) + Rat::from_integer(c as i128) * self.cell_side())
            .collect()
    }

    pub fn cell_center(&self, flat: usize) -> Vec<Rat> {
        let coords = self.cell_coords(flat);
        let half = self.cell_side() / 2;
        self.cell_lower(&coords).into_iter().map(|l| l + half).collect()
    }
}

/// Rectangular index range of the cubes of one grid and level inside a root.
#[derive(Clone, Debug)]
pub struct LevelRange {
    pub level: i32,
    pub shift: Shift,
    pub jmin: Vec<i64>,
    pub jmax: Vec<i64>,
}

impl LevelRange {
    pub fn n(&self) -> usize {
        self.jmin.len()
    }

    pub fn is_empty(&self) -> bool {
        (0..self.n()).any(|i| self.jmax[i] <= self.jmin[i])
    }

    pub fn count(&self) -> usize {
        (0..self.n())
            .map(|i| (self.jmax[i] - self.jmin[i]).max(0) as usize)
            .product()
    }

    pub fn contains_index(&self, index: &[i64]) -> bool {
        (0..self.n()).all(|i| self.jmin[i] <= index[i] && index[i] < self.jmax[i])
    }

    pub fn flat(&self, index: &[i64]) -> Option<usize> {
        if !self.contains_index(index) {
            return None;
        }
        let mut f = 0usize;
        for i in 0..self.n() {
            f = f * (self.jmax[i] - self.jmin[i]) as usize + (index[i] - self.jmin[i]) as usize;
        }
        Some(f)
    }

    pub fn index(&self, mut flat: usize) -> Vec<i64> {
        let n = self.n();
        let mut out = vec![0i64; n];
        for i in (0..n).rev() {
            let w = (self.jmax[i] - self.jmin[i]) as usize;
            out[i] = self.jmin[i] + (flat % w) as i64;
            flat /= w;
        }
        out
    }

    pub fn cube(&self, flat: usize) -> DyadicCube {
        DyadicCube::new(self.level, self.index(flat), self.shift)
    }

    pub fn iter_cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..self.count()).map(move |f| self.cube(f))
    }
}

/// Find a grid cube covering an arbitrary half-open cube `[lower, lower+side)^n`
/// with side at most `6 * side`.
///
/// If the query is itself a grid cube it is returned unchanged. Otherwise the
/// search is exhaustive over the two candidate levels (grid side in
/// `(3s/2, 3s]` and `(3s, 6s]`, coarser first) and all `2^n` shifts; the
/// shifted-grid covering property guarantees the coarser level always admits
/// a cover, so exhaustion is a hard bug.
pub fn covering_cube(lower: &[Rat], side: Rat) -> (Shift, DyadicCube) {
    let n = lower.len();
    assert!(side.is_positive(), "covering_cube needs positive side");

    // Self-cover: side 2^{-k} and every coordinate on the grid lattice.
    if let Some(k) = log2_exact(side) {
        for t in Shift::all(n) {
            let scale = pow2(-k);
            let aligned = (0..n).all(|i| (lower[i] / scale - t.offset(i, k)).is_integer());
            if aligned {
                let q = cube_at(lower, k, t);
                debug_assert!((0..n).all(|i| q.lower(i) == lower[i]));
                return (t, q);
            }
        }
    }

    // Unique k0 with 2^{-k0} in (3s, 6s], then the finer neighbor.
    let mut k0 = -(rat_to_f64(side) * 6.0).log2().floor() as i32;
    while pow2(-k0) > side * 6 {
        k0 += 1;
    }
    while pow2(-k0) <= side * 3 {
        k0 -= 1;
    }
    for k in [k0, k0 + 1] {
        for t in Shift::all(n) {
            let q = cube_at(lower, k, t);
            let fits = (0..n).all(|i| lower[i] + side <= q.upper(i));
            if fits {
                debug_assert!(q.side() <= side * 6);
                return (t, q);
            }
        }
    }
    unreachable!("covering cube must exist with side ratio <= 6 (query side {side})")
}

/// `log2` of an exact power of two, else `None`. Returns `k` with `r = 2^{-k}`
/// in the level convention.
fn log2_exact(r: Rat) -> Option<i32> {
    let (num, den) = (*r.numer(), *r.denom());
    if num <= 0 {
        return None;
    }
    if num == 1 && (den as u128).is_power_of_two() {
        Some(den.trailing_zeros() as i32)
    } else if den == 1 && (num as u128).is_power_of_two() {
        Some(-(num.trailing_zeros() as i32))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rat {
        rat(n, d)
    }

    #[test]
    fn cube_at_unit_cell() {
        let q = cube_at(&[r(1, 4)], 0, Shift::NONE);
        assert_eq!(q.lower(0), r(0, 1));
        assert_eq!(q.upper(0), r(1, 1));
    }

    #[test]
    fn cube_at_shifted_level_zero() {
        // x = 0.9 on the shifted grid at level 0 lands in [1/3, 4/3).
        let q = cube_at(&[r(9, 10)], 0, Shift(1));
        assert_eq!(q.lower(0), r(1, 3));
        assert_eq!(q.upper(0), r(4, 3));
    }

    #[test]
    fn cube_at_negative_coordinate() {
        let q = cube_at(&[r(-1, 10)], 1, Shift::NONE);
        assert_eq!(q.lower(0), r(-1, 2));
        assert_eq!(q.upper(0), r(0, 1));
    }

    #[test]
    fn children_partition_unit_interval() {
        let q = cube_at(&[r(0, 1)], 0, Shift::NONE);
        let ch = q.children();
        assert_eq!(ch.len(), 2);
        assert_eq!(ch[0].lower(0), r(0, 1));
        assert_eq!(ch[0].upper(0), r(1, 2));
        assert_eq!(ch[1].lower(0), r(1, 2));
        assert_eq!(ch[1].upper(0), r(1, 1));
        assert_eq!(ch[0].parent_cube(), q);
        assert_eq!(ch[1].parent_cube(), q);
    }

    #[test]
    fn shifted_children_partition_parent() {
        // Children of [1/3, 4/3) are the two level-1 shifted cells covering it.
        let q = DyadicCube::new(0, vec![0], Shift(1));
        assert_eq!(q.lower(0), r(1, 3));
        let ch = q.children();
        assert_eq!(ch[0].lower(0), r(1, 3));
        assert_eq!(ch[0].upper(0), r(5, 6));
        assert_eq!(ch[1].lower(0), r(5, 6));
        assert_eq!(ch[1].upper(0), r(4, 3));
        for c in &ch {
            assert_eq!(c.parent_cube(), q);
        }
    }

    #[test]
    fn parent_beyond_root_is_out_of_system() {
        let sys = RootSystem::interval(0, 1, 3).unwrap();
        let top = cube_at(&[r(0, 1)], 0, Shift::NONE);
        assert!(sys.parent(&top).is_err());
        let half = cube_at(&[r(0, 1)], 1, Shift::NONE);
        assert_eq!(sys.parent(&half).unwrap(), top);
    }

    #[test]
    fn covering_examples() {
        // [0.4, 0.6): standard grid at the coarse candidate level.
        let (t, q) = covering_cube(&[r(2, 5)], r(1, 5));
        assert_eq!(t, Shift::NONE);
        assert_eq!((q.lower(0), q.upper(0)), (r(0, 1), r(1, 1)));

        // [0.9, 1.1): only the shifted grid admits a cover at that level.
        let (t, q) = covering_cube(&[r(9, 10)], r(1, 5));
        assert_eq!(t, Shift(1));
        assert_eq!((q.lower(0), q.upper(0)), (r(1, 3), r(4, 3)));

        // A grid cube covers itself.
        let (t, q) = covering_cube(&[r(0, 1)], r(1, 1));
        assert_eq!(t, Shift::NONE);
        assert_eq!((q.lower(0), q.upper(0)), (r(0, 1), r(1, 1)));
    }

    #[test]
    fn level_ranges_tile_root() {
        let sys = RootSystem::new(vec![-8], 16, 4).unwrap();
        // Standard cubes of side 8 inside [-8, 8): exactly [-8,0) and [0,8).
        let range = sys.level_range(-3, Shift::NONE);
        assert_eq!(range.count(), 2);
        // Side-16 standard cubes do not fit ([-16,0) sticks out).
        assert!(sys.level_range(-4, Shift::NONE).is_empty());
        assert_eq!(sys.coarsest_level(Shift::NONE), Some(-3));
    }

    proptest! {
        #[test]
        fn grid_partition_no_overlap(num in -300i64..300, den_pow in 0u32..8, k in -2i32..6) {
            // Neighboring cubes at one level tile: x lies in exactly the cube
            // reported by cube_at, and its neighbors don't contain it.
            let x = [Rat::new(num as i128, 1i128 << den_pow)];
            for t in Shift::all(1) {
                let q = cube_at(&x, k, t);
                prop_assert!(q.contains_point(&x));
                for dj in [-1i64, 1] {
                    let mut other = q.clone();
                    other.index[0] += dj;
                    prop_assert!(!other.contains_point(&x));
                    // adjacency is exact
                    if dj == 1 {
                        prop_assert_eq!(other.lower(0), q.upper(0));
                    }
                }
            }
        }

        #[test]
        fn nesting_trichotomy(a in -40i64..40, b in -40i64..40, ka in -1i32..6, kb in -1i32..6, t in 0u32..2) {
            let t = Shift(t);
            let qa = DyadicCube::new(ka, vec![a], t);
            let qb = DyadicCube::new(kb, vec![b], t);
            let inter_lo = qa.lower(0).max(qb.lower(0));
            let inter_hi = qa.upper(0).min(qb.upper(0));
            if inter_lo < inter_hi {
                // overlap => one contains the other
                prop_assert!(qa.contains_cube(&qb) || qb.contains_cube(&qa));
            }
        }

        #[test]
        fn covering_always_succeeds(lo_num in -(1i64 << 20)..(1i64 << 20),
                                    side_num in 1i64..(1i64 << 12),
                                    n2 in prop::bool::ANY) {
            // sides in [2^-10, 2^2]-ish, arbitrary dyadic-rational corners
            let side = Rat::new(side_num as i128, 1i128 << 10);
            let lower: Vec<Rat> = if n2 {
                vec![Rat::new(lo_num as i128, 1 << 20), Rat::new((lo_num / 3) as i128, 1 << 20)]
            } else {
                vec![Rat::new(lo_num as i128, 1 << 20)]
            };
            let (_, q) = covering_cube(&lower, side);
            prop_assert!(q.side() <= side * 6);
            for (i, l) in lower.iter().enumerate() {
                prop_assert!(q.lower(i) <= *l && *l + side <= q.upper(i));
            }
        }

        #[test]
        fn children_partition_and_invert(j in -50i64..50, k in -2i32..8, t in 0u32..2) {
            let q = DyadicCube::new(k, vec![j], Shift(t));
            let ch = q.children();
            prop_assert_eq!(ch.len(), 2);
            prop_assert_eq!(ch[0].lower(0), q.lower(0));
            prop_assert_eq!(ch[0].upper(0), ch[1].lower(0));
            prop_assert_eq!(ch[1].upper(0), q.upper(0));
            for c in ch {
                prop_assert_eq!(c.parent_cube(), q.clone());
            }
        }
    }
}
