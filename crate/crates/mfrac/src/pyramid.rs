//! Per-grid sum pyramids: the integral of a grid function over every cube of
//! one shifted grid inside the root, aggregated bottom-up so that each lookup
//! is O(1) and the accumulation error stays logarithmic in depth.

use crate::geometry::{LevelRange, Rat, RootSystem, Shift};
use crate::{DyadicCube, GridFunction};
use std::sync::Arc;

pub struct Pyramid {
    system: Arc<RootSystem>,
    shift: Shift,
    /// (range, per-cube integrals), coarsest level first.
    levels: Vec<(LevelRange, Vec<f64>)>,
    coarsest: i32,
}

impl Pyramid {
    /// Build integrals of `f` over all cubes of grid `shift` inside the root,
    /// from the coarsest fitting level down to the mesh level.
    pub fn build(f: &GridFunction, shift: Shift) -> Pyramid {
        let system = f.system().clone();
        let finest = system.max_level();
        let coarsest = system
            .coarsest_level(shift)
            .expect("valid systems admit cubes at the mesh level");

        let mut levels: Vec<(LevelRange, Vec<f64>)> = Vec::new();
        // Base: exact fractional integrals over the finest-level cubes.
        let base_range = system.level_range(finest, shift);
        let n = system.n();
        let base: Vec<f64> = (0..base_range.count())
            .map(|flat| {
                let q = base_range.cube(flat);
                let lo: Vec<Rat> = (0..n).map(|i| q.lower(i)).collect();
                let hi: Vec<Rat> = (0..n).map(|i| q.upper(i)).collect();
                f.integral_box(&lo, &hi)
            })
            .collect();
        levels.push((base_range, base));

        // Aggregate upward: a parent is the sum of its 2^n children.
        for k in (coarsest..finest).rev() {
            let range = system.level_range(k, shift);
            let (child_range, child_vals) = &levels[levels.len() - 1];
            let vals: Vec<f64> = (0..range.count())
                .map(|flat| {
                    let q = range.cube(flat);
                    q.children()
                        .iter()
                        .map(|c| {
                            let cf = child_range
                                .flat(&c.index)
                                .expect("children of an in-root cube are in-root");
                            child_vals[cf]
                        })
                        .sum()
                })
                .collect();
            levels.push((range, vals));
        }
        levels.reverse(); // coarsest first
        Pyramid { system, shift, levels, coarsest }
    }

    pub fn shift(&self) -> Shift {
        self.shift
    }

    pub fn coarsest(&self) -> i32 {
        self.coarsest
    }

    pub fn finest(&self) -> i32 {
        self.system.max_level()
    }


    fn slot(&self, level: i32) -> Option<usize> {
        if level < self.coarsest || level > self.finest() {
            return None;
        }
        Some((level - self.coarsest) as usize)
    }

    /// Integral over a cube of this pyramid's grid, `None` if outside the root.
    pub fn sum(&self, q: &DyadicCube) -> Option<f64> {
        debug_assert_eq!(q.shift, self.shift);
        let s = self.slot(q.level)?;
        let (range, vals) = &self.levels[s];
        range.flat(&q.index).map(|f| vals[f])
    }

    pub fn sum_by_index(&self, level: i32, index: &[i64]) -> Option<f64> {
        let s = self.slot(level)?;
        let (range, vals) = &self.levels[s];
        range.flat(index).map(|f| vals[f])
    }

    /// Iterate `(cube, integral)` over every node of the pyramid.
    pub fn iter(&self) -> impl Iterator<Item = (DyadicCube, f64)> + '_ {
        self.levels.iter().flat_map(|(range, vals)| {
            (0..range.count()).map(move |f| (range.cube(f), vals[f]))
        })
    }
}

/// Index of the level-`k` cube of `shift` containing the center of mesh cell
/// `cell_coords`, as exact integer arithmetic. Returns the per-axis indices.
///
/// The center is `corner + (2c+1) / 2^{L+1}`; the cube index is
/// `floor(center * 2^k - (-1)^k t)` with everything over the common
/// denominator `3 * 2^{L+1-k}` when `k <= L`.
pub fn cell_center_cube_index(
    system: &RootSystem,
    cell_coords: &[i64],
    level: i32,
    shift: Shift,
) -> Vec<i64> {
    let ell = system.max_level();
    debug_assert!(level <= ell);
    let b = 1i128 << (ell + 1 - level); // 2^{L+1-k}
    cell_coords
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let num = 3 * ((system.corner(i) as i128) * (1i128 << (ell + 1)) + 2 * c as i128 + 1);
            let s = if !shift.is_third(i) {
                0
            } else if level.rem_euclid(2) == 0 {
                1i128
            } else {
                -1i128
            };
            let adj = num - s * b; // common denominator 3b
            i64::try_from(adj.div_euclid(3 * b)).expect("cube index overflow")
        })
        .collect()
}
