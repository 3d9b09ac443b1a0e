//! Carleson sequences and the embedding inequality
//! `sum_Q |a_Q|^r c_Q <= C(c) \int (M a)^r dmu` with
//! `C(c) = sup_R (1/mu(R)) sum_{Q subseteq R} c_Q`, everything over the
//! finite cube system of one grid.

use crate::geometry::{Rat, RootSystem, Shift};
use crate::grid::GridFunction;
use crate::pyramid::Pyramid;
use crate::{DyadicCube, Error, Result};
use std::collections::HashMap;
use std::sync::Arc;

/// Nonnegative cube-indexed coefficients plus the reference measure.
/// The cubes all live on one grid; disjointness of maximal cubes is what
/// makes the embedding argument work.
#[derive(Clone, Debug)]
pub struct CarlesonSequence {
    system: Arc<RootSystem>,
    shift: Shift,
    entries: Vec<(DyadicCube, f64)>,
    mu: GridFunction,
}

impl CarlesonSequence {
    pub fn new(
        shift: Shift,
        entries: Vec<(DyadicCube, f64)>,
        mu: GridFunction,
    ) -> Result<CarlesonSequence> {
        let system = mu.system().clone();
        for (q, c) in &entries {
            if q.shift != shift {
                return Err(Error::InvalidExponents(format!("{q:?} not on the sequence grid")));
            }
            if !system.contains_cube(q) {
                return Err(Error::OutOfSystem(format!("{q:?} outside the root")));
            }
            if !c.is_finite() || *c < 0.0 {
                return Err(Error::InvalidExponents("coefficients must be >= 0".into()));
            }
        }
        Ok(CarlesonSequence { system, shift, entries, mu })
    }

    pub fn entries(&self) -> &[(DyadicCube, f64)] {
        &self.entries
    }

    pub fn mu(&self) -> &GridFunction {
        &self.mu
    }

    /// `sup_R (1/mu(R)) sum_{Q subseteq R} c_Q` over every grid cube `R`
    /// inside the root. Infinite when some `R` has zero measure but positive
    /// coefficient mass.
    pub fn carleson_constant(&self) -> Result<f64> {
        let py_mu = Pyramid::build(&self.mu, self.shift);
        let mut sup = 0.0f64;
        for (r, mu_r) in py_mu.iter() {
            let num: f64 = self
                .entries
                .iter()
                .filter(|(q, _)| q.level >= r.level && r.contains_cube(q))
                .map(|(_, c)| c)
                .sum();
            if num == 0.0 {
                continue;
            }
            if mu_r <= 0.0 {
                return Ok(f64::INFINITY);
            }
            sup = sup.max(num / mu_r);
        }
        Ok(sup)
    }
}

#[derive(Clone, Debug)]
pub struct CarlesonReport {
    pub constant: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Check the embedding for a coefficient sequence `a` (cube -> value, any
/// sign; only its magnitude enters) against the Carleson sequence `c`.
pub fn carleson_embedding_check(
    a: &HashMap<DyadicCube, f64>,
    c: &CarlesonSequence,
    r: f64,
) -> Result<CarlesonReport> {
    assert!(r > 0.0, "embedding exponent must be positive");
    for q in a.keys() {
        if q.shift != c.shift {
            return Err(Error::InvalidExponents(format!("{q:?} not on the sequence grid")));
        }
        if !c.system.contains_cube(q) {
            return Err(Error::OutOfSystem(format!("{q:?} outside the root")));
        }
    }
    let constant = c.carleson_constant()?;

    let lhs: f64 = c
        .entries
        .iter()
        .map(|(q, cq)| a.get(q).map_or(0.0, |aq| aq.abs().powf(r)) * cq)
        .sum();

    // \int (M a)^r dmu with M a(x) = sup_{Q ni x} |a_Q| over the system grid
    let system = &c.system;
    let tmesh = system.level_range(system.max_level(), c.shift);
    let n = system.n();
    let terms: Vec<f64> = (0..tmesh.count())
        .map(|flat| {
            let mut cube = tmesh.cube(flat);
            let mut best = 0.0f64;
            loop {
                if let Some(v) = a.get(&cube) {
                    best = best.max(v.abs());
                }
                let p = cube.parent_cube();
                if !system.contains_cube(&p) {
                    break;
                }
                cube = p;
            }
            if best == 0.0 {
                return 0.0;
            }
            let cell = tmesh.cube(flat);
            let lo: Vec<Rat> = (0..n).map(|i| cell.lower(i)).collect();
            let hi: Vec<Rat> = (0..n).map(|i| cell.upper(i)).collect();
            best.powf(r) * c.mu.integral_box(&lo, &hi)
        })
        .collect();
    let rhs = crate::grid::pairwise_sum(&terms);

    let holds = constant.is_infinite() || lhs <= constant * rhs * (1.0 + 1e-9) + 1e-300;
    Ok(CarlesonReport { constant, lhs, rhs, holds })
}
