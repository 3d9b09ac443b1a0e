//! The grid operators: multilinear fractional maximal function, multilinear
//! fractional integral (singular tensor quadrature), the weighted dyadic
//! fractional maximal function, and the sparse integral forms.
//!
//! "sup over all cubes containing x" always means all cubes of the 2^n
//! shifted grids inside the root; by the covering property this is
//! comparable to the all-cube supremum with a constant at worst `6^{mn-a}`,
//! which shifts measured constants but no fitted exponent.

use crate::geometry::{rat_to_f64, Rat, Shift};
use crate::grid::{pairwise_sum, GridFunction, OperatorOutput};
use crate::pyramid::{cell_center_cube_index, Pyramid};
use crate::sparse::SparseFamily;
use crate::{Error, ExponentData, Result};
use num_traits::ToPrimitive;
use rayon::prelude::*;

/// Multilinear fractional maximal function: per mesh cell, the supremum over
/// all grid cubes containing the cell center of
/// `prod_i |Q|^{alpha/(mn) - 1} \int_Q f_i`.
pub fn multilinear_maximal(
    f: &[&GridFunction],
    e: &ExponentData,
) -> Result<OperatorOutput> {
    if f.len() != e.m() {
        return Err(Error::InvalidExponents(format!(
            "{} inputs for m = {}",
            f.len(),
            e.m()
        )));
    }
    for g in f {
        if !f[0].same_mesh(g) {
            return Err(Error::MeshMismatch);
        }
    }
    let system = f[0].system().clone();
    let n = system.n();
    let m = e.m();
    // |Q|^{alpha/(mn) - 1} per level: (2^{-kn})^{alpha/(mn) - 1}
    let size_exp = rat_to_f64(e.alpha_over_n() / m as i128 - Rat::from_integer(1))
        * n as f64;

    let shifts: Vec<Shift> = Shift::all(n).collect();
    let pyramids: Vec<Vec<Pyramid>> = shifts
        .iter()
        .map(|&t| f.iter().map(|g| Pyramid::build(g, t)).collect())
        .collect();

    let values: Vec<f64> = (0..system.num_cells())
        .into_par_iter()
        .map(|flat| {
            let coords = system.cell_coords(flat);
            let mut best = 0.0f64;
            for pys in &pyramids {
                let t = pys[0].shift();
                let coarsest = pys[0].coarsest();
                for k in coarsest..=system.max_level() {
                    let idx = cell_center_cube_index(&system, &coords, k, t);
                    let norm = 2f64.powf(-(k as f64) * size_exp);
                    let mut val = 1.0f64;
                    let mut ok = true;
                    for py in pys {
                        match py.sum_by_index(k, &idx) {
                            Some(s) => val *= norm * s,
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        best = best.max(val);
                    }
                }
            }
            best
        })
        .collect();
    GridFunction::from_values(system, values)
}

/// Weighted dyadic fractional maximal function on one grid:
/// `sup_{Q in D_t, Q ni x} w(Q)^{alpha/n - 1} \int_Q |f| w`, `0 <= alpha < n`.
pub fn dyadic_weighted_maximal(
    f: &GridFunction,
    w: &GridFunction,
    alpha: Rat,
    t: Shift,
) -> Result<OperatorOutput> {
    if !f.same_mesh(w) {
        return Err(Error::MeshMismatch);
    }
    let system = f.system().clone();
    let n = system.n();
    if alpha < Rat::from_integer(0) || alpha >= Rat::from_integer(n as i128) {
        return Err(Error::InvalidExponents(format!(
            "alpha = {alpha} outside [0, n)"
        )));
    }
    let fw = GridFunction::product(&[f, w])?;
    let py_fw = Pyramid::build(&fw, t);
    let py_w = Pyramid::build(w, t);
    let a_over_n = rat_to_f64(alpha) / n as f64;

    let values: std::result::Result<Vec<f64>, Error> = (0..system.num_cells())
        .into_par_iter()
        .map(|flat| {
            let coords = system.cell_coords(flat);
            let mut best = 0.0f64;
            for k in py_w.coarsest()..=system.max_level() {
                let idx = cell_center_cube_index(&system, &coords, k, t);
                let (Some(num), Some(den)) =
                    (py_fw.sum_by_index(k, &idx), py_w.sum_by_index(k, &idx))
                else {
                    continue;
                };
                if den <= 0.0 {
                    if num > 0.0 {
                        return Err(Error::ZeroMass(format!(
                            "w vanishes on a cube with positive f-mass (level {k})"
                        )));
                    }
                    continue;
                }
                best = best.max(num / den.powf(1.0 - a_over_n));
            }
            Ok(best)
        })
        .collect();
    GridFunction::from_values(system, values?)
}

/// Multilinear fractional integral by midpoint tensor quadrature with local
/// subdivision near the kernel singularity. One-dimensional, `m <= 2`; these
/// are the configurations the full tensor product can afford.
///
/// Terms are accumulated in mirror-symmetric pairs, so mirrored inputs give
/// bit-identical mirrored outputs.
pub fn multilinear_integral(
    f: &[&GridFunction],
    e: &ExponentData,
    refine_depth: u32,
) -> Result<OperatorOutput> {
    let m = e.m();
    if f.len() != m {
        return Err(Error::InvalidExponents(format!("{} inputs for m = {m}", f.len())));
    }
    let mn = (m as u32 * e.n()) as i128;
    if e.alpha() <= Rat::from_integer(0) || e.alpha() >= Rat::from_integer(mn) {
        return Err(Error::InvalidExponents(format!(
            "fractional order {} outside (0, mn)",
            e.alpha()
        )));
    }
    for g in f {
        if !f[0].same_mesh(g) {
            return Err(Error::MeshMismatch);
        }
    }
    let system = f[0].system().clone();
    if system.n() != 1 || m > 2 {
        return Err(Error::Unsupported(
            "tensor quadrature is implemented for n = 1, m <= 2".into(),
        ));
    }
    let ncells = system.num_cells();
    let h = rat_to_f64(system.cell_side());
    let kexp = e.alpha_f64() - mn as f64;

    // Midpoint distances are exact multiples of h, so the kernel on the
    // unrefined terms is a table lookup.
    let table: Vec<f64> = (0..=(2 * ncells))
        .map(|s| if s == 0 { 0.0 } else { ((s as f64) * h).powf(kexp) })
        .collect();

    let values: Vec<f64> = match m {
        1 => {
            let fv = f[0].values();
            (0..ncells)
                .into_par_iter()
                .map(|i| integral_cell_m1(fv, i, h, kexp, &table, refine_depth))
                .collect()
        }
        _ => {
            let f1 = f[0].values();
            let f2 = f[1].values();
            (0..ncells)
                .into_par_iter()
                .map(|i| integral_cell_m2(f1, f2, i, h, kexp, &table, refine_depth))
                .collect()
        }
    };
    GridFunction::from_values(system, values)
}

fn integral_cell_m1(
    fv: &[f64],
    i: usize,
    h: f64,
    kexp: f64,
    table: &[f64],
    depth: u32,
) -> f64 {
    let n = fv.len();
    let mut terms: Vec<f64> = Vec::with_capacity(n);
    // d = 0: the singular cell, always refined.
    terms.push(fv[i] * refine_m1(-0.5 * h, 0.5 * h, kexp, depth));
    for d in 1..n {
        let plus = i + d < n;
        let minus = i >= d;
        if !plus && !minus {
            break;
        }
        let coeff = match (plus, minus) {
            (true, true) => fv[i + d] + fv[i - d],
            (true, false) => fv[i + d],
            (false, true) => fv[i - d],
            _ => unreachable!(),
        };
        let geom = if d <= 2 {
            refine_m1((d as f64 - 0.5) * h, (d as f64 + 0.5) * h, kexp, depth)
        } else {
            table[d] * h
        };
        terms.push(coeff * geom);
    }
    pairwise_sum(&terms)
}

/// Midpoint quadrature of `|y|^{kexp}` over `[lo, hi)` (positions relative to
/// the evaluation point), subdividing while the interval is within its own
/// length of the singularity.
fn refine_m1(lo: f64, hi: f64, kexp: f64, depth: u32) -> f64 {
    let len = hi - lo;
    let dist = if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        -hi
    } else {
        0.0
    };
    if depth > 0 && dist < len {
        let mid = 0.5 * (lo + hi);
        return refine_m1(lo, mid, kexp, depth - 1) + refine_m1(mid, hi, kexp, depth - 1);
    }
    let mid = 0.5 * (lo + hi);
    if mid == 0.0 {
        return 0.0; // exact singularity: measure-zero midpoint, dropped
    }
    mid.abs().powf(kexp) * len
}

fn integral_cell_m2(
    f1: &[f64],
    f2: &[f64],
    i: usize,
    h: f64,
    kexp: f64,
    table: &[f64],
    depth: u32,
) -> f64 {
    let n = f1.len();
    let lo = -(i as i64);
    let hi = (n - 1 - i) as i64;
    let reach = i.max(n - 1 - i) as i64;
    let mut acc = 0.0f64;
    let mut sing_terms: Vec<f64> = Vec::new();
    // canonical representatives: d1 > 0, or d1 == 0 && d2 >= 0; each stands
    // for the tuple pair {(d1, d2), (-d1, -d2)}
    for d1 in 0..=reach {
        for d2 in -reach..=reach {
            if d1 == 0 && d2 < 0 {
                continue;
            }
            let plus_ok = d1 >= lo && d1 <= hi && d2 >= lo && d2 <= hi;
            let minus_ok = -d1 >= lo && -d1 <= hi && -d2 >= lo && -d2 <= hi;
            let self_paired = d1 == 0 && d2 == 0;
            if !plus_ok && !minus_ok {
                continue;
            }
            let coeff = if self_paired {
                f1[i] * f2[i]
            } else {
                let mut c = 0.0;
                if plus_ok {
                    c += f1[(i as i64 + d1) as usize] * f2[(i as i64 + d2) as usize];
                }
                if minus_ok {
                    c += f1[(i as i64 - d1) as usize] * f2[(i as i64 - d2) as usize];
                }
                c
            };
            let s1 = d1.unsigned_abs() as usize;
            let s2 = d2.unsigned_abs() as usize;
            if s1 <= 2 && s2 <= 2 {
                // near the diagonal singularity: subdivide both cells
                let g = refine_m2(
                    (d1 as f64 - 0.5) * h,
                    (d1 as f64 + 0.5) * h,
                    (d2 as f64 - 0.5) * h,
                    (d2 as f64 + 0.5) * h,
                    kexp,
                    depth,
                );
                sing_terms.push(coeff * g);
            } else {
                acc += coeff * table[s1 + s2] * h * h;
            }
        }
    }
    acc + pairwise_sum(&sing_terms)
}

fn refine_m2(lo1: f64, hi1: f64, lo2: f64, hi2: f64, kexp: f64, depth: u32) -> f64 {
    let dist = |lo: f64, hi: f64| {
        if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            0.0
        }
    };
    let len1 = hi1 - lo1;
    let len2 = hi2 - lo2;
    if depth > 0 && dist(lo1, hi1) + dist(lo2, hi2) < len1 + len2 {
        let m1 = 0.5 * (lo1 + hi1);
        let m2 = 0.5 * (lo2 + hi2);
        let mut s = 0.0;
        for (a1, b1) in [(lo1, m1), (m1, hi1)] {
            for (a2, b2) in [(lo2, m2), (m2, hi2)] {
                s += refine_m2(a1, b1, a2, b2, kexp, depth - 1);
            }
        }
        return s;
    }
    let r = (0.5 * (lo1 + hi1)).abs() + (0.5 * (lo2 + hi2)).abs();
    if r == 0.0 {
        return 0.0;
    }
    r.powf(kexp) * len1 * len2
}

/// Sparse integral form: `sum_{Q in S} |Q|^{alpha/n - m} prod_i \int_Q f_i
/// \cdot chi_Q(x)` as a cell-constant field.
pub fn sparse_integral(
    f: &[&GridFunction],
    s: &SparseFamily,
    e: &ExponentData,
) -> Result<OperatorOutput> {
    sparse_sum(f, s, e, None)
}

/// `q`-aggregated sparse form; `q = 1` coincides with `sparse_integral`.
pub fn sparse_integral_q(
    f: &[&GridFunction],
    s: &SparseFamily,
    e: &ExponentData,
    q: f64,
) -> Result<OperatorOutput> {
    assert!(q > 0.0);
    sparse_sum(f, s, e, Some(q))
}

fn sparse_sum(
    f: &[&GridFunction],
    s: &SparseFamily,
    e: &ExponentData,
    q: Option<f64>,
) -> Result<OperatorOutput> {
    if f.len() != e.m() {
        return Err(Error::InvalidExponents(format!(
            "{} inputs for m = {}",
            f.len(),
            e.m()
        )));
    }
    let system = f[0].system().clone();
    for g in f {
        if !f[0].same_mesh(g) {
            return Err(Error::MeshMismatch);
        }
    }
    let n = system.n();
    let size_exp = rat_to_f64(e.alpha_over_n() - Rat::from_integer(e.m() as i128));
    let mut acc = vec![0.0f64; system.num_cells()];
    for cube in s.cubes() {
        if !system.contains_cube(&cube) {
            return Err(Error::OutOfSystem(format!("{cube:?} outside the root")));
        }
        let vol = rat_to_f64(cube.volume());
        let mut term = vol.powf(size_exp);
        for g in f {
            term *= g.integrate(&cube)?;
        }
        if let Some(q) = q {
            term = term.powf(q);
        }
        // add over the cells covered by the cube (interior cells only for
        // shifted cubes; the field is sampled at cell centers)
        let lo: Vec<Rat> = (0..n).map(|i| cube.lower(i)).collect();
        let hi: Vec<Rat> = (0..n).map(|i| cube.upper(i)).collect();
        for flat in 0..system.num_cells() {
            let c = system.cell_center(flat);
            if (0..n).all(|i| lo[i] <= c[i] && c[i] < hi[i]) {
                acc[flat] += term;
            }
        }
    }
    if let Some(q) = q {
        for v in &mut acc {
            *v = v.powf(1.0 / q);
        }
    }
    GridFunction::from_values(system, acc)
}

/// Norm inequality of the weighted dyadic maximal function: returns
/// `(lhs, rhs)` with `lhs = ||M_{alpha,w} f||_{L^q(w)}` and
/// `rhs = (1 + p'/q)^{1 - alpha/n} ||f||_{L^p(w)}`, `1/q = 1/p - alpha/n`.
/// `q` may be infinite (when `p = n/alpha`), in which case the lhs is the
/// essential supremum.
pub fn weighted_maximal_norm_check(
    f: &GridFunction,
    w: &GridFunction,
    p: Rat,
    alpha: Rat,
    t: Shift,
) -> Result<(f64, f64)> {
    let n = f.system().n() as i128;
    let inv_q = p.recip() - alpha / n;
    if inv_q < Rat::from_integer(0) {
        return Err(Error::InvalidExponents(format!(
            "p = {p} exceeds n/alpha"
        )));
    }
    let mf = dyadic_weighted_maximal(f, w, alpha, t)?;
    let pf = rat_to_f64(p);
    let pc = pf / (pf - 1.0);
    let norm_f = crate::grid::lq_norm(f, w, pf)?;
    let (lhs, constant) = match inv_q.to_f64() {
        Some(iq) if iq > 0.0 => {
            let q = 1.0 / iq;
            (
                crate::grid::lq_norm(&mf, w, q)?,
                (1.0 + pc * iq).powf(1.0 - rat_to_f64(alpha) / n as f64),
            )
        }
        _ => {
            // q = infinity: essential sup against the (positive) weight
            let sup = mf.values().iter().cloned().fold(0.0f64, f64::max);
            (sup, 1.0)
        }
    };
    Ok((lhs, constant * norm_f))
}
