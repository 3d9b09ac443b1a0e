//! Power-weight extremal experiments: sweep the singularity parameter,
//! measure norms and weight characteristics, and fit the blow-up exponents
//! against their sharp targets.
//!
//! The norm of the maximal field is computed on the mesh except on the two
//! cells adjacent to the origin, where the field is continued below the mesh
//! scale by its known power profile (calibrated at the finest resolvable
//! scale). The singular family concentrates its norm in an
//! `eps`-neighborhood of the origin that no fixed mesh resolves, and the
//! analytic continuation is what keeps the fitted exponent honest there.

use crate::geometry::{rat_to_f64, Rat, RootSystem};
use crate::grid::{discretize_power, power_ball_integral, GridFunction};
use crate::operators::{multilinear_integral, multilinear_maximal};
use crate::weights::{
    a_infty_constant, a_pq_constant, two_weight_constant, CubeFamily, WeightVector,
};
use crate::{Error, ExponentData, Result};
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Theorem {
    T1,
    T2,
    T3,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub exponents: ExponentData,
    pub theorem: Theorem,
    /// Singularity parameters, e.g. `2^-3 .. 2^-10` geometrically.
    pub eps_list: Vec<Rat>,
    pub mesh_level: u32,
    /// Root interval `[root_lo, root_hi)`; must contain the unit ball.
    pub root_lo: i64,
    pub root_hi: i64,
    /// Scan depth for the characteristic suprema (default: mesh level).
    pub scan_level: Option<i32>,
    /// Quadrature refinement for the fractional integral (T2).
    pub refine_depth: u32,
}

impl ExperimentConfig {
    pub fn new(exponents: ExponentData, theorem: Theorem) -> ExperimentConfig {
        let mesh_level = match theorem {
            Theorem::T2 => 8,
            _ => 10,
        };
        ExperimentConfig {
            exponents,
            theorem,
            eps_list: eps_sweep(3, 10),
            mesh_level,
            root_lo: -2,
            root_hi: 2,
            scan_level: None,
            refine_depth: 3,
        }
    }

    /// Check the hypothesis of the targeted sharpness statement; exact
    /// rational arithmetic, failures name the violated condition.
    pub fn validate(&self) -> Result<()> {
        let e = &self.exponents;
        if e.n() != 1 {
            return Err(Error::Unsupported(
                "extremal experiments run in dimension 1".into(),
            ));
        }
        if self.root_lo > -1 || self.root_hi < 1 {
            return Err(Error::InvalidExponents(
                "root must contain the unit ball".into(),
            ));
        }
        for &eps in &self.eps_list {
            if eps <= Rat::zero() || eps > Rat::one() {
                return Err(Error::InvalidExponents(format!(
                    "eps = {eps} outside (0, 1]"
                )));
            }
        }
        let one = Rat::one();
        let factor = one - e.alpha_over_n();
        match self.theorem {
            Theorem::T1 | Theorem::T2 => {
                if e.m() != 2 {
                    return Err(Error::Unsupported(
                        "the extremal family is the two-slot one".into(),
                    ));
                }
                let i0 = e.argmax_p_conj();
                let lhs = e.p_conj(i0) * factor;
                let rest = (0..e.m())
                    .filter(|&i| i != i0)
                    .map(|i| e.p_conj(i))
                    .max()
                    .unwrap();
                if lhs < rest {
                    return Err(Error::InvalidExponents(format!(
                        "hypothesis p'_i0 (1 - alpha/n) >= max_other p' fails: {lhs} < {rest}"
                    )));
                }
                if self.theorem == Theorem::T2 {
                    if e.max_p_conj() < e.q() {
                        return Err(Error::Unsupported(format!(
                            "max p_i' = {} < q = {}: only the constructive branch is implemented",
                            e.max_p_conj(),
                            e.q()
                        )));
                    }
                    // min{max_i p_i'/q, min_j max_{i != j}{p_i', q}/p_j'} <= 1 - alpha/n
                    let first = e.max_p_conj() / e.q();
                    let second = (0..e.m())
                        .map(|j| {
                            let top = (0..e.m())
                                .filter(|&i| i != j)
                                .map(|i| e.p_conj(i))
                                .chain(std::iter::once(e.q()))
                                .max()
                                .unwrap();
                            top / e.p_conj(j)
                        })
                        .min()
                        .unwrap();
                    if first.min(second) > factor {
                        return Err(Error::InvalidExponents(format!(
                            "min-condition fails: min({first}, {second}) > 1 - alpha/n = {factor}"
                        )));
                    }
                }
            }
            Theorem::T3 => {}
        }
        Ok(())
    }
}

/// Geometric sweep `2^{-lo} .. 2^{-hi}`.
pub fn eps_sweep(lo: u32, hi: u32) -> Vec<Rat> {
    (lo..=hi).map(|k| Rat::new(1, 1i128 << k)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    pub norms_f: Vec<f64>,
    pub a_pq: f64,
    pub a_infty: Vec<f64>,
    pub lhs_norm: f64,
    /// T1/T2: smallest cellwise ratio of the maximal field to its pointwise
    /// power profile `(1/eps) |x|^{gamma}`.
    pub pointwise_constant: Option<f64>,
    /// T2: largest cellwise ratio of maximal to integral field.
    pub mw_ratio: Option<f64>,
    /// T3: lhs / (mixed bound * product of norms).
    pub mixed_bound_ratio: Option<f64>,
    /// T3: relative gap of the two-weight reduction identity.
    pub two_weight_gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeFit {
    pub name: String,
    /// Fitted `d log(value) / d log(eps)` (blow-ups are negative).
    pub slope: f64,
    pub stderr: f64,
    pub target: f64,
    /// Absolute tolerance; one-sided fits pass whenever `slope >= target - tol`.
    pub tolerance: f64,
    pub one_sided: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub theorem: Theorem,
    pub rows: Vec<EpsRow>,
    pub fits: Vec<SlopeFit>,
}

impl ExperimentReport {
    pub fn all_pass(&self) -> bool {
        self.fits.iter().all(|f| f.pass)
    }

    pub fn fit(&self, name: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.name == name)
    }

    /// Fixed-column CSV: one row per eps, then a summary block of fits.
    pub fn to_csv(&self) -> String {
        let m = self.rows.first().map_or(0, |r| r.norms_f.len());
        let mut out = String::from("eps");
        for i in 1..=m {
            out += &format!(",norm_f{i}");
        }
        out += ",a_pq";
        for i in 1..=m {
            out += &format!(",a_infty_{i}");
        }
        out += ",lhs_norm\n";
        for r in &self.rows {
            out += &format!("{}", r.eps);
            for v in &r.norms_f {
                out += &format!(",{v}");
            }
            out += &format!(",{}", r.a_pq);
            for v in &r.a_infty {
                out += &format!(",{v}");
            }
            out += &format!(",{}\n", r.lhs_norm);
        }
        out += "\nquantity,slope,stderr,target,pass\n";
        for f in &self.fits {
            out += &format!(
                "{},{},{},{},{}\n",
                f.name, f.slope, f.stderr, f.target, f.pass
            );
        }
        out
    }
}

/// Ordinary least squares of `log(value)` against `log(1/eps)`.
/// Returns `(slope, stderr)`; the slope is positive for blow-ups.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} points, need at least 3",
            points.len()
        )));
    }
    if let Some((e, v)) = points.iter().find(|(e, v)| *e <= 0.0 || *v <= 0.0) {
        return Err(Error::DegenerateFit(format!(
            "nonpositive point (eps = {e}, value = {v})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(e, _)| -(e.ln())).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all eps identical".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = ybar + slope * (x - xbar);
            (y - pred).powi(2)
        })
        .sum();
    let stderr = (ss_res / (n - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

/// Family powers for one eps: `(f_exponents, w_exponents)`.
fn family_powers(cfg: &ExperimentConfig, eps: Rat) -> (Vec<Rat>, Vec<Rat>) {
    let e = &cfg.exponents;
    let n = Rat::from_integer(e.n() as i128);
    match cfg.theorem {
        Theorem::T1 | Theorem::T2 => {
            let i0 = e.argmax_p_conj();
            let f: Vec<Rat> = (0..e.m())
                .map(|i| {
                    if i == i0 {
                        eps - n
                    } else {
                        (eps - n) / e.p(i)
                    }
                })
                .collect();
            let w: Vec<Rat> = (0..e.m())
                .map(|i| {
                    if i == i0 {
                        (n - eps) / e.p_conj(i)
                    } else {
                        Rat::zero()
                    }
                })
                .collect();
            (f, w)
        }
        Theorem::T3 => {
            let f = vec![eps - n; e.m()];
            let w = (0..e.m()).map(|i| (n - eps) / e.p_conj(i)).collect();
            (f, w)
        }
    }
}

/// `|x|^a` restricted to the unit ball (cells outside zeroed; ball boundary
/// sits on integer mesh points, so the restriction is exact).
fn power_bump(system: &Arc<RootSystem>, a: Rat) -> Result<GridFunction> {
    let g = discretize_power(system, a)?;
    let vals: Vec<f64> = (0..system.num_cells())
        .map(|flat| {
            let c = system.cell_center(flat);
            if c[0].abs() < Rat::one() {
                g.value(flat)
            } else {
                0.0
            }
        })
        .collect();
    // keep the power tag: origin handling still applies inside the ball
    let mut out = GridFunction::from_values(system.clone(), vals)?;
    if let Some(p) = g.power_exponent() {
        out = out.with_power_tag(p);
    }
    Ok(out)
}

/// `\int field^q u` over the root, continuing the field through the two
/// origin cells by the profile `A |x|^{gamma_pt}` calibrated at the cell
/// scale; `u` must be a pure power `|x|^{gamma_u}`.
fn field_norm_with_origin_profile(
    field: &GridFunction,
    u: &GridFunction,
    q: f64,
    gamma_pt: Rat,
) -> Result<f64> {
    let system = field.system();
    if system.n() != 1 {
        return Err(Error::Unsupported("origin profile is one-dimensional".into()));
    }
    let gamma_u = u
        .power_exponent()
        .ok_or_else(|| Error::Unsupported("norm weight must be a pure power".into()))?;
    let h = rat_to_f64(system.cell_side());
    let gpt = rat_to_f64(gamma_pt);
    let p_exp = q * gpt + rat_to_f64(gamma_u);
    if p_exp <= -1.0 {
        return Err(Error::DivergentIntegral { exponent: p_exp });
    }
    let vol = system.cell_volume();
    let terms: Vec<f64> = (0..system.num_cells())
        .map(|flat| {
            let coords = system.cell_coords(flat);
            let lo = system.cell_lower(&coords)[0];
            let hi = lo + system.cell_side();
            let fv = field.value(flat);
            if lo.is_zero() || hi.is_zero() {
                // sub-mesh continuation: A = field / h^{gamma}, then
                // \int_0^h (A x^{gamma})^q x^{gamma_u} dx
                fv.powf(q) * h.powf(-q * gpt) * h.powf(p_exp + 1.0) / (p_exp + 1.0)
            } else {
                fv.powf(q) * u.value(flat) * vol
            }
        })
        .collect();
    Ok(crate::grid::pairwise_sum(&terms))
}

/// Run the configured sharpness experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.theorem {
        Theorem::T1 => run_maximal_experiment(cfg, false),
        Theorem::T2 => run_maximal_experiment(cfg, true),
        Theorem::T3 => run_product_experiment(cfg),
    }
}

pub fn run_thm1_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    assert!(cfg.theorem == Theorem::T1);
    run_experiment(cfg)
}

pub fn run_thm2_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    assert!(cfg.theorem == Theorem::T2);
    run_experiment(cfg)
}

pub fn run_thm3_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    assert!(cfg.theorem == Theorem::T3);
    run_experiment(cfg)
}

struct EpsData {
    row: EpsRow,
    system: Arc<RootSystem>,
}

/// Shared per-eps pipeline: build the family, measure everything measurable.
fn eps_point(cfg: &ExperimentConfig, eps: Rat, use_integral: bool) -> Result<EpsData> {
    let e = &cfg.exponents;
    let system = RootSystem::interval(cfg.root_lo, cfg.root_hi, cfg.mesh_level)?;
    let scan = cfg.scan_level.unwrap_or(system.max_level());
    let (a_f, a_w) = family_powers(cfg, eps);

    // analytic norms via the collapsed integrand |x|^{(a_f + a_w) p_i}
    let norms_f: Vec<f64> = (0..e.m())
        .map(|i| {
            let c = (a_f[i] + a_w[i]) * e.p(i);
            Ok(power_ball_integral(rat_to_f64(c), 1.0, e.n())?
                .powf(rat_to_f64(e.p(i).recip())))
        })
        .collect::<Result<_>>()?;

    let wv = WeightVector::from_powers(&system, e.clone(), &a_w)?;
    let family = CubeFamily::all_shifts(&system, scan);
    let a_pq = a_pq_constant(&wv, &family)?;
    let a_infty: Vec<f64> = (0..e.m())
        .map(|i| a_infty_constant(wv.sigma(i), &family))
        .collect::<Result<_>>()?;

    let f_grids: Vec<GridFunction> = a_f
        .iter()
        .map(|&ai| power_bump(&system, ai))
        .collect::<Result<_>>()?;
    let f_refs: Vec<&GridFunction> = f_grids.iter().collect();
    let maximal = multilinear_maximal(&f_refs, e)?;

    let gamma_pt = a_f.iter().copied().sum::<Rat>() + e.alpha();
    let field = if use_integral {
        multilinear_integral(&f_refs, e, cfg.refine_depth)?
    } else {
        maximal.clone()
    };
    let lhs_q = field_norm_with_origin_profile(&field, wv.u(), e.q_f64(), gamma_pt)?;
    let lhs_norm = lhs_q.powf(1.0 / e.q_f64());

    // pointwise profile constant: min over resolvable ball cells of
    // field / ((1/eps) |x|^{gamma_pt})
    let epsf = rat_to_f64(eps);
    let gptf = rat_to_f64(gamma_pt);
    let mut pointwise = f64::INFINITY;
    for flat in 0..system.num_cells() {
        let x = rat_to_f64(system.cell_center(flat)[0]).abs();
        let h = rat_to_f64(system.cell_side());
        if x < h || x >= 1.0 {
            continue;
        }
        let profile = x.powf(gptf) / epsf;
        pointwise = pointwise.min(maximal.value(flat) / profile);
    }

    let mw_ratio = if use_integral {
        Some(
            maximal
                .values()
                .iter()
                .zip(field.values())
                .filter(|(_, &i)| i > 0.0)
                .map(|(&m, &i)| m / i)
                .fold(0.0f64, f64::max),
        )
    } else {
        None
    };

    Ok(EpsData {
        row: EpsRow {
            eps: epsf,
            norms_f,
            a_pq,
            a_infty,
            lhs_norm,
            pointwise_constant: Some(pointwise),
            mw_ratio,
            mixed_bound_ratio: None,
            two_weight_gap: None,
        },
        system,
    })
}

fn run_maximal_experiment(cfg: &ExperimentConfig, use_integral: bool) -> Result<ExperimentReport> {
    let e = &cfg.exponents;
    let mut rows = Vec::new();
    for &eps in &cfg.eps_list {
        rows.push(eps_point(cfg, eps, use_integral)?.row);
    }
    let i0 = e.argmax_p_conj();
    let mut fits = Vec::new();
    if rows.len() >= 3 {
        for i in 0..e.m() {
            fits.push(make_fit(
                &format!("norm_f{}", i + 1),
                &rows,
                |r| r.norms_f[i],
                -rat_to_f64(e.p(i).recip()),
                0.1,
                false,
            )?);
        }
        fits.push(make_fit(
            "a_pq",
            &rows,
            |r| r.a_pq,
            -rat_to_f64(e.q() / e.p_conj(i0)),
            0.1,
            false,
        )?);
        for i in 0..e.m() {
            fits.push(make_fit(
                &format!("a_infty_{}", i + 1),
                &rows,
                |r| r.a_infty[i],
                -1.0,
                0.1,
                true,
            )?);
        }
        fits.push(make_fit(
            "lhs_norm",
            &rows,
            |r| r.lhs_norm,
            -(1.0 + rat_to_f64(e.q().recip())),
            0.1,
            false,
        )?);
    }
    Ok(ExperimentReport {
        theorem: cfg.theorem,
        rows,
        fits,
    })
}

fn run_product_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let e = &cfg.exponents;
    let mut rows = Vec::new();
    for &eps in &cfg.eps_list {
        let EpsData { mut row, system } = eps_point(cfg, eps, false)?;
        let scan = cfg.scan_level.unwrap_or(system.max_level());
        let (_, a_w) = family_powers(cfg, eps);
        let wv = WeightVector::from_powers(&system, e.clone(), &a_w)?;
        let family = CubeFamily::all_shifts(&system, scan);

        // mixed characteristic bound with all constants set to one
        let mixed = row.a_pq.powf(rat_to_f64(e.q().recip()))
            * (0..e.m())
                .map(|i| {
                    let exp = rat_to_f64(
                        e.p(i).recip()
                            * (Rat::one() - e.alpha() * e.p_harmonic() / e.n() as i128),
                    );
                    row.a_infty[i].powf(exp)
                })
                .product::<f64>();
        let prod_norms: f64 = row.norms_f.iter().product();
        row.mixed_bound_ratio = Some(row.lhs_norm / (mixed * prod_norms));

        // reduction identity of the two-weight characteristic
        let tw = two_weight_constant(wv.u(), &wv, &family)?;
        let expect = row.a_pq.powf(rat_to_f64(e.q().recip()));
        row.two_weight_gap = Some((tw - expect).abs() / expect);

        rows.push(row);
    }
    let mut fits = Vec::new();
    if rows.len() >= 3 {
        for i in 0..e.m() {
            fits.push(make_fit(
                &format!("norm_f{}", i + 1),
                &rows,
                |r| r.norms_f[i],
                -rat_to_f64(e.p(i).recip()),
                0.1,
                false,
            )?);
        }
        fits.push(make_fit(
            "a_pq",
            &rows,
            |r| r.a_pq,
            -rat_to_f64(e.q() * (Rat::from_integer(e.m() as i128) - e.p_harmonic().recip())),
            0.1,
            false,
        )?);
        for i in 0..e.m() {
            fits.push(make_fit(
                &format!("a_infty_{}", i + 1),
                &rows,
                |r| r.a_infty[i],
                -1.0,
                0.1,
                true,
            )?);
        }
        fits.push(make_fit(
            "lhs_norm",
            &rows,
            |r| r.lhs_norm,
            -(e.m() as f64 + rat_to_f64(e.q().recip())),
            0.1,
            false,
        )?);
    }
    Ok(ExperimentReport {
        theorem: cfg.theorem,
        rows,
        fits,
    })
}

fn make_fit(
    name: &str,
    rows: &[EpsRow],
    value: impl Fn(&EpsRow) -> f64,
    target: f64,
    tolerance: f64,
    one_sided: bool,
) -> Result<SlopeFit> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, value(r))).collect();
    let (blowup_slope, stderr) = fit_exponent(&points)?;
    let slope = -blowup_slope; // report d log v / d log eps
    let pass = if one_sided {
        slope >= target - tolerance
    } else {
        (slope - target).abs() <= tolerance
    };
    Ok(SlopeFit {
        name: name.to_string(),
        slope,
        stderr,
        target,
        tolerance,
        one_sided,
        pass,
    })
}
