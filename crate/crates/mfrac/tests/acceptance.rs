//! Acceptance suite: every release criterion as one test with a printed
//! pass/fail line (run with `--nocapture` to see them). Tolerances are fixed
//! here, not tuned elsewhere.

use mfrac::corpus::{case_rng, random_grid, random_step_weight};
use mfrac::geometry::{covering_cube, cube_at, pow2, rat, rat_to_f64, Rat, RootSystem, Shift};
use mfrac::grid::{discretize_power, GridFunction};
use mfrac::operators::{
    multilinear_integral, sparse_integral, sparse_integral_q, weighted_maximal_norm_check,
};
use mfrac::sharpness::{eps_sweep, run_experiment, ExperimentConfig, Theorem};
use mfrac::sparse::{build_sparse, sparse_domination_check};
use mfrac::weights::{
    a_pq_constant, holder_identity_worst_ratio, reverse_holder_check, two_weight_constant,
    CubeFamily, WeightVector,
};
use mfrac::ExponentData;
use rand::Rng;
use std::collections::HashMap;
use std::sync::Arc;

const REL_EXACT: f64 = 1e-12;
const SEED: u64 = 20240915;

fn pass(line: &str) {
    println!("[PASS] {line}");
}

fn corpus_exponents() -> ExponentData {
    ExponentData::homogeneous(1, rat(1, 2), vec![rat(4, 3), rat(4, 1)]).unwrap()
}

fn corpus_vector(system: &Arc<RootSystem>, case: u64) -> WeightVector {
    let mut rng = case_rng(SEED, case);
    let w = vec![
        random_grid(system, &mut rng, 0.2, 5.0),
        random_grid(system, &mut rng, 0.2, 5.0),
    ];
    WeightVector::new(corpus_exponents(), w).unwrap()
}

#[test]
fn criterion_1a_duality_identity() {
    let system = RootSystem::interval(0, 1, 6).unwrap();
    let family = CubeFamily::all_shifts(&system, 6);
    let e = corpus_exponents();
    let mut worst = 0.0f64;
    for case in 0..100 {
        let wv = corpus_vector(&system, case);
        let base = a_pq_constant(&wv, &family).unwrap();
        for i in 0..2 {
            let dual = wv.dual(i).unwrap();
            let back = a_pq_constant(&dual, &family)
                .unwrap()
                .powf(rat_to_f64(e.q() / e.p_conj(i)));
            worst = worst.max((back - base).abs() / base);
        }
    }
    assert!(worst <= REL_EXACT, "worst relative gap {worst}");
    pass(&format!(
        "1a duality identity: 100 weight vectors, worst relative gap {worst:.2e} <= 1e-12"
    ));
}

#[test]
fn criterion_1b_two_weight_reduction() {
    let system = RootSystem::interval(0, 1, 6).unwrap();
    let family = CubeFamily::all_shifts(&system, 6);
    let e = corpus_exponents();
    let mut worst = 0.0f64;
    for case in 0..100 {
        let wv = corpus_vector(&system, case);
        let apq = a_pq_constant(&wv, &family).unwrap();
        let tw = two_weight_constant(wv.u(), &wv, &family).unwrap();
        let expect = apq.powf(rat_to_f64(e.q().recip()));
        worst = worst.max((tw - expect).abs() / expect);
    }
    assert!(worst <= REL_EXACT, "worst relative gap {worst}");
    pass(&format!(
        "1b two-weight reduction: 100 weight vectors, worst relative gap {worst:.2e} <= 1e-12"
    ));
}

#[test]
fn criterion_1c_q1_coincidence_of_sparse_forms() {
    let system = RootSystem::interval(-2, 2, 6).unwrap();
    let e = corpus_exponents();
    let mut worst = 0.0f64;
    let mut nonempty = 0;
    for case in 0..100u64 {
        let mut rng = case_rng(SEED + 1, case);
        let f1 = random_grid(&system, &mut rng, 0.3, 3.0);
        let f2 = random_grid(&system, &mut rng, 0.3, 3.0);
        let fam = build_sparse(&[&f1, &f2], &e, Shift::NONE).unwrap().family;
        if fam.is_empty() {
            continue;
        }
        nonempty += 1;
        let g1 = random_grid(&system, &mut rng, 0.1, 2.0);
        let g2 = random_grid(&system, &mut rng, 0.1, 2.0);
        let plain = sparse_integral(&[&g1, &g2], &fam, &e).unwrap();
        let q1 = sparse_integral_q(&[&g1, &g2], &fam, &e, 1.0).unwrap();
        for (a, b) in plain.values().iter().zip(q1.values()) {
            if *b > 0.0 {
                worst = worst.max((a - b).abs() / b);
            }
        }
    }
    assert!(nonempty >= 50, "need a meaningful corpus, got {nonempty}");
    assert!(worst <= REL_EXACT, "worst relative gap {worst}");
    pass(&format!(
        "1c q=1 coincidence: {nonempty} sparse families, worst cellwise gap {worst:.2e} <= 1e-12"
    ));
}

#[test]
fn criterion_1d_holder_identity_per_cube() {
    let system = RootSystem::interval(0, 1, 6).unwrap();
    let family = CubeFamily::all_shifts(&system, 6);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let wv = corpus_vector(&system, case);
        worst = worst.max(holder_identity_worst_ratio(&wv, &family).unwrap());
    }
    assert!(worst <= 1.0 + REL_EXACT, "worst per-cube ratio {worst}");
    pass(&format!(
        "1d per-cube Holder identity: 100 vectors x full family, worst ratio {worst:.12} <= 1"
    ));
}

#[test]
fn criterion_2a_weighted_maximal_norm_constant() {
    let system = RootSystem::interval(0, 1, 6).unwrap();
    let cases = [
        (rat(2, 1), rat(0, 1)),
        (rat(2, 1), rat(1, 2)),
        (rat(4, 3), rat(1, 2)),
    ];
    let mut worst = 0.0f64;
    for (ci, (p, alpha)) in cases.into_iter().enumerate() {
        for trial in 0..200u64 {
            let mut rng = case_rng(SEED + 2 + ci as u64, trial);
            let f = random_grid(&system, &mut rng, 1e-3, 4.0);
            let w = random_grid(&system, &mut rng, 0.1, 10.0);
            let (lhs, rhs) =
                weighted_maximal_norm_check(&f, &w, p, alpha, Shift::NONE).unwrap();
            worst = worst.max(lhs / rhs);
            assert!(
                lhs <= rhs * (1.0 + REL_EXACT),
                "(p, alpha) = ({p}, {alpha}) trial {trial}: {lhs} > {rhs}"
            );
        }
    }
    pass(&format!(
        "2a weighted maximal norm bound with explicit constant: 3 x 200 trials, worst lhs/rhs {worst:.6}"
    ));
}

#[test]
fn criterion_2b_sharp_reverse_holder() {
    let system = RootSystem::interval(-1, 1, 8).unwrap();
    let family = CubeFamily::all_shifts(&system, 8);
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let mut rng = case_rng(SEED + 5, trial);
        let w = random_step_weight(&system, &mut rng, 3, 0.05, 20.0);
        let rep = reverse_holder_check(&w, &family).unwrap();
        worst = worst.max(rep.worst_ratio);
        assert!(
            rep.worst_ratio <= 2.0,
            "trial {trial}: ratio {} at {:?}",
            rep.worst_ratio,
            rep.worst_cube
        );
    }
    // conjugate power weights of the extremal family
    for k in 2..=8 {
        let eps = pow2(-k);
        let sigma = discretize_power(&system, eps - 1).unwrap();
        let rep = reverse_holder_check(&sigma, &family).unwrap();
        worst = worst.max(rep.worst_ratio);
        assert!(rep.worst_ratio <= 2.0, "eps = 2^-{k}: ratio {}", rep.worst_ratio);
    }
    pass(&format!(
        "2b sharp reverse Holder (tau_1 = 2^12): 100 step weights + 7 power weights, worst ratio {worst:.4} <= 2"
    ));
}

#[test]
fn criterion_2c_sparse_domination() {
    let mut worst = 0.0f64;
    for (ci, (alpha, ps)) in [
        (rat(1, 2), vec![rat(2, 1), rat(2, 1)]),
        (rat(1, 1), vec![rat(3, 2), rat(3, 2)]),
    ]
    .into_iter()
    .enumerate()
    {
        let e = ExponentData::homogeneous(1, alpha, ps).unwrap();
        let system = RootSystem::interval(-2, 2, 6).unwrap();
        for trial in 0..50u64 {
            let mut rng = case_rng(SEED + 6 + ci as u64, trial);
            let f1 = random_grid(&system, &mut rng, 0.2, 4.0);
            let f2 = random_grid(&system, &mut rng, 0.2, 4.0);
            let u = random_grid(&system, &mut rng, 0.1, 3.0);
            let rep = sparse_domination_check(&[&f1, &f2], &e, &u).unwrap();
            worst = worst.max(rep.ratio);
            assert!(rep.ratio <= 1.0 + REL_EXACT, "trial {trial}: {rep:?}");
        }
    }
    pass(&format!(
        "2c level-set sparse domination: 100 multilinear trials, worst ratio {worst:.6} <= 1"
    ));
}

#[test]
fn criterion_2d_carleson_embedding() {
    let system = RootSystem::interval(-1, 1, 5).unwrap();
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let mut rng = case_rng(SEED + 8, trial);
        let mu = random_grid(&system, &mut rng, 0.1, 4.0);
        let mut entries = Vec::new();
        let mut a = HashMap::new();
        for k in -1..=5 {
            for q in system.level_range(k, Shift::NONE).iter_cubes() {
                if rng.gen_bool(0.3) {
                    entries.push((q.clone(), rng.gen_range(0.0..2.0)));
                }
                if rng.gen_bool(0.3) {
                    a.insert(q, rng.gen_range(-3.0..3.0));
                }
            }
        }
        let c = mfrac::carleson::CarlesonSequence::new(Shift::NONE, entries, mu).unwrap();
        for r in [0.5, 1.0, 2.0] {
            let rep = mfrac::carleson::carleson_embedding_check(&a, &c, r).unwrap();
            assert!(rep.holds, "trial {trial} r {r}: {rep:?}");
            if rep.rhs > 0.0 && rep.constant.is_finite() {
                worst = worst.max(rep.lhs / (rep.constant * rep.rhs));
            }
        }
    }
    assert!(worst <= 1.0 + 1e-9);
    pass(&format!(
        "2d Carleson embedding: 100 instances x r in {{1/2, 1, 2}}, worst lhs/(C rhs) {worst:.6} <= 1"
    ));
}

#[test]
fn criterion_3_sparse_families_verify() {
    // the worked stopping example, frozen
    let system = RootSystem::new(vec![-8], 16, 4).unwrap();
    let e1 = ExponentData::homogeneous(1, rat(0, 1), vec![rat(2, 1)]).unwrap();
    let f = GridFunction::indicator_box(system.clone(), &[rat(0, 1)], &[rat(1, 1)]).unwrap();
    let out = build_sparse(&[&f], &e1, Shift::NONE).unwrap();
    assert_eq!(out.stopping_ratio, 4.0);
    let gens = out.family.generations();
    assert_eq!(gens.len(), 2);
    assert_eq!(gens[&-1].len(), 1);
    assert_eq!(gens[&-1][0].cube, cube_at(&[rat(0, 1)], -1, Shift::NONE)); // [0,2)
    assert_eq!(gens[&-2][0].cube, cube_at(&[rat(0, 1)], -3, Shift::NONE)); // [0,8)
    assert!(out.family.verify().is_valid());

    // randomized builder corpus: every family passes all four mask-exact
    // invariants and the selection band on both grids
    let system = RootSystem::interval(-2, 2, 6).unwrap();
    let mut families = 0usize;
    for (ci, (alpha, ps)) in [
        (rat(1, 2), vec![rat(2, 1), rat(2, 1)]),
        (rat(1, 1), vec![rat(3, 2), rat(3, 2)]),
    ]
    .into_iter()
    .enumerate()
    {
        let e = ExponentData::homogeneous(1, alpha, ps).unwrap();
        let band = 2f64.powf(2.0 - e.alpha_f64());
        for trial in 0..50u64 {
            let mut rng = case_rng(SEED + 10 + ci as u64, trial);
            let f1 = random_grid(&system, &mut rng, 0.3, 3.0);
            let f2 = random_grid(&system, &mut rng, 0.3, 3.0);
            for t in Shift::all(1) {
                let out = build_sparse(&[&f1, &f2], &e, t).unwrap();
                let rep = out.family.verify();
                assert!(rep.is_valid(), "trial {trial}: {:?}", rep.violation);
                let a = out.stopping_ratio;
                for (&k, cubes) in out.family.generations() {
                    for sc in cubes {
                        assert!(a.powi(k) < sc.sigma && sc.sigma <= band * a.powi(k) * (1.0 + REL_EXACT));
                    }
                }
                families += 1;
            }
        }
    }
    // the extremal singular family also builds cleanly
    let eps = pow2(-4);
    let fs = discretize_power(&system, eps - 1).unwrap();
    let e = corpus_exponents();
    for t in Shift::all(1) {
        let out = build_sparse(&[&fs, &fs], &e, t).unwrap();
        assert!(!out.family.is_empty());
        assert!(out.family.verify().is_valid());
        families += 1;
    }
    pass(&format!(
        "3 sparse structure: worked example frozen, {families} built families verify bit-exactly"
    ));
}

fn assert_fit(report: &mfrac::sharpness::ExperimentReport, name: &str) -> (f64, f64) {
    let fit = report.fit(name).unwrap_or_else(|| panic!("missing fit {name}"));
    assert!(
        fit.pass,
        "{name}: slope {} vs target {} (tol {}, one-sided {})",
        fit.slope, fit.target, fit.tolerance, fit.one_sided
    );
    (fit.slope, fit.target)
}

#[test]
fn criterion_4a_t1_exponents() {
    let e = corpus_exponents(); // p = (4/3, 4), alpha = 1/2, q = 2
    let mut cfg = ExperimentConfig::new(e, Theorem::T1);
    cfg.mesh_level = 10;
    cfg.eps_list = eps_sweep(3, 10);
    let report = run_experiment(&cfg).unwrap();
    let mut lines = Vec::new();
    for (name, target) in [
        ("norm_f1", -0.75),
        ("norm_f2", -0.25),
        ("a_pq", -0.5),
        ("lhs_norm", -1.5),
    ] {
        let (slope, t) = assert_fit(&report, name);
        assert_eq!(t, target);
        lines.push(format!("{name} {slope:.3} ~ {target}"));
    }
    pass(&format!("4a maximal-operator extremal slopes: {}", lines.join(", ")));
}

#[test]
fn criterion_4b_t3_exponents() {
    let e = ExponentData::homogeneous(1, rat(1, 2), vec![rat(2, 1), rat(2, 1)]).unwrap();
    let mut cfg = ExperimentConfig::new(e, Theorem::T3);
    cfg.mesh_level = 10;
    cfg.eps_list = eps_sweep(3, 10);
    let report = run_experiment(&cfg).unwrap();
    let (apq_slope, _) = assert_fit(&report, "a_pq");
    assert!((apq_slope + 2.0).abs() <= 0.1);
    let (lhs_slope, _) = assert_fit(&report, "lhs_norm");
    assert!((lhs_slope + 2.5).abs() <= 0.1);
    for name in ["a_infty_1", "a_infty_2"] {
        let fit = report.fit(name).unwrap();
        assert!(fit.slope >= -1.1, "{name}: slope {}", fit.slope);
    }
    // mixed-bound saturation across the sweep
    let ratios: Vec<f64> = report
        .rows
        .iter()
        .map(|r| r.mixed_bound_ratio.unwrap())
        .collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        hi / lo <= 8.0,
        "mixed bound saturation drifts by {:.3} (> 8): {ratios:?}",
        hi / lo
    );
    // two-weight reduction holds per eps
    for r in &report.rows {
        assert!(r.two_weight_gap.unwrap() <= REL_EXACT);
    }
    pass(&format!(
        "4b mixed-bound extremal slopes: a_pq {apq_slope:.3} ~ -2, lhs {lhs_slope:.3} ~ -5/2, saturation x{:.2} <= 8",
        hi / lo
    ));
}

#[test]
fn criterion_4c_t2_integral_operator() {
    let e = corpus_exponents();
    let mut cfg = ExperimentConfig::new(e, Theorem::T2);
    cfg.mesh_level = 8; // full tensor quadrature: documented desk scale
    cfg.eps_list = eps_sweep(3, 10);
    let report = run_experiment(&cfg).unwrap();
    let (slope, _) = assert_fit(&report, "lhs_norm");
    assert!((slope + 1.5).abs() <= 0.1);
    let cs: Vec<f64> = report.rows.iter().map(|r| r.mw_ratio.unwrap()).collect();
    let mid = {
        let mut s = cs.clone();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };
    for c in &cs {
        assert!(
            (c - mid).abs() / mid <= 0.10,
            "pointwise domination constant drifts: {cs:?}"
        );
    }
    pass(&format!(
        "4c integral-operator extremal slope {slope:.3} ~ -3/2, pointwise M <= C I with C = {mid:.3} stable within 10%"
    ));
}

#[test]
fn criterion_5_quadrature_sanity() {
    let system = RootSystem::interval(0, 1, 8).unwrap();
    let e = ExponentData::homogeneous(1, rat(1, 2), vec![rat(4, 3)]).unwrap();
    let f = GridFunction::constant(system.clone(), 1.0);
    let out = multilinear_integral(&[&f], &e, 3).unwrap();
    let target = 2.0 * 2f64.sqrt();
    let got = out.value(system.num_cells() / 2);
    let rel = (got - target).abs() / target;
    assert!(rel < 0.02, "I_(1/2) chi at 1/2: {got} vs {target}");
    // mirror symmetry, bit exact
    let vals: Vec<f64> = (0..system.num_cells())
        .map(|i| 1.0 + ((i.min(system.num_cells() - 1 - i)) as f64 * 0.531).cos().abs())
        .collect();
    let g = GridFunction::from_values(system.clone(), vals).unwrap();
    let sym = multilinear_integral(&[&g], &e, 3).unwrap();
    for i in 0..system.num_cells() {
        assert_eq!(sym.value(i), sym.value(system.num_cells() - 1 - i));
    }
    pass(&format!(
        "5 quadrature sanity: I chi(1/2) = {got:.4} within {:.2}% of 2 sqrt 2; mirror symmetry bit-exact",
        rel * 100.0
    ));
}

#[test]
fn criterion_6_covering_property() {
    let mut rng = case_rng(SEED + 20, 0);
    let mut worst_ratio = 0.0f64;
    for trial in 0..10_000u32 {
        // sides in [2^-10, 4], corners on a fine dyadic lattice
        let side = Rat::new(rng.gen_range(1i64..(1 << 12)) as i128, 1 << 10);
        let n = if trial % 4 == 0 { 2 } else { 1 };
        let lower: Vec<Rat> = (0..n)
            .map(|_| Rat::new(rng.gen_range(-(1i64 << 20)..(1 << 20)) as i128, 1 << 20))
            .collect();
        let (t, q) = covering_cube(&lower, side);
        // exact rational membership and ratio check
        for (i, l) in lower.iter().enumerate() {
            assert!(q.lower(i) <= *l && *l + side <= q.upper(i), "trial {trial}");
        }
        assert!(q.side() <= side * 6, "trial {trial}: ratio too large");
        assert_eq!(q.shift, t);
        worst_ratio = worst_ratio.max(rat_to_f64(q.side() / side));
    }
    pass(&format!(
        "6 covering property: 10^4 random cubes, worst side ratio {worst_ratio:.3} <= 6, exact arithmetic"
    ));
}
