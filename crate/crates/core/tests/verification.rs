use sonic_annulus::fields::reconstruct;
use sonic_annulus::subsonic::{continuation_solve, solve_regularized};
use sonic_annulus::supersonic::{continuation_solve_supersonic, solve_regularized_supersonic};
use sonic_annulus::verify::{
    boundary_difference_quotient, energy_identity_residual, gw_consistency, holder_seminorm, poisson_crosscheck, verify_profile,
    weak_residual,
};
use sonic_annulus::{DopingProfile, Problem, ProblemConfig, Profile, RadialGrid, Regime, Solution, SubsonicParams, SupersonicParams};

fn problem(n: usize, b: f64) -> Problem<f64> {
    Problem::new(ProblemConfig::new(n, 1.0, 2.0, 1.0, 1.0).unwrap(), DopingProfile::Constant { value: b }).unwrap()
}

fn solve(p: &Problem<f64>, regime: Regime, cells: usize) -> Solution<f64> {
    let g = RadialGrid::uniform(1.0, 2.0, cells).unwrap();
    match regime {
        Regime::Subsonic => continuation_solve(p, &g, &SubsonicParams::default()).unwrap(),
        Regime::Supersonic => continuation_solve_supersonic(p, &g, &SupersonicParams::default()).unwrap(),
    }
}

#[test]
fn converged_limits_pass_verification() {
    for (n, b) in [(2, 2.0), (3, 3.0)] {
        let p = problem(n, b);
        for regime in [Regime::Subsonic, Regime::Supersonic] {
            let s = solve(&p, regime, 1024);
            let rep = verify_profile(&p, &s.m, regime, None).unwrap();
            assert!(rep.passed, "n={n} {regime}: {:?}", rep.checks);
            assert!(rep.weak_residual_linf < 1e-4);
        }
    }
}

#[test]
fn synthetic_non_solution_fails_weak_form() {
    let p = problem(2, 2.0);
    let g = RadialGrid::uniform(1.0, 2.0, 1024).unwrap();
    let fake = Profile::from_fn(&g, |r| 1.0 + (std::f64::consts::PI * (r - 1.0)).sin());
    let (fake_res, _) = weak_residual(&p, &fake).unwrap();
    let s = solve(&p, Regime::Subsonic, 1024);
    assert!(fake_res > 1e3 * s.diagnostics.weak_residual_linf.max(1e-10), "{fake_res}");
    assert!(fake_res > 1e-1);
    let rep = verify_profile(&p, &fake, Regime::Subsonic, None).unwrap();
    assert!(!rep.passed);
}

#[test]
fn local_perturbation_raises_residual() {
    let p = problem(3, 3.0);
    let s = solve(&p, Regime::Subsonic, 512);
    let (base, _) = weak_residual(&p, &s.m).unwrap();
    let mut v = s.m.values().to_vec();
    v[256] += 1e-3;
    let bumped = Profile::new(s.m.grid().clone(), v).unwrap();
    let (res, _) = weak_residual(&p, &bumped).unwrap();
    assert!(res > 10.0 * base);
}

#[test]
fn energy_identity_on_regularized_solutions() {
    for (n, b) in [(2, 2.0), (3, 3.0)] {
        let p = problem(n, b);
        let mut prev = f64::INFINITY;
        for cells in [256usize, 512, 1024] {
            let g = RadialGrid::uniform(1.0, 2.0, cells).unwrap();
            let m = solve_regularized(&p, 0.9, &Profile::constant(&g, 1.0), &SubsonicParams::default()).unwrap().m;
            let e = energy_identity_residual(&p, &m, Regime::Subsonic, 0.9);
            assert!(e < prev, "n={n} N={cells}: {e} after {prev}");
            prev = e;
        }
        assert!(prev < 1e-3, "n={n}: {prev}");
        let g = RadialGrid::uniform(1.0, 2.0, 1024).unwrap();
        let m = solve_regularized_supersonic(&p, 1.1, &Profile::constant(&g, 1.1), &SupersonicParams::default()).unwrap().m;
        assert!(energy_identity_residual(&p, &m, Regime::Supersonic, 1.1) < 1e-2);
    }
}

#[test]
fn square_root_boundary_layer() {
    for (n, b) in [(2, 2.0), (3, 3.0)] {
        let p = problem(n, b);
        for regime in [Regime::Subsonic, Regime::Supersonic] {
            let a = solve(&p, regime, 512);
            let c = solve(&p, regime, 1024);
            let (ha, hc) = (holder_seminorm(&a.m), holder_seminorm(&c.m));
            assert!(hc / ha < 2.0 && ha / hc < 2.0, "n={n} {regime}: {ha} {hc}");
            let q = boundary_difference_quotient(&c.m) / boundary_difference_quotient(&a.m);
            assert!(q >= 1.3, "n={n} {regime}: {q}");
        }
    }
}

#[test]
fn gw_defect_shrinks_under_refinement() {
    let p = problem(2, 2.0);
    let d: Vec<f64> = [128usize, 512, 2048].iter().map(|&c| gw_consistency(&p, &solve(&p, Regime::Subsonic, c).m)).collect();
    assert!(d[1] < d[0] && d[2] < d[1], "{d:?}");
}

#[test]
fn poisson_check_detects_field_error() {
    let p = problem(2, 2.0);
    let s = solve(&p, Regime::Subsonic, 512);
    let mut f = reconstruct(&s.m, &p).unwrap();
    let base = poisson_crosscheck(&f, &p);
    assert!(base < 1e-3);
    f.e = f.e.map(|e| e + 0.1);
    assert!(poisson_crosscheck(&f, &p) > 10.0 * base);
}

#[test]
fn wrong_regime_fails_sign_check() {
    let p = problem(2, 2.0);
    let s = solve(&p, Regime::Subsonic, 256);
    let rep = verify_profile(&p, &s.m, Regime::Supersonic, None).unwrap();
    assert!(!rep.passed);
    assert!(rep.checks.iter().any(|c| c.name.contains("J - m") && !c.passed));
}

#[test]
fn interval_mismatch_rejected() {
    let p = problem(2, 2.0);
    let g = RadialGrid::uniform(1.0, 3.0, 64).unwrap();
    assert!(verify_profile(&p, &Profile::constant(&g, 1.0), Regime::Subsonic, None).is_err());
}
