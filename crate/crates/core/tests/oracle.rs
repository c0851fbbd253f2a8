use sonic_annulus::oracle::{integrate_fixed_flux, shoot, shoot_on_grid, shoot_reduced};
use sonic_annulus::subsonic::solve_regularized;
use sonic_annulus::supersonic::solve_regularized_supersonic;
use sonic_annulus::{DopingProfile, Problem, ProblemConfig, Profile, RadialGrid, Regime, Scheme, SubsonicParams, SupersonicParams};

fn problem(n: usize, b: f64) -> Problem<f64> {
    Problem::new(ProblemConfig::new(n, 1.0, 2.0, 1.0, 1.0).unwrap(), DopingProfile::Constant { value: b }).unwrap()
}

fn nodal_fd(p: &Problem<f64>, regime: Regime, param: f64, g: &RadialGrid<f64>) -> Profile<f64> {
    match regime {
        Regime::Subsonic => {
            let pr = SubsonicParams { scheme: Scheme::Nodal, picard_max_iter: 5000, ..Default::default() };
            solve_regularized(p, param, &Profile::constant(g, 1.0), &pr).unwrap().m
        }
        Regime::Supersonic => {
            let pr = SupersonicParams { scheme: Scheme::Nodal, inner_max_iter: 5000, ..Default::default() };
            solve_regularized_supersonic(p, param, &Profile::constant(g, param), &pr).unwrap().m
        }
    }
}

#[test]
fn regularized_profiles_match_shooting_at_second_order() {
    for (n, b) in [(2, 2.0), (3, 3.0)] {
        let p = problem(n, b);
        for (regime, param) in [(Regime::Subsonic, 0.9), (Regime::Supersonic, 1.1)] {
            let mut dists = Vec::new();
            for cells in [256usize, 512, 1024] {
                let g = RadialGrid::uniform(1.0, 2.0, cells).unwrap();
                let sh = shoot_on_grid(regime, param, &p, &g, (1 << 14) / cells).unwrap();
                let d = nodal_fd(&p, regime, param, &g).sup_distance(&sh.profile).unwrap();
                let h = 1.0 / cells as f64;
                assert!(d <= 10.0 * h * h, "n={n} {regime} N={cells}: {d:.3e}");
                dists.push(d);
            }
            for w in dists.windows(2) {
                let ratio = w[0] / w[1];
                assert!((3.0..=5.0).contains(&ratio), "n={n} {regime}: {dists:?}");
            }
        }
    }
}

#[test]
fn shooting_lands_on_sonic_value() {
    let p = problem(2, 2.0);
    for (regime, param) in [(Regime::Subsonic, 0.9), (Regime::Supersonic, 1.1)] {
        let sh = shoot(regime, param, &p, 4096).unwrap();
        assert!(sh.terminal_mismatch < 1e-10);
        assert_eq!(sh.profile.values()[0], 1.0);
        let interior = &sh.profile.values()[1..4096];
        match regime {
            Regime::Subsonic => assert!(interior.iter().all(|&m| m > 1.0)),
            Regime::Supersonic => assert!(interior.iter().all(|&m| m < 1.0 && m > 0.0)),
        }
    }
}

#[test]
fn rk4_fourth_order_under_step_halving() {
    let p = problem(3, 3.0);
    for (regime, param) in [(Regime::Subsonic, 0.9), (Regime::Supersonic, 1.1)] {
        let s = shoot(regime, param, &p, 2048).unwrap().initial_flux;
        let ends: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&n| integrate_fixed_flux(regime, param, &p, s, n).unwrap().unwrap())
            .collect();
        let ratio = (ends[0] - ends[1]).abs() / (ends[1] - ends[2]).abs();
        assert!(ratio >= 12.0, "{regime}: {ends:?} ratio {ratio}");
    }
}

#[test]
fn reduced_problem_symmetric_for_large_tau() {
    let p = problem(2, 2.0).with_tau(1e8).unwrap();
    let g = RadialGrid::uniform(1.0, 2.0, 512).unwrap();
    let sh = shoot_reduced(Regime::Subsonic, 0.9, &p, &g, 8).unwrap();
    let v = sh.profile.values();
    let n = v.len() - 1;
    let asym = (0..=n).map(|i| (v[i] - v[n - i]).abs()).fold(0.0, f64::max);
    assert!(asym < 1e-6, "{asym:e}");
    // the full problem is not symmetric
    let full = shoot_on_grid(Regime::Subsonic, 0.9, &p, &g, 8).unwrap();
    let w = full.profile.values();
    let asym_full = (0..=n).map(|i| (w[i] - w[n - i]).abs()).fold(0.0, f64::max);
    assert!(asym_full > 100.0 * asym.max(1e-12));
}

#[test]
fn shooting_deterministic() {
    let p = problem(3, 3.0);
    let a = shoot(Regime::Supersonic, 1.2, &p, 1024).unwrap();
    let b = shoot(Regime::Supersonic, 1.2, &p, 1024).unwrap();
    assert_eq!(a.profile.values(), b.profile.values());
    assert_eq!(a.initial_flux, b.initial_flux);
}

#[test]
fn shooting_rejects_sonic_parameter() {
    let p = problem(2, 2.0);
    assert!(shoot(Regime::Subsonic, 1.0, &p, 128).is_err());
    assert!(shoot(Regime::Supersonic, 1.0, &p, 128).is_err());
    let g = RadialGrid::uniform(1.0, 2.5, 128).unwrap();
    assert!(shoot_on_grid(Regime::Subsonic, 0.9, &p, &g, 1).is_err());
}
