//! One PASS/FAIL line per acceptance criterion. Failures are reported, never panicked on.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;

use sonic_annulus::linbvp::{assemble, thomas_solve, LinearBvp, TridiagonalSystem};
use sonic_annulus::oracle::{dense_reference_solve, shoot_on_grid};
use sonic_annulus::subsonic::{continuation_solve, continuation_solve_from, fit_lambda, solve_regularized, upper_bound_n};
use sonic_annulus::supersonic::{continuation_solve_supersonic, solve_regularized_supersonic, solve_v_problem};
use sonic_annulus::verify::{
    boundary_difference_quotient, check_pointwise_domination, energy_identity_residual, holder_seminorm, interior_gap, weak_residual,
};
use sonic_annulus::{DopingProfile, Problem, ProblemConfig, Profile, RadialGrid, Regime, Scheme, Solution, SubsonicParams, SupersonicParams};

type Outcome = Result<String, String>;

fn problem(n: usize, b: f64) -> Problem<f64> {
    Problem::new(ProblemConfig::new(n, 1.0, 2.0, 1.0, 1.0).unwrap(), DopingProfile::Constant { value: b }).unwrap()
}

fn canonical() -> [(usize, Problem<f64>); 2] {
    [(2, problem(2, 2.0)), (3, problem(3, 3.0))]
}

fn grid(cells: usize) -> RadialGrid<f64> {
    RadialGrid::uniform(1.0, 2.0, cells).unwrap()
}

fn solve(p: &Problem<f64>, regime: Regime, cells: usize) -> Result<Solution<f64>, String> {
    let r = match regime {
        Regime::Subsonic => continuation_solve(p, &grid(cells), &SubsonicParams::default()),
        Regime::Supersonic => continuation_solve_supersonic(p, &grid(cells), &SupersonicParams::default()),
    };
    r.map_err(|e| e.to_string())
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let cfg = |name: &str| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let margins = |name: &str| -> Result<Vec<f64>, String> {
        let o = Command::new(env!("CARGO_BIN_EXE_sonic-annulus"))
            .args(["check", cfg(name).to_str().unwrap(), "--json"])
            .output()
            .map_err(|e| e.to_string())?;
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
        Ok(v[0]["conditions"].as_array().ok_or("no conditions")?.iter().filter_map(|c| c["margin"].as_f64()).collect())
    };
    let m2 = margins("n2.json")?;
    let m3 = margins("n3.json")?;
    let want = [(m2[0], 4.0), (m2[1], 1.2), (m3[0], 13.0), (m3[1], 1.0 / 7.0)];
    let err = want.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    verdict(err <= 1e-12, format!("n=2 margins {m2:?}, n=3 margins {m3:?}, max error {err:.1e}"))
}

fn criterion_2() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, p) in canonical() {
        let bound = upper_bound_n(&p).map_err(|e| e.to_string())?;
        let s = solve(&p, Regime::Subsonic, 1024)?;
        let v = s.m.values();
        let last = v.len() - 1;
        let ends = v[0] == 1.0 && v[last] == 1.0;
        let inside = v[1..last].iter().all(|&m| m > 1.0);
        let lam = s.diagnostics.lambda_star.unwrap_or(0.0);
        let below = v.iter().all(|&m| m <= bound + 1e-9);
        ok &= s.diagnostics.continuation_converged && ends && inside && lam > 0.0 && below;
        notes.push(format!("n={n}: max m {:.4} <= N={bound}, lambda* {lam:.4}", s.m.max()));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_3() -> Outcome {
    // the nodal scheme is the reference discretization for the oracle comparison
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, p) in canonical() {
        for (regime, param) in [(Regime::Subsonic, 0.9), (Regime::Supersonic, 1.1)] {
            let mut d = Vec::new();
            for cells in [256usize, 512, 1024] {
                let g = grid(cells);
                let sh = shoot_on_grid(regime, param, &p, &g, (1 << 14) / cells).map_err(|e| e.to_string())?;
                let fd = match regime {
                    Regime::Subsonic => {
                        let pr = SubsonicParams { scheme: Scheme::Nodal, picard_max_iter: 5000, ..Default::default() };
                        solve_regularized(&p, param, &Profile::constant(&g, 1.0), &pr).map(|s| s.m)
                    }
                    Regime::Supersonic => {
                        let pr = SupersonicParams { scheme: Scheme::Nodal, inner_max_iter: 5000, ..Default::default() };
                        solve_regularized_supersonic(&p, param, &Profile::constant(&g, param), &pr).map(|s| s.m)
                    }
                }
                .map_err(|e| e.to_string())?;
                let dist = fd.sup_distance(&sh.profile).unwrap();
                let h = 1.0 / cells as f64;
                ok &= dist <= 10.0 * h * h;
                d.push(dist);
            }
            let ratios: Vec<f64> = d.windows(2).map(|w| w[0] / w[1]).collect();
            ok &= ratios.iter().all(|&r| r >= 3.5);
            notes.push(format!("n={n} {regime}: {:.2e}/{:.2e}/{:.2e} ratios {:.2}/{:.2}", d[0], d[1], d[2], ratios[0], ratios[1]));
        }
    }
    verdict(ok, notes.join("; "))
}

fn criterion_4() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, p) in canonical() {
        let s = solve(&p, Regime::Supersonic, 1024)?;
        let v = s.m.values();
        let last = v.len() - 1;
        let inside = v[1..last].iter().all(|&m| m > 0.0 && m < 1.0);
        let ell = s.m.min();
        let gap = interior_gap(&s.m, 1.0, 0.1).map_err(|e| e.to_string())?;
        ok &= s.diagnostics.continuation_converged && inside && ell > 0.0 && gap > 0.0;
        notes.push(format!("n={n}: ell {ell:.4}, gap {gap:.4}"));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, p) in canonical() {
        let bound = upper_bound_n(&p).map_err(|e| e.to_string())?;
        let g = grid(1024);
        let params = SubsonicParams::default();
        let a = continuation_solve(&p, &g, &params).map_err(|e| e.to_string())?;
        let c = g.cells();
        let init = Profile::new(g.clone(), (0..=c).map(|i| if i == 0 || i == c { 1.0 } else { bound }).collect()).unwrap();
        let b = continuation_solve_from(&p, &init, &params).map_err(|e| e.to_string())?;
        let d = a.m.sup_distance(&b.m).unwrap();
        ok &= d < 1e-7;
        notes.push(format!("n={n}: |m_J - m_N| = {d:.2e}"));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, p) in canonical() {
        for regime in [Regime::Subsonic, Regime::Supersonic] {
            let r: Vec<f64> = [256usize, 512, 1024]
                .iter()
                .map(|&c| solve(&p, regime, c).map(|s| s.diagnostics.weak_residual_linf))
                .collect::<Result<_, _>>()?;
            let halving = r.windows(2).all(|w| w[1] <= 0.5 * w[0]);
            ok &= r[2] < 1e-4 && halving;
            notes.push(format!("n={n} {regime}: {:.1e}/{:.1e}/{:.1e}", r[0], r[1], r[2]));
        }
    }
    let p = problem(2, 2.0);
    let fake = Profile::from_fn(&grid(1024), |r| 1.0 + (std::f64::consts::PI * (r - 1.0)).sin());
    let (fake_res, _) = weak_residual(&p, &fake).map_err(|e| e.to_string())?;
    ok &= fake_res >= 1e3 * 1e-4;
    notes.push(format!("J + sin: {fake_res:.2e}"));
    verdict(ok, notes.join("; "))
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, p) in canonical() {
        let g = grid(1024);
        let m = solve_regularized(&p, 0.9, &Profile::constant(&g, 1.0), &SubsonicParams::default()).map_err(|e| e.to_string())?.m;
        let e = energy_identity_residual(&p, &m, Regime::Subsonic, 0.9);
        ok &= e < 1e-3;
        notes.push(format!("n={n}: {e:.2e}"));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, p) in canonical() {
        let g = grid(512);
        let params = SupersonicParams::default();
        let (lo, ..) = solve_v_problem(&p, 1.1, 1.2, &Profile::constant(&g, 1.2), &params).map_err(|e| e.to_string())?;
        let (hi, ..) = solve_v_problem(&p, 1.1, 1.5, &Profile::constant(&g, 1.5), &params).map_err(|e| e.to_string())?;
        let v = check_pointwise_domination(&hi, &lo).unwrap();
        let s = solve(&p, Regime::Subsonic, 1024)?;
        let lam = fit_lambda(&s.m, 1.0);
        let sub = Profile::from_fn(s.m.grid(), |r| 1.0 + lam * (std::f64::consts::PI * (r - 1.0)).sin());
        let m = check_pointwise_domination(&s.m, &sub).unwrap();
        ok &= v.holds && m.holds && lam > 0.0;
        notes.push(format!("n={n}: v(1.5) >= v(1.2) {}, m >= J + {lam:.4} sin {}", v.holds, m.holds));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, p) in canonical() {
        for regime in [Regime::Subsonic, Regime::Supersonic] {
            let a = solve(&p, regime, 512)?;
            let b = solve(&p, regime, 1024)?;
            let (ha, hb) = (holder_seminorm(&a.m), holder_seminorm(&b.m));
            let q = boundary_difference_quotient(&b.m) / boundary_difference_quotient(&a.m);
            ok &= hb / ha < 2.0 && ha / hb < 2.0 && q >= 1.3;
            notes.push(format!("n={n} {regime}: holder {ha:.4}->{hb:.4}, C1 quotient x{q:.3}"));
        }
    }
    verdict(ok, notes.join("; "))
}

fn random_system(state: &mut u64, cells: usize) -> TridiagonalSystem<f64> {
    // splitmix64, enough for test matrices
    let mut next = || {
        *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let m = cells - 1;
    let sub: Vec<f64> = (0..m).map(|_| next()).collect();
    let sup: Vec<f64> = (0..m).map(|_| next()).collect();
    let diag: Vec<f64> = (0..m).map(|i| (sub[i].abs() + sup[i].abs() + 0.1 + next().abs()) * if next() > 0.0 { 1.0 } else { -1.0 }).collect();
    let rhs: Vec<f64> = (0..m).map(|_| 5.0 * next()).collect();
    let (alpha, beta) = (next(), next());
    TridiagonalSystem { grid: grid(cells), sub, diag, sup, rhs, alpha, beta }
}

fn criterion_10() -> Outcome {
    let mut state = 42u64;
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let sys = random_system(&mut state, [16, 33, 64, 100, 128][k % 5]);
        let t = thomas_solve(&sys).map_err(|e| e.to_string())?;
        let d = sonic_annulus::oracle::dense_solve_system(&sys).map_err(|e| e.to_string())?;
        worst = worst.max(t.sup_distance(&d).unwrap());
    }
    let mut bvp_worst: f64 = 0.0;
    for cells in [17usize, 64, 129] {
        let g = RadialGrid::uniform(0.0, 1.0, cells).unwrap();
        let bvp = LinearBvp {
            grid: g.clone(),
            a: Profile::from_fn(&g, |r| 1.0 + r * r),
            b: Profile::from_fn(&g, |r| r - 0.5),
            c: Profile::from_fn(&g, |r| -1.0 - r),
            f: Profile::from_fn(&g, |r: f64| (4.0 * r).cos()),
            alpha: 0.3,
            beta: -0.2,
            upwind: false,
        };
        let t = thomas_solve(&assemble(&bvp).unwrap()).unwrap();
        bvp_worst = bvp_worst.max(t.sup_distance(&dense_reference_solve(&bvp).unwrap()).unwrap());
    }
    use std::f64::consts::PI;
    let err = |cells: usize| {
        let g = RadialGrid::uniform(0.0, 1.0, cells).unwrap();
        let f = |r: f64| PI * (PI * r).cos() - (1.0 + r) * PI * PI * (PI * r).sin();
        let bvp = LinearBvp {
            grid: g.clone(),
            a: Profile::from_fn(&g, |r| 1.0 + r),
            b: Profile::constant(&g, 0.0),
            c: Profile::constant(&g, 0.0),
            f: Profile::from_fn(&g, f),
            alpha: 0.0,
            beta: 0.0,
            upwind: false,
        };
        let y = thomas_solve(&assemble(&bvp).unwrap()).unwrap();
        g.nodes().iter().zip(y.values()).map(|(&r, &v)| (v - (PI * r).sin()).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(128), err(256));
    let order = (e1 / e2).log2();
    verdict(
        worst <= 1e-12 && bvp_worst <= 1e-12 && order >= 1.9,
        format!("Thomas vs dense {worst:.1e} (systems), {bvp_worst:.1e} (BVPs); manufactured order {order:.3}"),
    )
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut passed = 0;
    for (k, f) in criteria {
        let line = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(d)) => {
                passed += 1;
                format!("criterion {k:>2}: PASS  {d}")
            }
            Ok(Err(d)) => format!("criterion {k:>2}: FAIL  {d}"),
            Err(_) => format!("criterion {k:>2}: FAIL  (panicked)"),
        };
        println!("{line}");
    }
    println!("acceptance: {passed}/10 criteria passed");
}
