//! Reference solutions: RK4 shooting for the regularized equations and a dense
//! elimination for linear systems.

use crate::error::{Error, Result};
use crate::linbvp::{assemble, LinearBvp, TridiagonalSystem};
use crate::model::{Problem, Profile, RadialGrid, Regime};
use crate::scalar::Real;

pub const DEFAULT_STEPS: usize = 1 << 14;
pub const SHOOTING_TOL: f64 = 1e-10;
/// accepted only when a shot 64 ulp away in F(r0) is just as close
const STALL_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct ShootingResult<T> {
    pub profile: Profile<T>,
    /// flux F(r0) found by root finding
    pub initial_flux: T,
    pub terminal_mismatch: T,
    pub integrator_steps: usize,
    /// sign changes of the mismatch seen by the bracket scan
    pub sign_changes: usize,
}

/// Shot parameters: flux coefficient p and tau-term constant q.
#[derive(Debug, Clone, Copy)]
struct Law<T> {
    p: T,
    q: T,
    regime: Regime,
    /// drop the r-weights and the geometric source (symmetry checks only)
    reduced: bool,
}

/// How a shot ended.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome<T> {
    Reached(T),
    /// left the branch towards small m
    Low(T),
    /// left the branch towards large m
    High(T),
}

fn law<T: Real>(problem: &Problem<T>, regime: Regime, param: T) -> Result<Law<T>> {
    let jj = problem.big_j();
    let eps = T::lit(1e-6);
    match regime {
        Regime::Subsonic => {
            if !(param > T::zero() && param <= jj * (T::one() - eps)) {
                return Err(Error::Precondition(format!("shooting needs j <= J(1 - 1e-6), got {param}")));
            }
            Ok(Law { p: param, q: jj, regime, reduced: false })
        }
        Regime::Supersonic => {
            if !(param >= jj * (T::one() + eps)) {
                return Err(Error::Precondition(format!("shooting needs k >= J(1 + 1e-6), got {param}")));
            }
            Ok(Law { p: param, q: param, regime, reduced: false })
        }
    }
}

struct System<'a, T> {
    problem: &'a Problem<T>,
    law: Law<T>,
}

impl<T: Real> System<'_, T> {
    fn weight(&self, r: T) -> T {
        if self.law.reduced {
            T::one()
        } else {
            self.problem.config.weight(r)
        }
    }

    fn rhs(&self, r: T, m: T, f: T) -> Option<(T, T)> {
        let c = &self.problem.config;
        let coef = T::one() / m - self.law.p * self.law.p / (m * m * m);
        // a stage across the sonic line means the step jumped the singularity
        if !(coef.abs() > T::lit(1e-300)) || !m.is_finite() || !f.is_finite() || self.escaped(m).is_some() {
            return None;
        }
        let dm = (f / self.weight(r) - self.law.q / (c.tau() * m)) / coef;
        let (b, s) = if self.law.reduced {
            (self.problem.doping.eval(r), T::zero())
        } else {
            (self.problem.weight_b(r), c.geometric_source(r))
        };
        Some((dm, m - b + s))
    }

    /// True when m has left the regime branch.
    fn escaped(&self, m: T) -> Option<Outcome<T>> {
        let p = self.law.p;
        let big = T::lit(1e8) * self.problem.big_j();
        match self.law.regime {
            Regime::Subsonic if !(m > p) => Some(Outcome::Low(m)),
            Regime::Subsonic if m > big => Some(Outcome::High(m)),
            Regime::Supersonic if !(m < p) => Some(Outcome::High(m)),
            Regime::Supersonic if !(m > T::lit(1e-12) * self.problem.big_j()) => Some(Outcome::Low(m)),
            _ => None,
        }
    }

    fn step(&self, r: T, h: T, m: T, f: T) -> Option<(T, T)> {
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        let (k1m, k1f) = self.rhs(r, m, f)?;
        let (k2m, k2f) = self.rhs(r + half * h, m + half * h * k1m, f + half * h * k1f)?;
        let (k3m, k3f) = self.rhs(r + half * h, m + half * h * k2m, f + half * h * k2f)?;
        let (k4m, k4f) = self.rhs(r + h, m + h * k3m, f + h * k3f)?;
        Some((m + h / six * (k1m + two * k2m + two * k3m + k4m), f + h / six * (k1f + two * k2f + two * k3f + k4f)))
    }

    /// Integrates from r0 with m = J, F = s; `substeps` RK4 steps per grid cell.
    /// Returns the outcome and, when `record`, nodal (m, F).
    fn integrate(&self, grid: &RadialGrid<T>, substeps: usize, s: T, record: bool) -> (Outcome<T>, Vec<T>, Vec<T>) {
        let x = grid.nodes();
        let mut m = self.problem.big_j();
        let mut f = s;
        let mut ms = Vec::new();
        let mut fs = Vec::new();
        if record {
            ms.push(m);
            fs.push(f);
        }
        let sub = T::from_usize_lossy(substeps);
        for i in 0..grid.cells() {
            let h = (x[i + 1] - x[i]) / sub;
            for k in 0..substeps {
                let r = x[i] + h * T::from_usize_lossy(k);
                match self.step(r, h, m, f) {
                    Some((mn, fnext)) => {
                        m = mn;
                        f = fnext;
                    }
                    None => {
                        return (self.classify_failure(m), ms, fs);
                    }
                }
                if let Some(out) = self.escaped(m) {
                    return (out, ms, fs);
                }
            }
            if record {
                ms.push(m);
                fs.push(f);
            }
        }
        (Outcome::Reached(m), ms, fs)
    }

    fn classify_failure(&self, m: T) -> Outcome<T> {
        // a non-finite stage means the derivative blew up next to the sonic line
        match self.law.regime {
            Regime::Subsonic => Outcome::Low(m),
            Regime::Supersonic => Outcome::High(m),
        }
    }

    /// Mismatch m(r1) - J with escapes mapped to +-infinity.
    fn mismatch(&self, grid: &RadialGrid<T>, substeps: usize, s: T) -> T {
        match self.integrate(grid, substeps, s, false).0 {
            Outcome::Reached(m) => m - self.problem.big_j(),
            Outcome::Low(_) => T::neg_infinity(),
            Outcome::High(_) => T::infinity(),
        }
    }
}

/// Shoots on a uniform grid with `steps` cells, one RK4 step per cell.
pub fn shoot<T: Real>(regime: Regime, param: T, problem: &Problem<T>, steps: usize) -> Result<ShootingResult<T>> {
    let grid = RadialGrid::uniform(problem.config.r0(), problem.config.r1(), steps)?;
    shoot_on_grid(regime, param, problem, &grid, 1)
}

/// Shoots with `substeps` RK4 steps per cell of `grid`; the profile lives on `grid`.
pub fn shoot_on_grid<T: Real>(regime: Regime, param: T, problem: &Problem<T>, grid: &RadialGrid<T>, substeps: usize) -> Result<ShootingResult<T>> {
    let law = law(problem, regime, param)?;
    shoot_with_law(problem, law, grid, substeps)
}

/// Shot of the problem with r-weights and geometric source removed. Test aid.
#[doc(hidden)]
pub fn shoot_reduced<T: Real>(regime: Regime, param: T, problem: &Problem<T>, grid: &RadialGrid<T>, substeps: usize) -> Result<ShootingResult<T>> {
    let mut law = law(problem, regime, param)?;
    law.reduced = true;
    shoot_with_law(problem, law, grid, substeps)
}

/// Terminal value m(r1) for a fixed initial flux; `None` when the shot left the branch.
pub fn integrate_fixed_flux<T: Real>(regime: Regime, param: T, problem: &Problem<T>, s: T, steps: usize) -> Result<Option<T>> {
    let law = law(problem, regime, param)?;
    let grid = RadialGrid::uniform(problem.config.r0(), problem.config.r1(), steps)?;
    let sys = System { problem, law };
    Ok(match sys.integrate(&grid, 1, s, false).0 {
        Outcome::Reached(m) => Some(m),
        _ => None,
    })
}

fn shoot_with_law<T: Real>(problem: &Problem<T>, law: Law<T>, grid: &RadialGrid<T>, substeps: usize) -> Result<ShootingResult<T>> {
    if substeps == 0 {
        return Err(Error::Precondition("substeps must be positive".into()));
    }
    if !grid.matches_interval(problem.config.r0(), problem.config.r1()) {
        return Err(Error::GridMismatch("shooting grid does not span [r0, r1]".into()));
    }
    let sys = System { problem, law };
    let c = &problem.config;
    let jj = c.big_j();
    let w0 = sys.weight(c.r0());
    // flux with zero initial slope
    let centre = w0 * law.q / (c.tau() * jj);
    let (lo, hi, sign_changes) = bracket(&sys, grid, substeps, centre)?;
    let s = secant(&sys, grid, substeps, lo, hi)?;
    let (out, ms, _) = sys.integrate(grid, substeps, s, true);
    let terminal = match out {
        Outcome::Reached(m) => (m - jj).abs(),
        _ => return Err(Error::SonicCrossing { r: f64::NAN }),
    };
    if !(terminal.as_f64() < SHOOTING_TOL) {
        // for stiff shots m(r1) moves by more than the tolerance per ulp of F(r0)
        let ulp = T::epsilon() * T::lit(64.0) * s.abs().max(T::one());
        let nudged = sys.mismatch(grid, substeps, s + ulp).abs();
        if !(terminal.as_f64() < STALL_TOL && nudged.as_f64() < STALL_TOL) {
            return Err(Error::Bracket(format!("secant stalled with terminal mismatch {terminal}")));
        }
        log::warn!("shooting accepted at terminal mismatch {terminal}: resolution limited by F(r0)");
    }
    let mut ms = ms;
    let last = ms.len() - 1;
    ms[last] = jj;
    Ok(ShootingResult {
        profile: Profile::new(grid.clone(), ms)?,
        initial_flux: s,
        terminal_mismatch: terminal,
        integrator_steps: grid.cells() * substeps,
        sign_changes,
    })
}

/// Scans F(r0) on widening symmetric windows around `centre` until the mismatch changes sign.
fn bracket<T: Real>(sys: &System<'_, T>, grid: &RadialGrid<T>, substeps: usize, centre: T) -> Result<(T, T, usize)> {
    let scale = centre.abs().max(T::one());
    let points = 48;
    let mut width = scale * T::lit(0.25);
    for _ in 0..12 {
        let xs: Vec<T> = (0..=points)
            .map(|i| centre - width + width * T::lit(2.0) * T::from_usize_lossy(i) / T::from_usize_lossy(points))
            .collect();
        let fs: Vec<T> = xs.iter().map(|&s| sys.mismatch(grid, substeps, s)).collect();
        let changes: Vec<usize> = (0..points)
            .filter(|&i| (fs[i] < T::zero()) != (fs[i + 1] < T::zero()) && !fs[i].is_nan() && !fs[i + 1].is_nan())
            .collect();
        // a jump to +-inf is an escape edge, not necessarily a root; take finite pairs first
        let finite = changes.iter().copied().find(|&i| fs[i].is_finite() && fs[i + 1].is_finite());
        if let Some(i) = finite.or(changes.first().copied()) {
            if changes.len() > 1 {
                log::warn!("shooting mismatch changes sign {} times; using the first bracket", changes.len());
            }
            return Ok((xs[i], xs[i + 1], changes.len()));
        }
        width = width * T::lit(4.0);
    }
    Err(Error::Bracket(format!("no sign change of m(r1) - J around F(r0) = {centre}")))
}

/// Secant steps kept inside the bracket, bisection when a step leaves it or the shot escapes.
fn secant<T: Real>(sys: &System<'_, T>, grid: &RadialGrid<T>, substeps: usize, mut a: T, mut b: T) -> Result<T> {
    let mut fa = sys.mismatch(grid, substeps, a);
    let mut fb = sys.mismatch(grid, substeps, b);
    let half = T::lit(0.5);
    let tol = T::lit(SHOOTING_TOL) * T::lit(0.01);
    for _ in 0..200 {
        let mid = (a + b) * half;
        let trial = if fa.is_finite() && fb.is_finite() && fb != fa {
            let s = b - fb * (b - a) / (fb - fa);
            let lo = a.min(b);
            let hi = a.max(b);
            // keep away from the bracket ends to avoid stalls
            let margin = (hi - lo) * T::lit(1e-3);
            if s > lo + margin && s < hi - margin {
                s
            } else {
                mid
            }
        } else {
            mid
        };
        let ft = sys.mismatch(grid, substeps, trial);
        if ft.is_finite() && ft.abs() < tol {
            return Ok(trial);
        }
        if (ft < T::zero()) == (fa < T::zero()) {
            a = trial;
            fa = ft;
        } else {
            b = trial;
            fb = ft;
        }
        if (b - a).abs() <= T::epsilon() * T::lit(4.0) * a.abs().max(b.abs()).max(T::one()) {
            break;
        }
    }
    // best finite end
    let cands = [(a, fa), (b, fb)];
    let best = cands
        .iter()
        .filter(|(_, f)| f.is_finite())
        .min_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap_or(std::cmp::Ordering::Equal));
    best.map(|&(s, _)| s).ok_or_else(|| Error::Bracket("secant bracket collapsed on escaping shots".into()))
}

/// Dense Gaussian elimination with partial pivoting on the interior system.
pub fn dense_solve_system<T: Real>(sys: &TridiagonalSystem<T>) -> Result<Profile<T>> {
    let m = sys.size();
    let mut a = vec![vec![T::zero(); m + 1]; m];
    for i in 0..m {
        if i > 0 {
            a[i][i - 1] = sys.sub[i];
        }
        a[i][i] = sys.diag[i];
        if i + 1 < m {
            a[i][i + 1] = sys.sup[i];
        }
        a[i][m] = sys.rhs[i];
    }
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        if a[piv][col] == T::zero() {
            return Err(Error::Singular { row: col });
        }
        a.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let prow = &top[col];
        for row in rest.iter_mut() {
            let f = row[col] / prow[col];
            if f != T::zero() {
                for j in col..=m {
                    row[j] -= f * prow[j];
                }
            }
        }
    }
    let mut x = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut s = a[i][m];
        for j in i + 1..m {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    let mut y = Vec::with_capacity(m + 2);
    y.push(sys.alpha);
    y.extend(x);
    y.push(sys.beta);
    Profile::new(sys.grid.clone(), y)
}

pub fn dense_reference_solve<T: Real>(bvp: &LinearBvp<T>) -> Result<Profile<T>> {
    dense_solve_system(&assemble(bvp)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DopingProfile, ProblemConfig};

    #[test]
    fn dense_quadratic() {
        let g = RadialGrid::<f64>::uniform(0.0, 1.0, 16).unwrap();
        let bvp = LinearBvp {
            grid: g.clone(),
            a: Profile::constant(&g, 1.0),
            b: Profile::constant(&g, 0.0),
            c: Profile::constant(&g, 0.0),
            f: Profile::constant(&g, 2.0),
            alpha: 0.0,
            beta: 0.0,
            upwind: false,
        };
        let y = dense_reference_solve(&bvp).unwrap();
        for (r, v) in g.nodes().iter().zip(y.values()) {
            assert!((r * r - r - v).abs() < 1e-14);
        }
        let id = TridiagonalSystem::identity(&g, vec![2.5; 15]);
        assert!(dense_solve_system(&id).unwrap().values()[1..16].iter().all(|&v| v == 2.5));
    }

    #[test]
    fn rejects_degenerate_params() {
        let p = Problem::new(ProblemConfig::new(2, 1.0, 2.0, 1.0, 1.0).unwrap(), DopingProfile::Constant { value: 2.0 }).unwrap();
        assert!(shoot(Regime::Subsonic, 1.0, &p, 64).is_err());
        assert!(shoot(Regime::Supersonic, 1.0 + 1e-9, &p, 64).is_err());
    }
}
