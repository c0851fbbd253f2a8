//! Interior subsonic solutions: Picard iteration on the frozen-coefficient problem for a
//! regularized flux j < J, continued along j -> J from below.

use log::{debug, info, warn};

use crate::discrete::{newton_step, row_residuals, wants_newton, CellEval};
use crate::error::{Error, Result};
use crate::linbvp::{assemble, assemble_flux_form, thomas_solve, FluxFormBvp, LinearBvp};
use crate::model::{check_subsonic_hypotheses, Problem, Profile, RadialGrid, Regime};
use crate::scalar::{sup_diff, sup_norm, Real};
use crate::solution::{BoundViolations, Diagnostics, Solution, StageRecord};
use crate::verify;

/// Discretization of the frozen-coefficient problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// cell-midpoint coefficients, conservative treatment of the tau-term
    FluxForm,
    /// nodal coefficients, mean midpoint diffusion, centred convection
    Nodal,
}

#[derive(Debug, Clone)]
pub struct SubsonicParams<T> {
    pub picard_tol: T,
    pub picard_max_iter: usize,
    /// gaps sigma_t with j_t^2 = J^2 (1 - sigma_t)
    pub sigma_schedule: Vec<T>,
    pub continuation_tol: T,
    pub clamp: bool,
    pub scheme: Scheme,
    /// upwind convection in the nodal scheme
    pub upwind: bool,
    /// Newton on the discrete equations once the Picard change drops below `newton_switch`
    pub newton: bool,
    pub newton_switch: T,
    /// finish with Newton on the j = J equations, starting from the last stage
    pub polish: bool,
}

pub fn default_sigma_schedule<T: Real>() -> Vec<T> {
    (0..=14).map(|t| T::lit(0.5) * T::lit(4.0).powi(-t)).collect()
}

impl<T: Real> Default for SubsonicParams<T> {
    fn default() -> Self {
        let picard_tol = T::lit(1e-10);
        Self {
            picard_tol,
            picard_max_iter: 200,
            sigma_schedule: default_sigma_schedule(),
            continuation_tol: T::lit(1e-8),
            clamp: true,
            scheme: Scheme::FluxForm,
            upwind: false,
            newton: true,
            newton_switch: picard_tol * T::lit(1e3),
            polish: true,
        }
    }
}

impl<T: Real> SubsonicParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > T::zero()) || !(self.continuation_tol > T::zero()) || !(self.newton_switch > T::zero()) {
            return Err(Error::InvalidConfig("subsonic tolerances must be positive".into()));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::InvalidConfig("picard_max_iter must be positive".into()));
        }
        if self.sigma_schedule.is_empty() {
            return Err(Error::InvalidConfig("empty j schedule".into()));
        }
        if self.sigma_schedule.iter().any(|&s| !(s > T::zero() && s < T::one())) {
            return Err(Error::InvalidConfig("schedule gaps must lie in (0, 1)".into()));
        }
        if self.sigma_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidConfig("schedule gaps must be strictly decreasing".into()));
        }
        Ok(())
    }

    pub fn j_of(&self, big_j: T, sigma: T) -> T {
        big_j * (T::one() - sigma).sqrt()
    }
}

/// Upper box bound: B_sup + 1/tau for n = 2, calB_sup for n = 3.
pub fn upper_bound_n<T: Real>(problem: &Problem<T>) -> Result<T> {
    let report = check_subsonic_hypotheses(problem)?;
    report.require()?;
    Ok(upper_bound_unchecked(problem, &report))
}

fn upper_bound_unchecked<T: Real>(problem: &Problem<T>, report: &crate::model::HypothesisReport<T>) -> T {
    match problem.config.n() {
        2 => report.b_sup + T::one() / problem.config.tau(),
        _ => report.cal_b_sup.expect("n = 3 extrema"),
    }
}

/// The frozen-coefficient problem in nodal form:
/// a = r^(n-1)(1/m - j^2/m^3), b = -r^(n-1) J/(tau m^2), c = -1,
/// f = -B - (n-1) r^(n-2) J/(tau m) + (n-1)(n-2) r^(n-3).
pub fn nodal_step_bvp<T: Real>(problem: &Problem<T>, m_bar: &Profile<T>, j: T, upwind: bool) -> LinearBvp<T> {
    let c = &problem.config;
    let grid = m_bar.grid();
    let jj = c.big_j();
    let tau = c.tau();
    let x = grid.nodes();
    let mb = m_bar.values();
    let a: Vec<T> = x.iter().zip(mb).map(|(&r, &m)| c.weight(r) * (T::one() / m - j * j / (m * m * m))).collect();
    let b: Vec<T> = x.iter().zip(mb).map(|(&r, &m)| -c.weight(r) * jj / (tau * m * m)).collect();
    let f: Vec<T> = x
        .iter()
        .zip(mb)
        .map(|(&r, &m)| -problem.weight_b(r) - c.weight_deriv(r) * jj / (tau * m) + c.geometric_source(r))
        .collect();
    LinearBvp {
        grid: grid.clone(),
        a: Profile::new(grid.clone(), a).expect("finite coefficients"),
        b: Profile::new(grid.clone(), b).expect("finite coefficients"),
        c: Profile::constant(grid, -T::one()),
        f: Profile::new(grid.clone(), f).expect("finite coefficients"),
        alpha: jj,
        beta: jj,
        upwind,
    }
}

/// The frozen-coefficient problem in flux form. With rho = r^(n-1) J / tau at the cell midpoint,
/// the tau-term flux rho/m is linearized about m_bar as (2 m_bar - m) rho / m_bar^2.
pub fn flux_step_bvp<T: Real>(problem: &Problem<T>, m_bar: &Profile<T>, j: T) -> FluxFormBvp<T> {
    let c = &problem.config;
    let grid = m_bar.grid();
    let jj = c.big_j();
    let mb = m_bar.values();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let cells = grid.cells();
    let mut diffusion = Vec::with_capacity(cells);
    let mut advection = Vec::with_capacity(cells);
    let mut offset = Vec::with_capacity(cells);
    let mut source = Vec::with_capacity(cells);
    for k in 0..cells {
        let r = grid.mid(k);
        let w = c.weight(r);
        let m = (mb[k] + mb[k + 1]) * half;
        let rho = w * jj / c.tau();
        diffusion.push(w * (T::one() / m - j * j / (m * m * m)));
        advection.push(-rho / (m * m));
        offset.push(two * rho / m);
        source.push(-problem.weight_b(r) + c.geometric_source(r));
    }
    FluxFormBvp {
        grid: grid.clone(),
        diffusion,
        advection,
        offset,
        reaction: vec![-T::one(); cells],
        source,
        alpha: jj,
        beta: jj,
    }
}

/// One application of the frozen-coefficient map, without clamping.
pub fn linearized_step<T: Real>(problem: &Problem<T>, m_bar: &Profile<T>, j: T, params: &SubsonicParams<T>) -> Result<Profile<T>> {
    let mb = m_bar.values();
    if let Some(i) = mb.iter().position(|&m| !(m > j)) {
        return Err(Error::OutOfBand { node: i, value: mb[i].as_f64() });
    }
    let sys = match params.scheme {
        Scheme::FluxForm => assemble_flux_form(&flux_step_bvp(problem, m_bar, j))?,
        Scheme::Nodal => assemble(&nodal_step_bvp(problem, m_bar, j, params.upwind))?,
    };
    thomas_solve(&sys)
}

/// Discrete regularized equations on cell k: flux r^(n-1)[(1/m - p^2/m^3) m_r + q/(tau m)],
/// zero-order term m - B + S with m the cell mean.
pub(crate) fn regularized_cell<'a, T: Real>(
    problem: &'a Problem<T>,
    grid: &'a RadialGrid<T>,
    p: T,
    q: T,
) -> impl Fn(usize, T, T) -> CellEval<T> + 'a {
    let c = problem.config;
    let p2 = p * p;
    let qt = q / c.tau();
    let half = T::lit(0.5);
    let three = T::lit(3.0);
    let mids: Vec<(T, T, T)> = (0..grid.cells())
        .map(|k| {
            let r = grid.mid(k);
            (grid.h(k), c.weight(r), -problem.weight_b(r) + c.geometric_source(r))
        })
        .collect();
    move |k, a, b| {
        let (h, w, s) = mids[k];
        let m = (a + b) * half;
        let m2 = m * m;
        let coef = T::one() / m - p2 / (m2 * m);
        let dcoef = -T::one() / m2 + three * p2 / (m2 * m2);
        let slope = (b - a) / h;
        let tau_term = qt / m;
        let dtau = -qt / m2 * half;
        CellEval {
            flux: w * (coef * slope + tau_term),
            flux_a: w * (dcoef * half * slope - coef / h + dtau),
            flux_b: w * (dcoef * half * slope + coef / h + dtau),
            g: m + s,
            g_a: half,
            g_b: half,
        }
    }
}

/// Newton on the discrete limit equations (j = J) started from a late continuation stage.
/// Steps that leave the regime's side of J are rejected; returns None when it does not settle
/// within `max_steps`.
pub fn polish_sonic_limit<T: Real>(problem: &Problem<T>, m: &Profile<T>, regime: Regime, tol: T, max_steps: usize) -> Option<(Profile<T>, usize)> {
    let jj = problem.big_j();
    let grid = m.grid().clone();
    let cell = regularized_cell(problem, &grid, jj, jj);
    let last = m.len() - 1;
    let mut y = m.values().to_vec();
    y[0] = jj;
    y[last] = jj;
    let start = sup_norm(&row_residuals(&grid, &y, &cell));
    for step in 1..=max_steps {
        let (next, delta) = newton_step(&grid, &y, &cell).ok()?;
        let side_ok = next[1..last].iter().all(|&v| match regime {
            Regime::Subsonic => v > jj,
            Regime::Supersonic => v < jj && v > T::zero(),
        });
        if !side_ok || !delta.is_finite() {
            debug!("limit polish left the {regime} side at step {step}");
            return None;
        }
        y = next;
        if delta < tol {
            let end = sup_norm(&row_residuals(&grid, &y, &cell));
            if !(end <= start) {
                return None;
            }
            return Profile::new(grid.clone(), y).ok().map(|p| (p, step));
        }
    }
    None
}

pub(crate) fn finish_with_polish<T: Real>(
    problem: &Problem<T>,
    m: Profile<T>,
    regime: Regime,
    warnings: &mut Vec<String>,
) -> (Profile<T>, Option<f64>) {
    let tol = (T::epsilon() * T::lit(1e4)).max(T::lit(1e-12)) * problem.big_j();
    match polish_sonic_limit(problem, &m, regime, tol, 20) {
        Some((p, steps)) => {
            let shift = p.sup_distance(&m).map(Real::as_f64).unwrap_or(f64::NAN);
            debug!("limit polish settled in {steps} Newton steps, moved {shift:e}");
            (p, Some(shift))
        }
        None => {
            let msg = "Newton polish on the limit equations did not settle; keeping the last stage".to_string();
            warn!("{msg}");
            warnings.push(msg);
            (m, None)
        }
    }
}

/// Residual of the discrete regularized equations (rows divided by the hat half support).
pub fn regularized_residual<T: Real>(problem: &Problem<T>, m: &Profile<T>, j: T) -> Vec<T> {
    let cell = regularized_cell(problem, m.grid(), j, problem.big_j());
    row_residuals(m.grid(), m.values(), &cell)
}

#[derive(Debug, Clone)]
pub struct RegularizedSolve<T> {
    pub m: Profile<T>,
    pub iterations: usize,
    pub newton_steps: usize,
    pub violations: BoundViolations,
}

fn clamp_interior<T: Real>(values: &mut [T], lo: T, hi: T, v: &mut BoundViolations) {
    let n = values.len();
    for x in &mut values[1..n - 1] {
        let ex = (lo - *x).max(*x - hi);
        if ex > T::zero() {
            v.clamped_nodes += 1;
            v.max_excursion = v.max_excursion.max(ex.as_f64());
            *x = x.max(lo).min(hi);
        }
    }
}

/// Picard iteration of `linearized_step` at fixed j.
pub fn solve_regularized<T: Real>(
    problem: &Problem<T>,
    j: T,
    init: &Profile<T>,
    params: &SubsonicParams<T>,
) -> Result<RegularizedSolve<T>> {
    let report = check_subsonic_hypotheses(problem)?;
    report.require()?;
    let upper = upper_bound_unchecked(problem, &report);
    solve_regularized_in_box(problem, j, init, params, upper)
}

fn solve_regularized_in_box<T: Real>(
    problem: &Problem<T>,
    j: T,
    init: &Profile<T>,
    params: &SubsonicParams<T>,
    upper: T,
) -> Result<RegularizedSolve<T>> {
    let jj = problem.big_j();
    if !(j > T::zero() && j < jj) {
        return Err(Error::Precondition(format!("regularized flux j = {j} must lie in (0, {jj})")));
    }
    let grid = init.grid().clone();
    let mut violations = BoundViolations::default();
    let mut m: Vec<T> = init.values().to_vec();
    let last = m.len() - 1;
    m[0] = jj;
    m[last] = jj;
    if params.clamp {
        clamp_interior(&mut m, jj, upper, &mut violations);
    }
    let use_newton = params.newton && params.scheme == Scheme::FluxForm;
    let cell = regularized_cell(problem, &grid, j, jj);
    let mut newton_ok = use_newton;
    let mut newton_steps = 0;
    let mut change = T::infinity();
    let mut prev_change = T::infinity();
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=params.picard_max_iter {
        let mut next = None;
        if newton_ok && wants_newton(change, prev_change, params.newton_switch) {
            match newton_step(&grid, &m, &cell) {
                Ok((y, _)) if y[1..last].iter().all(|&v| v > j) => {
                    newton_steps += 1;
                    next = Some(y);
                }
                _ => {
                    debug!("Newton step rejected at j = {j}; continuing with Picard");
                    newton_ok = false;
                }
            }
        }
        let mut y = match next {
            Some(y) => y,
            None => {
                let cur = Profile::new(grid.clone(), m.clone())?;
                linearized_step(problem, &cur, j, params)?.into_values()
            }
        };
        if params.clamp {
            clamp_interior(&mut y, jj, upper, &mut violations);
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::OutOfBand { node: i, value: f64::NAN });
        }
        prev_change = change;
        change = sup_diff(&y, &m);
        history.push(change.as_f64());
        m = y;
        if change < params.picard_tol {
            debug!("j = {j}: converged in {it} iterations ({newton_steps} Newton)");
            return Ok(RegularizedSolve { m: Profile::new(grid.clone(), m)?, iterations: it, newton_steps, violations });
        }
    }
    let tail = history.len().saturating_sub(10);
    Err(Error::Divergence {
        stage: format!("subsonic Picard iteration at j = {j}"),
        iterations: params.picard_max_iter,
        history: history[tail..].to_vec(),
    })
}

/// Largest lambda with m >= J + lambda sin(pi (r - r0)/(r1 - r0)) at every interior node.
pub fn fit_lambda<T: Real>(m: &Profile<T>, big_j: T) -> T {
    let x = m.nodes();
    let (r0, r1) = (x[0], x[x.len() - 1]);
    let mut lam = T::infinity();
    for i in 1..x.len() - 1 {
        let s = (T::PI() * (x[i] - r0) / (r1 - r0)).sin();
        if s > T::zero() {
            lam = lam.min((m.values()[i] - big_j) / s);
        }
    }
    if lam.is_finite() {
        lam.max(T::zero())
    } else {
        T::zero()
    }
}

pub fn continuation_solve<T: Real>(problem: &Problem<T>, grid: &RadialGrid<T>, params: &SubsonicParams<T>) -> Result<Solution<T>> {
    continuation_solve_from(problem, &Profile::constant(grid, problem.big_j()), params)
}

/// Stage-by-stage continuation j_t -> J, warm-starting each stage from the last.
pub fn continuation_solve_from<T: Real>(problem: &Problem<T>, init: &Profile<T>, params: &SubsonicParams<T>) -> Result<Solution<T>> {
    params.validate()?;
    let report = check_subsonic_hypotheses(problem)?;
    report.require()?;
    let grid = init.grid().clone();
    if !grid.matches_interval(problem.config.r0(), problem.config.r1()) {
        return Err(Error::GridMismatch("grid does not span [r0, r1]".into()));
    }
    let upper = upper_bound_unchecked(problem, &report);
    let jj = problem.big_j();
    let mut violations = BoundViolations::default();
    let mut stages = Vec::new();
    let mut warnings = Vec::new();
    let mut current = init.clone();
    let mut prev: Option<Profile<T>> = None;
    let mut increases = 0usize;
    let mut last_change: Option<T> = None;
    let mut converged = false;
    let mut j = jj;
    for (t, &sigma) in params.sigma_schedule.iter().enumerate() {
        j = params.j_of(jj, sigma);
        let solve = solve_regularized_in_box(problem, j, &current, params, upper)?;
        violations.clamped_nodes += solve.violations.clamped_nodes;
        violations.max_excursion = violations.max_excursion.max(solve.violations.max_excursion);
        let stage_change = prev.as_ref().map(|p| solve.m.sup_distance(p)).transpose()?;
        info!(
            "subsonic stage {t}: j = {j}, {} iterations, change {:?}",
            solve.iterations,
            stage_change.map(Real::as_f64)
        );
        stages.push(StageRecord {
            stage: t,
            param: j.as_f64(),
            iterations: solve.iterations,
            inner_iterations: 0,
            newton_steps: solve.newton_steps,
            stage_change: stage_change.map(Real::as_f64),
        });
        current = solve.m;
        if let Some(d) = stage_change {
            if let Some(l) = last_change {
                increases = if d > l { increases + 1 } else { 0 };
                if increases >= 3 {
                    return Err(Error::Continuation(format!(
                        "stage differences increased for 3 consecutive stages (last {d} at j = {j})"
                    )));
                }
            }
            last_change = Some(d);
            if d < params.continuation_tol {
                converged = true;
                break;
            }
        }
        prev = Some(current.clone());
    }
    if !converged {
        let msg = format!("schedule exhausted before stage change fell below {}", params.continuation_tol);
        warn!("{msg}");
        warnings.push(msg);
    }
    if violations.clamped_nodes > 0 {
        warnings.push(format!(
            "box clamp projected {} node values (max excursion {:e})",
            violations.clamped_nodes, violations.max_excursion
        ));
    }
    let (m, polish_shift) = if params.polish { finish_with_polish(problem, current, Regime::Subsonic, &mut warnings) } else { (current, None) };
    if let Some(i) = (1..m.len() - 1).find(|&i| !(m.values()[i] > jj)) {
        return Err(Error::Continuation(format!("interior node {i} reached the sonic value")));
    }
    let (linf, l2) = verify::weak_residual(problem, &m)?;
    let diagnostics = Diagnostics {
        weak_residual_linf: linf.as_f64(),
        weak_residual_l2: l2.as_f64(),
        lambda_star: Some(fit_lambda(&m, jj).as_f64()),
        ell: None,
        interior_gap: None,
        v_max: None,
        holder_seminorm: verify::holder_seminorm(&m).as_f64(),
        stages,
        bound_violations: violations,
        continuation_converged: converged,
        polish_shift,
        warnings,
    };
    Ok(Solution { m, regime: Regime::Subsonic, reg_param: j, diagnostics })
}
