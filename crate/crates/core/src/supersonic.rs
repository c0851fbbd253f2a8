//! Interior supersonic solutions through v = k/m: an inner iteration freezes the
//! (xi - 1) factor of the diffusion, an outer one freezes eta in its denominator and
//! in the source; k -> J from above by continuation.

use log::{debug, info, warn};

use crate::discrete::{newton_step, wants_newton, CellEval};
use crate::error::{Error, Result};
use crate::linbvp::{assemble, assemble_flux_form, thomas_solve, FluxFormBvp, LinearBvp};
use crate::model::{check_supersonic_hypotheses, Problem, Profile, RadialGrid, Regime};
use crate::scalar::{sup_diff, Real};
use crate::solution::{BoundViolations, Diagnostics, Solution, StageRecord};
use crate::subsonic::{finish_with_polish, Scheme};
use crate::verify;

#[derive(Debug, Clone)]
pub struct SupersonicParams<T> {
    pub inner_tol: T,
    pub inner_max_iter: usize,
    pub outer_tol: T,
    pub outer_max_iter: usize,
    /// k0_t = k_t / J, strictly decreasing towards 1
    pub k0_schedule: Vec<T>,
    pub continuation_tol: T,
    /// under-relaxation of the inner update, in (0, 1]
    pub omega: T,
    pub scheme: Scheme,
    pub upwind: bool,
    /// Newton on the inner problem once the inner change drops below `newton_switch`
    pub newton: bool,
    pub newton_switch: T,
    /// finish with Newton on the k = J equations, starting from the last stage
    pub polish: bool,
}

pub fn default_k0_schedule<T: Real>() -> Vec<T> {
    (0..=14).map(|t| T::one() + T::lit(0.5) * T::lit(4.0).powi(-t)).collect()
}

impl<T: Real> Default for SupersonicParams<T> {
    fn default() -> Self {
        let inner_tol = T::lit(1e-10);
        Self {
            inner_tol,
            inner_max_iter: 200,
            outer_tol: T::lit(1e-9),
            outer_max_iter: 200,
            k0_schedule: default_k0_schedule(),
            continuation_tol: T::lit(1e-8),
            omega: T::one(),
            scheme: Scheme::FluxForm,
            upwind: false,
            newton: true,
            newton_switch: inner_tol * T::lit(1e3),
            polish: true,
        }
    }
}

impl<T: Real> SupersonicParams<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.inner_tol, self.outer_tol, self.continuation_tol, self.newton_switch];
        if pos.iter().any(|&t| !(t > T::zero())) {
            return Err(Error::InvalidConfig("supersonic tolerances must be positive".into()));
        }
        if self.inner_max_iter == 0 || self.outer_max_iter == 0 {
            return Err(Error::InvalidConfig("iteration limits must be positive".into()));
        }
        if !(self.omega > T::zero() && self.omega <= T::one()) {
            return Err(Error::InvalidConfig("omega must lie in (0, 1]".into()));
        }
        if self.k0_schedule.is_empty() || self.k0_schedule.iter().any(|&k| !(k > T::one())) {
            return Err(Error::InvalidConfig("k0 schedule values must exceed 1".into()));
        }
        if self.k0_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidConfig("k0 schedule must be strictly decreasing".into()));
        }
        Ok(())
    }
}

pub fn to_v<T: Real>(m: &Profile<T>, k: T) -> Result<Profile<T>> {
    reciprocal(m, k, "m")
}

pub fn from_v<T: Real>(v: &Profile<T>, k: T) -> Result<Profile<T>> {
    reciprocal(v, k, "v")
}

fn reciprocal<T: Real>(p: &Profile<T>, k: T, what: &'static str) -> Result<Profile<T>> {
    if let Some(i) = p.values().iter().position(|&x| !(x > T::zero())) {
        return Err(Error::Domain { what, value: p.values()[i].as_f64() });
    }
    Ok(p.map(|x| k / x))
}

fn harmonic<T: Real>(a: T, b: T) -> T {
    T::lit(2.0) * a * b / (a + b)
}

/// Frozen problem in nodal form: a = r^(n-1)(eta + 1)(xi - 1)/eta, b = r^(n-1)/tau, c = 0,
/// f = -(B - S + (n-1) r^(n-2) eta/tau - k/eta).
pub fn nodal_inner_bvp<T: Real>(problem: &Problem<T>, xi: &Profile<T>, eta: &Profile<T>, k: T, boundary: T, upwind: bool) -> LinearBvp<T> {
    let c = &problem.config;
    let grid = xi.grid();
    let x = grid.nodes();
    let (xv, ev) = (xi.values(), eta.values());
    let a: Vec<T> = (0..x.len()).map(|i| c.weight(x[i]) * (ev[i] + T::one()) * (xv[i] - T::one()) / ev[i]).collect();
    let f: Vec<T> = (0..x.len())
        .map(|i| {
            let r = x[i];
            -(problem.weight_b(r) - c.geometric_source(r) + c.weight_deriv(r) * ev[i] / c.tau() - k / ev[i])
        })
        .collect();
    LinearBvp {
        grid: grid.clone(),
        a: Profile::new(grid.clone(), a).expect("finite coefficients"),
        b: Profile::from_fn(grid, |r| c.weight(r) / c.tau()),
        c: Profile::constant(grid, T::zero()),
        f: Profile::new(grid.clone(), f).expect("finite coefficients"),
        alpha: boundary,
        beta: boundary,
        upwind,
    }
}

/// Frozen problem in flux form. With harmonic cell means (eta_h, xi_h) and eta_a the
/// arithmetic mean, the flux is r^(n-1)[(eta_h + 1)(xi_h - 1)/eta_a v_r + v/tau]
/// with the tau-term evaluated at eta_h, and the source k/eta_h - B + S. At a fixed point
/// this is the m-equation with parameter k, cell mean of m = k / v_h.
pub fn flux_inner_bvp<T: Real>(problem: &Problem<T>, xi: &Profile<T>, eta: &Profile<T>, k: T, boundary: T) -> FluxFormBvp<T> {
    let c = &problem.config;
    let grid = xi.grid();
    let (xv, ev) = (xi.values(), eta.values());
    let half = T::lit(0.5);
    let cells = grid.cells();
    let mut diffusion = Vec::with_capacity(cells);
    let mut advection = Vec::with_capacity(cells);
    let mut offset = Vec::with_capacity(cells);
    let mut source = Vec::with_capacity(cells);
    for kk in 0..cells {
        let r = grid.mid(kk);
        let w = c.weight(r);
        let eh = harmonic(ev[kk], ev[kk + 1]);
        let ea = (ev[kk] + ev[kk + 1]) * half;
        let xh = harmonic(xv[kk], xv[kk + 1]);
        let p = w / c.tau();
        diffusion.push(w * (eh + T::one()) * (xh - T::one()) / ea);
        advection.push(p);
        offset.push(p * (eh - ea));
        source.push(k / eh - problem.weight_b(r) + c.geometric_source(r));
    }
    FluxFormBvp {
        grid: grid.clone(),
        diffusion,
        advection,
        offset,
        reaction: vec![T::zero(); cells],
        source,
        alpha: boundary,
        beta: boundary,
    }
}

fn inner_step_with_boundary<T: Real>(
    problem: &Problem<T>,
    xi: &Profile<T>,
    eta: &Profile<T>,
    k: T,
    boundary: T,
    params: &SupersonicParams<T>,
) -> Result<Profile<T>> {
    xi.require_same_grid(eta)?;
    if let Some(i) = xi.values().iter().position(|&x| !(x > T::one())) {
        return Err(Error::BelowSonic { node: i, value: xi.values()[i].as_f64() });
    }
    if let Some(i) = eta.values().iter().position(|&x| !(x > T::zero())) {
        return Err(Error::Domain { what: "eta", value: eta.values()[i].as_f64() });
    }
    let sys = match params.scheme {
        Scheme::FluxForm => assemble_flux_form(&flux_inner_bvp(problem, xi, eta, k, boundary))?,
        Scheme::Nodal => assemble(&nodal_inner_bvp(problem, xi, eta, k, boundary, params.upwind))?,
    };
    thomas_solve(&sys)
}

/// One inner map xi -> zeta at frozen eta, Dirichlet value k/J at both ends.
pub fn inner_step<T: Real>(problem: &Problem<T>, xi: &Profile<T>, eta: &Profile<T>, k: T, params: &SupersonicParams<T>) -> Result<Profile<T>> {
    inner_step_with_boundary(problem, xi, eta, k, k / problem.big_j(), params)
}

/// Inner problem at frozen eta as a nonlinear system in v for Newton's method.
fn inner_cell<'a, T: Real>(problem: &'a Problem<T>, grid: &'a RadialGrid<T>, eta: &'a [T], k: T) -> impl Fn(usize, T, T) -> CellEval<T> + 'a {
    let c = problem.config;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let cells: Vec<(T, T, T, T, T)> = (0..grid.cells())
        .map(|kk| {
            let r = grid.mid(kk);
            let w = c.weight(r);
            let eh = harmonic(eta[kk], eta[kk + 1]);
            let ea = (eta[kk] + eta[kk + 1]) * half;
            let p = w / c.tau();
            (grid.h(kk), w * (eh + T::one()) / ea, p, p * (eh - ea), k / eh - problem.weight_b(r) + c.geometric_source(r))
        })
        .collect();
    move |kk, a, b| {
        let (h, d, p, q, s) = cells[kk];
        let sum = a + b;
        let xh = two * a * b / sum;
        let dxa = two * b * b / (sum * sum);
        let dxb = two * a * a / (sum * sum);
        let slope = (b - a) / h;
        CellEval {
            flux: d * (xh - T::one()) * slope + p * sum * half + q,
            flux_a: d * (dxa * slope - (xh - T::one()) / h) + p * half,
            flux_b: d * (dxb * slope + (xh - T::one()) / h) + p * half,
            g: s,
            g_a: T::zero(),
            g_b: T::zero(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OuterStep<T> {
    pub v: Profile<T>,
    pub inner_iterations: usize,
    pub newton_steps: usize,
}

/// Quasilinear solve at frozen eta by the inner iteration, starting from `start`.
pub fn outer_step_from<T: Real>(
    problem: &Problem<T>,
    eta: &Profile<T>,
    start: &Profile<T>,
    k: T,
    boundary: T,
    params: &SupersonicParams<T>,
) -> Result<OuterStep<T>> {
    let grid = eta.grid().clone();
    let mut xi: Vec<T> = start.values().to_vec();
    let last = xi.len() - 1;
    xi[0] = boundary;
    xi[last] = boundary;
    let use_newton = params.newton && params.scheme == Scheme::FluxForm;
    let cell = inner_cell(problem, &grid, eta.values(), k);
    let mut newton_ok = use_newton;
    let mut newton_steps = 0;
    let mut change = T::infinity();
    let mut prev_change = T::infinity();
    let mut history = Vec::new();
    for it in 1..=params.inner_max_iter {
        let mut next = None;
        if newton_ok && wants_newton(change, prev_change, params.newton_switch) {
            match newton_step(&grid, &xi, &cell) {
                Ok((y, _)) if y.iter().all(|&v| v > T::one()) => {
                    newton_steps += 1;
                    next = Some(y);
                }
                _ => {
                    debug!("inner Newton step rejected at k = {k}");
                    newton_ok = false;
                }
            }
        }
        let y = match next {
            Some(y) => y,
            None => {
                let cur = Profile::new(grid.clone(), xi.clone())?;
                let z = inner_step_with_boundary(problem, &cur, eta, k, boundary, params)?.into_values();
                if params.omega < T::one() {
                    xi.iter().zip(&z).map(|(&a, &b)| a + params.omega * (b - a)).collect()
                } else {
                    z
                }
            }
        };
        prev_change = change;
        change = sup_diff(&y, &xi);
        history.push(change.as_f64());
        xi = y;
        if change < params.inner_tol {
            let tol = T::lit(1e-9);
            if let Some(i) = xi.iter().position(|&v| v < boundary - tol) {
                return Err(Error::MaximumPrinciple { node: i, value: xi[i].as_f64(), bound: boundary.as_f64() });
            }
            for v in &mut xi {
                *v = v.max(boundary);
            }
            return Ok(OuterStep { v: Profile::new(grid.clone(), xi)?, inner_iterations: it, newton_steps });
        }
    }
    let tail = history.len().saturating_sub(10);
    Err(Error::Divergence {
        stage: format!("supersonic inner iteration at k = {k}"),
        iterations: params.inner_max_iter,
        history: history[tail..].to_vec(),
    })
}

/// eta -> v, the quasilinear map at frozen eta, starting the inner iteration from eta.
pub fn outer_step<T: Real>(problem: &Problem<T>, eta: &Profile<T>, k: T, params: &SupersonicParams<T>) -> Result<Profile<T>> {
    Ok(outer_step_from(problem, eta, eta, k, k / problem.big_j(), params)?.v)
}

#[derive(Debug, Clone)]
pub struct SupersonicRegularized<T> {
    pub m: Profile<T>,
    pub v: Profile<T>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub newton_steps: usize,
    pub v_max: T,
}

/// Outer iteration from `init_v` at fixed k, with the given Dirichlet value for v.
pub fn solve_v_problem<T: Real>(
    problem: &Problem<T>,
    k: T,
    boundary: T,
    init_v: &Profile<T>,
    params: &SupersonicParams<T>,
) -> Result<(Profile<T>, usize, usize, usize, T)> {
    let mut eta = init_v.clone();
    let mut v_max = eta.max();
    let (mut inner_total, mut newton_total) = (0, 0);
    let mut history = Vec::new();
    for it in 1..=params.outer_max_iter {
        let step = outer_step_from(problem, &eta, &eta, k, boundary, params)?;
        inner_total += step.inner_iterations;
        newton_total += step.newton_steps;
        v_max = v_max.max(step.v.max());
        // v >= k0 is the same statement as m <= J
        if let Some(i) = step.v.values().iter().position(|&x| x < boundary) {
            return Err(Error::MaximumPrinciple { node: i, value: step.v.values()[i].as_f64(), bound: boundary.as_f64() });
        }
        let change = step.v.sup_distance(&eta)?;
        history.push(change.as_f64());
        eta = step.v;
        if change < params.outer_tol {
            return Ok((eta, it, inner_total, newton_total, v_max));
        }
    }
    let tail = history.len().saturating_sub(10);
    Err(Error::Divergence {
        stage: format!("supersonic outer iteration at k = {k}"),
        iterations: params.outer_max_iter,
        history: history[tail..].to_vec(),
    })
}

pub fn solve_regularized_supersonic<T: Real>(
    problem: &Problem<T>,
    k: T,
    init_v: &Profile<T>,
    params: &SupersonicParams<T>,
) -> Result<SupersonicRegularized<T>> {
    check_supersonic_hypotheses(problem)?.require()?;
    regularized_unchecked(problem, k, init_v, params)
}

fn regularized_unchecked<T: Real>(
    problem: &Problem<T>,
    k: T,
    init_v: &Profile<T>,
    params: &SupersonicParams<T>,
) -> Result<SupersonicRegularized<T>> {
    let jj = problem.big_j();
    if !(k > jj) {
        return Err(Error::Precondition(format!("regularized flux k = {k} must exceed J = {jj}")));
    }
    let k0 = k / jj;
    let (v, outer, inner, newton, v_max) = solve_v_problem(problem, k, k0, init_v, params)?;
    let mut m = from_v(&v, k)?.into_values();
    let last = m.len() - 1;
    m[0] = jj;
    m[last] = jj;
    Ok(SupersonicRegularized {
        m: Profile::new(v.grid().clone(), m)?,
        v,
        outer_iterations: outer,
        inner_iterations: inner,
        newton_steps: newton,
        v_max,
    })
}

pub fn continuation_solve_supersonic<T: Real>(
    problem: &Problem<T>,
    grid: &RadialGrid<T>,
    params: &SupersonicParams<T>,
) -> Result<Solution<T>> {
    params.validate()?;
    check_supersonic_hypotheses(problem)?.require()?;
    if !grid.matches_interval(problem.config.r0(), problem.config.r1()) {
        return Err(Error::GridMismatch("grid does not span [r0, r1]".into()));
    }
    let jj = problem.big_j();
    let mut stages = Vec::new();
    let mut warnings = Vec::new();
    let mut v = Profile::constant(grid, params.k0_schedule[0]);
    let mut prev_m: Option<Profile<T>> = None;
    let mut prev_k0 = params.k0_schedule[0];
    let mut last_change: Option<T> = None;
    let mut increases = 0;
    let mut converged = false;
    let mut first_vmax: Option<T> = None;
    let mut v_max = T::zero();
    let mut k = jj * prev_k0;
    let mut current: Option<Profile<T>> = None;
    for (t, &k0) in params.k0_schedule.iter().enumerate() {
        k = jj * k0;
        let init = v.map(|x| x - (prev_k0 - k0));
        let sol = regularized_unchecked(problem, k, &init, params)?;
        first_vmax.get_or_insert(sol.v_max);
        v_max = v_max.max(sol.v_max);
        let stage_change = prev_m.as_ref().map(|p| sol.m.sup_distance(p)).transpose()?;
        info!(
            "supersonic stage {t}: k0 = {k0}, {} outer / {} inner iterations, change {:?}",
            sol.outer_iterations,
            sol.inner_iterations,
            stage_change.map(Real::as_f64)
        );
        stages.push(StageRecord {
            stage: t,
            param: k.as_f64(),
            iterations: sol.outer_iterations,
            inner_iterations: sol.inner_iterations,
            newton_steps: sol.newton_steps,
            stage_change: stage_change.map(Real::as_f64),
        });
        v = sol.v;
        prev_k0 = k0;
        current = Some(sol.m.clone());
        if let Some(d) = stage_change {
            if let Some(l) = last_change {
                increases = if d > l { increases + 1 } else { 0 };
                if increases >= 3 {
                    return Err(Error::Continuation(format!(
                        "stage differences increased for 3 consecutive stages (last {d} at k = {k})"
                    )));
                }
            }
            last_change = Some(d);
            if d < params.continuation_tol {
                converged = true;
                break;
            }
        }
        prev_m = Some(sol.m);
    }
    if !converged {
        let msg = format!("schedule exhausted before stage change fell below {}", params.continuation_tol);
        warn!("{msg}");
        warnings.push(msg);
    }
    if let Some(v0) = first_vmax {
        if v_max > T::lit(2.0) * v0 {
            let msg = format!("running max of v grew from {v0} to {v_max} along the schedule");
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    let m = current.expect("at least one stage");
    let (m, polish_shift) = if params.polish { finish_with_polish(problem, m, Regime::Supersonic, &mut warnings) } else { (m, None) };
    let interior = &m.values()[1..m.len() - 1];
    if let Some(i) = interior.iter().position(|&x| !(x < jj) || !(x > T::zero())) {
        return Err(Error::Continuation(format!("interior node {} left (0, J): m = {}", i + 1, interior[i])));
    }
    if interior.iter().any(|&x| jj - x < T::lit(1e-12)) {
        let msg = "an interior node lies within 1e-12 of the sonic value".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }
    let (linf, l2) = verify::weak_residual(problem, &m)?;
    let gap = verify::interior_gap(&m, jj, problem.config.length() / T::lit(10.0))?;
    let diagnostics = Diagnostics {
        weak_residual_linf: linf.as_f64(),
        weak_residual_l2: l2.as_f64(),
        lambda_star: None,
        ell: Some(m.min().as_f64()),
        interior_gap: Some(gap.as_f64()),
        v_max: Some(v_max.as_f64()),
        holder_seminorm: verify::holder_seminorm(&m).as_f64(),
        stages,
        bound_violations: BoundViolations::default(),
        continuation_converged: converged,
        polish_shift,
        warnings,
    };
    Ok(Solution { m, regime: Regime::Supersonic, reg_param: k, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DopingProfile, ProblemConfig};

    fn problem(n: usize, b: f64) -> Problem<f64> {
        Problem::new(ProblemConfig::new(n, 1.0, 2.0, 1.0, 1.0).unwrap(), DopingProfile::Constant { value: b }).unwrap()
    }

    #[test]
    fn reciprocal_maps() {
        let g = RadialGrid::uniform(1.0, 2.0, 16).unwrap();
        let m = Profile::constant(&g, 1.3);
        assert!(to_v(&m, 1.3).unwrap().values().iter().all(|&v| v == 1.0));
        let v = to_v(&Profile::constant(&g, 1.0), 1.5).unwrap();
        assert!(v.values().iter().all(|&x| x == 1.5));
        assert!(to_v(&Profile::constant(&g, 0.0), 1.0).is_err());
    }

    #[test]
    fn n2_source_specializes() {
        let p = problem(2, 2.0);
        let g = RadialGrid::uniform(1.0, 2.0, 16).unwrap();
        let eta = Profile::from_fn(&g, |r| 1.4 + 0.1 * r);
        let bvp = nodal_inner_bvp(&p, &eta, &eta, 1.5, 1.5, false);
        for (i, &r) in g.nodes().iter().enumerate() {
            let e = eta.values()[i];
            let hand = -(2.0 * r + e / 1.0 - 1.5 / e);
            assert_eq!(bvp.f.values()[i].to_bits(), hand.to_bits());
        }
    }

    #[test]
    fn below_sonic_rejected() {
        let p = problem(2, 2.0);
        let g = RadialGrid::uniform(1.0, 2.0, 16).unwrap();
        let xi = Profile::constant(&g, 1.0);
        let eta = Profile::constant(&g, 1.5);
        assert!(matches!(inner_step(&p, &xi, &eta, 1.5, &SupersonicParams::default()), Err(Error::BelowSonic { .. })));
    }

    #[test]
    fn regularized_boundary_and_bounds() {
        let p = problem(2, 2.0);
        let g = RadialGrid::uniform(1.0, 2.0, 64).unwrap();
        let s = solve_regularized_supersonic(&p, 1.5, &Profile::constant(&g, 1.5), &SupersonicParams::default()).unwrap();
        assert_eq!(s.m.values()[0], 1.0);
        assert_eq!(*s.m.values().last().unwrap(), 1.0);
        assert_eq!(s.v.values()[0], 1.5);
        assert!(s.v.values().iter().all(|&x| x >= 1.5));
        assert!(s.m.values().iter().all(|&x| x <= 1.0));
        let again = outer_step(&p, &s.v, 1.5, &SupersonicParams::default()).unwrap();
        assert!(again.sup_distance(&s.v).unwrap() < 1e-8);
    }
}
