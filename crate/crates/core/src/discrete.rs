//! Hat-function weak form on a grid, shared by the nonlinear solvers.
//!
//! Row i reads (F_i - F_{i-1} - (g_{i-1} h_{i-1} + g_i h_i)/2) / hbar_i = 0 where F_k, g_k are the
//! flux and the zero-order term evaluated on cell k from its two end values.

use crate::error::{Error, Result};
use crate::linbvp::{thomas_solve, TridiagonalSystem};
use crate::model::RadialGrid;
use crate::scalar::{sup_norm, Real};

/// Cell evaluation: flux and zero-order term with their partials in the left/right node value.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellEval<T> {
    pub flux: T,
    pub flux_a: T,
    pub flux_b: T,
    pub g: T,
    pub g_a: T,
    pub g_b: T,
}

pub(crate) fn row_residuals<T: Real>(grid: &RadialGrid<T>, y: &[T], cell: &impl Fn(usize, T, T) -> CellEval<T>) -> Vec<T> {
    let n = grid.cells();
    let half = T::lit(0.5);
    let evals: Vec<CellEval<T>> = (0..n).map(|k| cell(k, y[k], y[k + 1])).collect();
    (1..n)
        .map(|i| {
            let (hm, hp) = (grid.h(i - 1), grid.h(i));
            let (l, r) = (&evals[i - 1], &evals[i]);
            (r.flux - l.flux - (l.g * hm + r.g * hp) * half) / ((hm + hp) * half)
        })
        .collect()
}

/// One Newton update for the hat-function system; boundary values of `y` are kept.
/// Returns the new iterate and the sup norm of the correction.
pub(crate) fn newton_step<T: Real>(
    grid: &RadialGrid<T>,
    y: &[T],
    cell: &impl Fn(usize, T, T) -> CellEval<T>,
) -> Result<(Vec<T>, T)> {
    let n = grid.cells();
    let m = n - 1;
    let half = T::lit(0.5);
    let evals: Vec<CellEval<T>> = (0..n).map(|k| cell(k, y[k], y[k + 1])).collect();
    let mut sub = vec![T::zero(); m];
    let mut diag = vec![T::zero(); m];
    let mut sup = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); m];
    for i in 1..n {
        let (hm, hp) = (grid.h(i - 1), grid.h(i));
        let hbar = (hm + hp) * half;
        let (l, r) = (&evals[i - 1], &evals[i]);
        let k = i - 1;
        rhs[k] = -(r.flux - l.flux - (l.g * hm + r.g * hp) * half) / hbar;
        // d/dy_{i-1}: only the left cell, through its left end
        if i > 1 {
            sub[k] = (-l.flux_a - l.g_a * hm * half) / hbar;
        }
        diag[k] = (r.flux_a - l.flux_b - (l.g_b * hm + r.g_a * hp) * half) / hbar;
        if i + 1 < n {
            sup[k] = (r.flux_b - r.g_b * hp * half) / hbar;
        }
    }
    let sys = TridiagonalSystem { grid: grid.clone(), sub, diag, sup, rhs, alpha: T::zero(), beta: T::zero() };
    let delta = thomas_solve(&sys)?;
    let d = delta.values();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { row: 0 });
    }
    let next: Vec<T> = y.iter().zip(d).map(|(&a, &b)| a + b).collect();
    Ok((next, sup_norm(d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    // -y'' + y = f with y = sin(pi r): F = -y', g = -(y - f) to match the row convention
    fn cell(grid: &RadialGrid<f64>) -> impl Fn(usize, f64, f64) -> CellEval<f64> + '_ {
        move |k, a, b| {
            let h = grid.h(k);
            let r = grid.mid(k);
            let pi = std::f64::consts::PI;
            let f = (pi * pi + 1.0) * (pi * r).sin();
            CellEval {
                flux: (b - a) / h + 0.1 * (a * a + b * b),
                flux_a: -1.0 / h + 0.2 * a,
                flux_b: 1.0 / h + 0.2 * b,
                g: (a + b) / 2.0 - f + 0.0,
                g_a: 0.5,
                g_b: 0.5,
            }
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let grid = RadialGrid::uniform(0.0, 1.0, 64).unwrap();
        let c = cell(&grid);
        let mut y = vec![0.0; 65];
        let mut steps = Vec::new();
        for _ in 0..8 {
            let (next, d) = newton_step(&grid, &y, &c).unwrap();
            y = next;
            steps.push(d);
            if d < 1e-13 {
                break;
            }
        }
        assert!(steps.len() <= 7, "{steps:?}");
        let res = row_residuals(&grid, &y, &c);
        assert!(sup_norm(&res) < 1e-9);
    }
}

/// Switch to Newton once the fixed-point change is small, or earlier when it is
/// contracting slowly.
pub(crate) fn wants_newton<T: Real>(change: T, prev: T, switch: T) -> bool {
    if change < switch {
        return true;
    }
    prev.is_finite() && change < switch * T::lit(1e5) && change > T::lit(0.8) * prev
}
