use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Problem, Regime};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_SAMPLES: usize = 10_000;

/// Min and max of `f` on [a, b]: dense samples, exact values at endpoints and `knots`,
/// then a golden-section polish around the best interior samples.
pub(crate) fn extrema_of<T: Real>(f: impl Fn(T) -> T, a: T, b: T, knots: &[T], samples: usize) -> (T, T) {
    let samples = samples.max(2);
    let nf = T::from_usize_lossy(samples - 1);
    let xs: Vec<T> = (0..samples)
        .map(|i| if i + 1 == samples { b } else { a + (b - a) * T::from_usize_lossy(i) / nf })
        .collect();
    let ys: Vec<T> = xs.iter().map(|&x| f(x)).collect();
    let mut lo = ys.iter().copied().fold(T::infinity(), T::min);
    let mut hi = ys.iter().copied().fold(T::neg_infinity(), T::max);
    for &k in knots {
        let y = f(k);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    let (imin, imax) = ys.iter().enumerate().fold((0, 0), |(i, j), (k, &y)| {
        (if y < ys[i] { k } else { i }, if y > ys[j] { k } else { j })
    });
    if imin > 0 && imin + 1 < samples {
        lo = lo.min(golden(&f, xs[imin - 1], xs[imin + 1], false));
    }
    if imax > 0 && imax + 1 < samples {
        hi = hi.max(golden(&f, xs[imax - 1], xs[imax + 1], true));
    }
    (lo, hi)
}

fn golden<T: Real>(f: &impl Fn(T) -> T, mut a: T, mut b: T, maximize: bool) -> T {
    let g = |x: T| if maximize { -f(x) } else { f(x) };
    let ratio = T::lit(0.618_033_988_749_894_8);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = g(d);
        }
    }
    let best = fc.min(fd);
    if maximize {
        -best
    } else {
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandExtrema<T> {
    pub b_inf: T,
    pub b_sup: T,
    /// extrema of B(r) + 2r/tau - 2, n = 3 only
    pub cal_b_inf: Option<T>,
    pub cal_b_sup: Option<T>,
}

pub fn band_extrema<T: Real>(problem: &Problem<T>, samples: usize) -> Result<BandExtrema<T>> {
    if samples < 1000 {
        return Err(Error::Precondition(format!("band_extrema needs at least 1000 samples, got {samples}")));
    }
    let c = &problem.config;
    let knots = problem.doping.knots_in(c.r0(), c.r1());
    let (b_inf, b_sup) = extrema_of(|r| problem.weight_b(r), c.r0(), c.r1(), &knots, samples);
    let (cal_b_inf, cal_b_sup) = if c.n() == 3 {
        let two = T::lit(2.0);
        let (lo, hi) = extrema_of(|r| problem.weight_b(r) + two * r / c.tau() - two, c.r0(), c.r1(), &knots, samples);
        (Some(lo), Some(hi))
    } else {
        (None, None)
    };
    Ok(BandExtrema { b_inf, b_sup, cal_b_inf, cal_b_sup })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition<T> {
    pub name: String,
    pub lhs: T,
    pub rhs: T,
    pub margin: T,
    pub satisfied: bool,
}

impl<T: Real> Condition<T> {
    fn new(name: &str, lhs: T, rhs: T) -> Self {
        let margin = lhs - rhs;
        Self { name: name.to_string(), lhs, rhs, margin, satisfied: margin > T::zero() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport<T> {
    pub regime: Regime,
    pub n: usize,
    pub conditions: Vec<Condition<T>>,
    pub b_inf: T,
    pub b_sup: T,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cal_b_inf: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cal_b_sup: Option<T>,
}

impl<T: Real> HypothesisReport<T> {
    pub fn satisfied(&self) -> bool {
        self.conditions.iter().all(|c| c.satisfied)
    }

    pub fn to_f64(&self) -> HypothesisReport<f64> {
        HypothesisReport {
            regime: self.regime,
            n: self.n,
            conditions: self
                .conditions
                .iter()
                .map(|c| Condition {
                    name: c.name.clone(),
                    lhs: c.lhs.as_f64(),
                    rhs: c.rhs.as_f64(),
                    margin: c.margin.as_f64(),
                    satisfied: c.satisfied,
                })
                .collect(),
            b_inf: self.b_inf.as_f64(),
            b_sup: self.b_sup.as_f64(),
            cal_b_inf: self.cal_b_inf.map(Real::as_f64),
            cal_b_sup: self.cal_b_sup.map(Real::as_f64),
        }
    }

    /// Error unless every condition holds.
    pub fn require(&self) -> Result<()> {
        if self.satisfied() {
            Ok(())
        } else {
            Err(Error::Hypotheses(Box::new(self.to_f64())))
        }
    }
}

impl<T: Real> fmt::Display for HypothesisReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} hypotheses (n = {}): {}", self.regime, self.n, if self.satisfied() { "satisfied" } else { "NOT satisfied" })?;
        write!(f, "  B_inf = {}, B_sup = {}", self.b_inf, self.b_sup)?;
        if let (Some(lo), Some(hi)) = (self.cal_b_inf, self.cal_b_sup) {
            write!(f, ", calB_inf = {lo}, calB_sup = {hi}")?;
        }
        for c in &self.conditions {
            write!(
                f,
                "\n  {:<40} lhs = {:<22} rhs = {:<22} margin = {:<22} {}",
                c.name,
                c.lhs,
                c.rhs,
                c.margin,
                if c.satisfied { "ok" } else { "FAILED" }
            )?;
        }
        Ok(())
    }
}

pub fn check_subsonic_hypotheses<T: Real>(problem: &Problem<T>) -> Result<HypothesisReport<T>> {
    check_with_samples(problem, Regime::Subsonic, DEFAULT_SAMPLES)
}

pub fn check_supersonic_hypotheses<T: Real>(problem: &Problem<T>) -> Result<HypothesisReport<T>> {
    check_with_samples(problem, Regime::Supersonic, DEFAULT_SAMPLES)
}

pub fn check_hypotheses<T: Real>(problem: &Problem<T>, regime: Regime) -> Result<HypothesisReport<T>> {
    check_with_samples(problem, regime, DEFAULT_SAMPLES)
}

pub fn check_with_samples<T: Real>(problem: &Problem<T>, regime: Regime, samples: usize) -> Result<HypothesisReport<T>> {
    let c = &problem.config;
    let ext = band_extrema(problem, samples)?;
    let jj = c.big_j();
    let inv_tau = T::one() / c.tau();
    let two = T::lit(2.0);
    let conditions = match (regime, c.n()) {
        (Regime::Subsonic, 2) => {
            let top = ext.b_sup + inv_tau;
            vec![
                Condition::new("B_sup + 1/tau > J", top, jj),
                Condition::new("B_inf + J/(tau (B_sup + 1/tau)) > J", ext.b_inf + jj / (c.tau() * top), jj),
            ]
        }
        (Regime::Subsonic, _) => {
            let cal_sup = ext.cal_b_sup.expect("n = 3 extrema");
            let knots = problem.doping.knots_in(c.r0(), c.r1());
            let (lo, _) = extrema_of(
                |r| problem.weight_b(r) + two * r * jj / (c.tau() * cal_sup) - two,
                c.r0(),
                c.r1(),
                &knots,
                samples,
            );
            vec![
                Condition::new("calB_sup > J", cal_sup, jj),
                Condition::new("min(B + 2rJ/(tau calB_sup) - 2) > J", lo, jj),
            ]
        }
        (Regime::Supersonic, 2) => vec![Condition::new("B_inf + 1/tau > J", ext.b_inf + inv_tau, jj)],
        (Regime::Supersonic, _) => vec![Condition::new("calB_inf > J", ext.cal_b_inf.expect("n = 3 extrema"), jj)],
    };
    Ok(HypothesisReport {
        regime,
        n: c.n(),
        conditions,
        b_inf: ext.b_inf,
        b_sup: ext.b_sup,
        cal_b_inf: ext.cal_b_inf,
        cal_b_sup: ext.cal_b_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DopingProfile, ProblemConfig};

    fn problem(n: usize, tau: f64, j0: f64, b: f64) -> Problem<f64> {
        Problem::new(ProblemConfig::new(n, 1.0, 2.0, tau, j0).unwrap(), DopingProfile::Constant { value: b }).unwrap()
    }

    #[test]
    fn band_extrema_constant_doping() {
        let e = band_extrema(&problem(2, 1.0, 1.0, 2.0), 10_000).unwrap();
        assert_eq!((e.b_inf, e.b_sup), (2.0, 4.0));
        assert!(e.cal_b_inf.is_none());
        let e = band_extrema(&problem(3, 1.0, 1.0, 3.0), 10_000).unwrap();
        assert_eq!((e.cal_b_inf, e.cal_b_sup), (Some(3.0), Some(14.0)));
        assert!(band_extrema(&problem(2, 1.0, 1.0, 2.0), 999).is_err());
    }

    #[test]
    fn interior_minimum_matches_brute_force() {
        // b(r) = 4 - 6r + 2.5 r^2 has its minimum at r = 1.2, where B = r b(r) is not monotone
        let c = ProblemConfig::new(2, 1.0, 2.0, 1.0, 1.0).unwrap();
        let p = Problem::new(c, DopingProfile::Poly { coeffs: vec![4.0, -6.0, 2.5] }).unwrap();
        let e = band_extrema(&p, 10_000).unwrap();
        let n = 1_000_000;
        let brute = (0..=n).map(|i| p.weight_b(1.0 + i as f64 / n as f64)).fold(f64::INFINITY, f64::min);
        assert!((e.b_inf - brute).abs() < 1e-9, "{} vs {}", e.b_inf, brute);
        assert!(e.b_inf <= brute + 1e-15);
    }

    #[test]
    fn subsonic_examples() {
        let r = check_subsonic_hypotheses(&problem(2, 1.0, 1.0, 2.0)).unwrap();
        assert!(r.satisfied());
        assert_eq!(r.conditions[0].lhs, 5.0);
        assert_eq!(r.conditions[0].margin, 4.0);
        assert!((r.conditions[1].lhs - 2.2).abs() < 1e-15);
        assert!((r.conditions[1].margin - 1.2).abs() < 1e-12);

        let r = check_subsonic_hypotheses(&problem(3, 1.0, 1.0, 3.0)).unwrap();
        assert!(r.satisfied());
        assert_eq!(r.conditions[0].lhs, 14.0);
        assert!((r.conditions[1].lhs - (1.0 + 1.0 / 7.0)).abs() < 1e-12);

        let r = check_subsonic_hypotheses(&problem(2, 1.0, 10.0, 2.0)).unwrap();
        assert!(!r.satisfied());
        assert_eq!(r.conditions[0].margin, -5.0);
        assert!(r.require().is_err());
    }

    #[test]
    fn supersonic_examples() {
        let r = check_supersonic_hypotheses(&problem(2, 1.0, 1.0, 2.0)).unwrap();
        assert_eq!(r.conditions[0].lhs, 3.0);
        assert!(r.satisfied());
        let r = check_supersonic_hypotheses(&problem(3, 1.0, 1.0, 3.0)).unwrap();
        assert_eq!(r.conditions[0].lhs, 3.0);
        let r = check_supersonic_hypotheses(&problem(2, 10.0, 3.0, 2.0)).unwrap();
        assert!((r.conditions[0].lhs - 2.1).abs() < 1e-15);
        assert!(!r.satisfied());
    }

    #[test]
    fn flags_stable_under_refinement() {
        let c = ProblemConfig::new(2, 1.0, 2.0, 1.0, 1.0).unwrap();
        let p = Problem::new(c, DopingProfile::Pwl { knots: vec![(1.0, 0.7), (1.37, 0.2), (2.0, 0.9)] }).unwrap();
        for regime in [Regime::Subsonic, Regime::Supersonic] {
            let base = check_with_samples(&p, regime, 10_000).unwrap();
            for s in [20_000, 100_003] {
                let fine = check_with_samples(&p, regime, s).unwrap();
                let a: Vec<bool> = base.conditions.iter().map(|c| c.satisfied).collect();
                let b: Vec<bool> = fine.conditions.iter().map(|c| c.satisfied).collect();
                assert_eq!(a, b);
            }
        }
    }
}
