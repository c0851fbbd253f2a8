use serde::{Deserialize, Serialize};

use super::hypotheses::extrema_of;
use super::ProblemConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Doping profile b(r). B(r) = r^(n-1) b(r) is derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DopingProfile<T> {
    Constant { value: T },
    /// sum_k coeffs[k] r^k
    Poly { coeffs: Vec<T> },
    /// linear interpolation between (r, value) knots
    Pwl { knots: Vec<(T, T)> },
}

impl<T: Real> DopingProfile<T> {
    pub fn eval(&self, r: T) -> T {
        match self {
            DopingProfile::Constant { value } => *value,
            DopingProfile::Poly { coeffs } => coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * r + c),
            DopingProfile::Pwl { knots } => {
                let k = knots.partition_point(|&(x, _)| x <= r);
                if k == 0 {
                    return knots[0].1;
                }
                if k == knots.len() {
                    return knots[k - 1].1;
                }
                let (xa, ya) = knots[k - 1];
                let (xb, yb) = knots[k];
                let t = (r - xa) / (xb - xa);
                ya + t * (yb - ya)
            }
        }
    }

    /// Breakpoints inside (r0, r1) where the sampled extrema must be evaluated exactly.
    pub fn knots_in(&self, r0: T, r1: T) -> Vec<T> {
        match self {
            DopingProfile::Pwl { knots } => knots.iter().map(|k| k.0).filter(|&x| x > r0 && x < r1).collect(),
            _ => Vec::new(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        match self {
            DopingProfile::Constant { value } => DopingProfile::Constant { value: *value * s },
            DopingProfile::Poly { coeffs } => DopingProfile::Poly { coeffs: coeffs.iter().map(|&c| c * s).collect() },
            DopingProfile::Pwl { knots } => DopingProfile::Pwl { knots: knots.iter().map(|&(x, y)| (x, y * s)).collect() },
        }
    }

    pub fn validate(&self, config: &ProblemConfig<T>) -> Result<()> {
        match self {
            DopingProfile::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidConfig("doping value must be finite".into()));
                }
            }
            DopingProfile::Poly { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidConfig("polynomial doping needs finite coefficients".into()));
                }
            }
            DopingProfile::Pwl { knots } => {
                if knots.len() < 2 {
                    return Err(Error::InvalidConfig("piecewise-linear doping needs at least two knots".into()));
                }
                if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                    return Err(Error::InvalidConfig("piecewise-linear knots must be finite".into()));
                }
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::InvalidConfig("piecewise-linear knots must be strictly increasing".into()));
                }
                if knots[0].0 > config.r0() || knots[knots.len() - 1].0 < config.r1() {
                    return Err(Error::InvalidConfig(format!(
                        "piecewise-linear knots must span [{}, {}]",
                        config.r0(),
                        config.r1()
                    )));
                }
            }
        }
        let (lo, _) = extrema_of(|r| self.eval(r), config.r0(), config.r1(), &self.knots_in(config.r0(), config.r1()), 10_000);
        if !(lo > T::zero()) {
            return Err(Error::InvalidConfig(format!("doping must be positive on [r0, r1]; minimum is {lo}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ProblemConfig<f64> {
        ProblemConfig::new(2, 1.0, 2.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn evaluates_kinds() {
        assert_eq!(DopingProfile::Constant { value: 2.0 }.eval(1.3), 2.0);
        let p = DopingProfile::Poly { coeffs: vec![1.0, 2.0, 3.0] };
        assert_eq!(p.eval(2.0), 17.0);
        let w = DopingProfile::Pwl { knots: vec![(1.0, 1.0), (1.5, 2.0), (2.0, 0.5)] };
        assert_eq!(w.eval(1.0), 1.0);
        assert_eq!(w.eval(1.25), 1.5);
        assert_eq!(w.eval(1.5), 2.0);
        assert_eq!(w.eval(2.0), 0.5);
    }

    #[test]
    fn validation() {
        let c = cfg();
        assert!(DopingProfile::Constant { value: -1.0 }.validate(&c).is_err());
        assert!(DopingProfile::Poly { coeffs: vec![] }.validate(&c).is_err());
        // crosses zero inside the annulus
        assert!(DopingProfile::Poly { coeffs: vec![-1.5, 1.0] }.validate(&c).is_err());
        assert!(DopingProfile::Pwl { knots: vec![(1.0, 1.0), (1.0, 2.0), (2.0, 1.0)] }.validate(&c).is_err());
        assert!(DopingProfile::Pwl { knots: vec![(1.1, 1.0), (2.0, 1.0)] }.validate(&c).is_err());
        assert!(DopingProfile::Pwl { knots: vec![(0.5, 1.0), (2.5, 1.0)] }.validate(&c).is_ok());
    }

    #[test]
    fn json_tags() {
        let d: DopingProfile<f64> = serde_json::from_str(r#"{"kind":"pwl","knots":[[1.0,1.0],[2.0,3.0]]}"#).unwrap();
        assert_eq!(d, DopingProfile::Pwl { knots: vec![(1.0, 1.0), (2.0, 3.0)] });
        assert!(serde_json::from_str::<DopingProfile<f64>>(r#"{"kind":"spline"}"#).is_err());
    }
}
