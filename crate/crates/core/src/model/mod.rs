//! Problem data: geometry, doping, grids, profiles and the existence hypotheses.

mod doping;
mod grid;
mod hypotheses;

pub use doping::DopingProfile;
pub use grid::{Profile, RadialGrid, Spacing};
pub use hypotheses::{
    band_extrema, check_hypotheses, check_subsonic_hypotheses, check_supersonic_hypotheses, BandExtrema,
    Condition, HypothesisReport, DEFAULT_SAMPLES,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subsonic,
    Supersonic,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Subsonic => "subsonic",
            Regime::Supersonic => "supersonic",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subsonic" => Ok(Regime::Subsonic),
            "supersonic" => Ok(Regime::Supersonic),
            other => Err(Error::InvalidConfig(format!("unknown regime '{other}'"))),
        }
    }
}

/// Annulus geometry and flow constants. `big_j` is derived, never supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig<T> {
    n: usize,
    r0: T,
    r1: T,
    tau: T,
    j0: T,
    big_j: T,
}

impl<T: Real> ProblemConfig<T> {
    pub fn new(n: usize, r0: T, r1: T, tau: T, j0: T) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::InvalidConfig(format!("dimension n must be 2 or 3, got {n}")));
        }
        let finite = [r0, r1, tau, j0].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("non-finite parameter".into()));
        }
        if !(r0 > T::zero()) {
            return Err(Error::InvalidConfig(format!("r0 must be positive, got {r0}")));
        }
        if !(r1 > r0) {
            return Err(Error::InvalidConfig(format!("r1 must exceed r0, got r0={r0}, r1={r1}")));
        }
        if !(tau > T::zero()) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
        }
        if !(j0 > T::zero()) {
            return Err(Error::InvalidConfig(format!("j0 must be positive, got {j0}")));
        }
        let big_j = j0 * r0.powi_usize(n - 1);
        Ok(Self { n, r0, r1, tau, j0, big_j })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn r0(&self) -> T {
        self.r0
    }
    pub fn r1(&self) -> T {
        self.r1
    }
    pub fn tau(&self) -> T {
        self.tau
    }
    pub fn j0(&self) -> T {
        self.j0
    }
    /// Sonic flux constant j0 * r0^(n-1).
    pub fn big_j(&self) -> T {
        self.big_j
    }
    pub fn length(&self) -> T {
        self.r1 - self.r0
    }

    pub fn with_tau(&self, tau: T) -> Result<Self> {
        Self::new(self.n, self.r0, self.r1, tau, self.j0)
    }

    /// r^(n-1).
    pub fn weight(&self, r: T) -> T {
        r.powi_usize(self.n - 1)
    }

    /// (n-1) r^(n-2).
    pub fn weight_deriv(&self, r: T) -> T {
        T::from_usize_lossy(self.n - 1) * r.powi(self.n as i32 - 2)
    }

    /// Geometric source (n-1)(n-2) r^(n-3); zero for n = 2.
    pub fn geometric_source(&self, r: T) -> T {
        match self.n {
            2 => T::zero(),
            _ => T::from_usize_lossy((self.n - 1) * (self.n - 2)) * r.powi(self.n as i32 - 3),
        }
    }

    pub fn contains(&self, r: T) -> bool {
        r >= self.r0 && r <= self.r1
    }
}

pub fn derive_flux_constant<T: Real>(config: &ProblemConfig<T>) -> T {
    config.big_j()
}

/// Sonic boundary densities (rho0, rho1).
pub fn sonic_boundary_densities<T: Real>(config: &ProblemConfig<T>) -> (T, T) {
    let rho0 = config.j0();
    let rho1 = config.j0() * config.weight(config.r0()) / config.weight(config.r1());
    (rho0, rho1)
}

/// Geometry plus doping, the unit every solver consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<T> {
    pub config: ProblemConfig<T>,
    pub doping: DopingProfile<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile<T> {
    n: usize,
    r0: T,
    r1: T,
    tau: T,
    j0: T,
    doping: DopingProfile<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(config: ProblemConfig<T>, doping: DopingProfile<T>) -> Result<Self> {
        doping.validate(&config)?;
        Ok(Self { config, doping })
    }

    /// B(r) = r^(n-1) b(r) with a domain check.
    pub fn eval_b(&self, r: T) -> Result<T> {
        if !self.config.contains(r) {
            return Err(Error::Domain { what: "r", value: r.as_f64() });
        }
        Ok(self.weight_b(r))
    }

    /// B(r) without the domain check, for solver loops on grid points.
    pub fn weight_b(&self, r: T) -> T {
        self.config.weight(r) * self.doping.eval(r)
    }

    pub fn big_j(&self) -> T {
        self.config.big_j()
    }

    pub fn with_tau(&self, tau: T) -> Result<Self> {
        Self::new(self.config.with_tau(tau)?, self.doping.clone())
    }

    pub fn with_doping_scale(&self, scale: T) -> Result<Self> {
        Self::new(self.config, self.doping.scaled(scale))
    }
}

impl<T: Real + Serialize + for<'de> Deserialize<'de>> Problem<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile<T> = serde_json::from_str(text)?;
        let config = ProblemConfig::new(file.n, file.r0, file.r1, file.tau, file.j0)?;
        Self::new(config, file.doping)
    }

    pub fn to_json(&self) -> String {
        let file = ProblemFile {
            n: self.config.n,
            r0: self.config.r0,
            r1: self.config.r1,
            tau: self.config.tau,
            j0: self.config.j0,
            doping: self.doping.clone(),
        };
        serde_json::to_string(&file).expect("problem serializes")
    }
}
