//! Radial steady states of the isothermal Euler-Poisson semiconductor model on an
//! annulus r0 < r < r1 with sonic boundary data.
//!
//! The unknown is m = r^(n-1) rho. Interior subsonic solutions (m > J) are found by
//! regularizing the flux j < J and continuing j -> J; interior supersonic ones (m < J)
//! through v = k/m with k -> J from above.

pub mod error;
pub mod fields;
pub mod linbvp;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod solution;
pub mod subsonic;
pub mod supersonic;
pub mod verify;

mod discrete;

pub use error::{Error, Result};
pub use model::{DopingProfile, Problem, ProblemConfig, Profile, RadialGrid, Regime, Spacing};
pub use scalar::Real;
pub use solution::{Diagnostics, Solution};
pub use subsonic::{Scheme, SubsonicParams};
pub use supersonic::SupersonicParams;

pub type ProblemF64 = Problem<f64>;
pub type ProblemF32 = Problem<f32>;
pub type ProfileF64 = Profile<f64>;
pub type ProfileF32 = Profile<f32>;
pub type GridF64 = RadialGrid<f64>;
pub type SolutionF64 = Solution<f64>;
pub type SubsonicParamsF64 = SubsonicParams<f64>;
pub type SupersonicParamsF64 = SupersonicParams<f64>;
