use serde::{Deserialize, Serialize};

use crate::model::{Profile, Regime};
use crate::scalar::Real;

/// One continuation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    /// j for subsonic runs, k for supersonic runs
    pub param: f64,
    /// Picard (subsonic) or outer (supersonic) iterations
    pub iterations: usize,
    pub inner_iterations: usize,
    pub newton_steps: usize,
    /// sup-norm difference to the previous stage; absent for the first stage
    pub stage_change: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundViolations {
    /// node projections performed by the box clamp
    pub clamped_nodes: usize,
    pub max_excursion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub weak_residual_linf: f64,
    pub weak_residual_l2: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ell: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interior_gap: Option<f64>,
    /// running max of v over all supersonic iterates
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub v_max: Option<f64>,
    pub holder_seminorm: f64,
    pub stages: Vec<StageRecord>,
    pub bound_violations: BoundViolations,
    pub continuation_converged: bool,
    /// sup-norm move made by the Newton polish on the limit equations, when it ran and settled
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub polish_shift: Option<f64>,
    pub warnings: Vec<String>,
}

/// Converged m-profile with its regime and final regularization parameter.
#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub m: Profile<T>,
    pub regime: Regime,
    pub reg_param: T,
    pub diagnostics: Diagnostics,
}

impl<T: Real> Solution<T> {
    pub fn total_iterations(&self) -> usize {
        self.diagnostics.stages.iter().map(|s| s.iterations).sum()
    }
}
