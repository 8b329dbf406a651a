//! Default tolerances and numerical knobs shared by every module.
//!
//! Every threshold used by the library is pinned here so that scenario files,
//! tests and the verification suite agree on the same numbers.

use serde::{Deserialize, Serialize};

/// Single global angular tolerance (radians) for direction comparisons.
pub const ANGULAR_TOL: f64 = 1e-6;

/// Two footpoint directions closer than this are merged into one cluster.
pub const DIRECTION_MERGE_ANGLE: f64 = 0.05;

/// A direction cluster built from more raw candidates than this, spanning more
/// than the merge angle, is reported as a continuum.
pub const CONTINUUM_THRESHOLD: usize = 16;

/// Number of representative directions produced for a continuum of geodesics.
pub const CONTINUUM_SAMPLES: usize = 32;

/// Footpoint tolerance in units of the sampling pitch of the set.
pub const FOOTPOINT_TOL_PITCHES: f64 = 3.0;

/// Floor for the footpoint tolerance of sets without a sampling pitch.
pub const FOOTPOINT_TOL_FLOOR: f64 = 1e-9;

/// Cut-candidate threshold: grad-norm below `1 - tau`.
pub const GRAD_THRESHOLD: f64 = 0.02;

/// Tolerance on unit gradient norm.
pub const GRAD_TOL: f64 = 1e-3;

/// Angular sweep resolution and refinement rounds for the max-min gradient.
pub const SWEEP_SAMPLES: usize = 2048;
pub const SWEEP_REFINEMENTS: usize = 3;
pub const SWEEP_REFINE_SAMPLES: usize = 64;

/// Gradient curves stop once the gradient norm falls below this.
pub const CRITICAL_EPS: f64 = 1e-3;

/// Step shrinks when the gradient direction rotates more than this per step.
pub const FLOW_MAX_ROTATION: f64 = 0.1;

/// Concavity pre-check tolerance for the nearest-cut-point test.
pub const PRECHECK_TOL: f64 = 0.05;

/// Maximal orthogonality defect of a distance chart.
pub const ORTHO_TOL: f64 = 0.1;

/// Bisection tolerance on the tube radius during reach estimation.
pub const BISECTION_TOL: f64 = 1e-3;

/// Angular tolerance of the normal-cone filter. Must dominate the turning
/// angle of sampled curves.
pub const NORMAL_CONE_TOL: f64 = 0.01;

/// Default number of Steiner points inserted on each mesh edge.
pub const STEINER_PER_EDGE: usize = 4;

/// Tolerance block carried by scenarios and passed to the estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tau: f64,
    pub grad_tol: f64,
    /// Overrides the set's own footpoint tolerance when present.
    pub footpoint_tol: Option<f64>,
    pub ortho_tol: f64,
    pub bisection_tol: f64,
    pub merge_angle: f64,
    pub angular_tol: f64,
    pub precheck_tol: f64,
    pub critical_eps: f64,
    pub seed: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tau: GRAD_THRESHOLD,
            grad_tol: GRAD_TOL,
            footpoint_tol: None,
            ortho_tol: ORTHO_TOL,
            bisection_tol: BISECTION_TOL,
            merge_angle: DIRECTION_MERGE_ANGLE,
            angular_tol: ANGULAR_TOL,
            precheck_tol: PRECHECK_TOL,
            critical_eps: CRITICAL_EPS,
            seed: 0x5eed,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), String> {
        let named = [
            ("tau", self.tau),
            ("grad_tol", self.grad_tol),
            ("ortho_tol", self.ortho_tol),
            ("bisection_tol", self.bisection_tol),
            ("merge_angle", self.merge_angle),
            ("angular_tol", self.angular_tol),
            ("precheck_tol", self.precheck_tol),
            ("critical_eps", self.critical_eps),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("tolerance `{name}` must be positive, got {v}"));
            }
        }
        if let Some(v) = self.footpoint_tol {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("tolerance `footpoint_tol` must be positive, got {v}"));
            }
        }
        Ok(())
    }
}
