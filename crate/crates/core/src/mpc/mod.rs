//! Receding-horizon control of one horizontal axis of the three-mass model.

mod constraints;
mod controller;
mod observer;
mod prediction;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub use constraints::{
    build_constraints, zmp_interval, ConstraintRow, ConstraintSet, HorizonConstraints, SupportPhase,
};
pub use controller::{AxisController, ControlOutcome};
pub use observer::{observe, Observer, ObserverConfig};
pub use prediction::{build_cost, build_prediction, Prediction};

/// Horizon, weights and bounds of the per-axis controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    /// Prediction horizon in samples.
    pub np: usize,
    /// Control horizon in samples.
    pub nc: usize,
    /// Sample time (s).
    pub ts: f64,
    pub zmp_weight: f64,
    pub stance_weight: f64,
    pub swing_weight: f64,
    /// Weights on the three jerk inputs.
    pub jerk_weights: [f64; 3],
    /// Symmetric bound on every jerk input (m/s^3).
    pub jerk_bound: f64,
    /// Sagittal half-range of the swing mass around the support foot (m).
    pub reach_sagittal: f64,
    /// Lateral band of the swing mass measured from the support foot
    /// toward the swing side (m).
    pub reach_lateral: [f64; 2],
    /// Slack penalty used for soft rows and for the infeasibility fallback.
    pub soft_penalty: f64,
    /// Output rows after this many samples are soft. `None` keeps every
    /// row as given.
    pub hard_output_samples: Option<usize>,
    pub max_qp_iterations: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            np: 80,
            nc: 20,
            ts: 0.02,
            zmp_weight: 20.0,
            stance_weight: 20.0,
            swing_weight: 20.0,
            jerk_weights: [1e-4; 3],
            jerk_bound: 500.0,
            reach_sagittal: 0.25,
            reach_lateral: [0.05, 0.30],
            soft_penalty: 1e3,
            hard_output_samples: Some(20),
            max_qp_iterations: 1000,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nc == 0 || self.nc > self.np {
            return param(format!(
                "need 1 <= nc <= np, got nc={} np={}",
                self.nc, self.np
            ));
        }
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return param(format!("sample time must be positive, got {}", self.ts));
        }
        let w = [self.zmp_weight, self.stance_weight, self.swing_weight];
        let all = w.iter().chain(self.jerk_weights.iter());
        if all.clone().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return param("weights must be finite and nonnegative");
        }
        if !w.iter().any(|v| *v > 0.0) {
            return param("at least one output weight must be positive");
        }
        if !(self.jerk_bound > 0.0) {
            return param(format!(
                "jerk bound must be positive, got {}",
                self.jerk_bound
            ));
        }
        if !(self.reach_sagittal > 0.0 && self.reach_lateral[0] < self.reach_lateral[1]) {
            return param("reachable region is empty");
        }
        if !(self.soft_penalty > 0.0) {
            return param("soft penalty must be positive");
        }
        Ok(())
    }

    /// Output weights in output order (stance, swing, ZMP).
    pub fn output_weights(&self) -> [f64; 3] {
        [self.stance_weight, self.swing_weight, self.zmp_weight]
    }
}

/// Output references for samples `k+1 ..= k+Np`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceBundle {
    pub zmp: Vec<f64>,
    pub stance: Vec<f64>,
    pub swing: Vec<f64>,
}

impl ReferenceBundle {
    pub fn constant(np: usize, zmp: f64, stance: f64, swing: f64) -> Self {
        Self {
            zmp: vec![zmp; np],
            stance: vec![stance; np],
            swing: vec![swing; np],
        }
    }

    pub fn len(&self) -> usize {
        self.zmp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zmp.is_empty()
    }

    /// Reference of output `o` (stance, swing, ZMP order) at sample `j`.
    pub fn output(&self, j: usize, o: usize) -> f64 {
        match o {
            0 => self.stance[j],
            1 => self.swing[j],
            _ => self.zmp[j],
        }
    }

    pub fn validate(&self, np: usize) -> Result<()> {
        if self.zmp.len() != np || self.stance.len() != np || self.swing.len() != np {
            return Err(Error::Structural(format!(
                "reference lengths ({}, {}, {}) differ from horizon {np}",
                self.zmp.len(),
                self.stance.len(),
                self.swing.len()
            )));
        }
        let all = self.zmp.iter().chain(&self.stance).chain(&self.swing);
        if all.clone().any(|v| !v.is_finite()) {
            return param("references must be finite");
        }
        Ok(())
    }
}
