//! Three-mass abstract model of a biped: stance leg, torso and swing leg
//! masses constrained to horizontal planes, driven by jerk inputs.
//!
//! Each horizontal axis is an independent copy of the same 9-state system.
//! The state is ordered `[c1, c1', c1'', c2, c2', c2'', c3, c3', c3'']` and the
//! outputs are `[c1, c3, zmp]`.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub const STATE_DIM: usize = 9;
pub const INPUT_DIM: usize = 3;
pub const OUTPUT_DIM: usize = 3;

pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputMatrix = SMatrix<f64, STATE_DIM, INPUT_DIM>;
pub type OutputMatrix = SMatrix<f64, OUTPUT_DIM, STATE_DIM>;

/// Index of the stance-leg mass output.
pub const OUT_STANCE: usize = 0;
/// Index of the swing-leg mass output.
pub const OUT_SWING: usize = 1;
/// Index of the ZMP output.
pub const OUT_ZMP: usize = 2;

/// Physical parameters of the three-mass model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThreeMassParams {
    /// Stance-leg mass (kg).
    pub m1: f64,
    /// Torso mass (kg).
    pub m2: f64,
    /// Swing-leg mass (kg).
    pub m3: f64,
    /// Constant mass heights (m).
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub g: f64,
    pub foot_length: f64,
    pub foot_width: f64,
    /// Shrink factor applied to the feet when bounding the ZMP.
    pub zmp_safety_scale: f64,
    /// Height of the hip plane used by the pendulum hip trajectory (m).
    pub com_height: f64,
}

impl Default for ThreeMassParams {
    fn default() -> Self {
        Self {
            m1: 15.0,
            m2: 50.0,
            m3: 15.0,
            z1: 0.5,
            z2: 1.2,
            z3: 0.5,
            g: 9.81,
            foot_length: 0.2,
            foot_width: 0.1,
            zmp_safety_scale: 0.9,
            com_height: 1.0,
        }
    }
}

impl ThreeMassParams {
    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2 + self.m3
    }

    pub fn masses(&self) -> [f64; 3] {
        [self.m1, self.m2, self.m3]
    }

    pub fn heights(&self) -> [f64; 3] {
        [self.z1, self.z2, self.z3]
    }

    /// Natural frequency of the hip pendulum, sqrt(g / com_height).
    pub fn omega(&self) -> f64 {
        (self.g / self.com_height).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("m3", self.m3),
            ("z1", self.z1),
            ("z2", self.z2),
            ("z3", self.z3),
            ("g", self.g),
            ("foot_length", self.foot_length),
            ("foot_width", self.foot_width),
            ("com_height", self.com_height),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return param(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.zmp_safety_scale > 0.0 && self.zmp_safety_scale <= 1.0) {
            return param(format!(
                "zmp_safety_scale must lie in (0, 1], got {}",
                self.zmp_safety_scale
            ));
        }
        Ok(())
    }

    /// ZMP row of the output map.
    pub fn zmp_row(&self) -> [f64; STATE_DIM] {
        let mg = self.total_mass() * self.g;
        let mut row = [0.0; STATE_DIM];
        for (k, (m, z)) in self.masses().into_iter().zip(self.heights()).enumerate() {
            row[3 * k] = m / self.total_mass();
            row[3 * k + 2] = -m * z / mg;
        }
        row
    }
}

/// Per-axis state of the three masses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisState(pub SVector<f64, STATE_DIM>);

impl AxisState {
    pub fn zeros() -> Self {
        Self(SVector::zeros())
    }

    /// State with the masses at rest at the given positions.
    pub fn at_rest(positions: [f64; 3]) -> Self {
        let mut x = SVector::zeros();
        for (k, p) in positions.into_iter().enumerate() {
            x[3 * k] = p;
        }
        Self(x)
    }

    pub fn position(&self, mass: usize) -> f64 {
        self.0[3 * mass]
    }

    pub fn velocity(&self, mass: usize) -> f64 {
        self.0[3 * mass + 1]
    }

    pub fn acceleration(&self, mass: usize) -> f64 {
        self.0[3 * mass + 2]
    }

    pub fn positions(&self) -> [f64; 3] {
        [self.0[0], self.0[3], self.0[6]]
    }

    pub fn accelerations(&self) -> [f64; 3] {
        [self.0[2], self.0[5], self.0[8]]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Jerk inputs of the three masses on one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisInput(pub SVector<f64, INPUT_DIM>);

impl AxisInput {
    pub fn zeros() -> Self {
        Self(SVector::zeros())
    }

    pub fn new(j1: f64, j2: f64, j3: f64) -> Self {
        Self(SVector::from([j1, j2, j3]))
    }
}

/// Linear state-space model, continuous or sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: StateMatrix,
    pub b: InputMatrix,
    pub c: OutputMatrix,
    /// `Some(Ts)` for a sampled model.
    pub sample_time: Option<f64>,
}

impl StateSpace {
    pub fn is_discrete(&self) -> bool {
        self.sample_time.is_some()
    }

    pub fn output(&self, x: &AxisState) -> [f64; OUTPUT_DIM] {
        let y = self.c * x.0;
        [y[0], y[1], y[2]]
    }
}

/// Continuous model: three decoupled triple integrators with the
/// stance/swing position and ZMP outputs.
pub fn build_continuous(params: &ThreeMassParams) -> Result<StateSpace> {
    params.validate()?;
    let mut a = StateMatrix::zeros();
    let mut b = InputMatrix::zeros();
    for k in 0..3 {
        a[(3 * k, 3 * k + 1)] = 1.0;
        a[(3 * k + 1, 3 * k + 2)] = 1.0;
        b[(3 * k + 2, k)] = 1.0;
    }
    let mut c = OutputMatrix::zeros();
    c[(OUT_STANCE, 0)] = 1.0;
    c[(OUT_SWING, 6)] = 1.0;
    for (j, v) in params.zmp_row().into_iter().enumerate() {
        c[(OUT_ZMP, j)] = v;
    }
    Ok(StateSpace {
        a,
        b,
        c,
        sample_time: None,
    })
}

/// Exact zero-order-hold discretization.
///
/// `A` is nilpotent (A^3 = 0), so `exp(A Ts) = I + A Ts + A^2 Ts^2 / 2` and
/// `int_0^Ts exp(A s) ds B = (I Ts + A Ts^2 / 2 + A^2 Ts^3 / 6) B`.
pub fn discretize(ss: &StateSpace, ts: f64) -> Result<StateSpace> {
    if ss.is_discrete() {
        return Err(Error::Structural("model is already discrete".into()));
    }
    if !(ts.is_finite() && ts > 0.0) {
        return param(format!("sample time must be positive, got {ts}"));
    }
    let a2 = ss.a * ss.a;
    if (a2 * ss.a).amax() != 0.0 {
        return Err(Error::Structural(
            "closed-form discretization needs a nilpotent A (A^3 = 0)".into(),
        ));
    }
    let eye = StateMatrix::identity();
    let ad = eye + ss.a * ts + a2 * (ts * ts / 2.0);
    let gamma = eye * ts + ss.a * (ts * ts / 2.0) + a2 * (ts * ts * ts / 6.0);
    Ok(StateSpace {
        a: ad,
        b: gamma * ss.b,
        c: ss.c,
        sample_time: Some(ts),
    })
}

/// ZMP of the three masses with zero vertical acceleration.
pub fn zmp(params: &ThreeMassParams, positions: [f64; 3], accels: [f64; 3]) -> f64 {
    let masses = params.masses();
    let heights = params.heights();
    let mut num = 0.0;
    for k in 0..3 {
        num += masses[k] * positions[k] * params.g - masses[k] * heights[k] * accels[k];
    }
    num / (params.total_mass() * params.g)
}

/// One plant step `x' = Ad x + Bd u`, then `extra_accel[i]` is added to the
/// acceleration of mass `i` (external force over mass).
pub fn step_plant(
    ss: &StateSpace,
    x: &AxisState,
    u: &AxisInput,
    extra_accel: [f64; 3],
) -> Result<AxisState> {
    if !ss.is_discrete() {
        return Err(Error::Structural(
            "step_plant needs a discrete model".into(),
        ));
    }
    let mut next = ss.a * x.0 + ss.b * u.0;
    for (k, da) in extra_accel.into_iter().enumerate() {
        next[3 * k + 2] += da;
    }
    Ok(AxisState(next))
}

/// Resting configuration that puts the ZMP at `zmp` with the leg masses at
/// the given positions; the torso position is solved for.
pub fn standing_state(params: &ThreeMassParams, stance: f64, swing: f64, zmp: f64) -> AxisState {
    let torso = (params.total_mass() * zmp - params.m1 * stance - params.m3 * swing) / params.m2;
    AxisState::at_rest([stance, torso, swing])
}
