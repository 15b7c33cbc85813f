use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    AxisInput, AxisState, InputMatrix, OutputMatrix, StateMatrix, StateSpace, INPUT_DIM,
    OUTPUT_DIM, STATE_DIM,
};
use crate::error::{param, Error, Result};

type Gain = SMatrix<f64, STATE_DIM, OUTPUT_DIM>;

/// Noise intensities of the steady-state Kalman filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObserverConfig {
    /// Variance of the jerk disturbance on each mass per sample ((m/s^3)^2).
    pub process_noise: [f64; INPUT_DIM],
    /// Variance of each measured output (stance, swing, ZMP) (m^2).
    pub measurement_noise: [f64; OUTPUT_DIM],
}

impl Default for ObserverConfig {
    fn default() -> Self {
        let sigma = 0.05 / 3.0;
        Self {
            process_noise: [1e-2; INPUT_DIM],
            measurement_noise: [sigma * sigma; OUTPUT_DIM],
        }
    }
}

impl ObserverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut all = self.process_noise.iter().chain(&self.measurement_noise);
        if all.any(|v| !(v.is_finite() && *v > 0.0)) {
            return param("observer noise variances must be positive and finite");
        }
        Ok(())
    }
}

/// Steady-state Kalman filter of one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Observer {
    a: StateMatrix,
    b: InputMatrix,
    c: OutputMatrix,
    gain: Gain,
}

impl Observer {
    pub fn new(ss: &StateSpace, config: &ObserverConfig) -> Result<Self> {
        config.validate()?;
        if !ss.is_discrete() {
            return Err(Error::Structural("observer needs a discrete model".into()));
        }
        let q_in = SMatrix::<f64, INPUT_DIM, INPUT_DIM>::from_diagonal(&SVector::from(
            config.process_noise,
        ));
        let q = ss.b * q_in * ss.b.transpose();
        let r = SMatrix::<f64, OUTPUT_DIM, OUTPUT_DIM>::from_diagonal(&SVector::from(
            config.measurement_noise,
        ));
        let p = filter_riccati(&ss.a, &ss.c, &q, &r)?;
        let s = ss.c * p * ss.c.transpose() + r;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Structural("innovation covariance is singular".into()))?;
        let gain = p * ss.c.transpose() * s_inv;
        let observer = Self {
            a: ss.a,
            b: ss.b,
            c: ss.c,
            gain,
        };
        // The estimation error evolves with (I - K C) A; it must be stable.
        let err = (StateMatrix::identity() - gain * ss.c) * ss.a;
        if spectral_radius(&err) >= 1.0 {
            return Err(Error::Structural(
                "observer error dynamics are not stable".into(),
            ));
        }
        Ok(observer)
    }

    /// Observer with a given correction gain.
    pub fn with_gain(ss: &StateSpace, gain: Gain) -> Self {
        Self {
            a: ss.a,
            b: ss.b,
            c: ss.c,
            gain,
        }
    }

    pub fn gain(&self) -> &Gain {
        &self.gain
    }

    /// Predict with the model, then correct with the measurement.
    pub fn update(&self, prev: &AxisState, u_prev: &AxisInput, y: [f64; OUTPUT_DIM]) -> AxisState {
        let pred = self.a * prev.0 + self.b * u_prev.0;
        let innovation = SVector::<f64, OUTPUT_DIM>::from(y) - self.c * pred;
        AxisState(pred + self.gain * innovation)
    }
}

/// Free-function form of [`Observer::update`].
pub fn observe(
    prev: &AxisState,
    u_prev: &AxisInput,
    y: [f64; OUTPUT_DIM],
    observer: &Observer,
) -> AxisState {
    observer.update(prev, u_prev, y)
}

/// A priori error covariance of the steady-state filter, by the doubling
/// iteration on the dual control Riccati equation.
fn filter_riccati(
    a: &StateMatrix,
    c: &OutputMatrix,
    q: &StateMatrix,
    r: &SMatrix<f64, OUTPUT_DIM, OUTPUT_DIM>,
) -> Result<StateMatrix> {
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::Structural("measurement covariance is singular".into()))?;
    let mut ak = a.transpose();
    let mut gk = c.transpose() * r_inv * c;
    let mut hk = *q;
    let eye = StateMatrix::identity();
    for _ in 0..100 {
        let w = (eye + gk * hk)
            .try_inverse()
            .ok_or_else(|| Error::Structural("Riccati doubling step is singular".into()))?;
        let a_next = ak * w * ak;
        let g_next = gk + ak * w * gk * ak.transpose();
        let h_next = hk + ak.transpose() * hk * w * ak;
        let change = (h_next - hk).amax();
        ak = a_next;
        gk = (g_next + g_next.transpose()) * 0.5;
        hk = (h_next + h_next.transpose()) * 0.5;
        if !hk.iter().all(|v| v.is_finite()) {
            break;
        }
        if change <= 1e-13 * hk.amax() {
            return Ok(hk);
        }
    }
    Err(Error::Structural(
        "observer Riccati equation did not converge (model not detectable?)".into(),
    ))
}

fn spectral_radius(m: &StateMatrix) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
