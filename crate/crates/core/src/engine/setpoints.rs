use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::footstep::FeetState;
use crate::geometry::{rotate, Footprint, Vec2};
use crate::mpc::MpcConfig;

/// Omnidirectional walking command.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetpointValues {
    /// Forward advance per step (m).
    pub step_length: f64,
    /// Lateral advance per step (m).
    pub step_width: f64,
    /// Turning rate (deg/s).
    pub turn_rate: f64,
}

impl SetpointValues {
    pub fn new(step_length: f64, step_width: f64, turn_rate: f64) -> Self {
        Self {
            step_length,
            step_width,
            turn_rate,
        }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.step_length, self.step_width, self.turn_rate]
    }

    fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Commanded setpoints and their lag-filtered copies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    pub command: SetpointValues,
    pub filtered: SetpointValues,
}

impl Setpoints {
    pub fn new(command: SetpointValues) -> Self {
        Self {
            command,
            filtered: command,
        }
    }
}

/// One step of the first-order lag filter.
pub fn filter_setpoints(sp: &Setpoints, ts: f64, lag_tau: f64) -> Result<Setpoints> {
    if !(lag_tau > 0.0 && lag_tau.is_finite()) {
        return param(format!("lag time constant must be positive, got {lag_tau}"));
    }
    if !(ts > 0.0 && ts.is_finite()) {
        return param(format!("sample time must be positive, got {ts}"));
    }
    let gain = (ts / lag_tau).min(1.0);
    let cmd = sp.command.as_array();
    let mut v = sp.filtered.as_array();
    for i in 0..3 {
        v[i] += gain * (cmd[i] - v[i]);
    }
    Ok(Setpoints {
        command: sp.command,
        filtered: SetpointValues::from_array(v),
    })
}

/// Next footprint produced from the setpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGeometry {
    pub footprint: Footprint,
    /// Displacement of the swing foot.
    pub step_vector: Vec2,
    /// The requested footprint was outside the reachable rectangle.
    pub clamped: bool,
}

/// Places the swing foot so that the point between the feet advances by
/// `(step_length, step_width)` in the support-foot frame and the new foot
/// is turned by `turn_rate * step_period` from the support foot.
pub fn plan_next_step(
    cmd: &SetpointValues,
    feet: &FeetState,
    step_period: f64,
    foot_spacing: f64,
    config: &MpcConfig,
) -> StepGeometry {
    let support = *feet.support_foot();
    let swing = *feet.swing_foot();
    let half = 0.5 * foot_spacing;
    let body =
        support.position() - rotate(Vec2::new(0.0, support.side.sign() * half), support.theta);
    let body_next = body + rotate(Vec2::new(cmd.step_length, cmd.step_width), support.theta);
    let heading = support.theta + cmd.turn_rate.to_radians() * step_period;
    let target = body_next + rotate(Vec2::new(0.0, swing.side.sign() * half), heading);

    let mut local = rotate(target - support.position(), -support.theta);
    let mut clamped = false;
    let sag = local.x.clamp(-config.reach_sagittal, config.reach_sagittal);
    let sign = swing.side.sign();
    let lat = (sign * local.y).clamp(config.reach_lateral[0], config.reach_lateral[1]) * sign;
    if (sag - local.x).abs() > 1e-12 || (lat - local.y).abs() > 1e-12 {
        clamped = true;
        local = Vec2::new(sag, lat);
    }
    let p = support.position() + rotate(local, support.theta);
    let footprint = Footprint::new(p.x, p.y, heading, swing.side);
    StepGeometry {
        footprint,
        step_vector: p - swing.position(),
        clamped,
    }
}

/// Feet after the swing foot lands on `footprint`.
pub(crate) fn land(feet: &FeetState, footprint: Footprint) -> FeetState {
    let mut next = *feet;
    match footprint.side {
        crate::geometry::Side::Left => next.left = footprint,
        crate::geometry::Side::Right => next.right = footprint,
    }
    next.swing = footprint.side.opposite();
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Side;

    #[test]
    fn one_filter_tick() {
        let sp = Setpoints {
            command: SetpointValues::new(0.1, 0.0, 0.0),
            filtered: SetpointValues::default(),
        };
        let next = filter_setpoints(&sp, 0.02, 0.5).unwrap();
        assert!((next.filtered.step_length - 0.004).abs() < 1e-15);
        assert!(filter_setpoints(&sp, 0.02, 0.0).is_err());
    }

    #[test]
    fn filter_converges() {
        let mut sp = Setpoints {
            command: SetpointValues::new(0.1, 0.025, 10.0),
            filtered: SetpointValues::default(),
        };
        for _ in 0..500 {
            sp = filter_setpoints(&sp, 0.02, 0.5).unwrap();
        }
        assert!((sp.filtered.turn_rate - 10.0).abs() < 1e-6 * 10.0);
        assert!((sp.filtered.step_length - 0.1).abs() < 1e-6);
    }

    #[test]
    fn zero_setpoints_step_in_place() {
        let feet = FeetState::side_by_side(Vec2::new(1.0, 2.0), 0.4, 0.2, Side::Left);
        let g = plan_next_step(
            &SetpointValues::default(),
            &feet,
            1.0,
            0.2,
            &MpcConfig::default(),
        );
        assert!((g.footprint.position() - feet.left.position()).norm() < 1e-12);
        assert!(!g.clamped);
    }

    #[test]
    fn forward_steps_are_spaced_by_step_length() {
        let mut feet = FeetState::side_by_side(Vec2::zeros(), 0.0, 0.2, Side::Left);
        let cmd = SetpointValues::new(0.1, 0.0, 0.0);
        let mut xs = Vec::new();
        for _ in 0..6 {
            let g = plan_next_step(&cmd, &feet, 1.0, 0.2, &MpcConfig::default());
            xs.push(g.footprint.x);
            feet = land(&feet, g.footprint);
        }
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn far_request_is_clamped() {
        let feet = FeetState::side_by_side(Vec2::zeros(), 0.0, 0.2, Side::Left);
        let g = plan_next_step(
            &SetpointValues::new(1.0, 0.0, 0.0),
            &feet,
            1.0,
            0.2,
            &MpcConfig::default(),
        );
        assert!(g.clamped);
        assert!((g.footprint.x - 0.25).abs() < 1e-12);
    }
}
