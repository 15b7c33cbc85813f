use serde::{Deserialize, Serialize};

use super::grid::{Cell, GridMap};
use super::PlannerConfig;
use crate::error::{param, Error, Result};
use crate::geometry::{wrap_angle, Footprint, Side, Vec2};

/// Poses of both feet and which one swings next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeetState {
    pub left: Footprint,
    pub right: Footprint,
    pub swing: Side,
}

impl FeetState {
    /// Feet side by side around `center`, facing `heading`.
    pub fn side_by_side(center: Vec2, heading: f64, width: f64, swing: Side) -> Self {
        let n = Vec2::new(-heading.sin(), heading.cos()) * (0.5 * width);
        Self {
            left: Footprint::new(center.x + n.x, center.y + n.y, heading, Side::Left),
            right: Footprint::new(center.x - n.x, center.y - n.y, heading, Side::Right),
            swing,
        }
    }

    pub fn foot(&self, side: Side) -> &Footprint {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn foot_mut(&mut self, side: Side) -> &mut Footprint {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn swing_foot(&self) -> &Footprint {
        self.foot(self.swing)
    }

    pub fn support_foot(&self) -> &Footprint {
        self.foot(self.swing.opposite())
    }

    /// Swing flags `(left, right)`: +1 swinging, -1 supporting.
    pub fn flags(&self) -> (i8, i8) {
        match self.swing {
            Side::Left => (1, -1),
            Side::Right => (-1, 1),
        }
    }

    pub fn midpoint(&self) -> Vec2 {
        0.5 * (self.left.position() + self.right.position())
    }
}

/// Step of fixed distance at a turn relative to the swing foot heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepAction {
    pub length: f64,
    pub turn: f64,
}

/// Moves the swing foot `length` along its heading turned by `turn`, turns
/// it, and swaps the swing foot.
pub fn transition(s: &FeetState, a: &StepAction, max_turn: f64) -> Result<FeetState> {
    if !(a.length.is_finite() && a.length > 0.0) {
        return param(format!("step length must be positive, got {}", a.length));
    }
    if !(a.turn.abs() <= max_turn + 1e-12) {
        return param(format!("turn {} exceeds the limit {max_turn}", a.turn));
    }
    let mut next = *s;
    let foot = next.foot_mut(s.swing);
    let heading = foot.theta + a.turn;
    foot.x += a.length * heading.cos();
    foot.y += a.length * heading.sin();
    foot.theta = heading;
    next.swing = s.swing.opposite();
    Ok(next)
}

/// Ordered footprints starting from a known pair of feet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootstepPlan {
    pub initial: FeetState,
    pub steps: Vec<Footprint>,
}

impl FootstepPlan {
    /// Keeps only the first `n` steps.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            initial: self.initial,
            steps: self.steps.iter().take(n).copied().collect(),
        }
    }

    /// Distance each foot moved in each step.
    pub fn step_distances(&self) -> Vec<f64> {
        let mut feet = self.initial;
        self.steps
            .iter()
            .map(|f| {
                let prev = feet.foot(f.side).position();
                *feet.foot_mut(f.side) = *f;
                (f.position() - prev).norm()
            })
            .collect()
    }

    pub fn final_feet(&self) -> FeetState {
        let mut feet = self.initial;
        for f in &self.steps {
            *feet.foot_mut(f.side) = *f;
            feet.swing = f.side.opposite();
        }
        feet
    }

    pub fn validate(&self) -> Result<()> {
        let mut expected = self.initial.swing;
        for (i, f) in self.steps.iter().enumerate() {
            if f.side != expected {
                return Err(Error::Structural(format!(
                    "step {i} does not alternate sides"
                )));
            }
            if !(f.x.is_finite() && f.y.is_finite() && f.theta.is_finite()) {
                return Err(Error::Structural(format!("step {i} is not finite")));
            }
            expected = expected.opposite();
        }
        Ok(())
    }
}

/// Piecewise-linear path parameterized by arclength.
#[derive(Debug, Clone)]
pub(crate) struct Polyline {
    points: Vec<Vec2>,
    arclength: Vec<f64>,
}

impl Polyline {
    pub(crate) fn new(points: Vec<Vec2>) -> Self {
        let mut arclength = vec![0.0; points.len()];
        for i in 1..points.len() {
            arclength[i] = arclength[i - 1] + (points[i] - points[i - 1]).norm();
        }
        Self { points, arclength }
    }

    pub(crate) fn length(&self) -> f64 {
        *self.arclength.last().unwrap_or(&0.0)
    }

    pub(crate) fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let k = self
            .arclength
            .partition_point(|&a| a <= s)
            .clamp(1, self.points.len().max(1));
        if self.points.len() < 2 {
            return self.points[0];
        }
        let k = k.min(self.points.len() - 1);
        let (a, b) = (self.arclength[k - 1], self.arclength[k]);
        let t = if b > a { (s - a) / (b - a) } else { 0.0 };
        self.points[k - 1] + (self.points[k] - self.points[k - 1]) * t
    }

    /// Unit direction from `s` toward `s + lookahead`, falling back to the
    /// direction arriving at `s` near the end of the path.
    pub(crate) fn direction_at(&self, s: f64, lookahead: f64) -> Option<Vec2> {
        let ahead = self.point_at(s + lookahead) - self.point_at(s);
        if ahead.norm() > 1e-12 {
            return Some(ahead.normalize());
        }
        let behind = self.point_at(s) - self.point_at(s - lookahead);
        (behind.norm() > 1e-12).then(|| behind.normalize())
    }

    /// Arclength of the point nearest to `p`, searching segments that end at
    /// or after `from`.
    pub(crate) fn project(&self, p: Vec2, from: f64) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let mut best = (f64::INFINITY, from);
        for k in 1..self.points.len() {
            if self.arclength[k] < from {
                continue;
            }
            let a = self.points[k - 1];
            let d = self.points[k] - a;
            let len2 = d.norm_squared();
            let t = if len2 > 0.0 {
                ((p - a).dot(&d) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let dist = (a + d * t - p).norm();
            let s = self.arclength[k - 1] + t * len2.sqrt();
            if dist < best.0 - 1e-12 {
                best = (dist, s.max(from));
            }
        }
        best.1
    }
}

/// Footsteps that follow a cell path.
///
/// The body advances half a step length per step. Each step aims the swing
/// foot at its own lane (half the step width beside the path) half a step
/// ahead of the support foot, turns toward that point by at most the turn
/// limit, and then moves exactly one step length (half a step length for the
/// first step out of the side-by-side stance). Stepping stops when the next
/// aim point would pass the goal; a closing step then places the swing foot
/// beside the support foot.
pub fn footsteps_from_path(
    map: &GridMap,
    path: &[Cell],
    initial: &FeetState,
    config: &PlannerConfig,
) -> Result<FootstepPlan> {
    config.validate()?;
    if path.is_empty() {
        return param("path must not be empty");
    }
    for foot in [&initial.left, &initial.right] {
        if !map.point_is_free(foot.position()) {
            return Err(Error::Planning(format!(
                "initial {:?} foot at ({:.3}, {:.3}) is in collision",
                foot.side, foot.x, foot.y
            )));
        }
    }
    let line = Polyline::new(path.iter().map(|&c| map.cell_center(c)).collect());
    let lookahead = config.lookahead_cells as f64 * map.cell_size;
    let r = config.step_length;
    let total = line.length();
    let mut state = *initial;
    let mut steps = Vec::new();
    let mut s_support = 0.0;
    let max_steps = (4.0 * total / r).ceil() as usize + 8;

    while steps.len() < max_steps {
        let support = *state.support_foot();
        let swing = *state.swing_foot();
        s_support = line.project(support.position(), s_support);
        let s_aim = s_support + 0.5 * r;
        if s_aim > total + 1e-9 {
            break;
        }
        let dir = line
            .direction_at(s_aim, lookahead)
            .unwrap_or_else(|| Vec2::new(support.theta.cos(), support.theta.sin()));
        let normal = Vec2::new(-dir.y, dir.x);
        let aim = line.point_at(s_aim) + normal * (swing.side.sign() * 0.5 * config.step_width);
        let to_aim = aim - swing.position();
        let desired = to_aim.y.atan2(to_aim.x);
        let turn = wrap_angle(desired - swing.theta).clamp(-config.max_turn, config.max_turn);
        let length = if steps.is_empty() { 0.5 * r } else { r };
        state = transition(&state, &StepAction { length, turn }, config.max_turn)?;
        steps.push(*state.foot(swing.side));
    }

    // Closing step: swing foot beside the support foot.
    let support = *state.support_foot();
    let swing = *state.swing_foot();
    let normal = Vec2::new(-support.theta.sin(), support.theta.cos());
    let beside = support.position() + normal * (swing.side.sign() * config.step_width);
    if (beside - swing.position()).norm() > 1e-9
        || wrap_angle(swing.theta - support.theta).abs() > 1e-9
    {
        steps.push(Footprint::new(
            beside.x,
            beside.y,
            support.theta,
            swing.side,
        ));
    }

    for (i, f) in steps.iter().enumerate() {
        if !map.point_is_free(f.position()) {
            return Err(Error::Planning(format!(
                "footstep {i} at ({:.3}, {:.3}) lands in an occupied cell",
                f.x, f.y
            )));
        }
    }
    let plan = FootstepPlan {
        initial: *initial,
        steps,
    };
    plan.validate()?;
    Ok(plan)
}

/// Initial stance at the start of a path: feet side by side at the first
/// cell, facing along the path.
pub fn initial_stance(map: &GridMap, path: &[Cell], config: &PlannerConfig) -> Result<FeetState> {
    let first = *path
        .first()
        .ok_or_else(|| Error::Planning("empty path".into()))?;
    let line = Polyline::new(path.iter().map(|&c| map.cell_center(c)).collect());
    let lookahead = config.lookahead_cells as f64 * map.cell_size;
    let heading = line
        .direction_at(0.0, lookahead)
        .map_or(config.initial_heading, |d| d.y.atan2(d.x));
    Ok(FeetState::side_by_side(
        map.cell_center(first),
        heading,
        config.step_width,
        config.first_swing,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn straight_state() -> FeetState {
        FeetState::side_by_side(Vec2::zeros(), 0.0, 0.2, Side::Left)
    }

    #[test]
    fn straight_transition() {
        let s = straight_state();
        let n = transition(
            &s,
            &StepAction {
                length: 0.1,
                turn: 0.0,
            },
            0.35,
        )
        .unwrap();
        assert!((n.left.x - 0.1).abs() < 1e-15 && (n.left.y - 0.1).abs() < 1e-15);
        assert_eq!(n.flags(), (-1, 1));
        assert_eq!(n.right, s.right);
    }

    #[test]
    fn quarter_turn_transition() {
        let s = straight_state();
        let n = transition(
            &s,
            &StepAction {
                length: 0.1,
                turn: FRAC_PI_2,
            },
            std::f64::consts::PI,
        )
        .unwrap();
        let d = n.left.position() - s.left.position();
        assert!(d.x.abs() < 1e-15 && (d.y - 0.1).abs() < 1e-15);
    }

    #[test]
    fn turn_limit_is_enforced() {
        let a = StepAction {
            length: 0.1,
            turn: 0.5,
        };
        assert!(matches!(
            transition(&straight_state(), &a, 0.35),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn straight_steps_alternate_and_advance() {
        let mut s = straight_state();
        let a = StepAction {
            length: 0.1,
            turn: 0.0,
        };
        for _ in 0..6 {
            s = transition(&s, &a, 0.35).unwrap();
        }
        // Each foot stepped three times.
        assert!((s.left.x - 0.3).abs() < 1e-12 && (s.right.x - 0.3).abs() < 1e-12);
        assert_eq!(s.swing, Side::Left);
    }

    #[test]
    fn polyline_queries() {
        let l = Polyline::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
        ]);
        assert!((l.length() - 2.0).abs() < 1e-15);
        assert!((l.point_at(1.5) - Vec2::new(1.0, 0.5)).norm() < 1e-15);
        assert!((l.project(Vec2::new(1.2, 0.4), 0.0) - 1.4).abs() < 1e-12);
        let d = l.direction_at(2.0, 0.3).unwrap();
        assert!((d - Vec2::new(0.0, 1.0)).norm() < 1e-12);
    }
}
