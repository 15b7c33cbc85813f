use serde::{Deserialize, Serialize};

use super::curves::{
    hip_unchecked, horizontal_bezier, mass_references, smoothstep, vertical_bezier, Vec3,
};
use super::GaitTiming;
use crate::dynamics::ThreeMassParams;
use crate::error::{Error, Result};
use crate::footstep::FootstepPlan;
use crate::geometry::{midpoint, Footprint, Vec2};
use crate::mpc::SupportPhase;

/// Phases of the walking state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkPhase {
    Idle,
    Initialize,
    SingleSupport,
    DoubleSupport,
}

impl WalkPhase {
    pub fn label(self) -> &'static str {
        match self {
            WalkPhase::Idle => "idle",
            WalkPhase::Initialize => "initialize",
            WalkPhase::SingleSupport => "single_support",
            WalkPhase::DoubleSupport => "double_support",
        }
    }
}

/// Phase active at one instant, with the feet that bound the ZMP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseInfo {
    pub phase: WalkPhase,
    /// Step index during single/double support of a planned step.
    pub step: Option<usize>,
    /// Start time of this phase (s).
    pub start: f64,
    /// Time since the phase started (s).
    pub local: f64,
    /// Support model for the constraints.
    pub support: SupportPhase,
    /// Stance foot (single support), trailing foot (double support) or one
    /// of the standing feet.
    pub primary: Footprint,
    /// Swing target, landed foot, or the other standing foot.
    pub secondary: Footprint,
}

impl PhaseInfo {
    pub fn feet(&self) -> [Footprint; 2] {
        [self.primary, self.secondary]
    }
}

/// All reference signals at one instant, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub zmp: Vec2,
    pub hip: Vec2,
    /// Swing foot point (horizontal) and height.
    pub swing_foot: Vec3,
    pub stance_mass: Vec2,
    pub swing_mass: Vec2,
}

/// Timed walking references for a footstep plan.
///
/// Idle until `begin`, then an initialization phase that moves the ZMP from
/// between the feet onto the first support foot, then one step per period:
/// single support with the ZMP held on the support foot while the swing foot
/// travels, and double support with the ZMP moving to the next support foot.
/// After the last step the robot stands with the ZMP between its feet.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitSchedule {
    timing: GaitTiming,
    omega: f64,
    begin: f64,
    initial_mid: Vec2,
    first_swing_from: Footprint,
    initial_support: Footprint,
    supports: Vec<Footprint>,
    swing_from: Vec<Footprint>,
    targets: Vec<Footprint>,
}

/// Tolerance used to snap query times onto phase boundaries.
const SNAP: f64 = 1e-9;

impl GaitSchedule {
    pub fn new(
        plan: &FootstepPlan,
        timing: &GaitTiming,
        params: &ThreeMassParams,
        begin: f64,
    ) -> Result<Self> {
        timing.validate()?;
        params.validate()?;
        plan.validate()?;
        let init = plan.initial;
        let mut schedule = Self {
            timing: timing.clone(),
            omega: params.omega(),
            begin,
            initial_mid: init.midpoint(),
            first_swing_from: *init.foot(init.swing),
            initial_support: *init.foot(init.swing.opposite()),
            supports: Vec::new(),
            swing_from: Vec::new(),
            targets: Vec::new(),
        };
        schedule.set_steps(plan.steps.clone());
        Ok(schedule)
    }

    fn set_steps(&mut self, steps: Vec<Footprint>) {
        let n = steps.len();
        self.supports.clear();
        self.swing_from.clear();
        for i in 0..n {
            if i == 0 {
                self.supports.push(self.initial_support);
                self.swing_from.push(self.first_swing_from);
            } else {
                self.supports.push(steps[i - 1]);
                self.swing_from.push(self.supports[i - 1]);
            }
        }
        self.targets = steps;
    }

    /// Replaces every step from index `from` on. Steps before `from` are kept.
    pub fn replace_steps_from(&mut self, from: usize, new_steps: &[Footprint]) -> Result<()> {
        let mut steps: Vec<Footprint> = self.targets.iter().take(from).copied().collect();
        steps.extend_from_slice(new_steps);
        let mut expected = self.first_swing_from.side;
        for (i, f) in steps.iter().enumerate() {
            if f.side != expected {
                return Err(Error::Structural(format!(
                    "step {i} does not alternate sides"
                )));
            }
            expected = expected.opposite();
        }
        self.set_steps(steps);
        Ok(())
    }

    pub fn timing(&self) -> &GaitTiming {
        &self.timing
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn steps(&self) -> &[Footprint] {
        &self.targets
    }

    pub fn num_steps(&self) -> usize {
        self.targets.len()
    }

    pub fn begin(&self) -> f64 {
        self.begin
    }

    /// Sets the start of initialization; `f64::INFINITY` keeps the robot idle.
    pub fn set_begin(&mut self, begin: f64) {
        self.begin = begin;
    }

    /// Start of the first step (end of initialization).
    pub fn walk_start(&self) -> f64 {
        self.begin + self.timing.initialize
    }

    pub fn step_start(&self, i: usize) -> f64 {
        self.walk_start() + i as f64 * self.timing.step_period()
    }

    /// End of the last step; standing afterwards.
    pub fn end(&self) -> f64 {
        self.step_start(self.num_steps())
    }

    pub fn support_of(&self, i: usize) -> Footprint {
        self.supports[i]
    }

    pub fn swing_from_of(&self, i: usize) -> Footprint {
        self.swing_from[i]
    }

    /// Support foot and first swing foot before walking.
    pub fn initial_feet(&self) -> [Footprint; 2] {
        [self.initial_support, self.first_swing_from]
    }

    /// Feet on the ground after the last step.
    pub fn final_feet(&self) -> [Footprint; 2] {
        match self.targets.last() {
            Some(last) => [self.supports[self.num_steps() - 1], *last],
            None => [self.initial_support, self.first_swing_from],
        }
    }

    fn final_mid(&self) -> Vec2 {
        let [a, b] = self.final_feet();
        midpoint(a.position(), b.position())
    }

    /// Where the ZMP ends up after step `i`.
    fn next_zmp_anchor(&self, i: usize) -> Vec2 {
        if i + 1 < self.num_steps() {
            self.supports[i + 1].position()
        } else {
            self.final_mid()
        }
    }

    pub fn phase_at(&self, t: f64) -> PhaseInfo {
        let n = self.num_steps();
        let initial = [self.initial_support, self.first_swing_from];
        if t < self.begin - SNAP {
            return PhaseInfo {
                phase: WalkPhase::Idle,
                step: None,
                start: f64::NEG_INFINITY,
                local: f64::INFINITY,
                support: SupportPhase::Stand,
                primary: initial[0],
                secondary: initial[1],
            };
        }
        if t < self.walk_start() - SNAP {
            return PhaseInfo {
                phase: WalkPhase::Initialize,
                step: None,
                start: self.begin,
                local: (t - self.begin).max(0.0),
                support: SupportPhase::Stand,
                primary: initial[0],
                secondary: initial[1],
            };
        }
        if t >= self.end() - SNAP {
            let [a, b] = self.final_feet();
            let start = if n == 0 {
                self.walk_start()
            } else {
                self.step_start(n - 1) + self.timing.single_support
            };
            return PhaseInfo {
                phase: WalkPhase::DoubleSupport,
                step: n.checked_sub(1),
                start,
                local: (t - start).max(0.0),
                support: SupportPhase::Stand,
                primary: a,
                secondary: b,
            };
        }
        let period = self.timing.step_period();
        let rel = t - self.walk_start();
        let i = (((rel + SNAP) / period).floor() as usize).min(n - 1);
        let local = (rel - i as f64 * period).max(0.0);
        if local < self.timing.single_support - SNAP {
            PhaseInfo {
                phase: WalkPhase::SingleSupport,
                step: Some(i),
                start: self.step_start(i),
                local,
                support: SupportPhase::Single,
                primary: self.supports[i],
                secondary: self.targets[i],
            }
        } else {
            PhaseInfo {
                phase: WalkPhase::DoubleSupport,
                step: Some(i),
                start: self.step_start(i) + self.timing.single_support,
                local: (local - self.timing.single_support).max(0.0),
                support: SupportPhase::Double,
                primary: self.supports[i],
                secondary: self.targets[i],
            }
        }
    }

    pub fn zmp(&self, t: f64) -> Vec2 {
        let info = self.phase_at(t);
        match (info.phase, info.step) {
            (WalkPhase::Idle, _) => self.initial_mid,
            (WalkPhase::Initialize, _) => {
                let to = self
                    .supports
                    .first()
                    .map_or(self.initial_mid, |f| f.position());
                let s = if self.timing.initialize > 0.0 {
                    info.local / self.timing.initialize
                } else {
                    1.0
                };
                self.initial_mid + (to - self.initial_mid) * s.min(1.0)
            }
            (_, Some(i)) if t < self.end() - SNAP => {
                let from = self.supports[i].position();
                if info.phase == WalkPhase::SingleSupport || self.timing.double_support == 0.0 {
                    from
                } else {
                    let s = (info.local / self.timing.double_support).min(1.0);
                    from + (self.next_zmp_anchor(i) - from) * s
                }
            }
            _ => self.final_mid(),
        }
    }

    pub fn hip(&self, t: f64) -> Vec2 {
        let info = self.phase_at(t);
        if t >= self.end() - SNAP
            || info.phase == WalkPhase::Idle
            || info.phase == WalkPhase::Initialize
        {
            return if t >= self.end() - SNAP && self.num_steps() > 0 {
                self.final_mid()
            } else {
                self.initial_mid
            };
        }
        let i = info.step.expect("stepping phase has a step");
        let p_st = self.supports[i].position();
        let p_h0 = midpoint(self.swing_from[i].position(), p_st);
        let p_hf = midpoint(p_st, self.targets[i].position());
        let t0 = self.step_start(i);
        let tf = t0 + self.timing.step_period();
        hip_unchecked(p_st, p_h0, p_hf, t0, tf, t.clamp(t0, tf), self.omega)
    }

    /// Swing-foot point. During double support it blends from the landed
    /// foot to the foot that lifts next, so the swing-mass reference stays
    /// continuous across the change of swing leg.
    pub fn swing_foot(&self, t: f64) -> Vec3 {
        let info = self.phase_at(t);
        let flat = |p: Vec2| Vec3::new(p.x, p.y, 0.0);
        if t >= self.end() - SNAP {
            return flat(
                self.targets
                    .last()
                    .map_or(self.first_swing_from.position(), |f| f.position()),
            );
        }
        match (info.phase, info.step) {
            (WalkPhase::SingleSupport, Some(i)) => {
                let s = info.local / self.timing.single_support;
                let p =
                    horizontal_bezier(self.swing_from[i].position(), self.targets[i].position(), s);
                Vec3::new(p.x, p.y, vertical_bezier(self.timing.swing_height, s))
            }
            (WalkPhase::DoubleSupport, Some(i)) => {
                let landed = self.targets[i].position();
                if i + 1 < self.num_steps() && self.timing.double_support > 0.0 {
                    let next = self.swing_from[i + 1].position();
                    let s = smoothstep(info.local / self.timing.double_support);
                    flat(landed + (next - landed) * s)
                } else {
                    flat(landed)
                }
            }
            _ => flat(self.first_swing_from.position()),
        }
    }

    pub fn sample(&self, t: f64) -> ReferenceSample {
        let zmp = self.zmp(t);
        let hip = self.hip(t);
        let swing_foot = self.swing_foot(t);
        let m = mass_references(zmp, hip, swing_foot.xy());
        ReferenceSample {
            zmp,
            hip,
            swing_foot,
            stance_mass: m.stance,
            swing_mass: m.swing,
        }
    }
}
