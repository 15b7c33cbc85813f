use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, SetpointValues};
use crate::error::{param, Result};
use crate::footstep::{
    obstacle_course, plan_route, FeetState, FootstepPlan, MapFile, PlannerConfig,
};
use crate::geometry::{Axis, Side, Vec2};

/// Where the footsteps of a scenario come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScenarioMode {
    /// Plan a route on a map (the built-in obstacle course when `map` is
    /// absent) and walk its first `max_steps` steps.
    Path {
        #[serde(default)]
        map: Option<PathBuf>,
        #[serde(default)]
        planner: PlannerConfig,
        #[serde(default)]
        max_steps: Option<usize>,
    },
    /// Walk a given footstep plan.
    Footsteps { plan: FootstepPlan },
    /// Omnidirectional walking from timed setpoint commands.
    Setpoints {
        #[serde(default = "default_feet")]
        initial: FeetState,
        #[serde(default)]
        schedule: Vec<SetpointChange>,
    },
}

fn default_feet() -> FeetState {
    FeetState::side_by_side(Vec2::zeros(), 0.0, 0.2, Side::Left)
}

/// New setpoint command issued at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetpointChange {
    pub t: f64,
    pub command: SetpointValues,
}

/// Measurement noise added to every output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Noise never exceeds this magnitude (m).
    pub bound: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            bound: 0.05,
            seed: 0,
        }
    }
}

/// External force on one mass along one world axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub t_start: f64,
    pub duration: f64,
    /// Force (N); the sign gives the direction along `axis`.
    pub force: f64,
    /// Mass index: 0 stance leg, 1 torso, 2 swing leg.
    #[serde(default = "default_target")]
    pub mass: usize,
    #[serde(default = "default_axis")]
    pub axis: Axis,
}

fn default_target() -> usize {
    1
}

fn default_axis() -> Axis {
    Axis::Sagittal
}

impl Disturbance {
    /// Push on the torso along the sagittal axis.
    pub fn impulse(t_start: f64, duration: f64, force: f64) -> Self {
        Self {
            t_start,
            duration,
            force,
            mass: 1,
            axis: Axis::Sagittal,
        }
    }
}

/// A closed-loop simulation to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub mode: ScenarioMode,
    #[serde(default, flatten)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    /// Simulated time (s).
    pub duration: f64,
    /// Time of the walk command (s).
    #[serde(default)]
    pub walk_start: f64,
    /// Consecutive cycles with the ZMP outside the feet that count as a fall.
    #[serde(default = "default_fall_cycles")]
    pub fall_cycles: usize,
}

fn default_fall_cycles() -> usize {
    25
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut scenario: Scenario = serde_json::from_str(&text)?;
        if let ScenarioMode::Path { map: Some(map), .. } = &mut scenario.mode {
            if map.is_relative() {
                if let Some(dir) = path.parent() {
                    *map = dir.join(&*map);
                }
            }
        }
        Ok(scenario)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return param(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.walk_start >= 0.0 && self.walk_start.is_finite()) {
            return param("walk start must be non-negative");
        }
        if self.noise.enabled && !(self.noise.bound > 0.0 && self.noise.bound.is_finite()) {
            return param("noise bound must be positive");
        }
        if self.fall_cycles == 0 {
            return param("fall detection needs at least one cycle");
        }
        for d in &self.disturbances {
            if !(d.duration > 0.0 && d.t_start >= 0.0 && d.force.is_finite()) {
                return param(format!("invalid disturbance {d:?}"));
            }
            if d.t_start + d.duration > self.duration + 1e-9 {
                return param(format!("disturbance at {} s ends after the run", d.t_start));
            }
            if d.mass > 2 {
                return param(format!("disturbance mass index {} out of range", d.mass));
            }
        }
        if let ScenarioMode::Setpoints { schedule, .. } = &self.mode {
            if schedule.windows(2).any(|w| w[1].t < w[0].t) {
                return param("setpoint changes must be in time order");
            }
        }
        Ok(())
    }

    /// Number of control cycles simulated.
    pub fn cycles(&self) -> usize {
        (self.duration / self.engine.mpc.ts - 1e-9).ceil() as usize
    }

    /// Footstep plan for path and footstep modes.
    pub fn plan(&self) -> Result<Option<FootstepPlan>> {
        match &self.mode {
            ScenarioMode::Path {
                map,
                planner,
                max_steps,
            } => {
                let file = match map {
                    Some(path) => MapFile::load(path)?,
                    None => obstacle_course(),
                };
                let route = plan_route(&file, planner)?;
                Ok(Some(match max_steps {
                    Some(n) => route.plan.truncated(*n),
                    None => route.plan,
                }))
            }
            ScenarioMode::Footsteps { plan } => Ok(Some(plan.clone())),
            ScenarioMode::Setpoints { .. } => Ok(None),
        }
    }

    /// Five steps along the route of the built-in obstacle course.
    pub fn tracking() -> Self {
        Self {
            name: "tracking".into(),
            mode: ScenarioMode::Path {
                map: None,
                planner: PlannerConfig::default(),
                max_steps: Some(5),
            },
            engine: EngineConfig::default(),
            noise: NoiseConfig::default(),
            disturbances: Vec::new(),
            duration: 6.0,
            walk_start: 0.0,
            fall_cycles: default_fall_cycles(),
        }
    }

    /// The tracking scenario with bounded measurement noise.
    pub fn noisy(seed: u64) -> Self {
        Self {
            name: format!("noise-{seed}"),
            noise: NoiseConfig {
                enabled: true,
                bound: 0.05,
                seed,
            },
            ..Self::tracking()
        }
    }

    /// The noisy tracking scenario with a 10 ms torso push at 1.6 s.
    pub fn pushed(force: f64, seed: u64) -> Self {
        Self {
            name: format!("push-{force}"),
            disturbances: vec![Disturbance::impulse(1.6, 0.01, force)],
            ..Self::noisy(seed)
        }
    }

    /// Walking in place, forward, diagonal, then diagonal while turning.
    pub fn omnidirectional() -> Self {
        let change = |t, x, y, a| SetpointChange {
            t,
            command: SetpointValues::new(x, y, a),
        };
        Self {
            name: "omnidirectional".into(),
            mode: ScenarioMode::Setpoints {
                initial: default_feet(),
                schedule: vec![
                    change(8.0, 0.1, 0.0, 0.0),
                    change(24.0, 0.1, 0.025, 0.0),
                    change(42.0, 0.1, 0.025, 10.0),
                ],
            },
            engine: EngineConfig::default(),
            noise: NoiseConfig::default(),
            disturbances: Vec::new(),
            duration: 60.0,
            walk_start: 0.0,
            fall_cycles: default_fall_cycles(),
        }
    }
}
