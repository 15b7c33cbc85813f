//! Walking state machine: phase bookkeeping, reference windows,
//! time-varying constraints and the two axis controllers.

mod setpoints;

use serde::{Deserialize, Serialize};

pub use setpoints::{filter_setpoints, plan_next_step, SetpointValues, Setpoints, StepGeometry};

use crate::dynamics::{
    build_continuous, discretize, standing_state, AxisInput, AxisState, StateSpace,
    ThreeMassParams, OUTPUT_DIM, OUT_ZMP,
};
use crate::error::{param, Error, Result};
use crate::footstep::{FeetState, FootstepPlan};
use crate::geometry::{mean_heading, rotate, Axis, Footprint, Vec2};
use crate::mpc::{
    build_constraints, AxisController, HorizonConstraints, MpcConfig, Observer, ObserverConfig,
    SupportPhase,
};
use crate::qp::QpStatus;
use crate::refgen::{assemble_bundle, GaitSchedule, GaitTiming, PhaseInfo, ReferenceSample};

pub use crate::refgen::WalkPhase;

/// Everything the engine needs besides the step source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub params: ThreeMassParams,
    pub mpc: MpcConfig,
    pub timing: GaitTiming,
    pub observer: ObserverConfig,
    /// Time constant of the setpoint filter (s).
    pub lag_tau: f64,
    /// Steps planned ahead in setpoint mode.
    pub lookahead_steps: usize,
    /// Lateral distance between the feet when standing (m).
    pub foot_spacing: f64,
    /// Constrain every horizon sample by the support of its planned phase
    /// instead of holding the current phase over the whole horizon.
    pub constraint_preview: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            params: ThreeMassParams::default(),
            mpc: MpcConfig::default(),
            timing: GaitTiming::default(),
            observer: ObserverConfig::default(),
            lag_tau: 0.5,
            lookahead_steps: 4,
            foot_spacing: 0.2,
            constraint_preview: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.mpc.validate()?;
        self.timing.validate_for(self.mpc.ts)?;
        self.observer.validate()?;
        if !(self.lag_tau > 0.0 && self.lag_tau.is_finite()) {
            return param("lag time constant must be positive");
        }
        if self.lookahead_steps < 2 {
            return param("at least two steps must be planned ahead");
        }
        if !(self.foot_spacing > 0.0 && self.foot_spacing.is_finite()) {
            return param("foot spacing must be positive");
        }
        Ok(())
    }
}

/// Where the footsteps come from.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSource {
    Plan(FootstepPlan),
    Setpoints {
        initial: FeetState,
        command: SetpointValues,
    },
}

/// Per-cycle record of what the engine did.
#[derive(Debug, Clone, PartialEq)]
pub struct TickDiagnostics {
    pub cycle: usize,
    pub t: f64,
    pub phase: WalkPhase,
    pub step: Option<usize>,
    /// QP status per axis; `None` while idle.
    pub status: [Option<QpStatus>; 2],
    pub softened: [bool; 2],
    pub iterations: [usize; 2],
    /// Commands in world coordinates, per axis.
    pub input: [AxisInput; 2],
    pub zmp_measured: Vec2,
    /// ZMP predicted for the next cycle by the model.
    pub zmp_predicted: Vec2,
    pub reference: ReferenceSample,
    pub frame_angle: f64,
    pub setpoints: Option<SetpointValues>,
    /// A setpoint step was clamped to the reachable rectangle.
    pub clamped: bool,
}

/// Commands and diagnostics of one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub input: [AxisInput; 2],
    pub diagnostics: TickDiagnostics,
}

type SegmentKey = (WalkPhase, Option<usize>, SupportPhase);

/// Closed-loop walking controller advanced once per sample time.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    model: StateSpace,
    observer: Observer,
    controllers: [AxisController; 2],
    estimate: [AxisState; 2],
    frame: f64,
    schedule: GaitSchedule,
    setpoints: Option<Setpoints>,
    segment: Option<SegmentKey>,
    constraints: [HorizonConstraints; 2],
    replanned_from: usize,
    clamped: bool,
    cycle: usize,
    pinned: bool,
}

impl Engine {
    pub fn new(config: EngineConfig, source: StepSource) -> Result<Self> {
        config.validate()?;
        let model = discretize(&build_continuous(&config.params)?, config.mpc.ts)?;
        let observer = Observer::new(&model, &config.observer)?;
        let controllers = [
            AxisController::new(&model, config.mpc.clone())?,
            AxisController::new(&model, config.mpc.clone())?,
        ];
        let (plan, setpoints) = match source {
            StepSource::Plan(plan) => (plan, None),
            StepSource::Setpoints { initial, command } => (
                FootstepPlan {
                    initial,
                    steps: Vec::new(),
                },
                Some(Setpoints::new(command)),
            ),
        };
        let schedule = GaitSchedule::new(&plan, &config.timing, &config.params, f64::INFINITY)?;
        let [a, b] = schedule.initial_feet();
        let frame = mean_heading(a.theta, b.theta);
        let mut engine = Self {
            config,
            model,
            observer,
            controllers,
            estimate: [AxisState::zeros(); 2],
            frame,
            schedule,
            setpoints,
            segment: None,
            constraints: Default::default(),
            replanned_from: 0,
            clamped: false,
            cycle: 0,
            pinned: false,
        };
        if engine.setpoints.is_some() {
            engine.replan_from(0)?;
        }
        let world = engine.initial_state();
        engine.estimate = to_frame(&world, -engine.frame);
        Ok(engine)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn model(&self) -> &StateSpace {
        &self.model
    }

    pub fn schedule(&self) -> &GaitSchedule {
        &self.schedule
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn time(&self) -> f64 {
        self.cycle as f64 * self.config.mpc.ts
    }

    pub fn frame_angle(&self) -> f64 {
        self.frame
    }

    pub fn setpoints(&self) -> Option<&Setpoints> {
        self.setpoints.as_ref()
    }

    /// Estimated state per axis in world coordinates.
    pub fn estimate(&self) -> [AxisState; 2] {
        to_frame(&self.estimate, self.frame)
    }

    /// Full-state feedback: the next tick uses `world` as its estimate and
    /// skips the observer update.
    pub fn set_estimate(&mut self, world: [AxisState; 2]) {
        self.estimate = to_frame(&world, -self.frame);
        self.pinned = true;
    }

    /// Standing state matching the idle references, per world axis.
    pub fn initial_state(&self) -> [AxisState; 2] {
        let s = self.schedule.sample(0.0);
        Axis::BOTH.map(|axis| {
            standing_state(
                &self.config.params,
                axis.of(s.stance_mass),
                axis.of(s.swing_mass),
                axis.of(s.zmp),
            )
        })
    }

    /// Starts initialization at the first cycle at or after `t`.
    pub fn start_walking(&mut self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return param(format!("walk start must be finite, got {t}"));
        }
        if self.schedule.begin().is_finite() {
            return Err(Error::Structural(
                "walking has already been commanded".into(),
            ));
        }
        let ts = self.config.mpc.ts;
        let k = ((t / ts) - 1e-9).ceil().max(self.cycle as f64);
        self.schedule.set_begin(k * ts);
        if self.setpoints.is_some() {
            self.replan_from(0)?;
        }
        Ok(())
    }

    /// New omnidirectional command; only valid in setpoint mode.
    pub fn set_command(&mut self, command: SetpointValues) -> Result<()> {
        match self.setpoints.as_mut() {
            Some(sp) => {
                sp.command = command;
                Ok(())
            }
            None => Err(Error::Structural("engine follows a footstep plan".into())),
        }
    }

    /// Regenerates the steps from index `from` with the filtered setpoints.
    fn replan_from(&mut self, from: usize) -> Result<()> {
        let cmd = match self.setpoints {
            Some(sp) => sp.filtered,
            None => return Ok(()),
        };
        let mut feet = if from == 0 {
            let [support, swing] = self.schedule.initial_feet();
            feet_of(support, swing)
        } else {
            feet_of(
                self.schedule.steps()[from - 1],
                self.schedule.support_of(from - 1),
            )
        };
        let period = self.config.timing.step_period();
        let mut steps = Vec::with_capacity(self.config.lookahead_steps);
        for _ in 0..self.config.lookahead_steps {
            let g = plan_next_step(
                &cmd,
                &feet,
                period,
                self.config.foot_spacing,
                &self.config.mpc,
            );
            self.clamped |= g.clamped;
            feet = setpoints::land(&feet, g.footprint);
            steps.push(g.footprint);
        }
        self.schedule.replace_steps_from(from, &steps)?;
        self.replanned_from = from;
        Ok(())
    }

    fn set_frame(&mut self, angle: f64) {
        let delta = angle - self.frame;
        if delta == 0.0 {
            return;
        }
        self.estimate = to_frame(&self.estimate, -delta);
        let u = [
            self.controllers[0].previous_input(),
            self.controllers[1].previous_input(),
        ];
        let u = rotate_inputs(&u, -delta);
        for (c, ui) in self.controllers.iter_mut().zip(u) {
            c.set_previous_input(ui);
            c.reset_warm_start();
        }
        self.frame = angle;
    }

    fn footprint_in_frame(&self, f: &Footprint) -> Footprint {
        let p = rotate(f.position(), -self.frame);
        Footprint::new(p.x, p.y, f.theta - self.frame, f.side)
    }

    /// Constraints of the current phase, held over the whole horizon.
    fn build_horizon(&self, info: &PhaseInfo) -> Result<[HorizonConstraints; 2]> {
        let primary = self.footprint_in_frame(&info.primary);
        let secondary = self.footprint_in_frame(&info.secondary);
        let np = self.config.mpc.np;
        let set = |axis| -> Result<HorizonConstraints> {
            let rows = build_constraints(
                axis,
                info.support,
                &primary,
                Some(&secondary),
                &self.config.params,
                &self.config.mpc,
            )?;
            Ok(HorizonConstraints::uniform(rows, np))
        };
        Ok([set(Axis::Sagittal)?, set(Axis::Lateral)?])
    }

    /// Constraints of the phases planned for every sample of the horizon.
    fn build_preview(&self) -> Result<[HorizonConstraints; 2]> {
        let np = self.config.mpc.np;
        let ts = self.config.mpc.ts;
        let mut out: [HorizonConstraints; 2] = Default::default();
        let mut keys: Vec<SegmentKey> = Vec::new();
        for j in 0..=np {
            let info = self.schedule.phase_at((self.cycle + j) as f64 * ts);
            let key = (info.phase, info.step, info.support);
            let idx = match keys.iter().position(|k| *k == key) {
                Some(i) => i,
                None => {
                    let sets = self.build_horizon(&info)?;
                    for (o, s) in out.iter_mut().zip(sets) {
                        o.sets.push(s.sets.into_iter().next().expect("one set"));
                    }
                    keys.push(key);
                    keys.len() - 1
                }
            };
            for o in out.iter_mut() {
                o.sample_set.push(idx);
            }
        }
        Ok(out)
    }

    fn fault(&self, reason: impl Into<String>) -> Error {
        Error::ControllerFault {
            cycle: self.cycle,
            time: self.time(),
            reason: reason.into(),
        }
    }

    /// One control cycle. `measurements[axis]` holds the measured
    /// `[stance, swing, zmp]` outputs along that world axis.
    pub fn tick(&mut self, measurements: &[[f64; OUTPUT_DIM]; 2]) -> Result<TickOutput> {
        if measurements.iter().flatten().any(|v| !v.is_finite()) {
            return Err(self.fault("measurement is not finite"));
        }
        let ts = self.config.mpc.ts;
        let t = self.time();
        if let Some(sp) = self.setpoints {
            self.setpoints = Some(filter_setpoints(&sp, ts, self.config.lag_tau)?);
        }
        let info = self.schedule.phase_at(t);
        let key = (info.phase, info.step, info.support);
        if self.segment != Some(key) {
            self.on_phase_change(&info)
                .map_err(|e| self.fault(e.to_string()))?;
            self.segment = Some(key);
        }

        let y = rotate_outputs(measurements, -self.frame);
        if !std::mem::take(&mut self.pinned) {
            for (a, axis) in Axis::BOTH.into_iter().enumerate() {
                let u_prev = self.controllers[a].previous_input();
                self.estimate[a] =
                    self.observer
                        .update(&self.estimate[a], &u_prev, y[axis.index()]);
            }
        }

        let mut status = [None; 2];
        let mut softened = [false; 2];
        let mut iterations = [0; 2];
        let mut u = [AxisInput::zeros(); 2];
        if info.phase != WalkPhase::Idle {
            if self.config.constraint_preview {
                self.constraints = self
                    .build_preview()
                    .map_err(|e| self.fault(e.to_string()))?;
            }
            for (a, axis) in Axis::BOTH.into_iter().enumerate() {
                let refs = assemble_bundle(
                    &self.schedule,
                    axis,
                    self.cycle,
                    &self.config.mpc,
                    self.frame,
                );
                let outcome = self.controllers[a]
                    .control_step(&self.estimate[a], &refs, &self.constraints[a])
                    .map_err(|e| self.fault(format!("{axis:?} axis: {e}")))?;
                status[a] = Some(outcome.status);
                softened[a] = outcome.softened;
                iterations[a] = outcome.iterations;
                u[a] = outcome.input;
            }
        } else {
            for c in &mut self.controllers {
                c.set_previous_input(AxisInput::zeros());
            }
        }

        let mut zmp_pred = Vec2::zeros();
        for a in 0..2 {
            let next = self.model.a * self.estimate[a].0 + self.model.b * u[a].0;
            zmp_pred[a] = (self.model.c * next)[OUT_ZMP];
        }
        let diagnostics = TickDiagnostics {
            cycle: self.cycle,
            t,
            phase: info.phase,
            step: info.step,
            status,
            softened,
            iterations,
            input: rotate_inputs(&u, self.frame),
            zmp_measured: Vec2::new(measurements[0][OUT_ZMP], measurements[1][OUT_ZMP]),
            zmp_predicted: rotate(zmp_pred, self.frame),
            reference: self.schedule.sample(t),
            frame_angle: self.frame,
            setpoints: self.setpoints.map(|s| s.filtered),
            clamped: std::mem::take(&mut self.clamped),
        };
        self.cycle += 1;
        Ok(TickOutput {
            input: diagnostics.input,
            diagnostics,
        })
    }

    fn on_phase_change(&mut self, info: &PhaseInfo) -> Result<()> {
        if let (WalkPhase::SingleSupport, Some(i)) = (info.phase, info.step) {
            if self.setpoints.is_some() && i + 1 > self.replanned_from {
                self.replan_from(i + 1)?;
            }
        }
        if info.phase != WalkPhase::Idle {
            self.set_frame(mean_heading(info.primary.theta, info.secondary.theta));
        }
        self.constraints = self.build_horizon(info)?;
        Ok(())
    }
}

fn feet_of(support: Footprint, swing: Footprint) -> FeetState {
    let (left, right) = match support.side {
        crate::geometry::Side::Left => (support, swing),
        crate::geometry::Side::Right => (swing, support),
    };
    FeetState {
        left,
        right,
        swing: swing.side,
    }
}

/// Rotates per-axis states (both axes together) by `angle`.
fn to_frame(x: &[AxisState; 2], angle: f64) -> [AxisState; 2] {
    let mut out = *x;
    for i in 0..x[0].0.len() {
        let v = rotate(Vec2::new(x[0].0[i], x[1].0[i]), angle);
        out[0].0[i] = v.x;
        out[1].0[i] = v.y;
    }
    out
}

fn rotate_inputs(u: &[AxisInput; 2], angle: f64) -> [AxisInput; 2] {
    let mut out = *u;
    for i in 0..u[0].0.len() {
        let v = rotate(Vec2::new(u[0].0[i], u[1].0[i]), angle);
        out[0].0[i] = v.x;
        out[1].0[i] = v.y;
    }
    out
}

fn rotate_outputs(y: &[[f64; OUTPUT_DIM]; 2], angle: f64) -> [[f64; OUTPUT_DIM]; 2] {
    let mut out = *y;
    for o in 0..OUTPUT_DIM {
        let v = rotate(Vec2::new(y[0][o], y[1][o]), angle);
        out[0][o] = v.x;
        out[1][o] = v.y;
    }
    out
}
