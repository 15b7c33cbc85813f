//! Closed-loop simulation of the walking engine on the three-mass plant:
//! scenarios, measurement noise, pushes, metrics and trace export.

mod scenario;

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use scenario::{Disturbance, NoiseConfig, Scenario, ScenarioMode, SetpointChange};

use crate::dynamics::{step_plant, AxisState, OUTPUT_DIM, OUT_STANCE, OUT_SWING, OUT_ZMP};
use crate::engine::{Engine, SetpointValues, StepSource, TickDiagnostics, WalkPhase};
use crate::error::{param, Error, Result};
use crate::geometry::{midpoint, Footprint, SupportPolygon, Vec2};
use crate::qp::QpStatus;
use crate::refgen::GaitSchedule;

/// Zero-mean Gaussian with standard deviation `bound / 3`, redrawn until it
/// falls inside `[-bound, bound]`.
pub fn noise_sample<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    let normal = Normal::new(0.0, bound / 3.0).expect("positive standard deviation");
    loop {
        let v: f64 = normal.sample(rng);
        if v.abs() <= bound {
            return v;
        }
    }
}

/// One simulated cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub engine: TickDiagnostics,
    /// True plant quantities in world coordinates.
    pub zmp_true: Vec2,
    pub stance_true: Vec2,
    pub torso_true: Vec2,
    pub swing_true: Vec2,
    /// Signed margin of the true ZMP to the unscaled support polygon.
    pub support_margin: f64,
    pub disturbance: Vec2,
}

/// Summary of a run; serialized next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub cycles: usize,
    /// The run reached its duration without fault or fall.
    pub completed: bool,
    pub fall_detected: bool,
    pub fall_time: Option<f64>,
    pub fault: Option<String>,
    /// Cycles with the true ZMP outside the unscaled support polygon.
    pub zmp_outside_cycles: usize,
    /// Cycles with the true ZMP outside the safety-scaled support polygon.
    pub zmp_outside_scaled_cycles: usize,
    /// Largest distance of the true ZMP outside the unscaled polygon (m).
    pub max_excursion: f64,
    /// Tracking RMS of the stance mass, swing mass and ZMP while walking (m).
    pub stance_rms: f64,
    pub swing_rms: f64,
    pub zmp_rms: f64,
    /// Completed gait phases checked for the torso placement rule.
    pub torso_phases_checked: usize,
    pub torso_phase_violations: Vec<String>,
    pub softened_cycles: usize,
    pub clamped_steps: usize,
    /// Filtered setpoints never moved away from their command.
    pub setpoints_monotone: Option<bool>,
}

impl RunSummary {
    pub fn zmp_inside_fraction(&self) -> f64 {
        if self.cycles == 0 {
            return 1.0;
        }
        1.0 - self.zmp_outside_cycles as f64 / self.cycles as f64
    }

    pub fn zmp_inside_scaled_fraction(&self) -> f64 {
        if self.cycles == 0 {
            return 1.0;
        }
        1.0 - self.zmp_outside_scaled_cycles as f64 / self.cycles as f64
    }

    pub fn survived(&self) -> bool {
        self.completed && !self.fall_detected
    }
}

/// Result of [`run`]: the summary plus one trace row per cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub summary: RunSummary,
    pub trace: Vec<TraceRow>,
}

/// Feet carrying the robot at one instant.
fn feet_in_contact(schedule: &GaitSchedule, t: f64) -> Vec<Footprint> {
    let info = schedule.phase_at(t);
    match info.phase {
        WalkPhase::SingleSupport => vec![info.primary],
        _ => vec![info.primary, info.secondary],
    }
}

/// Distance from `p` to the polygon when outside, 0 inside.
fn distance_outside(poly: &SupportPolygon, p: Vec2) -> f64 {
    if poly.margin(p) >= 0.0 {
        return 0.0;
    }
    let n = poly.vertices.len();
    (0..n)
        .map(|i| {
            let a = poly.vertices[i];
            let b = poly.vertices[(i + 1) % n];
            let e = b - a;
            let s = if e.norm_squared() > 0.0 {
                ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (a + e * s - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Accumulates the torso placement checks over gait phases.
struct TorsoCheck {
    current: Option<(WalkPhase, usize, f64)>,
    start_torso: Vec2,
    lateral_sum: f64,
    samples: usize,
    checked: usize,
    violations: Vec<String>,
}

impl TorsoCheck {
    fn new() -> Self {
        Self {
            current: None,
            start_torso: Vec2::zeros(),
            lateral_sum: 0.0,
            samples: 0,
            checked: 0,
            violations: Vec::new(),
        }
    }

    /// Single support: on average the torso sits on the support side of the
    /// line between the support foot and the lifted foot. Double support:
    /// the torso moves toward the foot that just landed.
    fn finish(&mut self, schedule: &GaitSchedule, torso: Vec2) {
        let Some((phase, step, start)) = self.current.take() else {
            return;
        };
        let support = schedule.support_of(step).position();
        let ok = match phase {
            WalkPhase::SingleSupport => self.lateral_sum / self.samples.max(1) as f64 > 0.0,
            _ => {
                let landed = schedule.steps()[step].position();
                (torso - self.start_torso).dot(&(landed - support)) > 0.0
            }
        };
        self.checked += 1;
        if !ok {
            self.violations.push(format!(
                "{} of step {step} at t = {start:.2} s",
                phase.label()
            ));
        }
    }

    fn update(&mut self, schedule: &GaitSchedule, t: f64, torso: Vec2, last: bool) {
        let info = schedule.phase_at(t);
        let key = match (info.phase, info.step) {
            (WalkPhase::SingleSupport | WalkPhase::DoubleSupport, Some(i))
                if t < schedule.end() - 1e-9 =>
            {
                Some((info.phase, i, info.start))
            }
            _ => None,
        };
        if key != self.current {
            self.finish(schedule, torso);
            self.current = key;
            self.start_torso = torso;
            self.lateral_sum = 0.0;
            self.samples = 0;
        }
        if let Some((WalkPhase::SingleSupport, i, _)) = self.current {
            let support = schedule.support_of(i).position();
            let lifted = schedule.swing_from_of(i).position();
            let mid = midpoint(support, lifted);
            let n = support - mid;
            if n.norm() > 0.0 {
                self.lateral_sum += (torso - mid).dot(&n) / n.norm();
                self.samples += 1;
            }
        }
        if last {
            // An unfinished phase is not judged.
            self.current = None;
        }
    }
}

fn outputs(engine: &Engine, x: &[AxisState; 2]) -> [[f64; OUTPUT_DIM]; 2] {
    [engine.model().output(&x[0]), engine.model().output(&x[1])]
}

/// Simulates a scenario in closed loop.
pub fn run(scenario: &Scenario) -> Result<RunMetrics> {
    scenario.validate()?;
    let config = scenario.engine.clone();
    let ts = config.mpc.ts;
    let source = match (&scenario.mode, scenario.plan()?) {
        (_, Some(plan)) => StepSource::Plan(plan),
        (ScenarioMode::Setpoints { initial, .. }, None) => StepSource::Setpoints {
            initial: *initial,
            command: SetpointValues::default(),
        },
        _ => unreachable!("only setpoint scenarios come without a plan"),
    };
    let changes: Vec<SetpointChange> = match &scenario.mode {
        ScenarioMode::Setpoints { schedule, .. } => schedule.clone(),
        _ => Vec::new(),
    };
    let mut engine = Engine::new(config.clone(), source)?;
    engine.start_walking(scenario.walk_start)?;
    let mut x = engine.initial_state();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.noise.seed);
    let masses = config.params.masses();
    let scale = config.params.zmp_safety_scale;
    let (length, width) = (config.params.foot_length, config.params.foot_width);

    let n = scenario.cycles();
    let mut trace = Vec::with_capacity(n);
    let mut summary = RunSummary {
        name: scenario.name.clone(),
        cycles: 0,
        completed: false,
        fall_detected: false,
        fall_time: None,
        fault: None,
        zmp_outside_cycles: 0,
        zmp_outside_scaled_cycles: 0,
        max_excursion: 0.0,
        stance_rms: 0.0,
        swing_rms: 0.0,
        zmp_rms: 0.0,
        torso_phases_checked: 0,
        torso_phase_violations: Vec::new(),
        softened_cycles: 0,
        clamped_steps: 0,
        setpoints_monotone: if changes.is_empty()
            && !matches!(scenario.mode, ScenarioMode::Setpoints { .. })
        {
            None
        } else {
            Some(true)
        },
    };
    let mut sq = [0.0; 3];
    let mut walking_cycles = 0usize;
    let mut outside_run = 0usize;
    let mut next_change = 0usize;
    let mut torso_check = TorsoCheck::new();
    let mut prev_setpoints: Option<SetpointValues> = None;
    let mut pushing = [[0.0; 3]; 2];

    for k in 0..n {
        let t = k as f64 * ts;
        while next_change < changes.len() && changes[next_change].t <= t + 1e-9 {
            engine.set_command(changes[next_change].command)?;
            next_change += 1;
        }
        let truth = outputs(&engine, &x);
        let mut measured = truth;
        if scenario.noise.enabled {
            for axis in measured.iter_mut() {
                for v in axis.iter_mut() {
                    *v += noise_sample(&mut rng, scenario.noise.bound);
                }
            }
        }
        let out = match engine.tick(&measured) {
            Ok(out) => out,
            Err(e) => {
                summary.fault = Some(e.to_string());
                break;
            }
        };
        let diag = out.diagnostics;

        let zmp = Vec2::new(truth[0][OUT_ZMP], truth[1][OUT_ZMP]);
        let stance = Vec2::new(truth[0][OUT_STANCE], truth[1][OUT_STANCE]);
        let swing = Vec2::new(truth[0][OUT_SWING], truth[1][OUT_SWING]);
        let torso = Vec2::new(x[0].position(1), x[1].position(1));
        let feet = feet_in_contact(engine.schedule(), t);
        let poly = SupportPolygon::from_feet(&feet, length, width);
        let scaled = SupportPolygon::from_feet(&feet, scale * length, scale * width);
        let margin = poly.margin(zmp);
        let outside = margin < -1e-9;
        if outside {
            summary.zmp_outside_cycles += 1;
            summary.max_excursion = summary.max_excursion.max(distance_outside(&poly, zmp));
            outside_run += 1;
        } else {
            outside_run = 0;
        }
        if !scaled.contains(zmp, 1e-9) {
            summary.zmp_outside_scaled_cycles += 1;
        }
        if diag.phase != WalkPhase::Idle {
            let r = &diag.reference;
            sq[0] += (stance - r.stance_mass).norm_squared();
            sq[1] += (swing - r.swing_mass).norm_squared();
            sq[2] += (zmp - r.zmp).norm_squared();
            walking_cycles += 1;
        }
        if diag.softened.iter().any(|&s| s) {
            summary.softened_cycles += 1;
        }
        if diag.clamped {
            summary.clamped_steps += 1;
        }
        if let (Some(sp), Some(prev)) = (engine.setpoints(), prev_setpoints) {
            let cmd = [
                sp.command.step_length,
                sp.command.step_width,
                sp.command.turn_rate,
            ];
            let now = [
                sp.filtered.step_length,
                sp.filtered.step_width,
                sp.filtered.turn_rate,
            ];
            let before = [prev.step_length, prev.step_width, prev.turn_rate];
            for i in 0..3 {
                if (cmd[i] - now[i]).abs() > (cmd[i] - before[i]).abs() + 1e-12 {
                    summary.setpoints_monotone = Some(false);
                }
            }
        }
        prev_setpoints = engine.setpoints().map(|s| s.filtered);
        torso_check.update(engine.schedule(), t, torso, k + 1 == n);

        let mut disturbance = Vec2::zeros();
        let mut window = [[0.0; 3]; 2];
        for d in &scenario.disturbances {
            let cycles = (d.duration / ts - 1e-9).ceil().max(1.0);
            let first = (d.t_start / ts - 1e-9).ceil();
            if (k as f64) >= first && (k as f64) < first + cycles {
                let accel = d.force / masses[d.mass] * (d.duration / (cycles * ts));
                window[d.axis.index()][d.mass] += accel;
                disturbance[d.axis.index()] += d.force;
            }
        }
        // The push acts only inside its window: its acceleration is added
        // when the window opens and taken back when it closes.
        let mut extra = [[0.0; 3]; 2];
        for a in 0..2 {
            for i in 0..3 {
                extra[a][i] = window[a][i] - pushing[a][i];
            }
        }
        pushing = window;
        trace.push(TraceRow {
            engine: diag,
            zmp_true: zmp,
            stance_true: stance,
            torso_true: torso,
            swing_true: swing,
            support_margin: margin,
            disturbance,
        });
        summary.cycles += 1;
        if outside_run > scenario.fall_cycles {
            summary.fall_detected = true;
            summary.fall_time = Some(t);
            break;
        }
        for a in 0..2 {
            x[a] = step_plant(engine.model(), &x[a], &out.input[a], extra[a])?;
        }
        if !x.iter().all(AxisState::is_finite) {
            summary.fault = Some(format!("plant state diverged at t = {t:.3} s"));
            break;
        }
    }
    summary.completed = summary.fault.is_none() && !summary.fall_detected && summary.cycles == n;
    if walking_cycles > 0 {
        let m = walking_cycles as f64;
        summary.stance_rms = (sq[0] / m).sqrt();
        summary.swing_rms = (sq[1] / m).sqrt();
        summary.zmp_rms = (sq[2] / m).sqrt();
    }
    summary.torso_phases_checked = torso_check.checked;
    summary.torso_phase_violations = torso_check.violations;
    Ok(RunMetrics { summary, trace })
}

/// Outcome of the bisection for the largest survivable push.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithstandResult {
    /// Largest surviving signed force (N).
    pub force: f64,
    /// Smallest failing signed force (N).
    pub failing_force: f64,
    /// Every evaluated (signed force, survived) pair in evaluation order.
    pub evaluations: Vec<(f64, bool)>,
    /// Pairs where a larger force survived while a smaller one fell.
    pub monotonicity_violations: Vec<(f64, f64)>,
}

/// Bisection on the push amplitude. `direction` picks the sign of the
/// force; `bracket` holds magnitudes `(survives, falls)`. The push shape is
/// the first disturbance of the template, or a 10 ms torso push at 1.6 s.
pub fn max_withstand(
    template: &Scenario,
    direction: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<WithstandResult> {
    if direction == 0.0 || !direction.is_finite() {
        return param("direction must be +1 or -1");
    }
    if !(tol > 0.0) {
        return param(format!("tolerance must be positive, got {tol}"));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Bracket(format!(
            "need 0 <= low < high, got [{lo}, {hi}]"
        )));
    }
    let sign = direction.signum();
    let shape = template
        .disturbances
        .first()
        .copied()
        .unwrap_or_else(|| Disturbance::impulse(1.6, 0.01, 0.0));
    let mut evaluations = Vec::new();
    let mut survives = |magnitude: f64| -> Result<bool> {
        let mut s = template.clone();
        s.disturbances = vec![Disturbance {
            force: sign * magnitude,
            ..shape
        }];
        let ok = run(&s)?.summary.survived();
        evaluations.push((sign * magnitude, ok));
        Ok(ok)
    };
    let lo_ok = survives(lo)?;
    let hi_ok = survives(hi)?;
    if !lo_ok || hi_ok {
        return Err(Error::Bracket(format!(
            "low {lo} N {} and high {hi} N {}",
            if lo_ok { "survives" } else { "falls" },
            if hi_ok { "survives" } else { "falls" }
        )));
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if survives(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut violations = Vec::new();
    for &(fa, oka) in &evaluations {
        for &(fb, okb) in &evaluations {
            if fa.abs() < fb.abs() && !oka && okb {
                violations.push((fa, fb));
            }
        }
    }
    Ok(WithstandResult {
        force: sign * lo,
        failing_force: sign * hi,
        evaluations,
        monotonicity_violations: violations,
    })
}

/// First line of every trace file.
pub const TRACE_VERSION: &str = "# triwalk-trace v1";

const TRACE_HEADER: [&str; 38] = [
    "t",
    "phase",
    "step",
    "qp_status_x",
    "qp_status_y",
    "softened_x",
    "softened_y",
    "u1_x",
    "u2_x",
    "u3_x",
    "u1_y",
    "u2_y",
    "u3_y",
    "zmp_meas_x",
    "zmp_meas_y",
    "zmp_pred_x",
    "zmp_pred_y",
    "zmp_true_x",
    "zmp_true_y",
    "r_z_x",
    "r_z_y",
    "r_st_x",
    "r_st_y",
    "r_sw_x",
    "r_sw_y",
    "stance_x",
    "stance_y",
    "torso_x",
    "torso_y",
    "swing_x",
    "swing_y",
    "support_margin",
    "force_x",
    "force_y",
    "frame",
    "sp_length",
    "sp_width",
    "sp_turn",
];

fn status_label(s: Option<QpStatus>) -> &'static str {
    match s {
        None => "none",
        Some(QpStatus::Optimal) => "optimal",
        Some(QpStatus::MaxIterations) => "max_iterations",
        Some(QpStatus::InfeasibleHard) => "infeasible",
    }
}

/// Writes the per-cycle trace as CSV, preceded by the version line.
pub fn write_trace<W: Write>(trace: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    let num = |v: f64| format!("{v:.9}");
    for r in trace {
        let d = &r.engine;
        let sp = d.setpoints.unwrap_or_default();
        let mut rec: Vec<String> = vec![
            num(d.t),
            d.phase.label().to_string(),
            d.step.map_or(String::new(), |s| s.to_string()),
            status_label(d.status[0]).to_string(),
            status_label(d.status[1]).to_string(),
            u8::from(d.softened[0]).to_string(),
            u8::from(d.softened[1]).to_string(),
        ];
        for u in &d.input {
            rec.extend(u.0.iter().map(|&v| num(v)));
        }
        for v in [
            d.zmp_measured,
            d.zmp_predicted,
            r.zmp_true,
            d.reference.zmp,
            d.reference.stance_mass,
            d.reference.swing_mass,
            r.stance_true,
            r.torso_true,
            r.swing_true,
        ] {
            rec.push(num(v.x));
            rec.push(num(v.y));
        }
        rec.push(num(r.support_margin));
        rec.push(num(r.disturbance.x));
        rec.push(num(r.disturbance.y));
        rec.push(num(d.frame_angle));
        rec.push(num(sp.step_length));
        rec.push(num(sp.step_width));
        rec.push(num(sp.turn_rate));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `path` (CSV trace) and `path` with a `.json` extension (summary).
pub fn export_traces(metrics: &RunMetrics, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trace(&metrics.trace, file)?;
    let json = serde_json::to_string_pretty(&metrics.summary)?;
    std::fs::write(path.with_extension("json"), json)?;
    Ok(())
}
