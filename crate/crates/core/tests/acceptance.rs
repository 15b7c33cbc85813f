//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one PASS/FAIL line. The process exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::oracles::{
    dijkstra_cost, expm_series, qp_by_enumeration, random_feasible_qp, seeded, zoh_input_series,
};
use rand::Rng;
use triwalk_core::dynamics::{build_continuous, discretize, step_plant, ThreeMassParams};
use triwalk_core::engine::{Engine, EngineConfig, StepSource};
use triwalk_core::footstep::{obstacle_course, path_cost, plan_route, PlannerConfig};
use triwalk_core::geometry::{Footprint, Side, Vec2};
use triwalk_core::harness::{max_withstand, run, Scenario};
use triwalk_core::qp::{solve, QpStatus};
use triwalk_core::refgen::{hip_reference, swing_reference, GaitSchedule, GaitTiming};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn discretization() -> Outcome {
    let start = Instant::now();
    let ct = build_continuous(&ThreeMassParams::default()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for ts in [0.001, 0.02, 0.1] {
        let d = discretize(&ct, ts).map_err(|e| e.to_string())?;
        worst = worst
            .max((d.a - expm_series(&ct.a, ts, 20)).amax())
            .max((d.b - zoh_input_series(&ct.a, &ct.b, ts, 20)).amax());
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    check(worst < 1e-10, format!("max deviation {worst:.2e}"))
}

fn qp_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded(2024);
    let (mut worst_obj, mut worst_kkt): (f64, f64) = (0.0, 0.0);
    for i in 0..200 {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(0..=16);
        let p = random_feasible_qp(&mut rng, n, m);
        let (_, oracle) =
            qp_by_enumeration(&p).ok_or(format!("problem {i}: oracle found no point"))?;
        let s = solve(&p, 500).map_err(|e| e.to_string())?;
        if s.status != QpStatus::Optimal {
            return Err(format!("problem {i}: status {:?}", s.status));
        }
        worst_obj = worst_obj.max((s.objective - oracle).abs());
        worst_kkt = worst_kkt.max(s.kkt_residual);
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    check(
        worst_obj < 1e-6 && worst_kkt < 1e-8,
        format!("objective gap {worst_obj:.2e}, KKT residual {worst_kkt:.2e}"),
    )
}

fn tracking() -> Outcome {
    let start = Instant::now();
    let m = run(&Scenario::tracking())
        .map_err(|e| e.to_string())?
        .summary;
    within(start.elapsed(), Duration::from_secs(30))?;
    let detail = format!(
        "scaled inside {:.1}%, stance RMS {:.4} m, swing RMS {:.4} m, torso {}/{} phases",
        100.0 * m.zmp_inside_scaled_fraction(),
        m.stance_rms,
        m.swing_rms,
        m.torso_phases_checked - m.torso_phase_violations.len(),
        m.torso_phases_checked
    );
    check(
        m.completed
            && m.zmp_outside_scaled_cycles == 0
            && m.stance_rms < 0.02
            && m.swing_rms < 0.02
            && m.torso_phases_checked > 0
            && m.torso_phase_violations.is_empty(),
        detail,
    )
}

fn noise() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 1.0;
    let mut incomplete = Vec::new();
    for seed in 0..10 {
        let m = run(&Scenario::noisy(seed))
            .map_err(|e| e.to_string())?
            .summary;
        if !m.completed {
            incomplete.push(seed);
        }
        worst = worst.min(m.zmp_inside_fraction());
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    check(
        incomplete.is_empty() && worst >= 0.99,
        format!(
            "worst inside {:.1}%, incomplete seeds {incomplete:?}",
            100.0 * worst
        ),
    )
}

fn disturbance() -> Outcome {
    let start = Instant::now();
    let mut fell = Vec::new();
    for force in [100.0, -100.0, 200.0, -200.0, 300.0, -300.0] {
        if !run(&Scenario::pushed(force, 1))
            .map_err(|e| e.to_string())?
            .summary
            .survived()
        {
            fell.push(force);
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    check(fell.is_empty(), format!("falls at {fell:?} N"))
}

fn withstand() -> Outcome {
    let start = Instant::now();
    let template = Scenario::pushed(0.0, 1);
    let fwd = max_withstand(&template, 1.0, (0.0, 2000.0), 5.0).map_err(|e| e.to_string())?;
    let bwd = max_withstand(&template, -1.0, (0.0, 2000.0), 5.0).map_err(|e| e.to_string())?;
    within(start.elapsed(), Duration::from_secs(600))?;
    check(
        (350.0..=520.0).contains(&fwd.force) && (-475.0..=-315.0).contains(&bwd.force),
        format!("forward {:.1} N, backward {:.1} N", fwd.force, bwd.force),
    )
}

fn footsteps() -> Outcome {
    let start = Instant::now();
    let file = obstacle_course();
    let config = PlannerConfig::default();
    let route = plan_route(&file, &config).map_err(|e| e.to_string())?;
    let oracle =
        dijkstra_cost(&route.search, file.start, file.goal).ok_or("oracle found no path")?;
    let cost = path_cost(&route.path);
    let free = route
        .plan
        .steps
        .iter()
        .all(|f| route.inflated.point_is_free(f.position()));
    let d = route.plan.step_distances();
    let n = d.len();
    let worst = d[1..n - 1]
        .iter()
        .map(|v| (v - config.step_length).abs())
        .fold(0.0, f64::max);
    within(start.elapsed(), Duration::from_secs(5))?;
    check(
        cost == oracle && free && worst < 1e-9,
        format!(
            "A* {cost:?} vs Dijkstra {oracle:?}, footprints free: {free}, step distance error {worst:.1e}"
        ),
    )
}

fn references() -> Outcome {
    let params = ThreeMassParams::default();
    let omega = params.omega();
    let mut rng = seeded(8);
    let mut v = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let (mut boundary, mut residual, mut apex): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..500 {
        let st = Vec2::new(v(-1.0, 1.0), v(-1.0, 1.0));
        let h0 = Vec2::new(v(-1.0, 1.0), v(-1.0, 1.0));
        let hf = Vec2::new(v(-1.0, 1.0), v(-1.0, 1.0));
        let (t0, dur) = (v(-5.0, 5.0), v(0.1, 2.0));
        let p = |t| hip_reference(st, h0, hf, t0, t0 + dur, t, omega).map_err(|e| e.to_string());
        boundary = boundary
            .max((p(t0)? - h0).amax())
            .max((p(t0 + dur)? - hf).amax());
        let t = t0 + v(0.05, 0.95) * dur;
        let h = 1e-4;
        let accel = (p(t + h)? - 2.0 * p(t)? + p(t - h)?) / (h * h);
        residual = residual.max((accel - (p(t)? - st) * (omega * omega)).amax());

        let timing = GaitTiming {
            swing_height: v(0.0, 0.2),
            ..GaitTiming::default()
        };
        let a = Footprint::new(v(-1.0, 1.0), v(-1.0, 1.0), 0.0, Side::Left);
        let b = Footprint::new(v(-1.0, 1.0), v(-1.0, 1.0), 0.0, Side::Left);
        let mid = swing_reference(&a, &b, &timing, 0.5 * timing.single_support)
            .map_err(|e| e.to_string())?;
        apex = apex.max((mid.z - timing.swing_height).abs());
    }

    let plan = plan_route(&obstacle_course(), &PlannerConfig::default())
        .map_err(|e| e.to_string())?
        .plan
        .truncated(8);
    let s = GaitSchedule::new(&plan, &GaitTiming::default(), &params, 0.0)
        .map_err(|e| e.to_string())?;
    let timing = s.timing();
    let mut instants = vec![s.begin(), s.walk_start()];
    for i in 0..s.num_steps() {
        instants.push(s.step_start(i) + timing.single_support);
        instants.push(s.step_start(i) + timing.step_period());
    }
    let gap = instants
        .iter()
        .map(|&t| (s.sample(t - 1e-10).zmp - s.sample(t + 1e-10).zmp).amax())
        .fold(0.0, f64::max);
    check(
        boundary < 1e-12 && residual < 1e-6 && gap < 1e-9 && apex < 1e-9,
        format!(
            "hip boundary {boundary:.1e}, pendulum residual {residual:.1e}, ZMP gap {gap:.1e}, apex {apex:.1e}"
        ),
    )
}

fn timing() -> Outcome {
    let scenario = Scenario::tracking();
    let plan = scenario
        .plan()
        .map_err(|e| e.to_string())?
        .ok_or("tracking scenario has no plan")?;
    let config = EngineConfig::default();
    let mut engine = Engine::new(config, StepSource::Plan(plan)).map_err(|e| e.to_string())?;
    engine.start_walking(0.0).map_err(|e| e.to_string())?;
    let mut x = engine.initial_state();
    let mut times = Vec::with_capacity(scenario.cycles());
    for _ in 0..scenario.cycles() {
        let y = [engine.model().output(&x[0]), engine.model().output(&x[1])];
        let start = Instant::now();
        let out = engine.tick(&y).map_err(|e| e.to_string())?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        for a in 0..2 {
            x[a] = step_plant(engine.model(), &x[a], &out.input[a], [0.0; 3])
                .map_err(|e| e.to_string())?;
        }
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let p99 = times[(0.99 * (times.len() - 1) as f64).round() as usize];
    check(
        mean < 20.0 && p99 < 40.0,
        format!(
            "mean {mean:.2} ms, p99 {p99:.2} ms over {} cycles",
            times.len()
        ),
    )
}

fn omnidirectional() -> Outcome {
    let m = run(&Scenario::omnidirectional())
        .map_err(|e| e.to_string())?
        .summary;
    check(
        m.completed && !m.fall_detected && m.setpoints_monotone == Some(true),
        format!(
            "completed {}, fall {}, monotone setpoints {:?}, {} cycles",
            m.completed, m.fall_detected, m.setpoints_monotone, m.cycles
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("discretization", discretization),
        ("qp correctness", qp_correctness),
        ("tracking", tracking),
        ("noise robustness", noise),
        ("disturbance recovery", disturbance),
        ("maximum withstanding", withstand),
        ("footstep planning", footsteps),
        ("reference generation", references),
        ("real-time budget", timing),
        ("omnidirectional", omnidirectional),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1} s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.1} s)", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
