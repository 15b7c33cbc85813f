use proptest::prelude::*;
use triwalk_core::dynamics::ThreeMassParams;
use triwalk_core::footstep::{obstacle_course, plan_route, FootstepPlan, PlannerConfig};
use triwalk_core::geometry::{Axis, Footprint, Side, Vec2};
use triwalk_core::mpc::MpcConfig;
use triwalk_core::refgen::{
    assemble_bundle, hip_reference, swing_reference, zmp_reference, GaitSchedule, GaitTiming,
    WalkPhase,
};

fn course_plan(n: usize) -> FootstepPlan {
    plan_route(&obstacle_course(), &PlannerConfig::default())
        .unwrap()
        .plan
        .truncated(n)
}

fn schedule(n: usize) -> GaitSchedule {
    GaitSchedule::new(
        &course_plan(n),
        &GaitTiming::default(),
        &ThreeMassParams::default(),
        0.0,
    )
    .unwrap()
}

/// Every instant where a piece of the references changes formula.
fn boundaries(s: &GaitSchedule) -> Vec<f64> {
    let timing = s.timing();
    let mut out = vec![s.begin(), s.walk_start()];
    for i in 0..s.num_steps() {
        out.push(s.step_start(i) + timing.single_support);
        out.push(s.step_start(i) + timing.step_period());
    }
    out
}

proptest! {
    #[test]
    fn hip_meets_its_boundary_values(
        st in proptest::array::uniform2(-2.0f64..2.0),
        h0 in proptest::array::uniform2(-2.0f64..2.0),
        hf in proptest::array::uniform2(-2.0f64..2.0),
        t0 in -5.0f64..5.0,
        dur in 0.1f64..2.0,
    ) {
        let omega = ThreeMassParams::default().omega();
        let (st, h0, hf) = (Vec2::from(st), Vec2::from(h0), Vec2::from(hf));
        let a = hip_reference(st, h0, hf, t0, t0 + dur, t0, omega).unwrap();
        let b = hip_reference(st, h0, hf, t0, t0 + dur, t0 + dur, omega).unwrap();
        prop_assert!((a - h0).amax() < 1e-12);
        prop_assert!((b - hf).amax() < 1e-12);
    }

    #[test]
    fn hip_satisfies_the_pendulum_equation(
        st in proptest::array::uniform2(-1.0f64..1.0),
        h0 in proptest::array::uniform2(-1.0f64..1.0),
        hf in proptest::array::uniform2(-1.0f64..1.0),
        frac in 0.05f64..0.95,
    ) {
        let omega = ThreeMassParams::default().omega();
        let (st, h0, hf) = (Vec2::from(st), Vec2::from(h0), Vec2::from(hf));
        let (t0, tf) = (0.0, 1.0);
        let t = frac;
        let h = 1e-4;
        let p = |t| hip_reference(st, h0, hf, t0, tf, t, omega).unwrap();
        let accel = (p(t + h) - 2.0 * p(t) + p(t - h)) / (h * h);
        let residual = accel - (p(t) - st) * (omega * omega);
        prop_assert!(residual.amax() < 1e-6, "residual {}", residual.amax());
    }

    #[test]
    fn swing_apex_is_the_swing_height(
        from in proptest::array::uniform2(-1.0f64..1.0),
        to in proptest::array::uniform2(-1.0f64..1.0),
        height in 0.0f64..0.2,
    ) {
        let timing = GaitTiming { swing_height: height, ..GaitTiming::default() };
        let a = Footprint::new(from[0], from[1], 0.0, Side::Left);
        let b = Footprint::new(to[0], to[1], 0.0, Side::Left);
        let mid = swing_reference(&a, &b, &timing, 0.5 * timing.single_support).unwrap();
        prop_assert!((mid.z - height).abs() < 1e-9);
        let c = 0.5 * (a.position() + b.position());
        prop_assert!((mid.xy() - c).amax() < 1e-12);
        // The apex is the highest point.
        for k in 0..=40 {
            let t = k as f64 / 40.0 * timing.single_support;
            prop_assert!(swing_reference(&a, &b, &timing, t).unwrap().z <= height + 1e-12);
        }
        let start = swing_reference(&a, &b, &timing, 0.0).unwrap();
        let land = swing_reference(&a, &b, &timing, timing.single_support).unwrap();
        prop_assert!((start.xy() - a.position()).amax() < 1e-12 && start.z.abs() < 1e-12);
        prop_assert!((land.xy() - b.position()).amax() < 1e-12 && land.z.abs() < 1e-12);
    }
}

#[test]
fn references_are_continuous_at_phase_changes() {
    let s = schedule(8);
    let eps = 1e-10;
    for t in boundaries(&s) {
        let a = s.sample(t - eps);
        let b = s.sample(t + eps);
        for (name, x, y) in [
            ("zmp", a.zmp, b.zmp),
            ("hip", a.hip, b.hip),
            ("stance", a.stance_mass, b.stance_mass),
            ("swing", a.swing_mass, b.swing_mass),
        ] {
            assert!(
                (x - y).amax() < 1e-9,
                "{name} jumps at t = {t}: {x:?} vs {y:?}"
            );
        }
        assert!(
            (a.swing_foot - b.swing_foot).amax() < 1e-9,
            "swing foot jumps at {t}"
        );
    }
}

#[test]
fn zmp_rests_on_the_support_foot_in_single_support() {
    let plan = course_plan(6);
    let timing = GaitTiming::default();
    let s = schedule(6);
    for i in 0..s.num_steps() {
        for k in 0..8 {
            let local = k as f64 * 0.1;
            let t_plan = i as f64 * timing.step_period() + local;
            let z = zmp_reference(&plan, &timing, t_plan).unwrap();
            assert!((z - s.support_of(i).position()).amax() < 1e-12);
        }
    }
    assert!(zmp_reference(&plan, &timing, -0.5).is_err());
}

#[test]
fn phases_follow_the_gait_order() {
    let s = schedule(4);
    let ts = 0.02;
    let mut labels = String::new();
    let mut last = None;
    let mut t = -0.1;
    while t < s.end() + 0.5 {
        let p = s.phase_at(t).phase;
        if last != Some(p) {
            labels.push(match p {
                WalkPhase::Idle => 'I',
                WalkPhase::Initialize => 'N',
                WalkPhase::SingleSupport => 'S',
                WalkPhase::DoubleSupport => 'D',
            });
            last = Some(p);
        }
        t += ts;
    }
    assert_eq!(labels, "INSDSDSDSD");
}

#[test]
fn bundle_samples_the_schedule_one_step_ahead() {
    let s = schedule(5);
    let cfg = MpcConfig::default();
    for k in [0, 17, 60] {
        for axis in Axis::BOTH {
            let b = assemble_bundle(&s, axis, k, &cfg, 0.0);
            assert_eq!(b.zmp.len(), cfg.np);
            for j in 0..cfg.np {
                let r = s.sample((k + j + 1) as f64 * cfg.ts);
                assert_eq!(b.zmp[j], axis.of(r.zmp));
                assert_eq!(b.stance[j], axis.of(r.stance_mass));
                assert_eq!(b.swing[j], axis.of(r.swing_mass));
            }
        }
    }
}
