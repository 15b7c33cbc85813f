//! Walking references: ZMP, hip and swing-foot trajectories and the
//! three-mass references derived from them.

mod curves;
mod schedule;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use curves::{hip_reference, mass_references, swing_reference, MassReferences, Vec3};
pub use schedule::{GaitSchedule, PhaseInfo, ReferenceSample, WalkPhase};

use crate::error::{param, Error, Result};
use crate::footstep::FootstepPlan;
use crate::geometry::{rotate, Axis, Vec2};
use crate::mpc::{MpcConfig, ReferenceBundle};

/// Durations of the gait phases (s) and swing apex height (m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitTiming {
    pub single_support: f64,
    pub double_support: f64,
    /// Time spent shifting the ZMP onto the first support foot.
    pub initialize: f64,
    pub swing_height: f64,
}

impl Default for GaitTiming {
    fn default() -> Self {
        Self {
            single_support: 0.8,
            double_support: 0.2,
            initialize: 0.2,
            swing_height: 0.05,
        }
    }
}

impl GaitTiming {
    pub fn step_period(&self) -> f64 {
        self.single_support + self.double_support
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.single_support > 0.0 && self.single_support.is_finite()) {
            return param("single support duration must be positive");
        }
        if !(self.double_support >= 0.0 && self.double_support.is_finite()) {
            return param("double support duration must be non-negative");
        }
        if !(self.initialize >= 0.0 && self.initialize.is_finite()) {
            return param("initialization duration must be non-negative");
        }
        if !(self.swing_height >= 0.0 && self.swing_height.is_finite()) {
            return param("swing height must be non-negative");
        }
        Ok(())
    }

    /// Checks that every phase lasts a whole number of control cycles.
    pub fn validate_for(&self, ts: f64) -> Result<()> {
        self.validate()?;
        for (name, d) in [
            ("single support", self.single_support),
            ("double support", self.double_support),
            ("initialization", self.initialize),
        ] {
            let cycles = d / ts;
            if (cycles - cycles.round()).abs() > 1e-6 {
                return Err(Error::Parameter(format!(
                    "{name} duration {d} is not a multiple of the sample time {ts}"
                )));
            }
        }
        Ok(())
    }
}

/// ZMP reference of a plan with the first step starting at `t = 0`.
/// Valid on `[0, N * step_period]`.
pub fn zmp_reference(plan: &FootstepPlan, timing: &GaitTiming, t: f64) -> Result<Vec2> {
    let params = crate::dynamics::ThreeMassParams::default();
    let schedule = GaitSchedule::new(plan, timing, &params, -timing.initialize)?;
    let end = schedule.end();
    let tol = 1e-9 * (1.0 + end);
    if !t.is_finite() || t < -tol || t > end + tol {
        return Err(Error::Query(format!("ZMP query at {t} outside [0, {end}]")));
    }
    Ok(schedule.zmp(t))
}

/// Reference windows for samples `k + 1 ..= k + np` on one axis of the
/// controller frame rotated by `frame_angle` from the world frame.
pub fn assemble_bundle(
    schedule: &GaitSchedule,
    axis: Axis,
    k: usize,
    config: &MpcConfig,
    frame_angle: f64,
) -> ReferenceBundle {
    let np = config.np;
    let mut bundle = ReferenceBundle {
        zmp: Vec::with_capacity(np),
        stance: Vec::with_capacity(np),
        swing: Vec::with_capacity(np),
    };
    for j in 1..=np {
        let s = schedule.sample((k + j) as f64 * config.ts);
        let local = |p: Vec2| axis.of(rotate(p, -frame_angle));
        bundle.zmp.push(local(s.zmp));
        bundle.stance.push(local(s.stance_mass));
        bundle.swing.push(local(s.swing_mass));
    }
    bundle
}

/// Samples every reference at `t = k * ts` for `k = 0 ..= cycles`.
pub fn sample_references(
    schedule: &GaitSchedule,
    ts: f64,
    cycles: usize,
) -> Vec<(f64, ReferenceSample)> {
    (0..=cycles)
        .map(|k| {
            let t = k as f64 * ts;
            (t, schedule.sample(t))
        })
        .collect()
}

/// Writes sampled references as CSV with one row per sample.
pub fn write_reference_csv<W: Write>(samples: &[(f64, ReferenceSample)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t", "r_z_x", "r_z_y", "r_st_x", "r_st_y", "r_sw_x", "r_sw_y", "hip_x", "hip_y", "swing_z",
    ])?;
    for (t, s) in samples {
        let row = [
            *t,
            s.zmp.x,
            s.zmp.y,
            s.stance_mass.x,
            s.stance_mass.y,
            s.swing_mass.x,
            s.swing_mass.y,
            s.hip.x,
            s.hip.y,
            s.swing_foot.z,
        ];
        w.write_record(row.iter().map(|v| format!("{v:.9}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_references(schedule: &GaitSchedule, ts: f64, path: &Path) -> Result<()> {
    let cycles = ((schedule.end() + schedule.timing().double_support) / ts).ceil() as usize;
    let file = std::fs::File::create(path)?;
    write_reference_csv(&sample_references(schedule, ts, cycles), file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::footstep::FeetState;
    use crate::geometry::{Footprint, Side};

    fn straight_plan(n: usize) -> FootstepPlan {
        let initial = FeetState::side_by_side(Vec2::zeros(), 0.0, 0.2, Side::Left);
        let mut steps = Vec::new();
        let mut side = Side::Left;
        for i in 0..n {
            let x = 0.1 * (i + 1) as f64;
            steps.push(Footprint::new(x, side.sign() * 0.1, 0.0, side));
            side = side.opposite();
        }
        FootstepPlan { initial, steps }
    }

    #[test]
    fn timing_must_align_with_sample_time() {
        assert!(GaitTiming::default().validate_for(0.02).is_ok());
        let bad = GaitTiming {
            single_support: 0.81,
            ..GaitTiming::default()
        };
        assert!(bad.validate_for(0.02).is_err());
    }

    #[test]
    fn zmp_holds_support_in_single_support() {
        let plan = straight_plan(4);
        let timing = GaitTiming::default();
        let support = Vec2::new(0.0, -0.1);
        for t in [0.0, 0.3, 0.79] {
            assert!((zmp_reference(&plan, &timing, t).unwrap() - support).norm() < 1e-12);
        }
        let mid = zmp_reference(&plan, &timing, 0.9).unwrap();
        assert!((mid - Vec2::new(0.05, 0.0)).norm() < 1e-12);
        assert!(zmp_reference(&plan, &timing, 4.5).is_err());
        assert!(zmp_reference(&plan, &timing, -0.1).is_err());
    }

    #[test]
    fn references_are_continuous() {
        let plan = straight_plan(6);
        let schedule =
            GaitSchedule::new(&plan, &GaitTiming::default(), &Default::default(), 0.5).unwrap();
        let dt = 1e-4;
        let mut t = 0.0;
        let mut prev = schedule.sample(t);
        while t < schedule.end() + 1.0 {
            t += dt;
            let s = schedule.sample(t);
            assert!((s.zmp - prev.zmp).norm() < 1e-3, "zmp jump at {t}");
            assert!((s.hip - prev.hip).norm() < 1e-3, "hip jump at {t}");
            assert!(
                (s.swing_foot - prev.swing_foot).norm() < 1e-3,
                "swing jump at {t}"
            );
            prev = s;
        }
    }

    #[test]
    fn replacing_steps_keeps_alternation() {
        let plan = straight_plan(4);
        let mut schedule =
            GaitSchedule::new(&plan, &GaitTiming::default(), &Default::default(), 0.0).unwrap();
        let replacement = [Footprint::new(0.5, 0.1, 0.0, Side::Left)];
        schedule.replace_steps_from(2, &replacement).unwrap();
        assert_eq!(schedule.num_steps(), 3);
        assert_eq!(schedule.support_of(2), plan.steps[1]);
        let wrong = [Footprint::new(0.5, -0.1, 0.0, Side::Right)];
        assert!(schedule.replace_steps_from(2, &wrong).is_err());
    }

    #[test]
    fn bundle_is_rotated_into_controller_frame() {
        let plan = straight_plan(3);
        let schedule =
            GaitSchedule::new(&plan, &GaitTiming::default(), &Default::default(), 0.0).unwrap();
        let config = MpcConfig::default();
        let angle = 0.3;
        let lat = assemble_bundle(&schedule, Axis::Lateral, 20, &config, angle);
        let s = schedule.sample(21.0 * config.ts);
        let expected = rotate(s.zmp, -angle).y;
        assert!((lat.zmp[0] - expected).abs() < 1e-12);
        assert_eq!(lat.len(), config.np);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let plan = straight_plan(2);
        let schedule =
            GaitSchedule::new(&plan, &GaitTiming::default(), &Default::default(), 0.0).unwrap();
        let mut buf = Vec::new();
        write_reference_csv(&sample_references(&schedule, 0.02, 10), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,r_z_x,r_z_y"));
        assert_eq!(text.lines().count(), 12);
    }
}
