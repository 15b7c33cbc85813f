use serde::{Deserialize, Serialize};

use super::MpcConfig;
use crate::dynamics::{ThreeMassParams, INPUT_DIM, OUTPUT_DIM, OUT_SWING, OUT_ZMP};
use crate::error::{Error, Result};
use crate::geometry::{Axis, Footprint};

/// Which feet carry the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportPhase {
    Single,
    Double,
    Stand,
}

/// One mixed row `E u + F y <= G` applied at every sample of a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub e: [f64; INPUT_DIM],
    pub f: [f64; OUTPUT_DIM],
    pub g: f64,
    pub soft: bool,
}

impl ConstraintRow {
    pub fn output_upper(output: usize, bound: f64) -> Self {
        let mut f = [0.0; OUTPUT_DIM];
        f[output] = 1.0;
        Self {
            e: [0.0; INPUT_DIM],
            f,
            g: bound,
            soft: false,
        }
    }

    pub fn output_lower(output: usize, bound: f64) -> Self {
        let mut f = [0.0; OUTPUT_DIM];
        f[output] = -1.0;
        Self {
            e: [0.0; INPUT_DIM],
            f,
            g: -bound,
            soft: false,
        }
    }

    pub fn input_upper(input: usize, bound: f64) -> Self {
        let mut e = [0.0; INPUT_DIM];
        e[input] = 1.0;
        Self {
            e,
            f: [0.0; OUTPUT_DIM],
            g: bound,
            soft: false,
        }
    }

    pub fn input_lower(input: usize, bound: f64) -> Self {
        let mut e = [0.0; INPUT_DIM];
        e[input] = -1.0;
        Self {
            e,
            f: [0.0; OUTPUT_DIM],
            g: -bound,
            soft: false,
        }
    }

    pub fn involves_outputs(&self) -> bool {
        self.f.iter().any(|v| *v != 0.0)
    }

    pub fn involves_inputs(&self) -> bool {
        self.e.iter().any(|v| *v != 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().chain(&self.f).all(|v| v.is_finite()) && self.g.is_finite()
    }

    /// Value of `E u + F y - G` (positive when violated).
    pub fn violation(&self, u: &[f64; INPUT_DIM], y: &[f64; OUTPUT_DIM]) -> f64 {
        let mut v = -self.g;
        for i in 0..INPUT_DIM {
            v += self.e[i] * u[i];
        }
        for o in 0..OUTPUT_DIM {
            v += self.f[o] * y[o];
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub rows: Vec<ConstraintRow>,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Bounds `[lo, hi]` implied on `output` by single-output rows.
    pub fn output_bounds(&self, output: usize) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let mut any = false;
        for r in &self.rows {
            let others = (0..OUTPUT_DIM)
                .filter(|&o| o != output)
                .any(|o| r.f[o] != 0.0);
            if r.involves_inputs() || others || r.f[output] == 0.0 {
                continue;
            }
            any = true;
            let bound = r.g / r.f[output];
            if r.f[output] > 0.0 {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        any.then_some((lo, hi))
    }
}

/// Constraint sets over one horizon. Sample `j` (0 ..= Np) uses
/// `sets[sample_set[j]]`: output rows bind `y(k+j)` for `j >= 1`, input
/// rows bind `u(k+j)` for `j < Nc`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HorizonConstraints {
    pub sets: Vec<ConstraintSet>,
    pub sample_set: Vec<usize>,
}

impl HorizonConstraints {
    /// The same set at every sample.
    pub fn uniform(set: ConstraintSet, np: usize) -> Self {
        Self {
            sets: vec![set],
            sample_set: vec![0; np + 1],
        }
    }

    pub fn set_at(&self, j: usize) -> &ConstraintSet {
        &self.sets[self.sample_set[j]]
    }

    pub fn validate(&self, np: usize) -> Result<()> {
        if self.sample_set.len() != np + 1 {
            return Err(Error::Structural(format!(
                "constraint schedule has {} samples, expected {}",
                self.sample_set.len(),
                np + 1
            )));
        }
        if let Some(bad) = self.sample_set.iter().find(|&&s| s >= self.sets.len()) {
            return Err(Error::Structural(format!(
                "constraint set index {bad} out of range"
            )));
        }
        if self
            .sets
            .iter()
            .flat_map(|s| &s.rows)
            .any(|r| !r.is_finite())
        {
            return Err(Error::Structural("constraint rows must be finite".into()));
        }
        Ok(())
    }
}

/// Interval of the scaled foot along `axis`.
///
/// The foot rectangle, rotated by its heading, is shrunk to the largest
/// axis-aligned rectangle of the same aspect ratio that fits inside it and
/// then scaled by the ZMP safety factor.
pub fn zmp_interval(foot: &Footprint, axis: Axis, params: &ThreeMassParams) -> (f64, f64) {
    let a = 0.5 * params.foot_length;
    let b = 0.5 * params.foot_width;
    let (s, c) = foot.theta.sin_cos();
    let (s, c) = (s.abs(), c.abs());
    let fit = (a / (a * c + b * s)).min(b / (a * s + b * c)).min(1.0);
    let half = params.zmp_safety_scale
        * fit
        * match axis {
            Axis::Sagittal => a,
            Axis::Lateral => b,
        };
    let center = axis.of(foot.position());
    (center - half, center + half)
}

/// Range of the swing mass while `support` carries the robot.
fn reach_interval(support: &Footprint, axis: Axis, config: &MpcConfig) -> (f64, f64) {
    let center = axis.of(support.position());
    match axis {
        Axis::Sagittal => (
            center - config.reach_sagittal,
            center + config.reach_sagittal,
        ),
        Axis::Lateral => {
            let sign = support.side.opposite().sign();
            let p = center + sign * config.reach_lateral[0];
            let q = center + sign * config.reach_lateral[1];
            (p.min(q), p.max(q))
        }
    }
}

fn hull((a0, a1): (f64, f64), (b0, b1): (f64, f64)) -> (f64, f64) {
    (a0.min(b0), a1.max(b1))
}

/// Rows for one axis and one support phase, in controller-frame coordinates.
///
/// * `Single`: `support` is the stance foot; `other` (the swing target) is
///   optional and only checked for finiteness.
/// * `Double`: `support` is the trailing foot and `other` the foot that just
///   landed; both carry the ZMP and the swing mass may be anywhere reachable
///   from either foot.
/// * `Stand`: both feet carry the ZMP and the swing mass is free.
///
/// Jerk bounds are added as hard input rows in every phase.
pub fn build_constraints(
    axis: Axis,
    phase: SupportPhase,
    support: &Footprint,
    other: Option<&Footprint>,
    params: &ThreeMassParams,
    config: &MpcConfig,
) -> Result<ConstraintSet> {
    let finite = |f: &Footprint| f.x.is_finite() && f.y.is_finite() && f.theta.is_finite();
    if !finite(support) || !other.map_or(true, finite) {
        return Err(Error::Structural("footprint pose is not finite".into()));
    }
    let need_other =
        || other.ok_or_else(|| Error::Structural(format!("{phase:?} support needs both feet")));
    let (zmp, swing) = match phase {
        SupportPhase::Single => (
            zmp_interval(support, axis, params),
            Some(reach_interval(support, axis, config)),
        ),
        SupportPhase::Double => {
            let landed = need_other()?;
            (
                hull(
                    zmp_interval(support, axis, params),
                    zmp_interval(landed, axis, params),
                ),
                Some(hull(
                    reach_interval(support, axis, config),
                    reach_interval(landed, axis, config),
                )),
            )
        }
        SupportPhase::Stand => {
            let o = need_other()?;
            (
                hull(
                    zmp_interval(support, axis, params),
                    zmp_interval(o, axis, params),
                ),
                None,
            )
        }
    };
    if zmp.0 > zmp.1 {
        return Err(Error::Structural(format!(
            "empty ZMP interval [{}, {}]",
            zmp.0, zmp.1
        )));
    }
    let mut rows = vec![
        ConstraintRow::output_upper(OUT_ZMP, zmp.1),
        ConstraintRow::output_lower(OUT_ZMP, zmp.0),
    ];
    if let Some((lo, hi)) = swing {
        if lo > hi {
            return Err(Error::Structural(format!(
                "empty swing interval [{lo}, {hi}]"
            )));
        }
        rows.push(ConstraintRow::output_upper(OUT_SWING, hi));
        rows.push(ConstraintRow::output_lower(OUT_SWING, lo));
    }
    for i in 0..INPUT_DIM {
        rows.push(ConstraintRow::input_upper(i, config.jerk_bound));
        rows.push(ConstraintRow::input_lower(i, -config.jerk_bound));
    }
    Ok(ConstraintSet { rows })
}
