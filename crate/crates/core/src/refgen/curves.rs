use nalgebra::Vector3;

use super::GaitTiming;
use crate::error::{Error, Result};
use crate::geometry::{Footprint, Vec2};

pub type Vec3 = Vector3<f64>;

/// Hip position of the linear inverted pendulum pivoting on `p_st` that
/// starts at `p_h0` at `t0` and ends at `p_hf` at `tf`.
pub fn hip_reference(
    p_st: Vec2,
    p_h0: Vec2,
    p_hf: Vec2,
    t0: f64,
    tf: f64,
    t: f64,
    omega: f64,
) -> Result<Vec2> {
    if !(tf > t0) {
        return Err(Error::Query(format!("hip interval [{t0}, {tf}] is empty")));
    }
    if !(omega > 0.0) {
        return Err(Error::Parameter(format!(
            "pendulum frequency must be positive, got {omega}"
        )));
    }
    let tol = 1e-9 * (1.0 + tf.abs());
    if t < t0 - tol || t > tf + tol {
        return Err(Error::Query(format!(
            "hip query at {t} outside [{t0}, {tf}]"
        )));
    }
    Ok(hip_unchecked(
        p_st,
        p_h0,
        p_hf,
        t0,
        tf,
        t.clamp(t0, tf),
        omega,
    ))
}

pub(crate) fn hip_unchecked(
    p_st: Vec2,
    p_h0: Vec2,
    p_hf: Vec2,
    t0: f64,
    tf: f64,
    t: f64,
    omega: f64,
) -> Vec2 {
    let den = ((t0 - tf) * omega).sinh();
    p_st + ((p_st - p_hf) * ((t - t0) * omega).sinh() + (p_h0 - p_st) * ((t - tf) * omega).sinh())
        / den
}

/// Cubic Bezier through control points `p0, p0, p1, p1`: leaves and arrives
/// with zero velocity.
pub(crate) fn horizontal_bezier(p0: Vec2, p1: Vec2, s: f64) -> Vec2 {
    let u = 1.0 - s;
    // Bernstein weights of the repeated control points.
    let w0 = u * u * u + 3.0 * u * u * s;
    let w1 = 3.0 * u * s * s + s * s * s;
    p0 * w0 + p1 * w1
}

/// Quartic Bezier with control heights `0, 0, c, 0, 0`, `c = 8h/3`, so the
/// height at mid-swing is exactly `h`.
pub(crate) fn vertical_bezier(height: f64, s: f64) -> f64 {
    let u = 1.0 - s;
    let c = 8.0 * height / 3.0;
    6.0 * u * u * s * s * c
}

/// Swing foot position at time `t` after lift-off: Bezier arc during
/// single support, resting at `f_next` during double support.
pub fn swing_reference(
    f_prev: &Footprint,
    f_next: &Footprint,
    timing: &GaitTiming,
    t: f64,
) -> Result<Vec3> {
    let end = timing.single_support + timing.double_support;
    let tol = 1e-9 * (1.0 + end);
    if t < -tol || t > end + tol {
        return Err(Error::Query(format!(
            "swing query at {t} outside [0, {end}]"
        )));
    }
    let s = (t / timing.single_support).clamp(0.0, 1.0);
    let p = horizontal_bezier(f_prev.position(), f_next.position(), s);
    Ok(Vec3::new(p.x, p.y, vertical_bezier(timing.swing_height, s)))
}

/// C1 blend from 0 to 1 on [0, 1].
pub(crate) fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Mass references from the ZMP, hip and swing-foot references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassReferences {
    pub stance: Vec2,
    pub torso: Vec2,
    pub swing: Vec2,
}

pub fn mass_references(zmp: Vec2, hip: Vec2, swing: Vec2) -> MassReferences {
    MassReferences {
        stance: 0.5 * (zmp + hip),
        torso: hip,
        swing: 0.5 * (swing + hip),
    }
}
