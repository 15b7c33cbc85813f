//! Planar helpers shared by the planner, reference generator and harness.

use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};

pub type Vec2 = Vector2<f64>;

/// Which foot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// +1 for the left foot (positive lateral axis), -1 for the right.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Horizontal axis of the decoupled per-axis models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Forward/backward (x).
    Sagittal,
    /// Side to side (y).
    Lateral,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::Sagittal, Axis::Lateral];

    pub fn index(self) -> usize {
        match self {
            Axis::Sagittal => 0,
            Axis::Lateral => 1,
        }
    }

    pub fn of(self, v: Vec2) -> f64 {
        v[self.index()]
    }
}

/// Planar pose of a foot on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub x: f64,
    pub y: f64,
    /// Heading in radians.
    pub theta: f64,
    pub side: Side,
}

impl Footprint {
    pub fn new(x: f64, y: f64, theta: f64, side: Side) -> Self {
        Self { x, y, theta, side }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Corners of the foot rectangle, counter-clockwise.
    pub fn corners(&self, length: f64, width: f64) -> [Vec2; 4] {
        let rot = Rotation2::new(self.theta);
        let c = self.position();
        let (hl, hw) = (0.5 * length, 0.5 * width);
        [
            c + rot * Vec2::new(hl, hw),
            c + rot * Vec2::new(-hl, hw),
            c + rot * Vec2::new(-hl, -hw),
            c + rot * Vec2::new(hl, -hw),
        ]
    }
}

pub fn midpoint(a: Vec2, b: Vec2) -> Vec2 {
    0.5 * (a + b)
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Mean of two headings, computed on the unit circle.
pub fn mean_heading(a: f64, b: f64) -> f64 {
    if a == b {
        return a;
    }
    (a.sin() + b.sin()).atan2(a.cos() + b.cos())
}

pub fn rotate(v: Vec2, angle: f64) -> Vec2 {
    if angle == 0.0 {
        return v;
    }
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, no collinear points.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Vec2, a: Vec2, b: Vec2| (a - o).perp(&(b - o));
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Support polygon of one or two feet, as a counter-clockwise convex polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPolygon {
    pub vertices: Vec<Vec2>,
}

impl SupportPolygon {
    pub fn from_feet(feet: &[Footprint], length: f64, width: f64) -> Self {
        let pts: Vec<Vec2> = feet.iter().flat_map(|f| f.corners(length, width)).collect();
        Self {
            vertices: convex_hull(&pts),
        }
    }

    /// Signed distance-like margin: positive inside, negative outside
    /// (minimum over edges of the distance to the edge line).
    pub fn margin(&self, p: Vec2) -> f64 {
        let n = self.vertices.len();
        let mut m = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            let len = e.norm();
            if len == 0.0 {
                continue;
            }
            m = m.min(e.perp(&(p - a)) / len);
        }
        m
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        self.margin(p) >= -tol
    }
}
