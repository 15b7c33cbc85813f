//! Model predictive walking control for a three-mass biped model.

pub mod dynamics;
pub mod engine;
pub mod error;
pub mod footstep;
pub mod geometry;
pub mod harness;
pub mod mpc;
pub mod qp;
pub mod refgen;

pub use error::{Error, Result};
pub use geometry::{Axis, Footprint, Side, SupportPolygon, Vec2};
