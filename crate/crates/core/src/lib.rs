//! Focus-distance planning for fixed multi-camera rigs.
//!
//! Given a triangle mesh of the subject and the camera poses, pick one focus
//! distance per camera so that as much of the surface as possible is imaged
//! sharply, close to the optical axis and at high resolution.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assignment;
pub mod geometry;
pub mod harness;
pub mod optics;
pub mod solver;
