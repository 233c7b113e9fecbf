//! Hard-to-approximate convex bodies built from quasi-orthogonal designs.
//!
//! The crate exposes the bodies `Q`, `Q_t`, `Q_t°`, `K(η, κ)` and the associated
//! cones as oracles (gauge, support, membership, chords), together with the
//! certifiers and Monte-Carlo estimators used to check the lower-bound argument
//! for polytope approximation.

pub mod approx;
pub mod bodies;
pub mod centers;
pub mod cli;
pub mod design;
pub mod error;
pub mod hardness;
pub mod json;
pub mod linalg;
pub mod polarity;
pub mod rng;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
