//! Bandit convex optimisation at desk scale.
//!
//! A learner repeatedly proposes a point in a convex body, observes a noisy
//! scalar loss, and is judged by regret against the best fixed point in
//! hindsight. This crate implements the classical algorithm families for
//! that protocol: bisection in one dimension, gradient descent with
//! spherical smoothing, follow-the-regularised-leader with self-concordant
//! barriers, exponential weights (linear, quadratic and one-dimensional
//! kernel variants), stochastic cutting planes, online Newton steps with
//! Gaussian surrogates, and submodular minimisation through the Lovász
//! extension. A seeded simulation harness with CSV traces sits on top.
//!
//! Everything is deterministic given a seed: every source of randomness is
//! a named [`rng`] stream, so reruns of the same configuration are
//! byte-identical.

pub mod alg;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod losses;
pub mod rng;
pub mod sim;
pub mod surrogates;

/// Column vector over `f64`, the only scalar type used here.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix over `f64`.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use error::{Error, Result};

/// Convenience constructor mirroring `nalgebra::dvector!` for call sites
/// that build small fixed points.
pub fn vec2(x: f64, y: f64) -> Vector {
    Vector::from_vec(vec![x, y])
}
