//! Algorithm families for the bandit protocol.
//!
//! Every algorithm is a state machine: `propose` yields the next query
//! point, `observe` feeds back the noisy loss. The `drive` loop mediates
//! between a machine and a loss oracle so that each round consumes exactly
//! one query, which keeps the oracle's counter equal to the round index.

pub mod barrier;
pub mod bisection;
pub mod cutting;
pub mod ew;
pub mod ftrl;
pub mod gd;
pub mod newton;
pub mod submod;

use crate::losses::LossOracle;
use crate::rng::Rng;
use crate::{Result, Vector};

pub use barrier::{damped_newton, damped_newton_capped, Barrier};

pub trait BanditAlgorithm {
    /// The point queried this round.
    fn propose(&mut self, rng: &mut Rng) -> Result<Vector>;
    /// The observed loss for the last proposal.
    fn observe(&mut self, y: f64) -> Result<()>;
    /// Non-fatal tuning diagnostics accumulated during the run.
    fn warnings(&self) -> &[String] {
        &[]
    }
}

/// One protocol round: the queried point and what came back.
#[derive(Debug, Clone)]
pub struct Played {
    pub proposal: Vector,
    pub observation: f64,
}

/// Full record of a run in query order.
#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub plays: Vec<Played>,
    pub warnings: Vec<String>,
}

/// Run `alg` against `oracle` for `n` queries.
pub fn drive(
    alg: &mut dyn BanditAlgorithm,
    oracle: &mut LossOracle,
    n: usize,
    rng: &mut Rng,
) -> Result<RunTrace> {
    let mut plays = Vec::with_capacity(n);
    for t in 0..n {
        let x = alg.propose(rng)?;
        let y = oracle.query(t, &x);
        alg.observe(y)?;
        plays.push(Played { proposal: x, observation: y });
    }
    Ok(RunTrace { plays, warnings: alg.warnings().to_vec() })
}
