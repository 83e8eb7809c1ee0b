//! Per-access-category Markov chain over (backoff stage, backoff or TXOP
//! counter, queue length).

mod censor;
mod matrix;
mod space;
mod stationary;

use std::io::{self, Write};

use serde::Serialize;

pub use censor::solve_chain;
pub use matrix::{build_transition_matrix, ChainInputs, TransitionMatrix};
pub use space::{State, StateSpace};
pub use stationary::{residual, stationary, Stationary, RESIDUAL_TOL};

use crate::error::ModelError;

/// Stationary behaviour of one access category's chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    #[serde(skip)]
    pub space: StateSpace,
    /// Stationary probability per state, in `space` order.
    pub b: Vec<f64>,
    /// Probability of transmitting in a randomly chosen backoff slot.
    pub tau: f64,
    /// Mean TXOP duration in seconds.
    pub t_txop: f64,
    /// True when no state carries TXOP weight and `t_txop` fell back to a
    /// single exchange.
    pub txop_fallback: bool,
    pub residual: f64,
}

impl SteadyState {
    /// Builds and solves the chain, then extracts τ and the TXOP duration.
    pub fn solve(space: StateSpace, inputs: &ChainInputs<'_>) -> Result<Self, ModelError> {
        let Stationary { b, residual } = solve_chain(&space, inputs)?;
        let tau = tau(&space, &b, inputs.p_collision, inputs.rho)?;
        let (t_txop, txop_fallback) = mean_txop_duration(&space, &b, inputs.durations.success, inputs.durations.exchange);
        Ok(Self {
            space,
            b,
            tau,
            t_txop,
            txop_fallback,
            residual,
        })
    }

    pub fn prob(&self, stage: u32, counter: i32, queue: u32) -> f64 {
        self.space.index(stage, counter, queue).map_or(0.0, |i| self.b[i])
    }

    /// Writes `stage counter queue probability` per state.
    pub fn write_states<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# index stage counter queue probability")?;
        for (i, (s, p)) in self.space.states().iter().zip(&self.b).enumerate() {
            writeln!(w, "{i} {} {} {} {p:.17e}", s.stage, s.counter, s.queue)?;
        }
        Ok(())
    }
}

/// Transmission probability per backoff slot. States with negative counters
/// take no backoff slot and are left out of the normalisation.
pub fn tau(space: &StateSpace, b: &[f64], p_collision: f64, rho: f64) -> Result<f64, ModelError> {
    let mut attempts = 0.0;
    let mut slots = 0.0;
    for (s, &p) in space.states().iter().zip(b) {
        if s.counter < 0 {
            continue;
        }
        slots += p;
        if s.counter == 0 {
            attempts += if s.queue == 0 { p * rho * (1.0 - p_collision) } else { p };
        }
    }
    if slots <= 0.0 {
        return Err(ModelError::Degenerate { what: "backoff slot mass" });
    }
    Ok((attempts / slots).clamp(0.0, 1.0))
}

/// Mean TXOP duration. Every TXOP ends in a `(0, -N, l)` state (limit
/// reached) or a `(0, k, 0)` state with `k < 0` (queue drained), having made
/// `-k` exchanges. Returns the single-exchange time and a flag when no
/// state carries weight.
pub fn mean_txop_duration(space: &StateSpace, b: &[f64], success: f64, exchange: f64) -> (f64, bool) {
    let n = space.txop_exchanges() as i32;
    let mut weight = 0.0;
    let mut total = 0.0;
    for (s, &p) in space.states().iter().zip(b) {
        if s.counter >= 0 || (s.counter > -n && s.queue > 0) {
            continue;
        }
        let exchanges = -s.counter;
        weight += p;
        total += p * (f64::from(exchanges - 1) * exchange + success);
    }
    if weight > 0.0 {
        (total / weight, false)
    } else {
        (success, true)
    }
}
