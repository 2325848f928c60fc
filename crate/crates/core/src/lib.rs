//! Distributed gradient descent modeled as a hybrid dynamical system.
//!
//! Agents flow in continuous time along gradients that were sampled at the
//! last communication event and held constant in between (sample-and-hold),
//! and exchange their blocks of the decision variable at discrete jumps
//! triggered by a shared countdown timer. The combined state is
//! `ξ = (z1, z2, τ)`: the concatenated agent states, the memory of the last
//! broadcast, and the timer.
//!
//! Modules:
//! - [`objective`]: objective contract, quadratic generator, block partitions.
//! - [`hybrid_core`]: flow and jump maps, the event-driven simulator, trajectories.
//! - [`agents`]: per-agent execution with a broadcast bus, equivalent to the
//!   monolithic simulator.
//! - [`analysis`]: convergence set distance, Lyapunov function, certified
//!   constants and trajectory checks.
//! - [`cli`]: experiment configs, presets, CSV/JSON output.

pub mod agents;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod hybrid_core;
pub mod objective;
pub(crate) mod vecops;

pub use error::{Error, Result};
