//! simlab: a seeded, reproducible stochastic simulation toolkit.
//!
//! The crate is organised as a stack: counter-based random streams
//! ([`rng`]) feed random variate generators ([`samplers`]), which feed
//! Monte Carlo estimators ([`montecarlo`]), discrete-time Markov chains
//! ([`markov`]), continuous stochastic processes ([`processes`]),
//! stochastic chemical kinetics ([`ssa`]) and Markov chain Monte Carlo
//! ([`mcmc`]). The [`scenarios`] registry wires named studies to the
//! command-line interface.
//!
//! Everything is deterministic given a root seed: each replication and
//! each parallel worker draws from its own substream, so results do not
//! depend on scheduling or on how work is partitioned.

pub mod cli;
pub mod error;
pub mod rng;
pub mod markov;
pub mod mcmc;
pub mod montecarlo;
pub mod processes;
pub mod samplers;
pub mod scenarios;
pub mod ssa;

pub use error::{Result, SimError};
