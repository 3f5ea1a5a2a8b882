//! Joint spectrum reuse and power allocation for hybrid V2I/V2V uplinks.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`] drops vehicles on a Manhattan grid and draws large-scale and
//!   fast-fading gains.
//! - [`problem`] evaluates SINR, ergodic capacities, the latency metric, the
//!   weighted objective and the constraint set for a candidate [`Allocation`].
//! - [`solvers`] holds the exhaustive benchmark, fixed-power baselines and a
//!   small brute-force oracle.
//! - [`neural`] is a from-scratch dense tensor engine with the dual-head CNN
//!   and fully connected network used to approximate the exhaustive solver.
//! - [`dataset`] generates, stores and loads labelled samples.
//! - [`eval`] runs methods side by side and produces CDF, error-rate and
//!   runtime tables.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is on (the default) and plain iterators otherwise.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod matching;
pub mod neural;
pub mod par;
pub mod problem;
pub mod rng;
pub mod solvers;
pub mod units;

pub use channel::{ChannelGains, GridGeometry, LinkDims, LinkGains, Topology};
pub use config::{ConfigError, ScenarioConfig};
pub use problem::{Allocation, CapacityReport, ObjectiveWeights};
pub use solvers::{PowerGrid, SolverResult};
