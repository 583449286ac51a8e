//! Simulator for totally asynchronous block-coordinate optimization with
//! Nesterov-style acceleration, plus heavy-ball and gradient-descent
//! comparators in the identical harness.
//!
//! The library is organized around the life of one experiment:
//!
//! - [`problem`]: separable objectives, box constraints, essential-neighbor
//!   structure, and the diagonal-dominance certificate.
//! - [`hyperparams`]: admissible `(γ, λ)` intervals, contraction factors,
//!   and operation budgets.
//! - [`dynamics`]: the single-step and double-step update laws.
//! - [`baselines`]: heavy-ball and projected-gradient block steps.
//! - [`network`]: gate schedules, channels, and origin timestamps.
//! - [`runtime`]: the tick loop, operation-cycle counter, traces, and
//!   bound verification.
//! - [`minimize`]: the reference minimizer every distance is measured from.
//! - [`config`] and [`sweep`]: experiment files, single runs, and
//!   multi-seed sweeps with CSV outputs.
//!
//! Sweeps and batch verification fan out across threads when the `parallel`
//! feature (default) is enabled; disabling it yields a dependency-free
//! sequential build with identical outputs.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod hyperparams;
pub mod minimize;
pub mod network;
pub mod problem;
pub mod runtime;
pub mod sweep;

pub use baselines::BaselineParams;
pub use dynamics::{pair_inf_distance, LocalPair};
pub use error::{Error, Result};
pub use hyperparams::{ContractionCert, HyperParams};
pub use network::Schedule;
pub use problem::{DominanceCert, SeparableProblem};
pub use runtime::{run_async, verify_bounds, Algo, AlgoParams, StopSpec, Trace};
