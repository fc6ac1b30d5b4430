//! Adaptive payoff-redistribution incentives for cross-silo federated
//! learning.
//!
//! * [`game`]: the per-slot incentive game, its weighted potential and
//!   brute-force equilibrium oracles.
//! * [`precision`]: black-box precision sources (analytic saturation curves
//!   and a small FedAvg simulation).
//! * [`env`]: the repeated multi-agent environment with adaptive
//!   redistribution intensity and windowed observations.
//! * [`nn`]: tiny MLPs with reverse-mode gradients and a categorical policy.
//! * [`marl`]: decentralized clipped actor-critic training and baselines.
//! * [`exp`]: configuration, experiment commands, verification suite and
//!   CSV/JSONL/SVG output.

pub mod env;
pub mod error;
pub mod exp;
pub mod game;
pub mod marl;
pub mod nn;
pub mod precision;
pub mod seeds;

pub use error::{Error, Result};
