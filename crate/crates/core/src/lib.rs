//! Simulator and learner for an energy-harvesting cognitive radio that
//! cooperatively relays undelivered primary packets.
//!
//! - [`stochastic`]: Markov-modulated arrivals, two-state links, seeded streams.
//! - [`simcore`]: the slotted five-queue network and its one-slot transition.
//! - [`rl`]: state quantization, reward, tabular Q-learning.
//! - [`experiment`]: evaluation, parameter sweeps, and the exact
//!   value-iteration oracle used to validate learning on small instances.

pub mod error;
pub mod experiment;
pub mod rl;
pub mod simcore;
pub mod stochastic;

pub use error::{ArtifactError, ModelError, OracleError, RlError};
