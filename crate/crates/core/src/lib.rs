//! Slotted simulator for Age of Semantic Importance (AoSI) in multi-source
//! semantic communication, with a DQN harness that learns scheduling and
//! symbols-per-word allocation.
//!
//! The layers, bottom up: [`config`] and seeds, [`channel`] fading,
//! [`semantics`] similarity and latency, [`age`] bookkeeping, [`policy`]
//! actions and rule schedulers, [`dqn`] learners, [`engine`] episodes and
//! sweeps, and [`oracle`] reference computations.

pub mod age;
pub mod channel;
pub mod cli;
pub mod config;
pub mod dqn;
pub mod engine;
pub mod oracle;
pub mod policy;
pub mod semantics;

pub use config::{load_config, RunConfig, SimConfig};
pub use engine::Simulator;
pub use policy::{Action, PolicyKind};
pub use semantics::Semantics;
