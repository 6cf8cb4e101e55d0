//! Trust-filtered online decentralized multi-task learning.
//!
//! Honest clients on a peer-to-peer graph learn personalized logistic models
//! under pairwise proximity constraints while a (possibly majority) set of
//! Byzantine neighbors sends arbitrary models and dual variables. Each honest
//! client accumulates stochastic trust observations per neighbor and only
//! consumes messages from neighbors whose accumulated score is nonnegative.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation:
//!
//! - [`topology`]: client graph and the honest/Byzantine partition
//! - [`trust`]: trust sampling, score accumulation, trusted sets
//! - [`taskmodel`]: drifting data, logistic loss, proximity constraint
//! - [`learner`]: per-client primal-dual state and updates
//! - [`adversary`]: Byzantine message generation
//! - [`oracle`]: offline comparator solver and bound calculators
//! - [`metrics`]: regret, constraint violation, misclassification, `T_f`
//! - [`engine`]: round loop, realizations, baselines
//!
//! IO, configuration files, and the command line live in the `trustfl` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod adversary;
pub mod engine;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod taskmodel;
pub mod topology;
pub mod trust;
pub mod vector;

pub use adversary::{AttackKind, AttackStrategy};
pub use engine::{
    run_experiment, run_realization, ExperimentResult, RealizationResult, RoundLog, SimConfig,
    Variant, World,
};
pub use error::{Error, Result};
pub use learner::{AlgorithmParams, ClientState, RoundMessage};
pub use oracle::{BoundConstants, Comparator, ComparatorSettings};
pub use taskmodel::{ConstraintParams, DataSample, TaskParams};
pub use topology::{ClientId, GraphTopology, TopologyKind, TopologySpec};
pub use trust::{TrustLedger, TrustModel};
pub use vector::ModelVector;

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
