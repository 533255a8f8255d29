//! Contract pricing and Bayesian priority matching for LTE-U spectrum sharing.
//!
//! The crate is split along the pipeline an operator runs:
//!
//! - [`net`]: scene geometry, path-loss gains, the coupled transmit-power
//!   fixed point and Shannon rates on licensed and unlicensed bands
//!   (with listen-before-talk backoff).
//! - [`contract`]: user types, valuations, the closed-form optimal price
//!   menu and the feasibility checkers (truth-telling, participation,
//!   ordering and the envelope conditions).
//! - [`matching`]: file chunking, user and base-station preferences with
//!   priority classes, the deferred-acceptance allocation and stability
//!   certification.
//! - [`harness`]: scenario presets, baselines, metrics and experiment
//!   sweeps with CSV/JSON provenance output.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod contract;
pub mod error;
pub mod harness;
pub mod matching;
pub mod net;
pub mod stats;

pub use config::{LogBase, RadioParams, ScenarioParams};
pub use contract::{Contract, ContractMenu, ExpectedQuantities, TypeGrid, ValuationParams};
pub use error::{Error, Result};
pub use matching::{Band, BsChannelPair, Matching, PriorityAssignment, UserSubfilePair};
pub use net::{GainMatrix, NetworkScene, Point, PowerProfile};
