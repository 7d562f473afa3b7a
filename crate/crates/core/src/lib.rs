//! Bayesian Confidence Propagation Neural Network engine.
//!
//! Weights and biases are closed-form functions of probability traces, so
//! the quantities an explanation needs (additive evidence, mutual
//! information, attractor state) are read off the model directly. The
//! [`oracle`] module recomputes them by brute force on small instances.

pub mod commands;
pub mod config;
pub mod config_xai;
pub mod data;
pub mod error;
pub mod explain;
pub mod layout;
pub mod learning;
pub mod network;
pub mod oracle;
pub mod par;
pub mod recurrent;
pub mod report;
pub mod snapshot;
pub mod spiking;
pub mod stats;
pub mod traces;

pub use config::{HypercolumnSpec, Mask, NetworkConfig, RecurrenceConfig, SpikingConfig};
pub use data::Dataset;
pub use error::{Error, Result};
pub use layout::Layout;
pub use network::{ActivationState, Model};
pub use traces::{TraceState, WeightView};
