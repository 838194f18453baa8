//! Configuration, experiment recipes and result persistence for the `xpmif`
//! command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod recipes;

pub use config::{ExperimentConfig, Preset};
pub use error::{HarnessError, HarnessResult};
