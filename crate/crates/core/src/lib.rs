//! Cross-phase modulation phase-noise modeling for multi-span WDM links.
//!
//! The crate has four layers: parameters and signals ([`units`], [`signal`]),
//! a split-step pump-probe simulator ([`propagation`]), the analytic model
//! ([`analytic`]), and receiver-side metrics and BER prediction ([`metrics`],
//! [`ber`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod ber;
pub mod error;
pub mod field;
pub mod fourier;
pub mod metrics;
pub mod propagation;
pub mod signal;
pub mod units;

pub use error::{Error, Result};
pub use field::{FieldMetadata, SampledField, Spectrum};
