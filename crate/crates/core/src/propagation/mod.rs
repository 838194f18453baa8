//! Scalar NLSE split-step Fourier engine with per-span pump IF taps and the
//! receiver-side linear operations.

mod dump;
mod link;
mod receiver;
mod ssfm;

pub use dump::{read_dump, write_dump, Dump};
pub use link::{amplify, ase_psd, intensity_fluctuation_spectrum, propagate_link, IfStack, PumpTap};
pub use receiver::{bandpass_filter, chromatic_dispersion_compensate, to_baseband};
pub use ssfm::{ssfm_span, StepConfig, StepMode};
