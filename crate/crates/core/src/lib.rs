//! Frequency-selective PAPR reduction for OFDM.
//!
//! The crate implements iterative clipping and filtering (ICF) and iterative
//! clipping with error filtering (ICEF). ICEF separates the clipping noise in
//! the frequency domain at each iteration and re-injects it only on a chosen
//! subset of the passband, leaving the remaining subcarriers distortion free.
//!
//! Layout:
//! * [`waveform`]: numerology, QAM data, OFDM synthesis, PAPR and the soft limiter.
//! * [`mask`]: noisy/clean/null subcarrier partitions and their builders.
//! * [`engine`]: the clipping loops and the per-iteration operation count model.
//! * [`metrics`]: CCDF, MSE and clipping-noise statistics, feasibility rules.
//! * [`experiment`]: seeded ensemble sweeps and their CSV/JSON output.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod mask;
pub mod metrics;
pub mod waveform;

pub use error::{Error, Result};
