//! Unsupervised early warning of negative events in physiological signals.
//!
//! The pipeline turns an ECG (or a list of beat times) into per-beat wavelet
//! features, cuts them into fixed-length windows, embeds each window with an
//! LSTM sequence auto-encoder, clusters the unit-norm embeddings online with a
//! DenStream-style micro-cluster model, and raises an alarm when windows that
//! join dense clusters outside the calibrated normal set dominate a short
//! confidence window.
//!
//! Module map:
//!
//! - [`signal`]: R-peak detection, RR series, event onsets, Morlet CWT,
//!   windowing and feature scaling.
//! - [`autoencoder`]: LSTM encoder/decoder, exact BPTT gradients, Adam
//!   training and the model file format.
//! - [`cluster`]: online micro-cluster maintenance and macro-cluster queries.
//! - [`alarm`]: normal-cluster calibration and confidence-window alarms.
//! - [`eval`]: event-level and window-level scoring.
//! - [`pipeline`]: train/detect orchestration shared by the CLI and tests.
//! - [`synth`]: deterministic synthetic RR/ECG generator with injected events.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alarm;
pub mod autoencoder;
pub mod cluster;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod plot;
pub mod signal;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
