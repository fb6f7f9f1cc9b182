//! Manifest-driven toolkit for training and evaluating text decoders over
//! multichannel neural (MEG-style) recordings.
//!
//! The pipeline grafts a convolutional channel adapter onto a speech-style
//! encoder-decoder backbone, trains only low-rank adapters on the encoder
//! plus the frontend (decoder frozen), and evaluates generated text with
//! translation metrics in both free-run and teacher-forcing modes.

pub mod augment;
pub mod chart;
pub mod commands;
pub mod config;
pub mod error;
pub mod generate;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod report;
pub mod signal;
pub mod train;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil;
