//! Masked time-series autoencoder at desk scale.
//!
//! A self-contained implementation of masked autoencoding for time
//! series: a dense tensor core with reverse-mode autodiff, a data
//! pipeline for CSV and synthetic series, the encoder-decoder model with
//! pluggable masking strategies, pretraining and frozen-encoder
//! fine-tuning loops, and the downstream evaluation protocols
//! (decoder-based forecasting, ridge probes, classification probes, and
//! the ablation matrix).
//!
//! The `book/` directory in the repository walks through each concept
//! with runnable snippets; those snippets compile as doctests of this
//! crate.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod rng;
pub mod tensor;

pub use error::{Error, ErrorKind, Result};
pub use tensor::{Element, Tensor};
