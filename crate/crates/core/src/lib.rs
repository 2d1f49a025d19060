//! Two-branch multimodal emotion recognition.
//!
//! A time synchronous branch fuses frame-level audio features with per-frame
//! word vectors and pools them with multi-head self-attention. A time
//! asynchronous branch pools sentence embeddings of neighbouring utterances
//! in the dialogue. Both embeddings feed a fully-connected classifier trained
//! with a large-margin softmax loss.
//!
//! The crate contains everything needed to go from audio and transcripts to
//! cross-validated accuracy figures:
//!
//! - [`dsp`]: log Mel filterbanks, NCCF pitch, deltas and normalisation.
//! - [`text`]: word tables, sentence stores, frame alignment, context windows.
//! - [`nn`]: a small reverse-mode gradient engine and the layers the model uses.
//! - [`model`]: the two-branch network.
//! - [`train`]: SGD with momentum under a newbob learning-rate schedule.
//! - [`eval`]: manifests, label schemes, metrics, folds and cross-validation.
//! - [`synth`]: a synthetic corpus with known structure for end-to-end checks.

pub mod dsp;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod synth;
pub mod text;
pub mod train;

pub use error::{Error, Result};
