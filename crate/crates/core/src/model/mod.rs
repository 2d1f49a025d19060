//! The two-branch network: a time synchronous branch over frame-level
//! features and a time asynchronous branch over dialogue context, fused by a
//! fully-connected layer and trained with a large-margin softmax.

mod config;
mod network;

pub use config::{FeatureSet, FusionConfig, ModelConfig, TabConfig, TsbConfig, AUDIO25_DIM, FBK250_DIM, MAX_SPAN};
pub use network::{argmax, BatchOutcome, BranchOutput, ModelInput, TsbInput, TwoBranchModel};
