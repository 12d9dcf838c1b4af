//! Crate-wide error type.

use alloc::string::String;
use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation precondition was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A position or velocity became non-finite during integration.
    #[error("numerical divergence at step {step}, garment {garment}, particle {particle}")]
    NumericalDivergence {
        step: u64,
        garment: u32,
        particle: u32,
    },

    /// Scene generation could not settle within the step budget.
    #[error("scene generation failed to settle (seed {seed})")]
    SceneGeneration { seed: u64 },

    /// A camera saw no particles at all.
    #[error("empty observation: no particle visible from the camera")]
    EmptyObservation,

    /// Malformed or truncated binary blob (snapshot, dataset, checkpoint).
    #[error("format error: {0}")]
    Format(String),

    /// Bad input to a network operation (shape mismatch, non-finite values,
    /// out-of-range index).
    #[error("network input error: {0}")]
    NetInput(String),

    /// A gradient or parameter tensor became non-finite.
    #[error("non-finite value in tensor '{tensor}'")]
    NonFiniteTensor { tensor: &'static str },

    /// Dataset collection could not reach the required class balance within
    /// its rollout budget.
    #[error("class starvation collecting {kind} data (seed {seed}): {positives} positive / {negatives} negative after {rollouts} rollouts")]
    ClassStarvation {
        kind: &'static str,
        seed: u64,
        positives: u64,
        negatives: u64,
        rollouts: u64,
    },

    /// Training was asked to run on a dataset it cannot learn from.
    #[error("unusable dataset: {0}")]
    UnusableDataset(String),

    /// Policy or evaluation configuration problem.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl core::fmt::Display) -> Self {
        Error::InvalidParameter(alloc::format!("{msg}"))
    }

    pub fn format(msg: impl core::fmt::Display) -> Self {
        Error::Format(alloc::format!("{msg}"))
    }

    pub fn net_input(msg: impl core::fmt::Display) -> Self {
        Error::NetInput(alloc::format!("{msg}"))
    }

    pub fn config(msg: impl core::fmt::Display) -> Self {
        Error::Config(alloc::format!("{msg}"))
    }
}
