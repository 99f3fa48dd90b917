use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline or its harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in input field")]
    NonFinite,

    #[error("kernel of size {kernel} does not fit a {width}x{height} field")]
    KernelTooLarge {
        kernel: usize,
        width: usize,
        height: usize,
    },

    #[error("tap depth {tap} (+{offset}) exceeds the deepest cascade layer {deepest}")]
    TapOutOfRange {
        tap: usize,
        offset: usize,
        deepest: usize,
    },

    #[error("region lies outside the frame")]
    RegionOutsideFrame,

    #[error("no actual targets in run (N_AT = 0)")]
    NoTargets,

    #[error("empty frame sequence in {0}")]
    EmptySequence(PathBuf),

    #[error("failed to read image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed record: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
