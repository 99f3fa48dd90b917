//! Retina-inspired detector for small moving targets.
//!
//! Frames flow through a photoreceptor stage, ON/OFF bipolar bandpass and
//! leaky-integrator cascades ([`frontend`], [`temporal`]), oriented Gabor
//! quadrature filters and a centre-surround gate ([`spatial`]), opponent
//! motion energy with directionally selective inhibition ([`ganglion`]),
//! and finally thresholding plus density clustering ([`detector`]).
//! [`pipeline::Brnn`] strings the stages together; [`synth`] renders scenes
//! with exact ground truth and [`harness`] runs experiments over them.

pub mod config;
pub mod detector;
pub mod error;
pub mod frame;
pub mod frontend;
pub mod ganglion;
pub mod harness;
pub mod pipeline;
pub mod spatial;
pub mod synth;
pub mod temporal;

pub use config::RunConfig;
pub use detector::{Detection, DetectorParams, TruthTarget};
pub use error::{Error, Result};
pub use frame::FrameBuffer;
pub use pipeline::{detect, ActivationFrame, Brnn, FrameActivity, FrameDetections};
pub use synth::{Scene, SceneSpec};
