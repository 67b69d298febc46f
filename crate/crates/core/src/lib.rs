//! Tactile sensing stack for fin-ray grippers with embedded air channels.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`]: sensor frames, normalization, streaming median filter and
//!   the per-channel history ring.
//! - [`slip`]: Hann-windowed periodogram, band-max PSD feature, gated moving
//!   variance and the finger-level slip indicator.
//! - [`force`]: 24-dimensional temporal feature vector and an RBF
//!   ε-insensitive kernel regressor trained by SMO, with trial-wise CV.
//! - [`controller`]: the grasp state machine and its two baselines.
//! - [`sim`]: a stick-slip grasp simulator producing 2 kHz six-channel traces.
//! - [`eval`]: metrics, trace replay, threshold sweeps and latency benchmarks.
//! - [`pipeline`]: the streaming front end tying signal, slip and force together.

pub mod controller;
pub mod error;
pub mod eval;
pub mod force;
pub mod kv;
pub mod pipeline;
pub mod signal;
pub mod sim;
pub mod slip;
pub mod trace;

pub use controller::{ControllerConfig, GraspController, Phase, Policy};
pub use error::{Error, Result};
pub use eval::metrics::EvalReport;
pub use force::{ForceFeature, ForceModel, ForceTrial};
pub use pipeline::Pipeline;
pub use signal::{ChannelRing, Finger, PipelineConfig, SensorFrame, NUM_CHANNELS};
pub use slip::{SlipDetector, SlipState};
