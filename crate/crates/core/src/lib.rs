//! Bottom-up video saliency: static feature channels, correlation-type motion
//! detection, conspicuity fusion and Gaussian winner-take-all fixation
//! prediction, plus the standard gaze-prediction metrics.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fixation;
pub mod fusion;
pub mod map;
pub mod metrics;
pub mod motion;
mod parallel;
pub mod pipeline;
pub mod pyramid;
pub mod static_channels;

pub use config::{validate_config, FusionWeights, GwtaConfig, PipelineConfig};
pub use error::{BiasError, Result};
pub use map::{FrameRGB, GrayMap};
pub use pyramid::Pyramid;
