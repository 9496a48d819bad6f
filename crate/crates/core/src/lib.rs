//! Audio-visual speech enhancement at desk scale.
//!
//! The crate covers the whole pipeline: a log-power STFT front end with
//! SIR/SAR-controlled mixing (`dsp`), a synthetic talking-mouth corpus and
//! image feature stacking (`visual`), a small differentiable-layer engine
//! with RMSprop and gradient checking (`nn`), the fused audio-visual network
//! and its audio-only / early-fusion variants (`model`), training loops with
//! early stopping and multi-style modality scheduling (`train`), and
//! objective quality metrics (`metrics`).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). Training runs in
//! `f32`; gradient checks and DSP reference math run the same code in `f64`.

pub mod dsp;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod tensor;
pub mod tnsr;
pub mod train;
pub mod visual;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Tensor in the training precision.
pub type Tensor32 = tensor::Tensor<f32>;
/// Tensor in the gradient-check / reference precision.
pub type Tensor64 = tensor::Tensor<f64>;
