//! Minimal differentiable-layer engine.
//!
//! Layers operate on batched tensors with a leading batch dimension and are
//! generic over the scalar type, so gradient checks can run the exact same
//! code in `f64` while training runs in `f32`. Forward passes cache what the
//! matching backward pass needs; parameters and their gradients live inside
//! the layers and are visited by name in a fixed order.

pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod gemm;
pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod pool;

pub use batchnorm::BatchNorm;
pub use conv::Conv2d;
pub use dense::Dense;
pub use gradcheck::{grad_check, FdTarget, GradReport};
pub use loss::mse_loss;
pub use optim::RmsProp;
pub use pool::MaxPool;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Whether a forward pass is part of training or inference.
///
/// Training uses batch statistics and active dropout and caches
/// intermediates for the backward pass; inference uses running statistics
/// and no dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Linear => x,
            Activation::Sigmoid => {
                // Evaluate on the side that keeps exp() from overflowing.
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            }
        }
    }

    /// Derivative expressed through the activation output.
    pub fn deriv_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

/// Weight initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Every weight and bias uniform in `[-1, 1)`.
    Uniform,
    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    Scaled,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::Uniform => "uniform",
            InitMode::Scaled => "scaled",
        }
    }

    pub fn draw<T: Scalar>(self, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> T {
        let bound = match self {
            InitMode::Uniform => 1.0,
            InitMode::Scaled => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        T::of(rng.gen_range(-bound..bound))
    }

    pub fn draw_bias<T: Scalar>(self, rng: &mut ChaCha8Rng) -> T {
        match self {
            InitMode::Uniform => T::of(rng.gen_range(-1.0..1.0)),
            InitMode::Scaled => T::zero(),
        }
    }
}

impl std::str::FromStr for InitMode {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "uniform" => Ok(InitMode::Uniform),
            "scaled" => Ok(InitMode::Scaled),
            other => Err(crate::error::Error::invalid("init mode", format!("unknown mode {other:?}"))),
        }
    }
}

/// Named (value, gradient) pair handed to the optimizer and the checkpoint
/// writer. The gradient has the same shape as the value.
pub type ParamRef<'a, T> = (String, &'a mut Tensor<T>, &'a mut Tensor<T>);

/// Named non-trainable tensor (batch-norm running statistics).
pub type StateRef<'a, T> = (String, &'a mut Tensor<T>);
