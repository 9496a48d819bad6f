//! Batch normalization over flattened `[rows, features]` activations.
//!
//! Sits between a layer's affine output and its activation. Convolutions
//! fold batch and spatial positions into the row axis, so statistics are
//! per output channel. Rows are normalized with batch statistics while
//! training (two or more rows required) and with running statistics during
//! inference. Moment sums run in `f64` regardless of the activation type.

use crate::error::{Error, Result};
use crate::nn::{ParamRef, Phase, StateRef};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-5;

pub struct BatchNorm<T: Scalar> {
    f: usize,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    dgamma: Tensor<T>,
    dbeta: Tensor<T>,
    xhat: Vec<T>,
    inv_std: Vec<f64>,
    cached_n: usize,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(f: usize) -> Self {
        BatchNorm {
            f,
            gamma: Tensor::filled(&[f], T::one()),
            beta: Tensor::zeros(&[f]),
            running_mean: Tensor::zeros(&[f]),
            running_var: Tensor::filled(&[f], T::one()),
            dgamma: Tensor::zeros(&[f]),
            dbeta: Tensor::zeros(&[f]),
            xhat: Vec::new(),
            inv_std: Vec::new(),
            cached_n: 0,
        }
    }

    pub fn features(&self) -> usize {
        self.f
    }

    fn check(&self, x_len: usize, n: usize, f: usize, op: &'static str) -> Result<()> {
        if f != self.f {
            return Err(Error::shape(op, format!("{f} features, layer has {}", self.f)));
        }
        if x_len != n * f {
            return Err(Error::shape(op, format!("{x_len} values for {n} rows x {f} features")));
        }
        Ok(())
    }

    /// Normalize `x` in place.
    pub fn forward(&mut self, x: &mut [T], n: usize, f: usize, phase: Phase) -> Result<()> {
        self.check(x.len(), n, f, "batchnorm")?;
        match phase {
            Phase::Eval => {
                for row in x.chunks_exact_mut(f) {
                    for (j, v) in row.iter_mut().enumerate() {
                        let rm = self.running_mean.data()[j].to64();
                        let rv = self.running_var.data()[j].to64();
                        let xhat = (v.to64() - rm) / (rv + BN_EPS).sqrt();
                        *v = T::of(self.gamma.data()[j].to64() * xhat + self.beta.data()[j].to64());
                    }
                }
                Ok(())
            }
            Phase::Train => {
                if n < 2 {
                    return Err(Error::invalid(
                        "batchnorm",
                        format!("training needs at least 2 rows, got {n}"),
                    ));
                }
                let mut mean = vec![0.0f64; f];
                for row in x.chunks_exact(f) {
                    for (m, v) in mean.iter_mut().zip(row) {
                        *m += v.to64();
                    }
                }
                for m in &mut mean {
                    *m /= n as f64;
                }
                let mut var = vec![0.0f64; f];
                for row in x.chunks_exact(f) {
                    for (j, v) in row.iter().enumerate() {
                        let d = v.to64() - mean[j];
                        var[j] += d * d;
                    }
                }
                for v in &mut var {
                    *v /= n as f64;
                }
                self.inv_std = var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
                self.xhat.clear();
                self.xhat.reserve(n * f);
                for row in x.chunks_exact_mut(f) {
                    for (j, v) in row.iter_mut().enumerate() {
                        let xh = (v.to64() - mean[j]) * self.inv_std[j];
                        self.xhat.push(T::of(xh));
                        *v = T::of(self.gamma.data()[j].to64() * xh + self.beta.data()[j].to64());
                    }
                }
                self.cached_n = n;
                for j in 0..f {
                    let rm = self.running_mean.data()[j].to64();
                    let rv = self.running_var.data()[j].to64();
                    self.running_mean.data_mut()[j] =
                        T::of(BN_MOMENTUM * rm + (1.0 - BN_MOMENTUM) * mean[j]);
                    self.running_var.data_mut()[j] =
                        T::of(BN_MOMENTUM * rv + (1.0 - BN_MOMENTUM) * var[j]);
                }
                Ok(())
            }
        }
    }

    /// Turn the output gradient `dy` into the input gradient in place and
    /// accumulate the scale and shift gradients.
    pub fn backward(&mut self, dy: &mut [T], n: usize, f: usize) -> Result<()> {
        self.check(dy.len(), n, f, "batchnorm backward")?;
        if self.cached_n != n || self.xhat.len() != n * f {
            return Err(Error::invalid(
                "batchnorm backward",
                "no matching training forward pass cached",
            ));
        }
        let mut sum_dy = vec![0.0f64; f];
        let mut sum_dy_xhat = vec![0.0f64; f];
        for (row, xrow) in dy.chunks_exact(f).zip(self.xhat.chunks_exact(f)) {
            for j in 0..f {
                sum_dy[j] += row[j].to64();
                sum_dy_xhat[j] += row[j].to64() * xrow[j].to64();
            }
        }
        for j in 0..f {
            self.dbeta.data_mut()[j] += T::of(sum_dy[j]);
            self.dgamma.data_mut()[j] += T::of(sum_dy_xhat[j]);
        }
        let nf = n as f64;
        for (row, xrow) in dy.chunks_exact_mut(f).zip(self.xhat.chunks_exact(f)) {
            for j in 0..f {
                let g = self.gamma.data()[j].to64() * self.inv_std[j] / nf;
                let v = nf * row[j].to64() - sum_dy[j] - xrow[j].to64() * sum_dy_xhat[j];
                row[j] = T::of(g * v);
            }
        }
        Ok(())
    }

    pub fn params(&mut self) -> Vec<ParamRef<'_, T>> {
        vec![
            ("gamma".to_string(), &mut self.gamma, &mut self.dgamma),
            ("beta".to_string(), &mut self.beta, &mut self.dbeta),
        ]
    }

    pub fn state(&mut self) -> Vec<StateRef<'_, T>> {
        vec![
            ("running_mean".to_string(), &mut self.running_mean),
            ("running_var".to_string(), &mut self.running_var),
        ]
    }
}
