//! Fully connected layer: affine, optional batch norm, activation, optional
//! inverted dropout, applied in that order.
//!
//! Weights are stored `[in, out]` so the forward product `x * w` needs no
//! transpose; the backward pass transposes `w` once for the input gradient
//! and the (much smaller) activations once for the weight gradient.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::batchnorm::BatchNorm;
use crate::nn::dropout::dropout_mask;
use crate::nn::{gemm, Activation, InitMode, ParamRef, Phase, StateRef};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub struct Dense<T: Scalar> {
    in_dim: usize,
    out_dim: usize,
    pub w: Tensor<T>,
    pub b: Tensor<T>,
    pub bn: Option<BatchNorm<T>>,
    act: Activation,
    dropout: f64,
    dw: Tensor<T>,
    db: Tensor<T>,
    x_cache: Vec<T>,
    post_act: Vec<T>,
    mask: Vec<T>,
    cached_batch: usize,
    scratch: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        act: Activation,
        with_bn: bool,
        dropout: f64,
        init: InitMode,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!((0.0..1.0).contains(&dropout), "dropout rate {dropout} outside [0, 1)");
        let w = Tensor::from_fn(&[in_dim, out_dim], |_| init.draw(in_dim, out_dim, rng));
        let b = Tensor::from_fn(&[out_dim], |_| init.draw_bias(rng));
        Dense {
            in_dim,
            out_dim,
            dw: Tensor::zeros(w.dims()),
            db: Tensor::zeros(b.dims()),
            w,
            b,
            bn: with_bn.then(|| BatchNorm::new(out_dim)),
            act,
            dropout,
            x_cache: Vec::new(),
            post_act: Vec::new(),
            mask: Vec::new(),
            cached_batch: 0,
            scratch: Vec::new(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `x` is `[batch, in]`. Dropout draws one value per output element from
    /// `rng`, which is required exactly when training with a nonzero rate.
    pub fn forward(
        &mut self,
        x: &Tensor<T>,
        phase: Phase,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tensor<T>> {
        let [batch, in_dim] = *x.dims() else {
            return Err(Error::shape("dense", format!("expected 2-d input, got {:?}", x.dims())));
        };
        if in_dim != self.in_dim {
            return Err(Error::shape(
                "dense",
                format!("input width {in_dim}, layer expects {}", self.in_dim),
            ));
        }
        let mut y = vec![T::zero(); batch * self.out_dim];
        gemm::gemm_nn(x.data(), self.w.data(), batch, self.in_dim, self.out_dim, false, &mut y);
        for row in y.chunks_exact_mut(self.out_dim) {
            for (v, &bv) in row.iter_mut().zip(self.b.data()) {
                *v += bv;
            }
        }
        if let Some(bn) = &mut self.bn {
            bn.forward(&mut y, batch, self.out_dim, phase)?;
        }
        for v in &mut y {
            *v = self.act.apply(*v);
        }
        if phase == Phase::Train {
            self.post_act.clear();
            self.post_act.extend_from_slice(&y);
            if self.dropout > 0.0 {
                let rng = rng.ok_or_else(|| {
                    Error::invalid("dense", "training with dropout needs an rng")
                })?;
                self.mask = dropout_mask(y.len(), self.dropout, rng)?;
                for (v, &m) in y.iter_mut().zip(&self.mask) {
                    *v *= m;
                }
            } else {
                self.mask.clear();
            }
            self.x_cache.clear();
            self.x_cache.extend_from_slice(x.data());
            self.cached_batch = batch;
        }
        Tensor::from_vec(&[batch, self.out_dim], y)
    }

    /// Accumulate weight gradients and return the input gradient.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let batch = self.cached_batch;
        if batch == 0 {
            return Err(Error::invalid("dense", "backward before training forward"));
        }
        if *dy.dims() != [batch, self.out_dim] {
            return Err(Error::shape(
                "dense",
                format!("gradient dims {:?}, expected [{batch}, {}]", dy.dims(), self.out_dim),
            ));
        }
        let mut dz = dy.data().to_vec();
        if !self.mask.is_empty() {
            for (g, &m) in dz.iter_mut().zip(&self.mask) {
                *g *= m;
            }
        }
        for (g, &a) in dz.iter_mut().zip(&self.post_act) {
            *g *= self.act.deriv_from_output(a);
        }
        if let Some(bn) = &mut self.bn {
            bn.backward(&mut dz, batch, self.out_dim)?;
        }
        for row in dz.chunks_exact(self.out_dim) {
            for (g, &v) in self.db.data_mut().iter_mut().zip(row) {
                *g += v;
            }
        }

        self.scratch.clear();
        self.scratch.resize(batch * self.in_dim, T::zero());
        gemm::transpose(&self.x_cache, batch, self.in_dim, &mut self.scratch);
        gemm::gemm_nn(&self.scratch, &dz, self.in_dim, batch, self.out_dim, true, self.dw.data_mut());

        self.scratch.clear();
        self.scratch.resize(self.in_dim * self.out_dim, T::zero());
        gemm::transpose(self.w.data(), self.in_dim, self.out_dim, &mut self.scratch);
        let mut dx = vec![T::zero(); batch * self.in_dim];
        gemm::gemm_nn(&dz, &self.scratch, batch, self.out_dim, self.in_dim, false, &mut dx);
        Tensor::from_vec(&[batch, self.in_dim], dx)
    }

    pub fn params(&mut self) -> Vec<ParamRef<'_, T>> {
        let mut v = vec![
            ("w".to_string(), &mut self.w, &mut self.dw),
            ("b".to_string(), &mut self.b, &mut self.db),
        ];
        if let Some(bn) = &mut self.bn {
            v.extend(bn.params());
        }
        v
    }

    pub fn state(&mut self) -> Vec<StateRef<'_, T>> {
        self.bn.as_mut().map(|bn| bn.state()).unwrap_or_default()
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len() + self.bn.as_ref().map_or(0, |_| 2 * self.out_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn forward_matches_manual_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut layer: Dense<f64> = Dense::new(3, 2, Activation::Linear, false, 0.0, InitMode::Scaled, &mut rng);
        layer.w.data_mut().copy_from_slice(&[1.0, 2.0, 0.5, -1.0, 0.0, 3.0]);
        layer.b.data_mut().copy_from_slice(&[0.25, -0.25]);
        let x = Tensor::from_vec(&[1, 3], vec![2.0, -1.0, 1.0]).unwrap();
        let y = layer.forward(&x, Phase::Eval, None).unwrap();
        // [2*1 - 1*0.5 + 1*0 + 0.25, 2*2 + 1*1 + 1*3 - 0.25]
        assert!((y.data()[0] - 1.75).abs() < 1e-12);
        assert!((y.data()[1] - 7.75).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_bounds_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut layer: Dense<f64> = Dense::new(8, 4, Activation::Sigmoid, false, 0.0, InitMode::Uniform, &mut rng);
        let x = Tensor::from_fn(&[5, 8], |_| rng.gen_range(-10.0..10.0));
        let y = layer.forward(&x, Phase::Eval, None).unwrap();
        assert!(y.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    fn proj_loss(layer: &mut Dense<f64>, x: &Tensor<f64>, proj: &Tensor<f64>) -> f64 {
        // Fresh rng per call keeps any dropout mask identical across
        // finite-difference evaluations.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let y = layer.forward(x, Phase::Train, Some(&mut rng)).unwrap();
        y.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-3;
        // (batch norm, dropout) in all combinations.
        for (with_bn, rate) in [(false, 0.0), (true, 0.0), (false, 0.3), (true, 0.3)] {
            let mut rng = ChaCha8Rng::seed_from_u64(21);
            let mut layer: Dense<f64> =
                Dense::new(6, 5, Activation::Sigmoid, with_bn, rate, InitMode::Scaled, &mut rng);
            let mut x = Tensor::from_fn(&[4, 6], |_| rng.gen_range(-1.5..1.5));
            let proj = Tensor::from_fn(&[4, 5], |_| rng.gen_range(-1.0..1.0));

            proj_loss(&mut layer, &x, &proj);
            let dx = layer.backward(&proj).unwrap();
            let dw = layer.dw.clone();
            let db = layer.db.clone();

            for &i in &[0usize, 9, 23] {
                let keep = x.data()[i];
                x.data_mut()[i] = keep + h;
                let up = proj_loss(&mut layer, &x, &proj);
                x.data_mut()[i] = keep - h;
                let down = proj_loss(&mut layer, &x, &proj);
                x.data_mut()[i] = keep;
                let num = (up - down) / (2.0 * h);
                let a = dx.data()[i];
                let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-8);
                assert!(rel < 1e-4, "bn={with_bn} rate={rate} dx[{i}] {a} vs {num}");
            }
            for &i in &[0usize, 13, 29] {
                let keep = layer.w.data()[i];
                layer.w.data_mut()[i] = keep + h;
                let up = proj_loss(&mut layer, &x, &proj);
                layer.w.data_mut()[i] = keep - h;
                let down = proj_loss(&mut layer, &x, &proj);
                layer.w.data_mut()[i] = keep;
                let num = (up - down) / (2.0 * h);
                let a = dw.data()[i];
                let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-8);
                assert!(rel < 1e-4, "bn={with_bn} rate={rate} dw[{i}] {a} vs {num}");
            }
            if !with_bn {
                for i in 0..5 {
                    let keep = layer.b.data()[i];
                    layer.b.data_mut()[i] = keep + h;
                    let up = proj_loss(&mut layer, &x, &proj);
                    layer.b.data_mut()[i] = keep - h;
                    let down = proj_loss(&mut layer, &x, &proj);
                    layer.b.data_mut()[i] = keep;
                    let num = (up - down) / (2.0 * h);
                    let a = db.data()[i];
                    let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-8);
                    assert!(rel < 1e-4, "rate={rate} db[{i}] {a} vs {num}");
                }
            }
        }
    }

    #[test]
    fn dropout_needs_rng_and_eval_skips_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut layer: Dense<f64> = Dense::new(4, 50, Activation::Linear, false, 0.5, InitMode::Scaled, &mut rng);
        let x = Tensor::from_fn(&[2, 4], |_| rng.gen_range(-1.0..1.0));
        assert!(layer.forward(&x, Phase::Train, None).is_err());
        let eval = layer.forward(&x, Phase::Eval, None).unwrap();
        let mut rng2 = ChaCha8Rng::seed_from_u64(6);
        let train = layer.forward(&x, Phase::Train, Some(&mut rng2)).unwrap();
        let zeroed = train.data().iter().filter(|&&v| v == 0.0).count();
        assert!(zeroed > 10, "expected roughly half of {} outputs dropped", train.len());
        // Survivors are the eval values scaled by 1/(1-rate).
        for (t, e) in train.data().iter().zip(eval.data()) {
            if *t != 0.0 {
                assert!((t - e * 2.0).abs() < 1e-12);
            }
        }
    }
}
