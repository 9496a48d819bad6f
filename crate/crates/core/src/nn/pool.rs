//! Max pooling with gradient routing to the winning position.

use crate::error::{Error, Result};
use crate::nn::Phase;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Non-overlapping max pool over the two spatial axes of a
/// `[batch, h, w, c]` tensor. Output extents are `h / ph` and `w / pw`
/// rounded down; trailing rows or columns that do not fill a window are
/// dropped. Ties go to the earliest position in row-major order.
pub struct MaxPool {
    ph: usize,
    pw: usize,
    argmax: Vec<usize>,
    x_dims: [usize; 4],
    pinned: bool,
}

impl MaxPool {
    pub fn new(ph: usize, pw: usize) -> Self {
        assert!(ph >= 1 && pw >= 1, "pool window must be at least 1x1");
        MaxPool { ph, pw, argmax: Vec::new(), x_dims: [0; 4], pinned: false }
    }

    /// Freeze the winner map: until released, forward gathers through the
    /// winners of the last tracking pass instead of rescanning windows.
    /// Finite differences of a pinned network probe the same branch of the
    /// piecewise loss that backward differentiates, so a probe landing on
    /// a switching boundary cannot corrupt the quotient.
    pub fn pin(&mut self, on: bool) -> Result<()> {
        if on && self.argmax.is_empty() {
            return Err(Error::invalid("maxpool", "pin before a tracking forward"));
        }
        self.pinned = on;
        Ok(())
    }

    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (oh, ow) = (h / self.ph, w / self.pw);
        if oh == 0 || ow == 0 {
            return Err(Error::shape(
                "maxpool",
                format!("input {h}x{w} smaller than window {}x{}", self.ph, self.pw),
            ));
        }
        Ok((oh, ow))
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>, phase: Phase) -> Result<Tensor<T>> {
        let [b, h, w, c] = *x.dims() else {
            return Err(Error::shape("maxpool", format!("expected 4-d input, got {:?}", x.dims())));
        };
        let (oh, ow) = self.out_hw(h, w)?;
        if self.pinned {
            if [b, h, w, c] != self.x_dims {
                return Err(Error::shape(
                    "maxpool",
                    format!("pinned to input {:?}, got {:?}", self.x_dims, x.dims()),
                ));
            }
            let xd = x.data();
            let mut out = Tensor::zeros(&[b, oh, ow, c]);
            for (slot, &at) in out.data_mut().iter_mut().zip(&self.argmax) {
                *slot = xd[at];
            }
            return Ok(out);
        }
        let track = phase == Phase::Train;
        self.argmax.clear();
        if track {
            self.argmax.resize(b * oh * ow * c, 0);
            self.x_dims = [b, h, w, c];
        } else {
            self.x_dims = [0; 4];
        }
        let xd = x.data();
        let mut out = Tensor::zeros(&[b, oh, ow, c]);
        let od = out.data_mut();
        for bi in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..c {
                        let mut best = T::neg_infinity();
                        let mut best_at = 0usize;
                        for py in 0..self.ph {
                            for px in 0..self.pw {
                                let at = ((bi * h + oy * self.ph + py) * w + ox * self.pw + px) * c + ch;
                                if xd[at] > best {
                                    best = xd[at];
                                    best_at = at;
                                }
                            }
                        }
                        let o = ((bi * oh + oy) * ow + ox) * c + ch;
                        od[o] = best;
                        if track {
                            self.argmax[o] = best_at;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let [b, h, w, c] = self.x_dims;
        if b == 0 {
            return Err(Error::invalid("maxpool", "backward before training forward"));
        }
        let (oh, ow) = self.out_hw(h, w)?;
        if *dy.dims() != [b, oh, ow, c] {
            return Err(Error::shape(
                "maxpool",
                format!("gradient dims {:?} do not match output [{b}, {oh}, {ow}, {c}]", dy.dims()),
            ));
        }
        let mut dx = Tensor::zeros(&[b, h, w, c]);
        let dxd = dx.data_mut();
        for (o, &g) in dy.data().iter().enumerate() {
            dxd[self.argmax[o]] += g;
        }
        Ok(dx)
    }
}
