//! Valid 2-D cross-correlation computed in place, without a patch matrix.
//!
//! The kernel tensor is stored `[kh, kw, cin, cout]` row-major, so for a
//! fixed kernel row `ky` the `[kw*cin, cout]` slab lines up with a
//! contiguous span of the input row `oy + ky`. Both passes slide that span
//! with a `[cout]` accumulator block; the inner kernels are monomorphized
//! per filter count so the block lives in registers. With the small filter
//! counts used here this streams the input once instead of materializing
//! patches many times its size.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::batchnorm::BatchNorm;
use crate::nn::{InitMode, ParamRef, Phase, StateRef};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub struct Conv2d<T: Scalar> {
    kh: usize,
    kw: usize,
    cin: usize,
    cout: usize,
    pub kern: Tensor<T>,
    pub bias: Tensor<T>,
    pub bn: Option<BatchNorm<T>>,
    dkern: Tensor<T>,
    dbias: Tensor<T>,
    x_saved: Vec<T>,
    x_dims: [usize; 4],
}

/// Spatial extents shared by the forward and backward sweeps.
#[derive(Clone, Copy)]
struct Sweep {
    b: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    run: usize,
    oh: usize,
    ow: usize,
}

/// `out[bi, oy, ox, :] = bias + sum over ky and the kw*cin span`, with the
/// filter count `C` fixed at compile time so the accumulator block stays in
/// registers. The kernel row loop is outermost so each input row is walked
/// while hot.
fn fwd_rows<T: Scalar, const C: usize>(s: Sweep, xd: &[T], kd: &[T], bd: &[T], out: &mut [T]) {
    for bi in 0..s.b {
        for oy in 0..s.oh {
            let orow = &mut out[(bi * s.oh + oy) * s.ow * C..][..s.ow * C];
            for seg in orow.chunks_exact_mut(C) {
                seg.copy_from_slice(bd);
            }
            for ky in 0..s.kh {
                let xrow = &xd[(bi * s.h + oy + ky) * s.w * s.cin..][..s.w * s.cin];
                let krow = &kd[ky * s.run * C..][..s.run * C];
                for ox in 0..s.ow {
                    let oseg = &mut orow[ox * C..][..C];
                    let mut acc = [T::zero(); C];
                    acc.copy_from_slice(oseg);
                    let xseg = &xrow[ox * s.cin..][..s.run];
                    for (xv, kseg) in xseg.iter().zip(krow.chunks_exact(C)) {
                        for c in 0..C {
                            acc[c] = acc[c] + *xv * kseg[c];
                        }
                    }
                    oseg.copy_from_slice(&acc);
                }
            }
        }
    }
}

/// Weight and input gradients in one sweep; `dz` is the post-norm gradient.
fn bwd_rows<T: Scalar, const C: usize>(
    s: Sweep,
    xd: &[T],
    kd: &[T],
    dz: &[T],
    dkd: &mut [T],
    dxd: &mut [T],
) {
    for bi in 0..s.b {
        for oy in 0..s.oh {
            let dzrow = &dz[(bi * s.oh + oy) * s.ow * C..][..s.ow * C];
            for ky in 0..s.kh {
                let xrow = &xd[(bi * s.h + oy + ky) * s.w * s.cin..][..s.w * s.cin];
                let dxrow = &mut dxd[(bi * s.h + oy + ky) * s.w * s.cin..][..s.w * s.cin];
                let krow = &kd[ky * s.run * C..][..s.run * C];
                let dkrow = &mut dkd[ky * s.run * C..][..s.run * C];
                for ox in 0..s.ow {
                    let mut dzv = [T::zero(); C];
                    dzv.copy_from_slice(&dzrow[ox * C..][..C]);
                    for i in 0..s.run {
                        let xi = ox * s.cin + i;
                        let xv = xrow[xi];
                        let dkseg = &mut dkrow[i * C..][..C];
                        let kseg = &krow[i * C..][..C];
                        let mut grad_in = T::zero();
                        for c in 0..C {
                            dkseg[c] = dkseg[c] + xv * dzv[c];
                            grad_in = grad_in + dzv[c] * kseg[c];
                        }
                        dxrow[xi] = dxrow[xi] + grad_in;
                    }
                }
            }
        }
    }
}

/// Forward sweep for filter counts without a monomorphized kernel.
fn fwd_rows_any<T: Scalar>(s: Sweep, cout: usize, xd: &[T], kd: &[T], bd: &[T], out: &mut [T]) {
    for bi in 0..s.b {
        for oy in 0..s.oh {
            let orow = &mut out[(bi * s.oh + oy) * s.ow * cout..][..s.ow * cout];
            for seg in orow.chunks_exact_mut(cout) {
                seg.copy_from_slice(bd);
            }
            for ky in 0..s.kh {
                let xrow = &xd[(bi * s.h + oy + ky) * s.w * s.cin..][..s.w * s.cin];
                let krow = &kd[ky * s.run * cout..][..s.run * cout];
                for ox in 0..s.ow {
                    let xseg = &xrow[ox * s.cin..][..s.run];
                    let oseg = &mut orow[ox * cout..][..cout];
                    for (xv, kseg) in xseg.iter().zip(krow.chunks_exact(cout)) {
                        for c in 0..cout {
                            oseg[c] = oseg[c] + *xv * kseg[c];
                        }
                    }
                }
            }
        }
    }
}

/// Backward sweep for filter counts without a monomorphized kernel.
fn bwd_rows_any<T: Scalar>(
    s: Sweep,
    cout: usize,
    xd: &[T],
    kd: &[T],
    dz: &[T],
    dkd: &mut [T],
    dxd: &mut [T],
) {
    for bi in 0..s.b {
        for oy in 0..s.oh {
            let dzrow = &dz[(bi * s.oh + oy) * s.ow * cout..][..s.ow * cout];
            for ky in 0..s.kh {
                let xrow = &xd[(bi * s.h + oy + ky) * s.w * s.cin..][..s.w * s.cin];
                let dxrow = &mut dxd[(bi * s.h + oy + ky) * s.w * s.cin..][..s.w * s.cin];
                let krow = &kd[ky * s.run * cout..][..s.run * cout];
                let dkrow = &mut dkd[ky * s.run * cout..][..s.run * cout];
                for ox in 0..s.ow {
                    let dzseg = &dzrow[ox * cout..][..cout];
                    for i in 0..s.run {
                        let xi = ox * s.cin + i;
                        let xv = xrow[xi];
                        let dkseg = &mut dkrow[i * cout..][..cout];
                        let kseg = &krow[i * cout..][..cout];
                        let mut grad_in = T::zero();
                        for c in 0..cout {
                            dkseg[c] = dkseg[c] + xv * dzseg[c];
                            grad_in = grad_in + dzseg[c] * kseg[c];
                        }
                        dxrow[xi] = dxrow[xi] + grad_in;
                    }
                }
            }
        }
    }
}

/// Pick the monomorphized kernel for this filter count; rare widths fall
/// back to the runtime-width sweep.
macro_rules! by_cout {
    ($cout:expr, $s:expr, $f:ident | $g:ident, $($a:expr),* $(,)?) => {
        match $cout {
            1 => $f::<T, 1>($s, $($a),*),
            2 => $f::<T, 2>($s, $($a),*),
            3 => $f::<T, 3>($s, $($a),*),
            4 => $f::<T, 4>($s, $($a),*),
            5 => $f::<T, 5>($s, $($a),*),
            6 => $f::<T, 6>($s, $($a),*),
            8 => $f::<T, 8>($s, $($a),*),
            10 => $f::<T, 10>($s, $($a),*),
            12 => $f::<T, 12>($s, $($a),*),
            16 => $f::<T, 16>($s, $($a),*),
            n => $g::<T>($s, n, $($a),*),
        }
    };
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(
        kh: usize,
        kw: usize,
        cin: usize,
        cout: usize,
        with_bn: bool,
        init: InitMode,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = kh * kw * cin;
        let fan_out = kh * kw * cout;
        let kern = Tensor::from_fn(&[kh, kw, cin, cout], |_| init.draw(fan_in, fan_out, rng));
        let bias = Tensor::from_fn(&[cout], |_| init.draw_bias(rng));
        Conv2d {
            kh,
            kw,
            cin,
            cout,
            dkern: Tensor::zeros(kern.dims()),
            dbias: Tensor::zeros(bias.dims()),
            kern,
            bias,
            bn: with_bn.then(|| BatchNorm::new(cout)),
            x_saved: Vec::new(),
            x_dims: [0; 4],
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if h < self.kh || w < self.kw {
            return Err(Error::shape(
                "conv2d",
                format!("input {h}x{w} smaller than kernel {}x{}", self.kh, self.kw),
            ));
        }
        Ok((h - self.kh + 1, w - self.kw + 1))
    }

    fn sweep(&self, b: usize, h: usize, w: usize) -> Result<Sweep> {
        let (oh, ow) = self.out_hw(h, w)?;
        Ok(Sweep { b, h, w, cin: self.cin, kh: self.kh, run: self.kw * self.cin, oh, ow })
    }

    /// Run the layer on `x` of shape `[batch, h, w, cin]`. Training keeps a
    /// copy of the input around for `backward`.
    pub fn forward(&mut self, x: &Tensor<T>, phase: Phase) -> Result<Tensor<T>> {
        let [b, h, w, cin] = *x.dims() else {
            return Err(Error::shape("conv2d", format!("expected 4-d input, got {:?}", x.dims())));
        };
        if cin != self.cin {
            return Err(Error::shape(
                "conv2d",
                format!("input has {cin} channels, layer expects {}", self.cin),
            ));
        }
        let s = self.sweep(b, h, w)?;
        let rows = b * s.oh * s.ow;
        let mut out = vec![T::zero(); rows * self.cout];
        by_cout!(self.cout, s, fwd_rows | fwd_rows_any, x.data(), self.kern.data(), self.bias.data(), &mut out);
        if let Some(bn) = &mut self.bn {
            bn.forward(&mut out, rows, self.cout, phase)?;
        }
        if phase == Phase::Train {
            self.x_dims = [b, h, w, cin];
            self.x_saved.clear();
            self.x_saved.extend_from_slice(x.data());
        } else {
            self.x_dims = [0; 4];
            self.x_saved = Vec::new();
        }
        Tensor::from_vec(&[b, s.oh, s.ow, self.cout], out)
    }

    /// Accumulate parameter gradients and return the input gradient.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let [b, h, w, cin] = self.x_dims;
        if b == 0 {
            return Err(Error::invalid("conv2d", "backward before training forward"));
        }
        let s = self.sweep(b, h, w)?;
        if *dy.dims() != [b, s.oh, s.ow, self.cout] {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "gradient dims {:?} do not match output [{b}, {}, {}, {}]",
                    dy.dims(),
                    s.oh,
                    s.ow,
                    self.cout
                ),
            ));
        }
        let rows = b * s.oh * s.ow;
        let mut dz = dy.data().to_vec();
        if let Some(bn) = &mut self.bn {
            bn.backward(&mut dz, rows, self.cout)?;
        }
        for row in dz.chunks_exact(self.cout) {
            for (g, &v) in self.dbias.data_mut().iter_mut().zip(row) {
                *g += v;
            }
        }
        let mut dx = Tensor::zeros(&[b, h, w, cin]);
        by_cout!(
            self.cout,
            s,
            bwd_rows | bwd_rows_any,
            &self.x_saved,
            self.kern.data(),
            &dz,
            self.dkern.data_mut(),
            dx.data_mut()
        );
        Ok(dx)
    }

    pub fn params(&mut self) -> Vec<ParamRef<'_, T>> {
        let mut v = vec![
            ("kern".to_string(), &mut self.kern, &mut self.dkern),
            ("bias".to_string(), &mut self.bias, &mut self.dbias),
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
        self.kern.len() + self.bias.len() + self.bn.as_ref().map_or(0, |_| 2 * self.cout)
    }
}
