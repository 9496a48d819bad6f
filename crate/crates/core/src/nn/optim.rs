//! Root-mean-square gradient scaling optimizer.

use crate::scalar::Scalar;

/// Per-parameter update `p -= lr * g / (sqrt(v) + eps)` where `v` is the
/// exponential moving average `v = rho * v + (1 - rho) * g^2`. One state
/// slot per parameter tensor, addressed by index so the caller controls the
/// ordering. Element math runs in `f64` and is stored back at the parameter
/// precision.
pub struct RmsProp<T: Scalar> {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> RmsProp<T> {
    pub fn new(lr: f64) -> Self {
        RmsProp { lr, rho: 0.9, eps: 1e-8, v: Vec::new() }
    }

    pub fn step(&mut self, slot: usize, param: &mut [T], grad: &[T]) {
        assert_eq!(param.len(), grad.len(), "rmsprop: param/grad length");
        if self.v.len() <= slot {
            self.v.resize_with(slot + 1, Vec::new);
        }
        let v = &mut self.v[slot];
        if v.is_empty() {
            v.resize(param.len(), T::zero());
        }
        assert_eq!(v.len(), param.len(), "rmsprop: slot {slot} reused with a different shape");
        for ((p, &g), vi) in param.iter_mut().zip(grad).zip(v.iter_mut()) {
            let g = g.to64();
            let nv = self.rho * vi.to64() + (1.0 - self.rho) * g * g;
            *vi = T::of(nv);
            *p = T::of(p.to64() - self.lr * g / (nv.sqrt() + self.eps));
        }
    }

    /// Drop accumulated state, e.g. when restarting training.
    pub fn reset(&mut self) {
        self.v.clear();
    }
}
