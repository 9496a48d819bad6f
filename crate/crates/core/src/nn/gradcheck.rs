//! Central-difference verification of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::ParamRef;
use crate::scalar::Scalar;

/// Step size for the central differences. Loss curvature in this codebase
/// is mild enough that 1e-3 balances truncation against cancellation when
/// the target runs in `f64`.
pub const FD_STEP: f64 = 1e-3;

/// A probe whose relative error exceeds this gets re-measured at smaller
/// steps before it counts against the report. Max pooling makes the loss
/// piecewise smooth, and a probe that straddles a region boundary produces
/// a meaningless quotient; shrinking the step keeps the probe inside one
/// region. A genuinely wrong gradient stays wrong at every step.
const REFINE_AT: f64 = 1e-4;

/// Something whose parameter gradients can be checked numerically. The
/// loss must be a pure function of the parameters: anything stochastic
/// (dropout masks, batch composition) has to be replayed identically on
/// every call.
pub trait FdTarget<T: Scalar> {
    /// Loss at the current parameters.
    fn eval_loss(&mut self) -> Result<f64>;
    /// Zero all gradients, then run one forward and backward pass.
    fn refresh_grads(&mut self) -> Result<()>;
    /// Parameter tensors with their gradients, in a stable order.
    fn params(&mut self) -> Vec<ParamRef<'_, T>>;
}

#[derive(Debug)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

fn poke<T: Scalar, F: FdTarget<T>>(target: &mut F, tensor: usize, i: usize, value: f64) {
    let mut ps = target.params();
    ps[tensor].1.data_mut()[i] = T::of(value);
}

/// Floor for the denominator of the relative error, which doubles as an
/// absolute tolerance when analytic and numeric are both tiny. A batchnorm
/// directly after a bias makes that bias's true gradient exactly zero, and
/// the central difference then measures nothing but accumulated roundoff
/// (around 1e-10 for losses of this size). Real bugs disagree by orders of
/// magnitude more than this.
const REL_FLOOR: f64 = 1e-5;

/// Compare analytic gradients against central differences at `per_tensor`
/// randomly chosen elements of every parameter tensor. Relative error is
/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn grad_check<T: Scalar, F: FdTarget<T>>(
    target: &mut F,
    per_tensor: usize,
    seed: u64,
) -> Result<GradReport> {
    target.refresh_grads()?;
    let analytic: Vec<(String, Vec<f64>)> = target
        .params()
        .iter()
        .map(|(name, _, grad)| (name.clone(), grad.data().iter().map(|g| g.to64()).collect()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradReport { checked: 0, max_rel_err: 0.0, worst: String::new() };
    for (ti, (name, grads)) in analytic.iter().enumerate() {
        let len = grads.len();
        for _ in 0..per_tensor.min(len) {
            let i = rng.gen_range(0..len);
            let orig = {
                let ps = target.params();
                ps[ti].1.data()[i].to64()
            };
            let a = grads[i];
            let mut rel = f64::INFINITY;
            let mut numeric = f64::NAN;
            for step in [FD_STEP, FD_STEP / 10.0, FD_STEP / 100.0] {
                poke(target, ti, i, orig + step);
                let up = target.eval_loss()?;
                poke(target, ti, i, orig - step);
                let down = target.eval_loss()?;
                poke(target, ti, i, orig);
                let n = (up - down) / (2.0 * step);
                let r = (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR);
                if r < rel {
                    rel = r;
                    numeric = n;
                }
                if rel <= REFINE_AT {
                    break;
                }
            }
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = format!("{name}[{i}]: analytic {a}, numeric {numeric}");
            }
        }
    }
    Ok(report)
}
