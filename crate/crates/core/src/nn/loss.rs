//! Mean squared error over a batch.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean over the batch of the squared L2 distance between rows: for
/// `[batch, d]` inputs this is `sum((pred - target)^2) / batch`. Returns the
/// loss (accumulated in `f64`) and the gradient `2 (pred - target) / batch`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.dims() != target.dims() {
        return Err(Error::shape(
            "mse",
            format!("prediction {:?} vs target {:?}", pred.dims(), target.dims()),
        ));
    }
    if pred.ndim() == 0 || pred.dims()[0] == 0 {
        return Err(Error::invalid("mse", "empty batch"));
    }
    let batch = pred.dims()[0];
    let mut loss = 0.0f64;
    for (p, t) in pred.data().iter().zip(target.data()) {
        let d = p.to64() - t.to64();
        loss += d * d;
    }
    loss /= batch as f64;
    let scale = T::of(2.0 / batch as f64);
    let grad = Tensor::from_vec(
        pred.dims(),
        pred.data()
            .iter()
            .zip(target.data())
            .map(|(&p, &t)| scale * (p - t))
            .collect(),
    )?;
    Ok((loss, grad))
}
