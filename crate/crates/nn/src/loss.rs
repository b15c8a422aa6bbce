use crate::error::{shape_mismatch, Result};
use crate::tensor::Tensor;

/// Mean squared error averaged over the batch and every output element;
/// returns the loss and its gradient `2(pred − target)/(N·D)`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(shape_mismatch("mse_loss", target.shape(), pred.shape()));
    }
    let count = pred.len() as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut sum = 0.0;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        sum += d * d;
        *g = 2.0 * d / count;
    }
    Ok((sum / count, grad))
}
