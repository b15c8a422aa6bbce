use rand::Rng;

use super::Param;
use crate::error::{shape_mismatch, Result};
use crate::gemm::gemm;
use crate::tensor::Tensor;

/// Affine map `y = x·Wᵀ + b`, weight layout `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub(crate) fn init(in_units: usize, out_units: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_units as f64).sqrt();
        Self {
            weight: Param::uniform(&[out_units, in_units], bound, rng),
            bias: Param::uniform(&[out_units], bound, rng),
        }
    }

    pub fn in_units(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_units(&self) -> usize {
        self.weight.value.shape()[0]
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        match *x.shape() {
            [n, i] if i == self.in_units() => Ok(n),
            _ => Err(shape_mismatch("dense", format!("[N, {}]", self.in_units()), x.shape())),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let n = self.check(x)?;
        let (i, o) = (self.in_units(), self.out_units());
        let mut y: Vec<f64> = self.bias.value.data().iter().copied().cycle().take(n * o).collect();
        gemm(n, i, o, x.data(), false, self.weight.value.data(), true, 1.0, &mut y);
        Tensor::new(vec![n, o], y)
    }

    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let n = self.check(x)?;
        let (i, o) = (self.in_units(), self.out_units());
        if dy.shape() != [n, o] {
            return Err(shape_mismatch("dense backward", [n, o], dy.shape()));
        }
        gemm(o, n, i, dy.data(), true, x.data(), false, 1.0, self.weight.grad.data_mut());
        let db = self.bias.grad.data_mut();
        for row in dy.data().chunks(o) {
            for (g, v) in db.iter_mut().zip(row) {
                *g += v;
            }
        }
        let mut dx = vec![0.0; n * i];
        gemm(n, o, i, dy.data(), false, self.weight.value.data(), false, 0.0, &mut dx);
        Tensor::new(vec![n, i], dx)
    }
}
