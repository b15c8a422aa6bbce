//! Conversions between process matrices and network inputs.

use qpt_core::{ComplexMatrix, C64};
use qpt_nn::Tensor;

use crate::error::{PipelineError, Result};
use crate::family::ChannelFamily;

/// Real parts of the χ diagonal, the feed-forward input for the depolarizing family.
pub fn dc_diagonal_features(chi: &ComplexMatrix) -> Result<[f64; 4]> {
    if chi.dim() != 4 {
        return Err(PipelineError::Invalid(format!(
            "diagonal features need a 4x4 χ, got {0}x{0}",
            chi.dim()
        )));
    }
    Ok([chi[(0, 0)].re, chi[(1, 1)].re, chi[(2, 2)].re, chi[(3, 3)].re])
}

/// Two-channel image of χ: the real plane followed by the imaginary plane,
/// each row-major.
pub fn chi_image(chi: &ComplexMatrix) -> Vec<f64> {
    let mut out = chi.real_plane();
    out.extend(chi.imag_plane());
    out
}

pub fn image_to_chi(image: &[f64], dim: usize) -> Result<ComplexMatrix> {
    let plane = dim * dim;
    if image.len() != 2 * plane {
        return Err(PipelineError::Invalid(format!(
            "image of {} values cannot hold a {dim}x{dim} complex matrix",
            image.len()
        )));
    }
    Ok(ComplexMatrix::from_planes(dim, &image[..plane], &image[plane..])?)
}

/// Stacks χ images into an `[N, 2, d, d]` tensor.
pub fn image_batch(chis: &[&ComplexMatrix], dim: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(chis.len() * 2 * dim * dim);
    for chi in chis {
        if chi.dim() != dim {
            return Err(PipelineError::Invalid(format!(
                "expected {dim}x{dim} χ, got {0}x{0}",
                chi.dim()
            )));
        }
        data.extend(chi_image(chi));
    }
    Ok(Tensor::new(vec![chis.len(), 2, dim, dim], data)?)
}

/// Feed-forward inputs for one χ under the family's convention.
pub fn ff_features(family: ChannelFamily, chi: &ComplexMatrix) -> Result<Vec<f64>> {
    match family {
        ChannelFamily::Dc => Ok(dc_diagonal_features(chi)?.to_vec()),
        _ => {
            if chi.dim() != family.chi_dim() {
                return Err(PipelineError::Invalid(format!(
                    "{family} expects {0}x{0} χ, got {1}x{1}",
                    family.chi_dim(),
                    chi.dim()
                )));
            }
            Ok(chi_image(chi))
        }
    }
}

/// `[N, inputs]` feed-forward batch.
pub fn ff_batch(family: ChannelFamily, chis: &[&ComplexMatrix]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(chis.len() * family.ff_inputs());
    for chi in chis {
        data.extend(ff_features(family, chi)?);
    }
    Ok(Tensor::new(vec![chis.len(), family.ff_inputs()], data)?)
}

/// `[N, n_params]` regression targets, each parameter divided by the family's scale.
pub fn target_batch(family: ChannelFamily, params: &[&[f64]]) -> Result<Tensor> {
    let scale = family.target_scale();
    let mut data = Vec::with_capacity(params.len() * family.n_params());
    for p in params {
        if p.len() != family.n_params() {
            return Err(PipelineError::Invalid(format!(
                "{family} has {} parameter(s), target row has {}",
                family.n_params(),
                p.len()
            )));
        }
        data.extend(p.iter().map(|v| v / scale));
    }
    Ok(Tensor::new(vec![params.len(), family.n_params()], data)?)
}

/// The five non-identity orderings of the three 5-entry blocks.
pub const DC_BLOCK_PERMUTATIONS: [[usize; 3]; 5] =
    [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Block permutation of a flattened 4×4 χ. The 16 row-major entries split as
/// `1 ⊕ 5 ⊕ 5 ⊕ 5`: entry 0 (χ₀₀) stays put, and output block `b` takes input
/// block `order[b]`.
pub fn permute_dc_blocks(chi: &ComplexMatrix, order: [usize; 3]) -> Result<ComplexMatrix> {
    if chi.dim() != 4 {
        return Err(PipelineError::Invalid(format!(
            "block augmentation needs a 4x4 χ, got {0}x{0}",
            chi.dim()
        )));
    }
    let mut sorted = order;
    sorted.sort_unstable();
    if sorted != [0, 1, 2] {
        return Err(PipelineError::Invalid(format!("{order:?} is not a permutation of 0..3")));
    }
    let src = chi.as_slice();
    let mut out: Vec<C64> = Vec::with_capacity(16);
    out.push(src[0]);
    for &b in &order {
        out.extend_from_slice(&src[1 + 5 * b..6 + 5 * b]);
    }
    Ok(ComplexMatrix::from_vec(4, out)?)
}

/// The five block-permuted copies of a depolarizing-family χ. Outputs need not
/// be Hermitian or positive; they only serve as extra network inputs.
pub fn augment_dc(chi: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    DC_BLOCK_PERMUTATIONS
        .iter()
        .map(|&order| permute_dc_blocks(chi, order))
        .collect()
}

pub fn inverse_permutation(order: [usize; 3]) -> [usize; 3] {
    let mut inv = [0; 3];
    for (b, &src) in order.iter().enumerate() {
        inv[src] = b;
    }
    inv
}
