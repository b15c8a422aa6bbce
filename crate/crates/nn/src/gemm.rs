//! Matrix products and patch (un)folding for the convolution layers.

/// `c = a·b + beta·c` for row-major operands, with `a` logically `m×k` and `b`
/// logically `k×n`. `trans_a`/`trans_b` mean the stored buffer holds the
/// transpose.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every index reachable through the strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Spatial geometry of a square-kernel convolution over an NCHW batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_begin: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl Geometry {
    /// Output positions per image.
    pub fn positions(&self) -> usize {
        self.out_height * self.out_width
    }

    /// Rows of the unfolded patch matrix.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    /// Calls `f(row, col, input_index)` for every in-bounds patch entry. Rows
    /// are `(channel, ki, kj)`, columns `(image, oh, ow)`.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let p = self.positions();
        let k = self.kernel;
        for c in 0..self.channels {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    for img in 0..self.batch {
                        let base = (img * self.channels + c) * self.height * self.width;
                        for oh in 0..self.out_height {
                            let ih = (oh * self.stride + ki) as isize - self.pad_begin as isize;
                            if ih < 0 || ih as usize >= self.height {
                                continue;
                            }
                            for ow in 0..self.out_width {
                                let iw = (ow * self.stride + kj) as isize - self.pad_begin as isize;
                                if iw < 0 || iw as usize >= self.width {
                                    continue;
                                }
                                let col = img * p + oh * self.out_width + ow;
                                f(row, col, base + ih as usize * self.width + iw as usize);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Unfolds `input` into a `[patch_len, batch·positions]` matrix.
    pub fn im2col(&self, input: &[f64]) -> Vec<f64> {
        let cols = self.batch * self.positions();
        let mut out = vec![0.0; self.patch_len() * cols];
        self.for_each_tap(|row, col, idx| out[row * cols + col] = input[idx]);
        out
    }

    /// Adjoint of [`Geometry::im2col`]: accumulates patches back into an image batch.
    pub fn col2im(&self, cols: &[f64]) -> Vec<f64> {
        let n_cols = self.batch * self.positions();
        let mut out = vec![0.0; self.batch * self.channels * self.height * self.width];
        self.for_each_tap(|row, col, idx| out[idx] += cols[row * n_cols + col]);
        out
    }
}

/// `[C, N·P]` (channel-major) to NCHW `[N, C, P]`.
pub(crate) fn channel_major_to_nchw(src: &[f64], channels: usize, batch: usize, positions: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for c in 0..channels {
        for n in 0..batch {
            let s = c * batch * positions + n * positions;
            let d = (n * channels + c) * positions;
            out[d..d + positions].copy_from_slice(&src[s..s + positions]);
        }
    }
    out
}

/// NCHW `[N, C, P]` to channel-major `[C, N·P]`.
pub(crate) fn nchw_to_channel_major(src: &[f64], channels: usize, batch: usize, positions: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for n in 0..batch {
        for c in 0..channels {
            let s = (n * channels + c) * positions;
            let d = c * batch * positions + n * positions;
            out[d..d + positions].copy_from_slice(&src[s..s + positions]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_handles_all_transpose_combinations() {
        // a = [[1,2,3],[4,5,6]], b = [[1,0],[0,1],[1,1]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let bt = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let expect = [4.0, 5.0, 10.0, 11.0];
        for (aa, ta) in [(&a, false), (&at, true)] {
            for (bb, tb) in [(&b, false), (&bt, true)] {
                let mut c = [0.0; 4];
                gemm(2, 3, 2, aa, ta, bb, tb, 0.0, &mut c);
                assert_eq!(c, expect);
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = Geometry {
            batch: 2,
            channels: 3,
            height: 5,
            width: 4,
            kernel: 3,
            stride: 2,
            pad_begin: 1,
            out_height: 3,
            out_width: 2,
        };
        let x: Vec<f64> = (0..2 * 3 * 5 * 4).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..g.patch_len() * 2 * g.positions()).map(|i| (i as f64 * 0.11).cos()).collect();
        let lhs: f64 = g.im2col(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(g.col2im(&y)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn layout_conversions_are_inverse() {
        let src: Vec<f64> = (0..24).map(f64::from).collect();
        let there = nchw_to_channel_major(&src, 3, 2, 4);
        assert_eq!(channel_major_to_nchw(&there, 3, 2, 4), src);
    }
}
