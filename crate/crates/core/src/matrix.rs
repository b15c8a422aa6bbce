use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};
use crate::{NEGATIVE_EIGEN_TOL, PREDICATE_TOL};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Dense square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

/// Eigendecomposition of a Hermitian matrix: `values` ascending, eigenvectors
/// stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(QuantumError::DimensionMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from separate real and imaginary planes (row-major).
    pub fn from_planes(dim: usize, re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != dim * dim || im.len() != dim * dim {
            return Err(QuantumError::DimensionMismatch {
                expected: dim * dim,
                actual: re.len().min(im.len()),
            });
        }
        let data = re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)).collect();
        Ok(Self { dim, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Rank-one projector-like outer product `|v⟩⟨v|`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn real_plane(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn imag_plane(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.im).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        Self::from_fn(a * b, |i, j| {
            self[(i / b, j / b)] * other[(i % b, j % b)]
        })
    }

    /// `u · self · u†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        &(u * self) * &u.adjoint()
    }

    /// `⟨v| self |w⟩`.
    pub fn sandwich(&self, v: &[C64], w: &[C64]) -> C64 {
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            let vi = v[i].conj();
            if vi == ZERO {
                continue;
            }
            let row = &self.data[i * n..(i + 1) * n];
            let mut r = ZERO;
            for (x, y) in row.iter().zip(w) {
                r += x * y;
            }
            acc += vi * r;
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (i..self.dim).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.dim)) <= tol
    }

    /// PSD check on the Hermitian part, accepting eigenvalues down to `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(PREDICATE_TOL.max(tol)) && self.min_eigenvalue() >= -tol
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_part().eigvalsh()[0]
    }

    pub fn purity(&self) -> f64 {
        (self * self).trace().re
    }

    /// Checks the density-matrix invariants: Hermitian, PSD and unit trace.
    pub fn validate_density(&self, trace_tol: f64) -> Result<()> {
        if !self.is_finite() {
            return Err(QuantumError::InvalidDensityMatrix("non-finite entries".into()));
        }
        if !self.is_hermitian(PREDICATE_TOL) {
            return Err(QuantumError::InvalidDensityMatrix("not Hermitian".into()));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(QuantumError::InvalidDensityMatrix(format!(
                "trace {tr} differs from 1"
            )));
        }
        let min = self.min_eigenvalue();
        if min < -NEGATIVE_EIGEN_TOL {
            return Err(QuantumError::NegativeEigenvalue(min));
        }
        Ok(())
    }

    /// Partial trace of a bipartite matrix on `C^dim_a ⊗ C^dim_b`. When
    /// `trace_first` is set subsystem A is traced out, otherwise B.
    pub fn partial_trace(&self, dim_a: usize, dim_b: usize, trace_first: bool) -> Result<Self> {
        if dim_a * dim_b != self.dim {
            return Err(QuantumError::DimensionMismatch {
                expected: self.dim,
                actual: dim_a * dim_b,
            });
        }
        let out = if trace_first {
            Self::from_fn(dim_b, |i, j| {
                (0..dim_a).map(|k| self[(k * dim_b + i, k * dim_b + j)]).sum()
            })
        } else {
            Self::from_fn(dim_a, |i, j| {
                (0..dim_b).map(|k| self[(i * dim_b + k, j * dim_b + k)]).sum()
            })
        };
        Ok(out)
    }

    /// Eigendecomposition of the matrix, which must be Hermitian; only the upper
    /// triangle is trusted. Cyclic complex Jacobi rotations.
    pub fn eigh(&self) -> HermitianEigen {
        let (values, vectors) = jacobi(self, true);
        HermitianEigen {
            values,
            vectors: vectors.expect("eigenvectors requested"),
        }
    }

    /// Ascending eigenvalues of a Hermitian matrix.
    pub fn eigvalsh(&self) -> Vec<f64> {
        jacobi(self, false).0
    }

    /// Principal square root of a PSD matrix. Eigenvalues are clipped at zero
    /// after checking none falls below `-NEGATIVE_EIGEN_TOL`.
    pub fn sqrt_psd(&self) -> Result<Self> {
        let eig = self.hermitian_part().eigh();
        if eig.values[0] < -NEGATIVE_EIGEN_TOL {
            return Err(QuantumError::NegativeEigenvalue(eig.values[0]));
        }
        let roots: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
        Ok(eig.reconstruct_with(&roots))
    }

    /// Nearest density matrix in the sense used for network outputs:
    /// Hermitize, clip negative eigenvalues, renormalize the trace. Falls back
    /// to the maximally mixed state when nothing positive remains.
    pub fn project_to_density(&self) -> Self {
        let eig = self.hermitian_part().eigh();
        let clipped: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Self::identity(self.dim).scale_real(1.0 / self.dim as f64);
        }
        let normalized: Vec<f64> = clipped.iter().map(|l| l / total).collect();
        eig.reconstruct_with(&normalized).hermitian_part()
    }
}

impl HermitianEigen {
    /// `V diag(values) V†` for arbitrary replacement eigenvalues.
    pub fn reconstruct_with(&self, values: &[f64]) -> ComplexMatrix {
        let n = self.vectors.dim;
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| v[(i, k)] * v[(j, k)].conj() * values[k])
                .sum()
        })
    }
}

fn jacobi(m: &ComplexMatrix, want_vectors: bool) -> (Vec<f64>, Option<ComplexMatrix>) {
    let n = m.dim;
    let mut a = m.data.clone();
    // Hermitize from the upper triangle so rounding in the lower half is irrelevant.
    for i in 0..n {
        a[i * n + i] = C64::new(a[i * n + i].re, 0.0);
        for j in (i + 1)..n {
            a[j * n + i] = a[i * n + j].conj();
        }
    }
    let mut v = if want_vectors {
        Some(ComplexMatrix::identity(n).data)
    } else {
        None
    };

    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 || n == 1 {
        let values = (0..n).map(|i| a[i * n + i].re).collect();
        return (values, v.map(|data| ComplexMatrix { dim: n, data }));
    }

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let g = apq.norm();
                if g <= 1e-300 || g <= 1e-18 * scale {
                    a[p * n + q] = ZERO;
                    a[q * n + p] = ZERO;
                    continue;
                }
                let phase = apq / g;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let tau = (aqq - app) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotation J restricted to the (p, q) plane:
                // [[c, s], [-s·conj(phase), c·conj(phase)]].
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                // A ← A J (columns p, q)
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * jpp + akq * jqp;
                    a[k * n + q] = akp * jpq + akq * jqq;
                }
                // A ← J† A (rows p, q)
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[q * n + k] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
                a[q * n + q] = C64::new(a[q * n + q].re, 0.0);
                if let Some(vd) = v.as_mut() {
                    for k in 0..n {
                        let vkp = vd[k * n + p];
                        let vkq = vd[k * n + q];
                        vd[k * n + p] = vkp * jpp + vkq * jqp;
                        vd[k * n + q] = vkp * jpq + vkq * jqq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].re.total_cmp(&a[y * n + y].re));
    let values = order.iter().map(|&i| a[i * n + i].re).collect();
    let vectors = v.map(|vd| {
        ComplexMatrix::from_fn(n, |i, j| vd[i * n + order[j]])
    });
    (values, vectors)
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += aik * b;
                }
            }
        }
        ComplexMatrix { dim: n, data: out }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}
