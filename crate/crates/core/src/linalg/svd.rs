//! Truncated SVD (right singular vectors) via the Gram eigenproblem, or via a
//! seeded randomized range finder for large column counts.

use super::{dot, symmetric_eigen, BinaryCsr, DenseMatrix};
use crate::rng::SeedStream;
use crate::{Result, Scalar};

/// Operations a matrix must support to be decomposed.
pub trait RowMatrix<T: Scalar>: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `X · m` with `m` of shape `ncols × l`.
    fn mul_dense(&self, m: &DenseMatrix<T>) -> DenseMatrix<T>;
    /// `Xᵀ · m` with `m` of shape `nrows × l`.
    fn tmul_dense(&self, m: &DenseMatrix<T>) -> DenseMatrix<T>;
    /// `Xᵀ X`.
    fn gram(&self) -> DenseMatrix<T>;
}

impl<T: Scalar> RowMatrix<T> for DenseMatrix<T> {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn mul_dense(&self, m: &DenseMatrix<T>) -> DenseMatrix<T> {
        self.matmul(m)
    }
    fn tmul_dense(&self, m: &DenseMatrix<T>) -> DenseMatrix<T> {
        self.tmatmul(m)
    }
    fn gram(&self) -> DenseMatrix<T> {
        self.tmatmul(self)
    }
}

impl<T: Scalar> RowMatrix<T> for BinaryCsr {
    fn nrows(&self) -> usize {
        self.n_rows()
    }
    fn ncols(&self) -> usize {
        self.n_cols()
    }
    fn mul_dense(&self, m: &DenseMatrix<T>) -> DenseMatrix<T> {
        let l = m.cols();
        let mut out = DenseMatrix::zeros(self.n_rows(), l);
        for i in 0..self.n_rows() {
            let dst = out.row_mut(i);
            for &c in self.row(i) {
                for (o, &v) in dst.iter_mut().zip(m.row(c as usize)) {
                    *o += v;
                }
            }
        }
        out
    }
    fn tmul_dense(&self, m: &DenseMatrix<T>) -> DenseMatrix<T> {
        let l = m.cols();
        let mut out = DenseMatrix::zeros(self.n_cols(), l);
        for i in 0..self.n_rows() {
            let src = m.row(i);
            for &c in self.row(i) {
                for (o, &v) in out.row_mut(c as usize).iter_mut().zip(src) {
                    *o += v;
                }
            }
        }
        out
    }
    fn gram(&self) -> DenseMatrix<T> {
        let n = self.n_cols();
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..self.n_rows() {
            let row = self.row(i);
            for &a in row {
                let dst = g.row_mut(a as usize);
                for &b in row {
                    dst[b as usize] += T::one();
                }
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMethod {
    /// Eigendecomposition of `XᵀX`.
    Exact,
    Randomized { oversampling: usize, power_iterations: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd<T> {
    /// Descending.
    pub singular_values: Vec<T>,
    /// `ncols × rank`, orthonormal columns.
    pub v: DenseMatrix<T>,
}

pub fn truncated_svd<T: Scalar, M: RowMatrix<T>>(
    x: &M,
    rank: usize,
    method: SvdMethod,
) -> Result<TruncatedSvd<T>> {
    let n = x.ncols();
    let rank = rank.min(n).min(x.nrows());
    match method {
        SvdMethod::Exact => {
            let eig = symmetric_eigen(&x.gram())?;
            let singular_values =
                eig.values.iter().take(rank).map(|&l| l.max(T::zero()).sqrt()).collect();
            let v = DenseMatrix::from_fn(n, rank, |i, k| eig.vectors[(k, i)]);
            Ok(TruncatedSvd { singular_values, v })
        }
        SvdMethod::Randomized { oversampling, power_iterations, seed } => {
            let l = (rank + oversampling).min(n).min(x.nrows());
            let mut stream = SeedStream::new(seed);
            let omega = DenseMatrix::from_fn(n, l, |_, _| T::of(stream.normal()));
            let mut y = x.mul_dense(&omega);
            orthonormalize_columns(&mut y);
            for _ in 0..power_iterations {
                let mut z = x.tmul_dense(&y);
                orthonormalize_columns(&mut z);
                y = x.mul_dense(&z);
                orthonormalize_columns(&mut y);
            }
            // Bᵀ = Xᵀ Q, shape n × l
            let bt = x.tmul_dense(&y);
            let small = bt.tmatmul(&bt);
            let eig = symmetric_eigen(&small)?;
            let mut singular_values = Vec::with_capacity(rank);
            let mut v = DenseMatrix::zeros(n, rank);
            for k in 0..rank {
                let s = eig.values[k].max(T::zero()).sqrt();
                singular_values.push(s);
                if s <= T::epsilon() * T::of_usize(n) {
                    continue;
                }
                let u = eig.vectors.row(k);
                for i in 0..n {
                    v[(i, k)] = dot(bt.row(i), u) / s;
                }
            }
            Ok(TruncatedSvd { singular_values, v })
        }
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns that are
/// numerically dependent on earlier ones are zeroed.
pub fn orthonormalize_columns<T: Scalar>(m: &mut DenseMatrix<T>) {
    let mut t = m.transpose();
    let k = t.rows();
    let tiny = T::epsilon().sqrt();
    for j in 0..k {
        let original_norm = dot(t.row(j), t.row(j)).sqrt();
        for _pass in 0..2 {
            for p in 0..j {
                let proj = dot(t.row(p), t.row(j));
                if proj == T::zero() {
                    continue;
                }
                let c = t.cols();
                let (head, tail) = t.as_mut_slice().split_at_mut(j * c);
                let prev = &head[p * c..(p + 1) * c];
                for (a, &b) in tail[..c].iter_mut().zip(prev) {
                    *a -= proj * b;
                }
            }
        }
        let norm = dot(t.row(j), t.row(j)).sqrt();
        let row = t.row_mut(j);
        if norm <= tiny * original_norm.max(T::min_positive_value()) || norm == T::zero() {
            row.iter_mut().for_each(|v| *v = T::zero());
        } else {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    *m = t.transpose();
}
