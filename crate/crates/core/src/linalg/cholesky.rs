use rayon::prelude::*;

use super::DenseMatrix;
use crate::{Error, Result, Scalar};

const PARALLEL_MIN: usize = 256;

/// Lower-triangular factor `L` of a symmetric positive-definite matrix `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Contract(format!("cholesky of non-square {}x{} matrix", n, a.cols())));
        }
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::Numerical(format!(
                    "matrix not positive definite at pivot {j} (value {diag})"
                )));
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            let (head, tail) = l.as_mut_slice().split_at_mut((j + 1) * n);
            let row_j = &head[j * n..j * n + j];
            let update = |(off, row_i): (usize, &mut [T])| {
                let i = j + 1 + off;
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= row_i[k] * row_j[k];
                }
                row_i[j] = s / ljj;
            };
            if n >= PARALLEL_MIN {
                tail.par_chunks_mut(n).enumerate().for_each(update);
            } else {
                tail.chunks_mut(n).enumerate().for_each(update);
            }
        }
        Ok(Self { l })
    }

    pub fn factor_matrix(&self) -> &DenseMatrix<T> {
        &self.l
    }

    /// Squared ratio of the largest to smallest pivot; a cheap lower bound on the
    /// 2-norm condition number, reported in numerical diagnostics.
    pub fn pivot_condition(&self) -> T {
        let n = self.l.rows();
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for i in 0..n {
            let d = self.l[(i, i)];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let r = hi / lo;
        r * r
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = self.l.rows();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = x[i];
            for k in 0..i {
                s -= row[k] * x[k];
            }
            x[i] = s / row[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
    }

    /// `A⁻¹ = L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> DenseMatrix<T> {
        let n = self.l.rows();
        // Rows of M = L⁻¹ (lower triangular), computed column by column of the identity.
        let mut linv_t = DenseMatrix::zeros(n, n); // row j holds column j of L⁻¹
        let column = |(j, col): (usize, &mut [T])| {
            col[j] = T::one() / self.l[(j, j)];
            for i in j + 1..n {
                let row = self.l.row(i);
                let mut s = T::zero();
                for k in j..i {
                    s -= row[k] * col[k];
                }
                col[i] = s / row[i];
            }
        };
        if n >= PARALLEL_MIN {
            linv_t.as_mut_slice().par_chunks_mut(n).enumerate().for_each(column);
        } else {
            linv_t.as_mut_slice().chunks_mut(n).enumerate().for_each(column);
        }
        // A⁻¹[a][b] = Σ_k M[k][a] M[k][b] = Σ_k linv_t[a][k] linv_t[b][k], k ≥ max(a,b).
        let mut inv = DenseMatrix::zeros(n, n);
        let fill = |(a, out): (usize, &mut [T])| {
            let ra = linv_t.row(a);
            for (b, o) in out.iter_mut().enumerate() {
                let rb = linv_t.row(b);
                let start = a.max(b);
                let mut s = T::zero();
                for k in start..n {
                    s += ra[k] * rb[k];
                }
                *o = s;
            }
        };
        if n >= PARALLEL_MIN {
            inv.as_mut_slice().par_chunks_mut(n).enumerate().for_each(fill);
        } else {
            inv.as_mut_slice().chunks_mut(n).enumerate().for_each(fill);
        }
        inv
    }
}
