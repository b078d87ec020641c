//! Dense and sparse linear algebra over [`Scalar`](crate::Scalar).

mod cholesky;
mod dense;
mod eigen;
mod sparse;
mod svd;

pub use cholesky::Cholesky;
pub use dense::{dot, DenseMatrix};
pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use sparse::{BinaryCsr, SparseRows};
pub use svd::{orthonormalize_columns, truncated_svd, RowMatrix, SvdMethod, TruncatedSvd};
