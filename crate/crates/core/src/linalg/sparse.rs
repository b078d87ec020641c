use crate::Scalar;

/// Binary sparse matrix in compressed-row layout; column indices strictly
/// increasing within each row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCsr {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
}

impl BinaryCsr {
    /// Builds from per-row column lists. Lists are sorted and deduplicated.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<u32>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| (c as usize) < n_cols));
            indices.extend_from_slice(&r);
            indptr.push(indices.len());
        }
        Self { n_rows: indptr.len() - 1, n_cols, indptr, indices }
    }

    /// Raw constructor; caller guarantees sorted rows and in-range columns.
    pub fn from_raw(n_rows: usize, n_cols: usize, indptr: Vec<usize>, indices: Vec<u32>) -> Self {
        debug_assert_eq!(indptr.len(), n_rows + 1);
        debug_assert_eq!(*indptr.last().unwrap(), indices.len());
        Self { n_rows, n_cols, indptr, indices }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        self.indptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn col_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_cols];
        for &c in &self.indices {
            deg[c as usize] += 1;
        }
        deg
    }

    pub fn contains(&self, i: usize, j: u32) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    pub fn transpose(&self) -> BinaryCsr {
        let deg = self.col_degrees();
        let mut indptr = Vec::with_capacity(self.n_cols + 1);
        indptr.push(0);
        for d in &deg {
            indptr.push(indptr.last().unwrap() + d);
        }
        let mut cursor = indptr.clone();
        let mut indices = vec![0u32; self.nnz()];
        for i in 0..self.n_rows {
            for &c in self.row(i) {
                indices[cursor[c as usize]] = i as u32;
                cursor[c as usize] += 1;
            }
        }
        BinaryCsr { n_rows: self.n_cols, n_cols: self.n_rows, indptr, indices }
    }

    pub fn to_dense<T: Scalar>(&self) -> super::DenseMatrix<T> {
        let mut m = super::DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for &c in self.row(i) {
                m[(i, c as usize)] = T::one();
            }
        }
        m
    }
}

/// Sparse real-valued matrix in compressed-row layout. Used for item-item
/// weights keyed by source item: row `i` lists `(target, weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows<T> {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
}

impl<T: Scalar> SparseRows<T> {
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, T)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut r in rows {
            r.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in r {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { n_cols, indptr, indices, values }
    }

    pub fn from_raw(n_cols: usize, indptr: Vec<usize>, indices: Vec<u32>, values: Vec<T>) -> Self {
        Self { n_cols, indptr, indices, values }
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: u32) -> T {
        let (idx, val) = self.row(i);
        match idx.binary_search(&j) {
            Ok(p) => val[p],
            Err(_) => T::zero(),
        }
    }

    pub fn transpose(&self) -> SparseRows<T> {
        let mut rows: Vec<Vec<(u32, T)>> = vec![Vec::new(); self.n_cols];
        for i in 0..self.n_rows() {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                rows[c as usize].push((i as u32, v));
            }
        }
        SparseRows::from_rows(self.n_rows(), rows)
    }

    /// `xᵀ W` for a binary indicator `x` given by its support.
    pub fn sum_rows(&self, support: &[u32]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cols];
        for &i in support {
            let (idx, val) = self.row(i as usize);
            for (&c, &v) in idx.iter().zip(val) {
                out[c as usize] += v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> super::DenseMatrix<T> {
        let mut m = super::DenseMatrix::zeros(self.n_rows(), self.n_cols);
        for i in 0..self.n_rows() {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                m[(i, c as usize)] = v;
            }
        }
        m
    }
}
