//! Binary container for fitted models.
//!
//! Layout: magic, `u32` version, `u8` scalar width, `u64` header length, JSON
//! header, then length-prefixed little-endian arrays in a fixed order per
//! state kind. Floats are stored at the model's own width.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{FittedModel, KnnParams, ModelFamily, ModelState};
use crate::hyperopt::Params;
use crate::linalg::{BinaryCsr, DenseMatrix, SparseRows};
use crate::{Error, Result, Scalar};

pub const MODEL_MAGIC: &[u8; 8] = b"RSEVKMDL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    family: ModelFamily,
    params: Params,
    seed: u64,
    n_items: usize,
    state: String,
    /// Dense shapes, or the sparse column count, as needed by the state.
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knn: Option<KnnParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ridge: Option<(f64, f64)>,
}

struct Writer<W> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }

    fn usizes(&mut self, xs: &[usize]) -> Result<()> {
        self.u64(xs.len() as u64)?;
        for &x in xs {
            self.u64(x as u64)?;
        }
        Ok(())
    }

    fn u32s(&mut self, xs: &[u32]) -> Result<()> {
        self.u64(xs.len() as u64)?;
        let bytes: Vec<u8> = xs.iter().flat_map(|x| x.to_le_bytes()).collect();
        Ok(self.out.write_all(&bytes)?)
    }

    fn floats<T: Scalar>(&mut self, xs: &[T]) -> Result<()> {
        self.u64(xs.len() as u64)?;
        let mut bytes = Vec::with_capacity(xs.len() * T::WIDTH as usize);
        for &x in xs {
            if T::WIDTH == 4 {
                bytes.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
            } else {
                bytes.extend_from_slice(&x.as_f64().to_le_bytes());
            }
        }
        Ok(self.out.write_all(&bytes)?)
    }

    fn csr(&mut self, m: &BinaryCsr) -> Result<()> {
        self.u64(m.n_rows() as u64)?;
        self.u64(m.n_cols() as u64)?;
        self.usizes(m.indptr())?;
        self.u32s(m.indices())
    }
}

struct Reader<R> {
    src: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        (&mut self.src).take(n as u64).read_to_end(&mut buf)?;
        if buf.len() != n {
            return Err(Error::Format("truncated model file".into()));
        }
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.bytes(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()?;
        // refuse lengths that cannot fit in memory before allocating
        usize::try_from(n)
            .ok()
            .filter(|n| n.checked_mul(elem).is_some_and(|b| b < (1usize << 40)))
            .ok_or_else(|| Error::Format(format!("implausible array length {n}")))
    }

    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64().map(|v| v as usize)).collect()
    }

    fn u32s(&mut self) -> Result<Vec<u32>> {
        let n = self.len(4)?;
        let b = self.bytes(4 * n)?;
        Ok(b.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn floats<T: Scalar>(&mut self) -> Result<Vec<T>> {
        let w = T::WIDTH as usize;
        let n = self.len(w)?;
        let b = self.bytes(w * n)?;
        Ok(b.chunks_exact(w)
            .map(|c| {
                if w == 4 {
                    T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                } else {
                    T::of(f64::from_le_bytes(c.try_into().expect("8 bytes")))
                }
            })
            .collect())
    }

    fn dense<T: Scalar>(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix<T>> {
        let data = self.floats::<T>()?;
        if data.len() != rows * cols {
            return Err(Error::Format(format!("dense block has {} values, expected {rows}x{cols}", data.len())));
        }
        Ok(DenseMatrix::from_vec(rows, cols, data))
    }

    fn csr(&mut self) -> Result<BinaryCsr> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let indptr = self.usizes()?;
        let indices = self.u32s()?;
        check_structure(rows, cols, &indptr, &indices)?;
        Ok(BinaryCsr::from_raw(rows, cols, indptr, indices))
    }
}

fn check_structure(rows: usize, cols: usize, indptr: &[usize], indices: &[u32]) -> Result<()> {
    let ok = indptr.len() == rows + 1
        && indptr.first() == Some(&0)
        && indptr.last() == Some(&indices.len())
        && indptr.windows(2).all(|w| w[0] <= w[1])
        && indices.iter().all(|&j| (j as usize) < cols);
    if ok {
        Ok(())
    } else {
        Err(Error::Format("inconsistent sparse structure".into()))
    }
}

pub fn write_model<T: Scalar, W: Write>(model: &FittedModel<T>, out: W) -> Result<()> {
    let mut header = Header {
        family: model.family,
        params: model.params.clone(),
        seed: model.seed,
        n_items: model.n_items,
        state: model.state.tag().to_string(),
        dims: Vec::new(),
        knn: None,
        ridge: None,
    };
    match &model.state {
        ModelState::Random | ModelState::Popularity => {}
        ModelState::SparseItemItem(w) => header.dims = vec![w.n_rows(), w.n_cols()],
        ModelState::DenseItemItem(m) | ModelState::Projection(m) => header.dims = vec![m.rows(), m.cols()],
        ModelState::UserNeighbors { params, .. } => header.knn = Some(*params),
        ModelState::WeightedFactors { y, regularization, confidence, .. } => {
            header.dims = vec![y.rows(), y.cols()];
            header.ridge = Some((regularization.as_f64(), confidence.as_f64()));
        }
    }
    let json = serde_json::to_vec(&header)?;
    let mut w = Writer { out };
    w.out.write_all(MODEL_MAGIC)?;
    w.out.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.out.write_all(&[T::WIDTH])?;
    w.u64(json.len() as u64)?;
    w.out.write_all(&json)?;
    w.floats(&model.popularity)?;
    match &model.state {
        ModelState::Random | ModelState::Popularity => {}
        ModelState::SparseItemItem(m) => {
            w.usizes(m.indptr())?;
            w.u32s(m.indices())?;
            w.floats(m.values())?;
        }
        ModelState::DenseItemItem(m) | ModelState::Projection(m) => w.floats(m.as_slice())?,
        ModelState::UserNeighbors { train, .. } => w.csr(train)?,
        ModelState::WeightedFactors { y, gram, .. } => {
            w.floats(y.as_slice())?;
            w.floats(gram.as_slice())?;
        }
    }
    w.out.flush()?;
    Ok(())
}

/// Reads a model written at width `T`. A width mismatch is a format error.
pub fn read_model<T: Scalar, R: Read>(src: R) -> Result<FittedModel<T>> {
    let mut r = Reader { src };
    if r.bytes(8)? != MODEL_MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let version = u32::from_le_bytes(r.bytes(4)?.try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let width = r.bytes(1)?[0];
    if width != T::WIDTH {
        return Err(Error::Format(format!("model stored at {width}-byte width, reader expects {}", T::WIDTH)));
    }
    let hlen = r.len(1)?;
    let header: Header = serde_json::from_slice(&r.bytes(hlen)?)?;
    let n = header.n_items;
    let popularity = r.floats::<T>()?;
    if popularity.len() != n {
        return Err(Error::Format("popularity length does not match item count".into()));
    }
    let dims = |k: usize| -> Result<&[usize]> {
        if header.dims.len() == k {
            Ok(&header.dims)
        } else {
            Err(Error::Format(format!("state {:?} needs {k} dimensions", header.state)))
        }
    };
    let state = match header.state.as_str() {
        "random" => ModelState::Random,
        "popularity" => ModelState::Popularity,
        "sparse_item_item" => {
            let d = dims(2)?;
            let indptr = r.usizes()?;
            let indices = r.u32s()?;
            let values = r.floats::<T>()?;
            check_structure(d[0], d[1], &indptr, &indices)?;
            if values.len() != indices.len() {
                return Err(Error::Format("sparse values and indices differ in length".into()));
            }
            ModelState::SparseItemItem(SparseRows::from_raw(d[1], indptr, indices, values))
        }
        "dense_item_item" => {
            let d = dims(2)?;
            ModelState::DenseItemItem(r.dense(d[0], d[1])?)
        }
        "projection" => {
            let d = dims(2)?;
            ModelState::Projection(r.dense(d[0], d[1])?)
        }
        "user_neighbors" => {
            let params = header.knn.ok_or_else(|| Error::Format("missing neighbor parameters".into()))?;
            let train = r.csr()?;
            let train_t = train.transpose();
            ModelState::UserNeighbors { train, train_t, params }
        }
        "weighted_factors" => {
            let d = dims(2)?;
            let (reg, conf) = header.ridge.ok_or_else(|| Error::Format("missing ridge parameters".into()))?;
            let y = r.dense(d[0], d[1])?;
            let gram = r.dense(d[1], d[1])?;
            ModelState::WeightedFactors { y, gram, regularization: T::of(reg), confidence: T::of(conf) }
        }
        other => return Err(Error::Format(format!("unknown model state {other:?}"))),
    };
    Ok(FittedModel { family: header.family, params: header.params, seed: header.seed, n_items: n, popularity, state })
}
