//! Full-precision per-user scores stored next to the rounded JSON reports.
//!
//! Little-endian layout: magic, version `u32`, metric count `u32`, each metric
//! name as `u32` length plus UTF-8, fold count `u32`, then per fold its index
//! `u32`, user count `u64`, the users as `u64`, the fold means as `f64` (one per
//! metric) and the per-user values as `f64`, metric by metric.

use std::io::{Read, Write};

use anyhow::{bail, ensure, Result};
use recsys_evalkit::evalstats::NestedCvResult;

pub const SCORES_MAGIC: &[u8; 8] = b"RSEVSCOR";
pub const SCORES_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FoldTable {
    pub fold: u32,
    pub users: Vec<u64>,
    /// One per metric.
    pub means: Vec<f64>,
    /// `[metric][user]`.
    pub scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub metrics: Vec<String>,
    pub folds: Vec<FoldTable>,
}

impl ScoreTable {
    pub fn from_result<T>(result: &NestedCvResult<T>) -> Self {
        Self {
            metrics: result.metrics.iter().map(|m| m.to_string()).collect(),
            folds: result
                .folds
                .iter()
                .map(|f| FoldTable {
                    fold: f.fold as u32,
                    users: f.users.iter().map(|&u| u as u64).collect(),
                    means: f.means.clone(),
                    scores: f.user_scores.clone(),
                })
                .collect(),
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        out.write_all(SCORES_MAGIC)?;
        out.write_all(&SCORES_VERSION.to_le_bytes())?;
        out.write_all(&(self.metrics.len() as u32).to_le_bytes())?;
        for m in &self.metrics {
            out.write_all(&(m.len() as u32).to_le_bytes())?;
            out.write_all(m.as_bytes())?;
        }
        out.write_all(&(self.folds.len() as u32).to_le_bytes())?;
        for f in &self.folds {
            ensure!(f.means.len() == self.metrics.len() && f.scores.len() == self.metrics.len(), "ragged score table");
            out.write_all(&f.fold.to_le_bytes())?;
            out.write_all(&(f.users.len() as u64).to_le_bytes())?;
            for u in &f.users {
                out.write_all(&u.to_le_bytes())?;
            }
            for m in &f.means {
                out.write_all(&m.to_le_bytes())?;
            }
            for s in &f.scores {
                ensure!(s.len() == f.users.len(), "ragged score table");
                for v in s {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(src: R) -> Result<Self> {
        let mut src = std::io::BufReader::new(src);
        let mut magic = [0u8; 8];
        src.read_exact(&mut magic)?;
        if &magic != SCORES_MAGIC {
            bail!("not a score table");
        }
        let version = read_u32(&mut src)?;
        ensure!(version == SCORES_VERSION, "unsupported score table version {version}");
        let n_metrics = read_u32(&mut src)? as usize;
        let mut metrics = Vec::with_capacity(n_metrics);
        for _ in 0..n_metrics {
            let len = read_u32(&mut src)? as usize;
            let mut buf = vec![0u8; len];
            src.read_exact(&mut buf)?;
            metrics.push(String::from_utf8(buf)?);
        }
        let n_folds = read_u32(&mut src)? as usize;
        let mut folds = Vec::with_capacity(n_folds);
        for _ in 0..n_folds {
            let fold = read_u32(&mut src)?;
            let n = read_u64(&mut src)? as usize;
            let users = (0..n).map(|_| read_u64(&mut src)).collect::<Result<Vec<_>>>()?;
            let means = (0..n_metrics).map(|_| read_f64(&mut src)).collect::<Result<Vec<_>>>()?;
            let scores = (0..n_metrics)
                .map(|_| (0..n).map(|_| read_f64(&mut src)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            folds.push(FoldTable { fold, users, means, scores });
        }
        Ok(Self { metrics, folds })
    }
}

fn read_u32<R: Read>(src: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    src.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(src: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    src.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(src: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(src)?))
}
