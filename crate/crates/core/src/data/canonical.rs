//! Canonical processed format: a header line
//! `#recsys-evalkit v1 <n_users> <n_items> <n_ratings>` followed by one
//! `user_idx<TAB>item_idx[<TAB>timestamp]` line per interaction, sorted by
//! `(user_idx, item_idx)`. Tokens live in sidecar files, one per line.

use std::io::{BufRead, BufReader, Read, Write};

use super::InteractionDataset;
use crate::linalg::BinaryCsr;
use crate::{Error, Result};

pub const CANONICAL_MAGIC: &str = "#recsys-evalkit v1";

pub fn write_canonical<W: Write>(dataset: &InteractionDataset, mut out: W) -> Result<()> {
    writeln!(out, "{CANONICAL_MAGIC} {} {} {}", dataset.n_users(), dataset.n_items(), dataset.n_ratings())?;
    for u in 0..dataset.n_users() {
        let ts = dataset.user_timestamps(u);
        for (k, &i) in dataset.user_items(u).iter().enumerate() {
            match ts {
                Some(t) => writeln!(out, "{u}\t{i}\t{}", t[k])?,
                None => writeln!(out, "{u}\t{i}")?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads the canonical format. Without token lists, tokens are the decimal
/// dense indices.
pub fn read_canonical<R: Read>(
    source: R,
    tokens: Option<(Vec<String>, Vec<String>)>,
) -> Result<InteractionDataset> {
    let mut lines = BufReader::new(source).lines();
    let header = lines.next().ok_or(Error::EmptyInput)??;
    let rest = header
        .strip_prefix(CANONICAL_MAGIC)
        .ok_or_else(|| Error::Format(format!("missing {CANONICAL_MAGIC:?} header")))?;
    let counts: Vec<usize> = rest
        .split_whitespace()
        .map(|x| x.parse().map_err(|_| Error::Format(format!("bad header count {x:?}"))))
        .collect::<Result<_>>()?;
    let [n_users, n_items, n_ratings] = counts[..] else {
        return Err(Error::Format("header needs three counts".into()));
    };

    let mut indptr = vec![0usize; n_users + 1];
    let mut indices = Vec::with_capacity(n_ratings);
    let mut timestamps: Option<Vec<i64>> = None;
    let mut prev: Option<(usize, u32)> = None;
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let lineno = k + 2;
        let bad = |reason: &str| Error::Row { line: lineno, reason: reason.to_string() };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(bad("expected 2 or 3 tab-separated fields"));
        }
        let u: usize = fields[0].parse().map_err(|_| bad("bad user index"))?;
        let i: u32 = fields[1].parse().map_err(|_| bad("bad item index"))?;
        if u >= n_users || i as usize >= n_items {
            return Err(bad("index out of range"));
        }
        if prev.is_some_and(|p| p >= (u, i)) {
            return Err(bad("rows not strictly sorted by (user, item)"));
        }
        prev = Some((u, i));
        match (fields.get(2), indices.is_empty(), &mut timestamps) {
            (Some(t), true, ts @ None) => *ts = Some(vec![t.parse().map_err(|_| bad("bad timestamp"))?]),
            (Some(t), false, Some(ts)) => ts.push(t.parse().map_err(|_| bad("bad timestamp"))?),
            (None, _, None) => {}
            _ => return Err(bad("timestamp column present on some rows only")),
        }
        indices.push(i);
        indptr[u + 1] += 1;
    }
    if indices.len() != n_ratings {
        return Err(Error::Format(format!("header says {n_ratings} ratings, found {}", indices.len())));
    }
    for u in 0..n_users {
        indptr[u + 1] += indptr[u];
    }
    let matrix = BinaryCsr::from_raw(n_users, n_items, indptr, indices);
    let (user_tokens, item_tokens) = tokens.unwrap_or_else(|| {
        ((0..n_users).map(|u| u.to_string()).collect(), (0..n_items).map(|i| i.to_string()).collect())
    });
    InteractionDataset::from_parts(matrix, timestamps, user_tokens, item_tokens)
}

pub fn write_token_list<W: Write>(tokens: &[String], mut out: W) -> Result<()> {
    for t in tokens {
        if t.contains(['\n', '\r']) {
            return Err(Error::Format(format!("token {t:?} contains a line break")));
        }
        writeln!(out, "{t}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_token_list<R: Read>(source: R) -> Result<Vec<String>> {
    BufReader::new(source).lines().map(|l| l.map_err(Error::from)).collect()
}
