use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};

use super::Interaction;
use crate::{Error, Result};

/// A column addressed by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParsePolicy {
    /// Abort on the first malformed row.
    #[default]
    Strict,
    /// Skip malformed rows and count them.
    Lenient,
}

/// Column mapping for delimited interaction logs. Unset fields default to
/// the MovieLens 100K layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    /// Field separator; may be longer than one character (MovieLens 1M uses `::`).
    pub delimiter: String,
    pub has_header: bool,
    pub user: Column,
    pub item: Column,
    pub rating: Column,
    pub timestamp: Option<Column>,
    pub policy: ParsePolicy,
}

impl Default for Schema {
    fn default() -> Self {
        Self::ml100k()
    }
}

impl Schema {
    /// MovieLens 100K `u.data`: tab-separated user, item, rating, timestamp.
    pub fn ml100k() -> Self {
        Self {
            delimiter: "\t".into(),
            has_header: false,
            user: Column::Index(0),
            item: Column::Index(1),
            rating: Column::Index(2),
            timestamp: Some(Column::Index(3)),
            policy: ParsePolicy::Strict,
        }
    }

    /// MovieLens 1M `ratings.dat`.
    pub fn ml1m() -> Self {
        Self { delimiter: "::".into(), ..Self::ml100k() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub interactions: Vec<Interaction>,
    /// Rows skipped under [`ParsePolicy::Lenient`].
    pub skipped: usize,
}

struct Positions {
    user: usize,
    item: usize,
    rating: usize,
    timestamp: Option<usize>,
}

fn resolve(col: &Column, header: Option<&[&str]>, role: &str) -> Result<usize> {
    match (col, header) {
        (Column::Index(i), Some(h)) if *i >= h.len() => {
            Err(Error::Schema(format!("{role} column index {i} beyond {} header fields", h.len())))
        }
        (Column::Index(i), _) => Ok(*i),
        (Column::Name(n), Some(h)) => h
            .iter()
            .position(|f| f.trim() == n)
            .ok_or_else(|| Error::Schema(format!("{role} column {n:?} not found in header"))),
        (Column::Name(n), None) => {
            Err(Error::Schema(format!("{role} column {n:?} named but source has no header")))
        }
    }
}

/// Parses delimited text into interactions, preserving row order.
pub fn load_interactions<R: Read>(source: R, schema: &Schema) -> Result<LoadOutcome> {
    if schema.delimiter.is_empty() {
        return Err(Error::Schema("empty delimiter".into()));
    }
    let reader = BufReader::new(source);
    let mut positions: Option<Positions> = None;
    let mut interactions = Vec::new();
    let mut skipped = 0usize;
    let mut saw_data = false;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter.as_str()).collect();
        if positions.is_none() {
            let header = schema.has_header.then_some(fields.as_slice());
            positions = Some(Positions {
                user: resolve(&schema.user, header, "user")?,
                item: resolve(&schema.item, header, "item")?,
                rating: resolve(&schema.rating, header, "rating")?,
                timestamp: schema
                    .timestamp
                    .as_ref()
                    .map(|c| resolve(c, header, "timestamp"))
                    .transpose()?,
            });
            if schema.has_header {
                continue;
            }
        }
        saw_data = true;
        let pos = positions.as_ref().expect("positions resolved above");
        match parse_row(&fields, pos) {
            Ok(x) => interactions.push(x),
            Err(reason) => match schema.policy {
                ParsePolicy::Strict => return Err(Error::Row { line: lineno + 1, reason }),
                ParsePolicy::Lenient => skipped += 1,
            },
        }
    }
    if !saw_data {
        return Err(Error::EmptyInput);
    }
    Ok(LoadOutcome { interactions, skipped })
}

fn parse_row(fields: &[&str], pos: &Positions) -> std::result::Result<Interaction, String> {
    let get = |i: usize, role: &str| {
        fields
            .get(i)
            .map(|f| f.trim())
            .ok_or_else(|| format!("missing {role} field (column {i})"))
    };
    let user = get(pos.user, "user")?;
    let item = get(pos.item, "item")?;
    if user.is_empty() || item.is_empty() {
        return Err("empty user or item token".into());
    }
    let raw = get(pos.rating, "rating")?;
    let value: f64 = raw.parse().map_err(|_| format!("unparseable rating {raw:?}"))?;
    if !value.is_finite() {
        return Err(format!("non-finite rating {raw:?}"));
    }
    let timestamp = match pos.timestamp {
        None => None,
        Some(i) => {
            let raw = get(i, "timestamp")?;
            let t = parse_timestamp(raw).ok_or_else(|| format!("unparseable timestamp {raw:?}"))?;
            if t < 0 {
                return Err(format!("negative timestamp {t}"));
            }
            Some(t)
        }
    };
    Ok(Interaction { user: user.to_string(), item: item.to_string(), value, timestamp })
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    if let Ok(t) = raw.parse::<i64>() {
        return Some(t);
    }
    // some exports write epoch seconds as floats ("881250949.0")
    let f: f64 = raw.parse().ok()?;
    (f.is_finite() && f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

/// Smallest kept rating on an `n`-level scale: `⌈4n/5⌉`.
pub fn binarize_threshold(scale_levels: u32) -> Result<u32> {
    if scale_levels < 2 {
        return Err(Error::domain(format!("rating scale needs at least 2 levels, got {scale_levels}")));
    }
    Ok((4 * scale_levels).div_ceil(5))
}

/// Keeps interactions rated at or above `⌈4n/5⌉` and rewrites their value to 1.
pub fn binarize(interactions: &[Interaction], scale_levels: u32) -> Result<Vec<Interaction>> {
    let threshold = f64::from(binarize_threshold(scale_levels)?);
    Ok(interactions
        .iter()
        .filter(|x| x.value >= threshold)
        .map(|x| Interaction { value: 1.0, ..x.clone() })
        .collect())
}
