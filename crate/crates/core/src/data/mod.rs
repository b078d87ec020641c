//! Interaction logs, the binary user×item dataset, L-core filtering and
//! dataset statistics.

mod canonical;
mod filter;
mod load;
mod stats;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

pub use canonical::{read_canonical, read_token_list, write_canonical, write_token_list, CANONICAL_MAGIC};
pub use filter::{l_core, single_pass_filter, FilterOrder};
pub use load::{binarize, binarize_threshold, load_interactions, Column, LoadOutcome, ParsePolicy, Schema};
pub use stats::{compute_stats, temporal_report, DatasetStats, EventClassReport, TemporalOptions, TemporalReport};

use crate::linalg::BinaryCsr;
use crate::{Error, Result};

/// One raw log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub value: f64,
    pub timestamp: Option<i64>,
}

impl Interaction {
    pub fn new(user: impl Into<String>, item: impl Into<String>, value: f64, timestamp: Option<i64>) -> Self {
        Self { user: user.into(), item: item.into(), value, timestamp }
    }
}

/// Immutable binary user×item matrix with token bijections.
///
/// Rows are users, columns items. Dense indices are contiguous; tokens keep the
/// external ids for reporting and for per-user seed derivation.
#[derive(Debug, Clone)]
pub struct InteractionDataset {
    matrix: BinaryCsr,
    /// Parallel to `matrix.indices()`.
    timestamps: Option<Vec<i64>>,
    user_tokens: Arc<Vec<String>>,
    item_tokens: Arc<Vec<String>>,
    user_lookup: OnceLock<HashMap<String, u32>>,
    item_lookup: OnceLock<HashMap<String, u32>>,
}

impl PartialEq for InteractionDataset {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
            && self.timestamps == other.timestamps
            && self.user_tokens == other.user_tokens
            && self.item_tokens == other.item_tokens
    }
}

impl InteractionDataset {
    /// Builds the dataset from raw interactions.
    ///
    /// Users and items are numbered in order of first appearance. Duplicate
    /// `(user, item)` pairs keep the highest value, then the latest timestamp,
    /// then the first occurrence. Timestamps are kept only if every row has one.
    pub fn from_interactions(interactions: &[Interaction]) -> Result<Self> {
        let mut user_ids: HashMap<&str, u32> = HashMap::new();
        let mut item_ids: HashMap<&str, u32> = HashMap::new();
        let mut user_tokens = Vec::new();
        let mut item_tokens = Vec::new();
        let mut winner: HashMap<(u32, u32), usize> = HashMap::new();
        let mut order: Vec<(u32, u32)> = Vec::new();
        let all_timed = interactions.iter().all(|x| x.timestamp.is_some());

        for (pos, x) in interactions.iter().enumerate() {
            if !x.value.is_finite() {
                return Err(Error::domain(format!("interaction {pos} has non-finite value")));
            }
            if x.timestamp.is_some_and(|t| t < 0) {
                return Err(Error::domain(format!("interaction {pos} has negative timestamp")));
            }
            let u = *user_ids.entry(x.user.as_str()).or_insert_with(|| {
                user_tokens.push(x.user.clone());
                (user_tokens.len() - 1) as u32
            });
            let i = *item_ids.entry(x.item.as_str()).or_insert_with(|| {
                item_tokens.push(x.item.clone());
                (item_tokens.len() - 1) as u32
            });
            match winner.get_mut(&(u, i)) {
                None => {
                    winner.insert((u, i), pos);
                    order.push((u, i));
                }
                Some(best) => {
                    let cur = &interactions[*best];
                    let better = x.value > cur.value
                        || (x.value == cur.value && x.timestamp > cur.timestamp);
                    if better {
                        *best = pos;
                    }
                }
            }
        }

        let mut rows: Vec<Vec<(u32, i64)>> = vec![Vec::new(); user_tokens.len()];
        for key in order {
            let x = &interactions[winner[&key]];
            rows[key.0 as usize].push((key.1, x.timestamp.unwrap_or(0)));
        }
        Ok(Self::from_rows(rows, all_timed, user_tokens, item_tokens))
    }

    fn from_rows(
        mut rows: Vec<Vec<(u32, i64)>>,
        timed: bool,
        user_tokens: Vec<String>,
        item_tokens: Vec<String>,
    ) -> Self {
        let n_items = item_tokens.len();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut ts = Vec::new();
        indptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable_by_key(|&(i, _)| i);
            for &(i, t) in r.iter() {
                indices.push(i);
                ts.push(t);
            }
            indptr.push(indices.len());
        }
        let matrix = BinaryCsr::from_raw(rows.len(), n_items, indptr, indices);
        Self::assemble(matrix, timed.then_some(ts), Arc::new(user_tokens), Arc::new(item_tokens))
    }

    fn assemble(
        matrix: BinaryCsr,
        timestamps: Option<Vec<i64>>,
        user_tokens: Arc<Vec<String>>,
        item_tokens: Arc<Vec<String>>,
    ) -> Self {
        Self {
            matrix,
            timestamps,
            user_tokens,
            item_tokens,
            user_lookup: OnceLock::new(),
            item_lookup: OnceLock::new(),
        }
    }

    /// Validating constructor from already-indexed parts.
    pub fn from_parts(
        matrix: BinaryCsr,
        timestamps: Option<Vec<i64>>,
        user_tokens: Vec<String>,
        item_tokens: Vec<String>,
    ) -> Result<Self> {
        if user_tokens.len() != matrix.n_rows() || item_tokens.len() != matrix.n_cols() {
            return Err(Error::Contract("token lists do not match matrix shape".into()));
        }
        for u in 0..matrix.n_rows() {
            let row = matrix.row(u);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Contract(format!("row {u} not strictly sorted")));
            }
            if row.last().is_some_and(|&c| c as usize >= matrix.n_cols()) {
                return Err(Error::Contract(format!("row {u} has out-of-range column")));
            }
        }
        if let Some(ts) = &timestamps {
            if ts.len() != matrix.nnz() {
                return Err(Error::Contract("timestamp array length differs from nnz".into()));
            }
        }
        for (name, tokens) in [("user", &user_tokens), ("item", &item_tokens)] {
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = tokens.iter().find(|t| !seen.insert(t.as_str())) {
                return Err(Error::Contract(format!("duplicate {name} token {dup:?}")));
            }
        }
        Ok(Self::assemble(matrix, timestamps, Arc::new(user_tokens), Arc::new(item_tokens)))
    }

    pub fn n_users(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn n_items(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn n_ratings(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn is_empty(&self) -> bool {
        self.n_ratings() == 0
    }

    pub fn matrix(&self) -> &BinaryCsr {
        &self.matrix
    }

    pub fn user_items(&self, user: usize) -> &[u32] {
        self.matrix.row(user)
    }

    pub fn user_timestamps(&self, user: usize) -> Option<&[i64]> {
        let p = self.matrix.indptr();
        self.timestamps.as_ref().map(|ts| &ts[p[user]..p[user + 1]])
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    pub fn has_timestamps(&self) -> bool {
        self.timestamps.is_some()
    }

    pub fn user_token(&self, user: usize) -> &str {
        &self.user_tokens[user]
    }

    pub fn item_token(&self, item: usize) -> &str {
        &self.item_tokens[item]
    }

    pub fn user_tokens(&self) -> &[String] {
        &self.user_tokens
    }

    pub fn item_tokens(&self) -> &[String] {
        &self.item_tokens
    }

    pub fn user_index(&self, token: &str) -> Option<usize> {
        self.user_lookup
            .get_or_init(|| lookup(&self.user_tokens))
            .get(token)
            .map(|&i| i as usize)
    }

    pub fn item_index(&self, token: &str) -> Option<usize> {
        self.item_lookup
            .get_or_init(|| lookup(&self.item_tokens))
            .get(token)
            .map(|&i| i as usize)
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        self.matrix.row_degrees()
    }

    pub fn item_degrees(&self) -> Vec<usize> {
        self.matrix.col_degrees()
    }

    /// The dataset as interactions with value 1, in (user, item) order.
    pub fn interactions(&self) -> impl Iterator<Item = Interaction> + '_ {
        (0..self.n_users()).flat_map(move |u| {
            let ts = self.user_timestamps(u);
            self.user_items(u).iter().enumerate().map(move |(k, &i)| Interaction {
                user: self.user_tokens[u].clone(),
                item: self.item_tokens[i as usize].clone(),
                value: 1.0,
                timestamp: ts.map(|t| t[k]),
            })
        })
    }

    /// Keeps entries whose user and item are both retained, then drops users
    /// and items left without interactions. Survivors keep their relative order.
    pub fn retain(&self, keep_user: &[bool], keep_item: &[bool]) -> Self {
        debug_assert_eq!(keep_user.len(), self.n_users());
        debug_assert_eq!(keep_item.len(), self.n_items());
        let mut item_used = vec![false; self.n_items()];
        let mut row_kept = vec![false; self.n_users()];
        for u in 0..self.n_users() {
            if !keep_user[u] {
                continue;
            }
            for &i in self.user_items(u) {
                if keep_item[i as usize] {
                    item_used[i as usize] = true;
                    row_kept[u] = true;
                }
            }
        }
        let mut new_item = vec![u32::MAX; self.n_items()];
        let mut item_tokens = Vec::new();
        for i in 0..self.n_items() {
            if item_used[i] {
                new_item[i] = item_tokens.len() as u32;
                item_tokens.push(self.item_tokens[i].clone());
            }
        }
        let mut user_tokens = Vec::new();
        let mut rows = Vec::new();
        for u in 0..self.n_users() {
            if !row_kept[u] {
                continue;
            }
            user_tokens.push(self.user_tokens[u].clone());
            let ts = self.user_timestamps(u);
            let row: Vec<(u32, i64)> = self
                .user_items(u)
                .iter()
                .enumerate()
                .filter(|(_, &i)| item_used[i as usize])
                .map(|(k, &i)| (new_item[i as usize], ts.map_or(0, |t| t[k])))
                .collect();
            rows.push(row);
        }
        Self::from_rows(rows, self.has_timestamps(), user_tokens, item_tokens)
    }

    /// Sub-dataset of the given users (full profiles, in the given order) over
    /// the unchanged item index space.
    pub fn select_users(&self, users: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(users.len() + 1);
        let mut indices = Vec::new();
        let mut ts = self.timestamps.as_ref().map(|_| Vec::new());
        let mut user_tokens = Vec::with_capacity(users.len());
        indptr.push(0);
        for &u in users {
            indices.extend_from_slice(self.user_items(u));
            if let (Some(out), Some(src)) = (ts.as_mut(), self.user_timestamps(u)) {
                out.extend_from_slice(src);
            }
            indptr.push(indices.len());
            user_tokens.push(self.user_tokens[u].clone());
        }
        let matrix = BinaryCsr::from_raw(users.len(), self.n_items(), indptr, indices);
        Self::assemble(matrix, ts, Arc::new(user_tokens), Arc::clone(&self.item_tokens))
    }
}

fn lookup(tokens: &[String]) -> HashMap<String, u32> {
    tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect()
}
