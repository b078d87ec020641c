use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Interaction, InteractionDataset};
use crate::{Error, Result};

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    /// `ratings / (users * items)`.
    pub sparsity: f64,
    /// Mean ratings per item, `r_i`.
    pub ratings_per_item: f64,
    /// Mean ratings per user, `r_u`.
    pub ratings_per_user: f64,
}

pub fn compute_stats(dataset: &InteractionDataset) -> Result<DatasetStats> {
    if dataset.is_empty() {
        return Err(Error::domain("statistics of an empty dataset"));
    }
    let (users, items, ratings) = (dataset.n_users(), dataset.n_items(), dataset.n_ratings());
    let r = ratings as f64;
    Ok(DatasetStats {
        users,
        items,
        ratings,
        sparsity: r / (users as f64 * items as f64),
        ratings_per_item: r / items as f64,
        ratings_per_user: r / users as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventClassReport {
    pub total: usize,
    pub mean_per_day: f64,
    /// Fraction of day buckets with at least one event.
    pub fraction_of_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalReport {
    pub span_days: i64,
    pub new_user: EventClassReport,
    pub new_rating: EventClassReport,
    pub new_item: EventClassReport,
    pub options: TemporalOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TemporalOptions {
    /// Treat the first day as the initial snapshot: its events are not counted
    /// and the span is `last - first` buckets instead of `last - first + 1`.
    pub exclude_initial_day: bool,
}

/// Day-bucketed arrival rates of new users, new items and ratings.
///
/// Days are UTC epoch days, `floor(ts / 86400)`. A user (item) is new on the
/// bucket of its earliest interaction.
pub fn temporal_report(interactions: &[Interaction], options: TemporalOptions) -> Result<TemporalReport> {
    if interactions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut rating_days = Vec::with_capacity(interactions.len());
    let mut user_first: HashMap<&str, i64> = HashMap::new();
    let mut item_first: HashMap<&str, i64> = HashMap::new();
    for (pos, x) in interactions.iter().enumerate() {
        let ts = x
            .timestamp
            .ok_or_else(|| Error::domain(format!("interaction {pos} has no timestamp")))?;
        let day = ts.div_euclid(SECONDS_PER_DAY);
        rating_days.push(day);
        for (map, key) in [(&mut user_first, x.user.as_str()), (&mut item_first, x.item.as_str())] {
            map.entry(key).and_modify(|d| *d = (*d).min(day)).or_insert(day);
        }
    }
    let first = *rating_days.iter().min().expect("non-empty");
    let last = *rating_days.iter().max().expect("non-empty");
    let (span, counted_from) = if options.exclude_initial_day {
        if last == first {
            return Err(Error::domain("excluding the initial day leaves an empty span"));
        }
        (last - first, first + 1)
    } else {
        (last - first + 1, first)
    };

    let class = |days: &mut dyn Iterator<Item = i64>| {
        let mut total = 0usize;
        let mut active = BTreeSet::new();
        for d in days.filter(|&d| d >= counted_from) {
            total += 1;
            active.insert(d);
        }
        EventClassReport {
            total,
            mean_per_day: total as f64 / span as f64,
            fraction_of_days: active.len() as f64 / span as f64,
        }
    };
    Ok(TemporalReport {
        span_days: span,
        new_user: class(&mut user_first.values().copied()),
        new_rating: class(&mut rating_days.iter().copied()),
        new_item: class(&mut item_first.values().copied()),
        options,
    })
}
