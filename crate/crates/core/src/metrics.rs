//! Top-k ranking metrics over held-out items.
//!
//! nDCG uses binary gain, a `1 / log2(rank + 1)` discount and an ideal DCG
//! truncated at `k`. Rankings sort by descending score with ties broken by
//! ascending item index; NaN scores rank last.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Gain/discount convention used by [`ndcg_at_k`]; recorded in reports.
pub const NDCG_CONVENTION: &str = "binary-gain/log2-discount/ideal-truncated-at-k";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    HitRate,
    Recall,
    Precision,
    Ndcg,
}

impl MetricKind {
    fn name(self) -> &'static str {
        match self {
            MetricKind::HitRate => "hitrate",
            MetricKind::Recall => "recall",
            MetricKind::Precision => "precision",
            MetricKind::Ndcg => "ndcg",
        }
    }
}

/// A metric and its cutoff, written `hitrate@50`, `ndcg@10`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub k: usize,
}

impl MetricSpec {
    pub fn new(kind: MetricKind, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::domain("metric cutoff must be at least 1"));
        }
        Ok(Self { kind, k })
    }

    pub fn hitrate(k: usize) -> Self {
        Self { kind: MetricKind::HitRate, k: k.max(1) }
    }

    pub fn evaluate(&self, ranked: &[u32], judgments: &Judgments) -> Result<f64> {
        match self.kind {
            MetricKind::HitRate => hitrate_at_k(ranked, judgments, self.k),
            MetricKind::Recall => recall_at_k(ranked, judgments, self.k),
            MetricKind::Precision => precision_at_k(ranked, judgments, self.k),
            MetricKind::Ndcg => ndcg_at_k(ranked, judgments, self.k),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind.name(), self.k)
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, k) = s
            .split_once('@')
            .ok_or_else(|| Error::domain(format!("metric {s:?} lacks an @k cutoff")))?;
        let kind = match name.to_ascii_lowercase().as_str() {
            "hitrate" | "hr" => MetricKind::HitRate,
            "recall" => MetricKind::Recall,
            "precision" => MetricKind::Precision,
            "ndcg" => MetricKind::Ndcg,
            other => return Err(Error::domain(format!("unknown metric {other:?}"))),
        };
        let k = k.parse().map_err(|_| Error::domain(format!("bad cutoff in {s:?}")))?;
        MetricSpec::new(kind, k)
    }
}

impl TryFrom<String> for MetricSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MetricSpec> for String {
    fn from(m: MetricSpec) -> String {
        m.to_string()
    }
}

/// Held-out relevant items of one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgments {
    relevant: Vec<u32>,
}

impl Judgments {
    pub fn new(mut relevant: Vec<u32>) -> Result<Self> {
        relevant.sort_unstable();
        relevant.dedup();
        if relevant.is_empty() {
            return Err(Error::Contract("judgments need at least one relevant item".into()));
        }
        Ok(Self { relevant })
    }

    pub fn relevant(&self) -> &[u32] {
        &self.relevant
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    pub fn rel(&self, item: u32) -> bool {
        self.relevant.binary_search(&item).is_ok()
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::domain("metric cutoff must be at least 1"));
    }
    Ok(())
}

fn hits(ranked: &[u32], judgments: &Judgments, k: usize) -> usize {
    ranked.iter().take(k).filter(|&&y| judgments.rel(y)).count()
}

/// Number of relevant items in the top `min(k, N)` positions.
pub fn hitrate_at_k(ranked: &[u32], judgments: &Judgments, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(hits(ranked, judgments, k) as f64)
}

pub fn recall_at_k(ranked: &[u32], judgments: &Judgments, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(hits(ranked, judgments, k) as f64 / judgments.len() as f64)
}

pub fn precision_at_k(ranked: &[u32], judgments: &Judgments, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(hits(ranked, judgments, k) as f64 / k as f64)
}

pub fn ndcg_at_k(ranked: &[u32], judgments: &Judgments, k: usize) -> Result<f64> {
    check_k(k)?;
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &y)| judgments.rel(y))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let ideal: f64 = (1..=k.min(judgments.len())).map(discount).sum();
    Ok(dcg / ideal)
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

fn cmp_desc<T: Scalar>(scores: &[T], a: u32, b: u32) -> Ordering {
    let key = |s: T| if s.is_nan() { T::neg_infinity() } else { s };
    let (sa, sb) = (key(scores[a as usize]), key(scores[b as usize]));
    sb.partial_cmp(&sa).unwrap_or(Ordering::Equal).then(a.cmp(&b))
}

/// The `limit` best unmasked items, best first. `mask` flags excluded items.
pub fn top_items<T: Scalar>(scores: &[T], mask: &[bool], limit: usize) -> Vec<u32> {
    let mut cand: Vec<u32> = (0..scores.len() as u32).filter(|&i| !mask[i as usize]).collect();
    if limit < cand.len() {
        cand.select_nth_unstable_by(limit, |&a, &b| cmp_desc(scores, a, b));
        cand.truncate(limit);
    }
    cand.sort_unstable_by(|&a, &b| cmp_desc(scores, a, b));
    cand
}

/// Masks the fold-in, ranks the remaining items and evaluates every spec.
pub fn evaluate_user<T: Scalar>(
    scores: &[T],
    mask: &[u32],
    judgments: &Judgments,
    specs: &[MetricSpec],
) -> Result<Vec<f64>> {
    let n = scores.len();
    let mut masked = vec![false; n];
    for &i in mask {
        let slot = masked
            .get_mut(i as usize)
            .ok_or_else(|| Error::Contract(format!("masked item {i} outside {n} items")))?;
        *slot = true;
    }
    for &r in judgments.relevant() {
        match masked.get(r as usize) {
            None => return Err(Error::Contract(format!("relevant item {r} outside {n} items"))),
            Some(true) => return Err(Error::Contract(format!("relevant item {r} is in the fold-in mask"))),
            Some(false) => {}
        }
    }
    let depth = specs.iter().map(|s| s.k).max().unwrap_or(0);
    let ranked = top_items(scores, &masked, depth);
    specs.iter().map(|s| s.evaluate(&ranked, judgments)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn j(items: &[u32]) -> Judgments {
        Judgments::new(items.to_vec()).unwrap()
    }

    #[test]
    fn parse_and_display() {
        for s in ["hitrate@50", "recall@10", "ndcg@10", "precision@25"] {
            assert_eq!(s.parse::<MetricSpec>().unwrap().to_string(), s);
        }
        assert!("ndcg@0".parse::<MetricSpec>().is_err());
        assert!("mrr@5".parse::<MetricSpec>().is_err());
        assert!("ndcg".parse::<MetricSpec>().is_err());
        let json = serde_json::to_string(&MetricSpec::hitrate(50)).unwrap();
        assert_eq!(json, "\"hitrate@50\"");
    }

    #[test]
    fn closed_forms() {
        let ranked: Vec<u32> = (0..60).collect();
        assert_eq!(hitrate_at_k(&ranked, &j(&[0]), 50).unwrap(), 1.0);
        assert_eq!(hitrate_at_k(&ranked, &j(&[50]), 50).unwrap(), 0.0);
        assert_eq!(recall_at_k(&ranked, &j(&[1, 2]), 5).unwrap(), 1.0);
        assert_eq!(recall_at_k(&ranked, &j(&[1, 20]), 5).unwrap(), 0.5);
        assert_eq!(precision_at_k(&ranked, &j(&[0]), 10).unwrap(), 0.1);
        assert_eq!(precision_at_k(&ranked, &j(&[30]), 10).unwrap(), 0.0);
        assert_eq!(ndcg_at_k(&ranked, &j(&[0]), 10).unwrap(), 1.0);
        assert!((ndcg_at_k(&ranked, &j(&[2]), 10).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&ranked, &j(&[0, 1]), 10).unwrap(), 1.0);
        assert!(hitrate_at_k(&ranked, &j(&[0]), 0).is_err());
    }

    #[test]
    fn evaluate_user_ties_and_masking() {
        let specs = [MetricSpec::hitrate(1), "ndcg@3".parse().unwrap()];
        let flat = [0.0f64; 5];
        // ties: order is 0,1,2,3,4
        let r = evaluate_user(&flat, &[], &j(&[2]), &specs).unwrap();
        assert_eq!(r[0], 0.0);
        assert!((r[1] - 0.5).abs() < 1e-15);
        // masking the top irrelevant item promotes by one rank
        let scores = [5.0f32, 4.0, 3.0, 2.0, 1.0];
        let before = evaluate_user(&scores, &[], &j(&[2]), &specs).unwrap();
        let after = evaluate_user(&scores, &[0], &j(&[2]), &specs).unwrap();
        assert!((before[1] - 0.5).abs() < 1e-7);
        assert!((after[1] - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!(evaluate_user(&scores, &[2], &j(&[2]), &specs).is_err());
        let unique_max = [0.1, 0.9, 0.2];
        assert_eq!(evaluate_user(&unique_max, &[], &j(&[1]), &specs).unwrap()[0], 1.0);
    }

    #[test]
    fn nan_ranks_last() {
        let scores = [f64::NAN, 0.5, 0.1];
        assert_eq!(top_items(&scores, &[false; 3], 3), vec![1, 2, 0]);
    }

    // naive references: explicit position loop; ideal DCG by maximizing over
    // every permutation of the candidate list
    fn naive(ranked: &[u32], rel: &[u32], k: usize) -> [f64; 4] {
        let is_rel = |y: u32| rel.contains(&y);
        let mut h = 0.0;
        let mut dcg = 0.0;
        for pos in 0..ranked.len() {
            if pos < k && is_rel(ranked[pos]) {
                h += 1.0;
                dcg += 1.0 / ((pos + 2) as f64).log2();
            }
        }
        let mut best = 0.0f64;
        permutations(ranked.to_vec(), &mut |p| {
            let d: f64 = (0..p.len().min(k)).filter(|&i| is_rel(p[i])).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
            best = best.max(d);
        });
        [h, h / rel.len() as f64, h / k as f64, dcg / best]
    }

    fn permutations(mut v: Vec<u32>, f: &mut impl FnMut(&[u32])) {
        fn heap(n: usize, v: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
            if n <= 1 {
                f(v);
                return;
            }
            for i in 0..n - 1 {
                heap(n - 1, v, f);
                if n % 2 == 0 { v.swap(i, n - 1) } else { v.swap(0, n - 1) }
            }
            heap(n - 1, v, f);
        }
        let n = v.len();
        heap(n, &mut v, f);
    }

    #[test]
    fn exhaustive_against_naive_small() {
        // every ranking of up to 5 candidates, every non-empty relevant set, every k
        for n in 1..=5u32 {
            let items: Vec<u32> = (0..n).collect();
            let mut rankings = Vec::new();
            permutations(items.clone(), &mut |p| rankings.push(p.to_vec()));
            for mask in 1u32..(1 << n) {
                let rel: Vec<u32> = items.iter().copied().filter(|i| mask >> i & 1 == 1).collect();
                let judg = j(&rel);
                for ranked in &rankings {
                    for k in 1..=(n as usize + 1) {
                        let want = naive(ranked, &rel, k);
                        let got = [
                            hitrate_at_k(ranked, &judg, k).unwrap(),
                            recall_at_k(ranked, &judg, k).unwrap(),
                            precision_at_k(ranked, &judg, k).unwrap(),
                            ndcg_at_k(ranked, &judg, k).unwrap(),
                        ];
                        assert_eq!(got, want, "ranked={ranked:?} rel={rel:?} k={k}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_in_k_and_bounded(
            scores in proptest::collection::vec(-1.0f64..1.0, 2..40),
            rel_seed in any::<u64>(),
        ) {
            let n = scores.len() as u32;
            let rel: Vec<u32> = (0..n).filter(|i| (rel_seed >> (i % 64)) & 1 == 1).collect();
            prop_assume!(!rel.is_empty());
            let judg = j(&rel);
            let ranked = top_items(&scores, &vec![false; scores.len()], scores.len());
            // truncated-ideal NDCG is not monotone in k, so only hit rate and recall are checked
            let mut prev = [0.0; 2];
            for k in 1..=scores.len() + 2 {
                let cur = [
                    hitrate_at_k(&ranked, &judg, k).unwrap(),
                    recall_at_k(&ranked, &judg, k).unwrap(),
                    ndcg_at_k(&ranked, &judg, k).unwrap(),
                ];
                for m in 0..2 {
                    prop_assert!(cur[m] >= prev[m] - 1e-12);
                }
                prop_assert!(cur[1] <= 1.0 && cur[2] <= 1.0 + 1e-12);
                let p = precision_at_k(&ranked, &judg, k).unwrap();
                prop_assert!((p * k as f64 - cur[1] * rel.len() as f64).abs() < 1e-9);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&cur[2]));
                if rel.len() == 1 {
                    prop_assert_eq!(cur[0], cur[1]);
                }
                prev = [cur[0], cur[1]];
            }
        }

        #[test]
        fn invariant_under_monotone_transform(
            scores in proptest::collection::vec(-5.0f64..5.0, 2..30),
            target in 0usize..30,
        ) {
            let target = (target % scores.len()) as u32;
            let judg = j(&[target]);
            let specs: Vec<MetricSpec> = ["hitrate@3", "recall@5", "precision@2", "ndcg@4"]
                .iter().map(|s| s.parse().unwrap()).collect();
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 1.0).collect();
            prop_assert_eq!(
                evaluate_user(&scores, &[], &judg, &specs).unwrap(),
                evaluate_user(&transformed, &[], &judg, &specs).unwrap()
            );
        }
    }
}
