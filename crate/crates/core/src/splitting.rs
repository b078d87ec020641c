//! User-inductive fold assignment and per-user hold-out partitions.
//!
//! Users are dealt into `k` folds; a held-out user's profile is split into a
//! fold-in part (model input) and validation/test items (targets). Each user's
//! split draws from a stream keyed by `(seed, user token)`, so adding or
//! removing other users leaves it unchanged.

use serde::{Deserialize, Serialize};

use crate::data::InteractionDataset;
use crate::rng::{derive_seed, SeedStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub k: usize,
    pub seed: u64,
    pub n_val: usize,
    pub n_test: usize,
    /// Hold out the latest interactions (test) and the ones before them
    /// (validation) instead of drawing uniformly.
    #[serde(default)]
    pub temporal_holdout: bool,
}

impl SplitPlan {
    pub fn new(k: usize, seed: u64, n_val: usize, n_test: usize) -> Result<Self> {
        let plan = Self { k, seed, n_val, n_test, temporal_holdout: false };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::domain(format!("need at least 2 folds, got {}", self.k)));
        }
        if self.n_test < 1 {
            return Err(Error::domain("n_test must be at least 1"));
        }
        Ok(())
    }

    /// Smallest profile that can be split under this plan.
    pub fn min_profile(&self) -> usize {
        self.n_val + self.n_test + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of_user: Vec<usize>,
}

impl FoldAssignment {
    /// Users of `fold` in ascending index order.
    pub fn users_in(&self, fold: usize) -> Vec<usize> {
        self.users_where(|f| f == fold)
    }

    pub fn users_where(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        (0..self.fold_of_user.len()).filter(|&u| pred(self.fold_of_user[u])).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of_user {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded uniform permutation of users dealt round-robin into `k` folds.
pub fn assign_user_folds(n_users: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 || n_users < k {
        return Err(Error::domain(format!("cannot deal {n_users} users into {k} folds")));
    }
    let mut perm: Vec<usize> = (0..n_users).collect();
    SeedStream::new(derive_seed(seed, &[b"folds", &(k as u64).to_le_bytes()])).shuffle(&mut perm);
    let mut fold_of_user = vec![0; n_users];
    for (pos, &u) in perm.iter().enumerate() {
        fold_of_user[u] = pos % k;
    }
    Ok(FoldAssignment { k, fold_of_user })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileSplit {
    /// Ascending item indices.
    pub fold_in: Vec<u32>,
    pub val_items: Vec<u32>,
    pub test_items: Vec<u32>,
}

impl ProfileSplit {
    /// Model input for test-time scoring: fold-in plus validation items.
    pub fn test_input(&self) -> Vec<u32> {
        let mut v = [self.fold_in.as_slice(), self.val_items.as_slice()].concat();
        v.sort_unstable();
        v
    }
}

fn check_eligible(len: usize, n_val: usize, n_test: usize) -> Result<()> {
    if len < n_val + n_test + 1 {
        return Err(Error::IneligibleProfile { len, n_val, n_test });
    }
    Ok(())
}

/// Draws `n_test`, then `n_val` items uniformly without replacement; the
/// remainder is the fold-in.
pub fn partition_profile(profile: &[u32], n_val: usize, n_test: usize, rng: &mut SeedStream) -> Result<ProfileSplit> {
    check_eligible(profile.len(), n_val, n_test)?;
    let mut items = profile.to_vec();
    rng.partial_shuffle(&mut items, n_test + n_val);
    let mut test_items = items[..n_test].to_vec();
    let mut val_items = items[n_test..n_test + n_val].to_vec();
    let mut fold_in = items[n_test + n_val..].to_vec();
    test_items.sort_unstable();
    val_items.sort_unstable();
    fold_in.sort_unstable();
    Ok(ProfileSplit { fold_in, val_items, test_items })
}

/// Latest `n_test` interactions are test, the `n_val` before them validation.
/// Equal timestamps are ordered by item index.
pub fn partition_profile_temporal(
    profile: &[u32],
    timestamps: &[i64],
    n_val: usize,
    n_test: usize,
) -> Result<ProfileSplit> {
    check_eligible(profile.len(), n_val, n_test)?;
    let mut order: Vec<(i64, u32)> = timestamps.iter().copied().zip(profile.iter().copied()).collect();
    order.sort_unstable_by(|a, b| b.cmp(a));
    let pick = |r: std::ops::Range<usize>| {
        let mut v: Vec<u32> = order[r].iter().map(|&(_, i)| i).collect();
        v.sort_unstable();
        v
    };
    Ok(ProfileSplit {
        test_items: pick(0..n_test),
        val_items: pick(n_test..n_test + n_val),
        fold_in: pick(n_test + n_val..order.len()),
    })
}

/// The stream used for a user's profile split.
pub fn user_stream(seed: u64, user_token: &str) -> SeedStream {
    SeedStream::new(derive_seed(seed, &[b"profile", user_token.as_bytes()]))
}

/// Splits one user's profile according to `plan`.
pub fn split_user(dataset: &InteractionDataset, user: usize, plan: &SplitPlan) -> Result<ProfileSplit> {
    let profile = dataset.user_items(user);
    match (plan.temporal_holdout, dataset.user_timestamps(user)) {
        (true, Some(ts)) => partition_profile_temporal(profile, ts, plan.n_val, plan.n_test),
        (true, None) => Err(Error::domain("temporal hold-out requires timestamps")),
        (false, _) => {
            let mut rng = user_stream(plan.seed, dataset.user_token(user));
            partition_profile(profile, plan.n_val, plan.n_test, &mut rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalUser {
    pub user: usize,
    pub split: ProfileSplit,
}

#[derive(Debug, Clone)]
pub struct FoldData {
    /// Full profiles of the training users over the unchanged item space.
    pub train: InteractionDataset,
    pub train_users: Vec<usize>,
    pub eval_users: Vec<EvalUser>,
    /// Held-out users whose profiles were too short to split.
    pub skipped_users: usize,
}

fn assemble_fold(
    dataset: &InteractionDataset,
    plan: &SplitPlan,
    train_users: Vec<usize>,
    held_out: &[usize],
    label: usize,
) -> Result<FoldData> {
    let mut eval_users = Vec::with_capacity(held_out.len());
    let mut skipped_users = 0;
    for &u in held_out {
        match split_user(dataset, u, plan) {
            Ok(split) => eval_users.push(EvalUser { user: u, split }),
            Err(Error::IneligibleProfile { .. }) => skipped_users += 1,
            Err(e) => return Err(e),
        }
    }
    if eval_users.is_empty() {
        return Err(Error::DegenerateFold { fold: label });
    }
    if skipped_users > 0 {
        log::warn!("fold {label}: skipped {skipped_users} users with profiles shorter than {}", plan.min_profile());
    }
    Ok(FoldData { train: dataset.select_users(&train_users), train_users, eval_users, skipped_users })
}

/// Outer fold: train on every user outside `eval_fold`, evaluate its users.
pub fn build_fold_data(
    dataset: &InteractionDataset,
    assignment: &FoldAssignment,
    eval_fold: usize,
    plan: &SplitPlan,
) -> Result<FoldData> {
    if eval_fold >= assignment.k {
        return Err(Error::domain(format!("fold {eval_fold} out of range for k={}", assignment.k)));
    }
    let train_users = assignment.users_where(|f| f != eval_fold);
    let held_out = assignment.users_in(eval_fold);
    assemble_fold(dataset, plan, train_users, &held_out, eval_fold)
}

/// Inner split for hyperparameter search within the training folds of
/// `eval_fold`: the first `k - 2` remaining fold labels train, the last one
/// validates.
pub fn build_inner_fold_data(
    dataset: &InteractionDataset,
    assignment: &FoldAssignment,
    eval_fold: usize,
    plan: &SplitPlan,
) -> Result<FoldData> {
    if assignment.k < 3 {
        return Err(Error::domain("an inner validation split needs at least 3 folds"));
    }
    if eval_fold >= assignment.k {
        return Err(Error::domain(format!("fold {eval_fold} out of range for k={}", assignment.k)));
    }
    let remaining: Vec<usize> = (0..assignment.k).filter(|&f| f != eval_fold).collect();
    let val_fold = *remaining.last().expect("k >= 3");
    let train_users = assignment.users_where(|f| f != eval_fold && f != val_fold);
    let held_out = assignment.users_in(val_fold);
    assemble_fold(dataset, plan, train_users, &held_out, eval_fold)
}

/// Everything needed to replay a split from the dataset alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub plan: SplitPlan,
    pub fold_of_user: Vec<usize>,
    /// One entry per splittable user, ascending user index.
    pub held_out: Vec<HeldOutItems>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutItems {
    pub user: usize,
    pub val_items: Vec<u32>,
    pub test_items: Vec<u32>,
}

pub fn split_manifest(dataset: &InteractionDataset, plan: &SplitPlan) -> Result<SplitManifest> {
    plan.validate()?;
    let assignment = assign_user_folds(dataset.n_users(), plan.k, plan.seed)?;
    let mut held_out = Vec::new();
    for u in 0..dataset.n_users() {
        match split_user(dataset, u, plan) {
            Ok(s) => held_out.push(HeldOutItems { user: u, val_items: s.val_items, test_items: s.test_items }),
            Err(Error::IneligibleProfile { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(SplitManifest { plan: *plan, fold_of_user: assignment.fold_of_user, held_out })
}
