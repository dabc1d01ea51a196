//! Per-user balanced binary datasets and the master train/test collections.
//!
//! Each user's feature vectors are split 70/30 (chronologically by default),
//! then every user gets one dataset: all of their own actions labeled
//! genuine, plus an equal number of imposter actions drawn evenly from every
//! other user's pool of the *same* split, so nothing leaks from test pools
//! into training sets.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_NAMES};
use crate::par;
use crate::seed;

/// One feature vector tagged with its action ordinal so samples stay
/// identifiable across splits.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub ordinal: usize,
    pub features: FeatureVector,
}

/// A user's features after the train/test split, still unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSplit {
    pub train: Vec<FeatureRow>,
    pub test: Vec<FeatureRow>,
}

/// One labeled row of a user-specific dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    /// `true` = genuine (positive class), `false` = imposter.
    pub label: bool,
    pub source_user: u32,
    pub ordinal: usize,
}

/// Balanced genuine-vs-imposter dataset for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDataset {
    pub owner_id: u32,
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

impl UserDataset {
    /// Rows as a feature matrix plus labels, ready for forest training.
    pub fn matrix(samples: &[LabeledSample]) -> (Vec<Vec<f64>>, Vec<bool>) {
        let x = samples.iter().map(|s| s.features.as_slice().to_vec()).collect();
        let y = samples.iter().map(|s| s.label).collect();
        (x, y)
    }

    pub fn genuine_count(samples: &[LabeledSample]) -> usize {
        samples.iter().filter(|s| s.label).count()
    }
}

/// Per-user genuine action counts.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCounts {
    pub user_id: u32,
    pub train_genuine: usize,
    pub test_genuine: usize,
}

/// Count summary across all owners.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsSummary {
    pub per_user: Vec<UserCounts>,
    pub total_train_genuine: usize,
    pub total_test_genuine: usize,
}

/// Every user's dataset plus the count summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterDatasets {
    /// Sorted by `owner_id`.
    pub datasets: Vec<UserDataset>,
    pub counts: CountsSummary,
}

/// Train/test split policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// First `floor(ratio * n)` actions train, the rest test.
    Chronological,
    /// Seeded shuffle before the same cut.
    Shuffled,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("at least 2 users are required to form imposter pools, got {0}")]
    TooFewUsers(usize),
    #[error("owner {0} is not present in the split features")]
    UnknownOwner(u32),
    #[error("duplicate dataset for owner {0}")]
    DuplicateOwner(u32),
    #[error(
        "user {owner}: imposter {imposter} has only {available} {split} actions, {needed} needed"
    )]
    PoolTooSmall {
        owner: u32,
        imposter: u32,
        split: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("user {owner}: {split} set has {genuine} genuine vs {imposter} imposter rows")]
    Unbalanced {
        owner: u32,
        split: &'static str,
        genuine: usize,
        imposter: usize,
    },
}

/// Splits one user's session-ordered features: the first `floor(ratio * n)`
/// go to train, the remainder to test.
pub fn split_user(features: &[FeatureVector], ratio: f64) -> (Vec<FeatureRow>, Vec<FeatureRow>) {
    assert!(
        ratio > 0.0 && ratio < 1.0,
        "split ratio must be in (0, 1), got {ratio}"
    );
    let n_train = (ratio * features.len() as f64).floor() as usize;
    let rows = |range: std::ops::Range<usize>| {
        range
            .map(|i| FeatureRow {
                ordinal: i,
                features: features[i].clone(),
            })
            .collect()
    };
    (rows(0..n_train), rows(n_train..features.len()))
}

/// Seeded random split: shuffles the action indices, cuts at
/// `floor(ratio * n)`, then restores chronological order within each side.
pub fn split_user_shuffled(
    features: &[FeatureVector],
    ratio: f64,
    seed: u64,
) -> (Vec<FeatureRow>, Vec<FeatureRow>) {
    assert!(
        ratio > 0.0 && ratio < 1.0,
        "split ratio must be in (0, 1), got {ratio}"
    );
    let n = features.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng_for(seed, &[0x7368]);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_train = (ratio * n as f64).floor() as usize;
    let take = |slice: &mut [usize]| -> Vec<FeatureRow> {
        slice.sort_unstable();
        slice
            .iter()
            .map(|&i| FeatureRow {
                ordinal: i,
                features: features[i].clone(),
            })
            .collect()
    };
    let (train_idx, test_idx) = order.split_at_mut(n_train);
    (take(train_idx), take(test_idx))
}

/// Per-imposter draw quotas for `n` genuine actions over `imposters` users:
/// `floor(n / imposters)` each, with the remainder going one-per-user to the
/// lowest-ranked (lowest user id) imposters.
fn quotas(n: usize, imposters: usize) -> Vec<usize> {
    let base = n / imposters;
    let rem = n % imposters;
    (0..imposters)
        .map(|rank| base + usize::from(rank < rem))
        .collect()
}

/// Draws `k` distinct indices from `0..pool` and returns them sorted.
fn draw_without_replacement(pool: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..pool).collect();
    for i in 0..k {
        let j = rng.gen_range(i..pool);
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices.sort_unstable();
    indices
}

fn build_side(
    owner_id: u32,
    splits: &BTreeMap<u32, UserSplit>,
    seed: u64,
    which: &'static str,
) -> Result<Vec<LabeledSample>, DatasetError> {
    fn side<'a>(s: &'a UserSplit, which: &str) -> &'a [FeatureRow] {
        if which == "train" {
            &s.train
        } else {
            &s.test
        }
    }
    let owner_rows = side(&splits[&owner_id], which);
    let n = owner_rows.len();

    let mut samples: Vec<LabeledSample> = owner_rows
        .iter()
        .map(|row| LabeledSample {
            features: row.features.clone(),
            label: true,
            source_user: owner_id,
            ordinal: row.ordinal,
        })
        .collect();

    let imposters: Vec<u32> = splits.keys().copied().filter(|&u| u != owner_id).collect();
    let split_tag = if which == "train" { 0u64 } else { 1u64 };
    for (rank, &imposter) in imposters.iter().enumerate() {
        let quota = quotas(n, imposters.len())[rank];
        let pool = side(&splits[&imposter], which);
        if pool.len() < quota {
            return Err(DatasetError::PoolTooSmall {
                owner: owner_id,
                imposter,
                split: which,
                needed: quota,
                available: pool.len(),
            });
        }
        let mut rng = seed::rng_for(
            seed,
            &[0x696d70, u64::from(owner_id), u64::from(imposter), split_tag],
        );
        for idx in draw_without_replacement(pool.len(), quota, &mut rng) {
            samples.push(LabeledSample {
                features: pool[idx].features.clone(),
                label: false,
                source_user: imposter,
                ordinal: pool[idx].ordinal,
            });
        }
    }
    Ok(samples)
}

/// Builds one user's balanced dataset from everyone's split features.
///
/// Train imposters come only from other users' train pools and test
/// imposters only from test pools. Draws are uniform without replacement,
/// seeded per `(seed, owner, imposter, split)`, so construction is
/// deterministic and safe to run for all owners in parallel.
pub fn build_user_dataset(
    owner_id: u32,
    splits: &BTreeMap<u32, UserSplit>,
    seed: u64,
) -> Result<UserDataset, DatasetError> {
    if splits.len() < 2 {
        return Err(DatasetError::TooFewUsers(splits.len()));
    }
    if !splits.contains_key(&owner_id) {
        return Err(DatasetError::UnknownOwner(owner_id));
    }
    Ok(UserDataset {
        owner_id,
        train: build_side(owner_id, splits, seed, "train")?,
        test: build_side(owner_id, splits, seed, "test")?,
    })
}

fn check_balance(ds: &UserDataset) -> Result<(), DatasetError> {
    for (which, samples) in [("train", &ds.train), ("test", &ds.test)] {
        let genuine = UserDataset::genuine_count(samples);
        let imposter = samples.len() - genuine;
        if genuine != imposter {
            return Err(DatasetError::Unbalanced {
                owner: ds.owner_id,
                split: which,
                genuine,
                imposter,
            });
        }
    }
    Ok(())
}

/// Collects per-user datasets into the master collection with count
/// summaries. Requires one balanced dataset per user and at least two users.
pub fn assemble_master(mut datasets: Vec<UserDataset>) -> Result<MasterDatasets, DatasetError> {
    if datasets.len() < 2 {
        return Err(DatasetError::TooFewUsers(datasets.len()));
    }
    datasets.sort_by_key(|d| d.owner_id);
    for pair in datasets.windows(2) {
        if pair[0].owner_id == pair[1].owner_id {
            return Err(DatasetError::DuplicateOwner(pair[0].owner_id));
        }
    }
    let mut per_user = Vec::with_capacity(datasets.len());
    for ds in &datasets {
        check_balance(ds)?;
        per_user.push(UserCounts {
            user_id: ds.owner_id,
            train_genuine: UserDataset::genuine_count(&ds.train),
            test_genuine: UserDataset::genuine_count(&ds.test),
        });
    }
    let counts = CountsSummary {
        total_train_genuine: per_user.iter().map(|c| c.train_genuine).sum(),
        total_test_genuine: per_user.iter().map(|c| c.test_genuine).sum(),
        per_user,
    };
    Ok(MasterDatasets { datasets, counts })
}

/// Builds every user's dataset (in parallel with the `parallel` feature) and
/// assembles the master collection.
pub fn build_master_datasets(
    splits: &BTreeMap<u32, UserSplit>,
    seed: u64,
) -> Result<MasterDatasets, DatasetError> {
    if splits.len() < 2 {
        return Err(DatasetError::TooFewUsers(splits.len()));
    }
    let owners: Vec<u32> = splits.keys().copied().collect();
    let built = par::map_items(&owners, |&owner| build_user_dataset(owner, splits, seed));
    assemble_master(built.into_iter().collect::<Result<Vec<_>, _>>()?)
}

/// Writes labeled rows in the feature-matrix CSV format: the 31 component
/// names plus `user_id,label,ordinal`, one row per action, numbers in full
/// round-trip precision.
pub fn write_feature_csv<W: Write>(mut writer: W, samples: &[LabeledSample]) -> io::Result<()> {
    writeln!(writer, "{},user_id,label,ordinal", FEATURE_NAMES.join(","))?;
    for s in samples {
        for v in s.features.as_slice() {
            write!(writer, "{v},")?;
        }
        writeln!(
            writer,
            "{},{},{}",
            s.source_user,
            u8::from(s.label),
            s.ordinal
        )?;
    }
    Ok(())
}
