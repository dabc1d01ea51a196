//! Binary random forest: CART trees on Gini impurity with bootstrap
//! aggregation and per-node feature subsampling.
//!
//! Training is deterministic under the master seed. Each tree derives its own
//! seed from `(seed, tree_index)`, draws its bootstrap sample and per-node
//! feature subsets from that stream alone, and grows depth-first, so the
//! model is identical regardless of how tree training is scheduled.
//!
//! Split selection compares candidates in exact integer arithmetic (the Gini
//! ordering reduces to a rational comparison), so tie-breaking never depends
//! on floating-point rounding and results are bit-stable across platforms.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::seed;

/// How many candidate features each node draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// `max(1, floor(sqrt(dim)))` candidates, the usual forest default.
    Sqrt,
    /// Every feature; trees become deterministic CART.
    All,
    /// Exactly `k` candidates; `k` must not exceed the feature dimension.
    Fixed(usize),
}

impl MaxFeatures {
    fn resolve(self, dim: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((dim as f64).sqrt().floor() as usize).clamp(1, dim),
            MaxFeatures::All => dim,
            MaxFeatures::Fixed(k) => k,
        }
    }
}

/// Forest hyperparameters. Defaults mirror the common library defaults for a
/// forest classifier: 100 trees, unlimited depth, Gini, sqrt feature
/// subsampling, bootstrap resampling of N rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows nodes until pure or below the sample-count limits.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    /// Resample N rows with replacement per tree; `false` trains every tree
    /// on the full set.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 42,
        }
    }
}

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("got {labels} labels for {samples} samples")]
    LabelCountMismatch { samples: usize, labels: usize },
    #[error("sample {index} has {got} features, expected {expected}")]
    RaggedSample {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("sample {index}, feature {feature} is not finite")]
    NonFiniteFeature { index: usize, feature: usize },
    #[error("max_features Fixed({k}) exceeds feature dimension {dim}")]
    MaxFeaturesTooLarge { k: usize, dim: usize },
    #[error("input has {got} features but the model was trained on {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file: {0}")]
    Persistence(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One tree node. Leaves store `[negative, positive]` training counts so the
/// forest can score with leaf class fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [u32; 2],
    },
}

/// A grown CART tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Positive-class fraction of the leaf `x` reaches.
    pub fn leaf_fraction(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
                TreeNode::Leaf { counts } => {
                    let total = counts[0] + counts[1];
                    return f64::from(counts[1]) / f64::from(total);
                }
            }
        }
    }
}

/// Per-tree seed derivation, exposed so a single tree of a forest can be
/// reproduced in isolation.
pub fn tree_seed(master_seed: u64, tree_index: usize) -> u64 {
    seed::mix(master_seed, &[0x7265, tree_index as u64])
}

struct NodeTask {
    slot: usize,
    depth: usize,
    indices: Vec<u32>,
}

/// Best split of one node, compared exactly.
///
/// Minimizing weighted Gini over a fixed node is equivalent to maximizing
/// `S = (posL^2+negL^2)/mL + (posR^2+negR^2)/mR`, a rational number we
/// compare by cross-multiplication in u128. Ties break to the lowest feature
/// index, then the lowest threshold.
struct BestSplit {
    num: u128,
    den: u128,
    feature: usize,
    threshold: f64,
}

impl BestSplit {
    fn better_than(&self, other: &Option<BestSplit>) -> bool {
        match other {
            None => true,
            Some(o) => {
                let lhs = self.num * o.den;
                let rhs = o.num * self.den;
                lhs > rhs
                    || (lhs == rhs
                        && (self.feature < o.feature
                            || (self.feature == o.feature && self.threshold < o.threshold)))
            }
        }
    }
}

fn side_score(pos: u64, neg: u64) -> u128 {
    u128::from(pos) * u128::from(pos) + u128::from(neg) * u128::from(neg)
}

fn find_best_split(
    samples: &[Vec<f64>],
    labels: &[bool],
    indices: &[u32],
    candidate_features: &[usize],
    min_samples_leaf: usize,
    values: &mut Vec<(f64, bool)>,
) -> Option<(usize, f64)> {
    let m = indices.len() as u64;
    let mut best: Option<BestSplit> = None;

    for &feature in candidate_features {
        values.clear();
        values.extend(
            indices
                .iter()
                .map(|&i| (samples[i as usize][feature], labels[i as usize])),
        );
        values.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let total_pos = values.iter().filter(|v| v.1).count() as u64;
        let total_neg = m - total_pos;
        let mut pos_left = 0u64;
        let mut neg_left = 0u64;

        for j in 0..values.len() - 1 {
            if values[j].1 {
                pos_left += 1;
            } else {
                neg_left += 1;
            }
            let lo = values[j].0;
            let hi = values[j + 1].0;
            if lo == hi {
                continue;
            }
            let m_left = pos_left + neg_left;
            let m_right = m - m_left;
            if (m_left as usize) < min_samples_leaf || (m_right as usize) < min_samples_leaf {
                continue;
            }
            let mut threshold = (lo + hi) / 2.0;
            // The rounded midpoint of two adjacent floats can land on the
            // upper value; pin it down so `x <= threshold` splits exactly at
            // this boundary.
            if threshold >= hi {
                threshold = lo;
            }
            let candidate = BestSplit {
                num: side_score(pos_left, neg_left) * u128::from(m_right)
                    + side_score(total_pos - pos_left, total_neg - neg_left) * u128::from(m_left),
                den: u128::from(m_left) * u128::from(m_right),
                feature,
                threshold,
            };
            if candidate.better_than(&best) {
                best = Some(candidate);
            }
        }
    }

    best.map(|b| (b.feature, b.threshold))
}

fn grow_tree(
    samples: &[Vec<f64>],
    labels: &[bool],
    root_indices: Vec<u32>,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let dim = samples[0].len();
    let k = params.max_features.resolve(dim);

    let mut nodes = vec![TreeNode::Leaf { counts: [0, 0] }];
    let mut stack = vec![NodeTask {
        slot: 0,
        depth: 0,
        indices: root_indices,
    }];
    let mut pool: Vec<usize> = (0..dim).collect();
    let mut values: Vec<(f64, bool)> = Vec::new();
    let mut drawn: Vec<usize> = Vec::with_capacity(k);

    while let Some(task) = stack.pop() {
        let pos = task
            .indices
            .iter()
            .filter(|&&i| labels[i as usize])
            .count() as u32;
        let neg = task.indices.len() as u32 - pos;

        let splittable = pos != 0
            && neg != 0
            && task.indices.len() >= params.min_samples_split
            && params.max_depth.map_or(true, |d| task.depth < d);

        let split = if splittable {
            // Draw without replacement from the per-tree stream; skipped
            // entirely when every feature is a candidate.
            drawn.clear();
            if k == dim {
                drawn.extend(0..dim);
            } else {
                for i in 0..k {
                    let j = rng.gen_range(i..dim);
                    pool.swap(i, j);
                    drawn.push(pool[i]);
                }
                pool.sort_unstable();
            }
            find_best_split(
                samples,
                labels,
                &task.indices,
                &drawn,
                params.min_samples_leaf,
                &mut values,
            )
        } else {
            None
        };

        match split {
            Some((feature, threshold)) => {
                let (left_idx, right_idx): (Vec<u32>, Vec<u32>) = task
                    .indices
                    .iter()
                    .partition(|&&i| samples[i as usize][feature] <= threshold);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(TreeNode::Leaf { counts: [0, 0] });
                nodes.push(TreeNode::Leaf { counts: [0, 0] });
                nodes[task.slot] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                // Right first so the left child pops next: preorder growth.
                stack.push(NodeTask {
                    slot: right,
                    depth: task.depth + 1,
                    indices: right_idx,
                });
                stack.push(NodeTask {
                    slot: left,
                    depth: task.depth + 1,
                    indices: left_idx,
                });
            }
            None => {
                nodes[task.slot] = TreeNode::Leaf { counts: [neg, pos] };
            }
        }
    }

    DecisionTree { nodes }
}

fn validate_matrix(samples: &[Vec<f64>], labels: &[bool]) -> Result<usize, ForestError> {
    if samples.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    if samples.len() != labels.len() {
        return Err(ForestError::LabelCountMismatch {
            samples: samples.len(),
            labels: labels.len(),
        });
    }
    let dim = samples[0].len();
    for (index, row) in samples.iter().enumerate() {
        if row.len() != dim {
            return Err(ForestError::RaggedSample {
                index,
                got: row.len(),
                expected: dim,
            });
        }
        for (feature, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(ForestError::NonFiniteFeature { index, feature });
            }
        }
    }
    Ok(dim)
}

/// Grows a single CART tree on the given samples (no bootstrap at this
/// level). A single-sample or single-class input yields a one-leaf tree.
pub fn train_tree(
    samples: &[Vec<f64>],
    labels: &[bool],
    params: &ForestParams,
    tree_seed: u64,
) -> DecisionTree {
    assert!(!samples.is_empty(), "train_tree needs at least one sample");
    assert_eq!(samples.len(), labels.len());
    let mut rng = seed::rng_for(tree_seed, &[]);
    let indices: Vec<u32> = (0..samples.len() as u32).collect();
    grow_tree(samples, labels, indices, params, &mut rng)
}

/// A trained forest plus everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub feature_dimension: usize,
}

/// On-disk model container.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: RandomForestModel,
}

const MODEL_FORMAT: &str = "mousedyn-forest";
const MODEL_VERSION: u32 = 1;

/// Trains `params.n_trees` trees, each from its own derived seed. Tree `t`
/// resamples N rows with replacement (when `bootstrap`) and grows on them;
/// the result is independent of training order or thread schedule.
pub fn train_forest(
    samples: &[Vec<f64>],
    labels: &[bool],
    params: &ForestParams,
) -> Result<RandomForestModel, ForestError> {
    let dim = validate_matrix(samples, labels)?;
    if let MaxFeatures::Fixed(k) = params.max_features {
        if k > dim {
            return Err(ForestError::MaxFeaturesTooLarge { k, dim });
        }
    }

    let n = samples.len();
    let trees = par::map_range(params.n_trees, |t| {
        let mut rng = seed::rng_for(tree_seed(params.seed, t), &[]);
        let indices: Vec<u32> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n as u32)).collect()
        } else {
            (0..n as u32).collect()
        };
        grow_tree(samples, labels, indices, params, &mut rng)
    });

    Ok(RandomForestModel {
        trees,
        params: params.clone(),
        feature_dimension: dim,
    })
}

impl RandomForestModel {
    /// Genuine-probability score: the mean over trees of the reached leaf's
    /// positive-class fraction. Always in [0, 1].
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, ForestError> {
        if x.len() != self.feature_dimension {
            return Err(ForestError::DimensionMismatch {
                expected: self.feature_dimension,
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.leaf_fraction(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Authenticates iff the score reaches `threshold`; a tie authenticates.
    pub fn classify(&self, x: &[f64], threshold: f64) -> Result<bool, ForestError> {
        Ok(self.predict_proba(x)? >= threshold)
    }

    /// Writes the model as versioned JSON. Thresholds round-trip exactly, so
    /// a loaded model reproduces in-memory scores bit-for-bit.
    pub fn save<W: Write>(&self, writer: W) -> Result<(), ForestError> {
        serde_json::to_writer(
            writer,
            &ModelFile {
                format: MODEL_FORMAT.to_string(),
                version: MODEL_VERSION,
                model: self.clone(),
            },
        )?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, ForestError> {
        let file: ModelFile = serde_json::from_reader(reader)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(ForestError::UnsupportedVersion(file.version));
        }
        Ok(file.model)
    }
}
