//! Random-forest classifier over [`MetaGroup`] labels.
//!
//! Trees are CART-style with Gini impurity and midpoint thresholds. Each tree
//! is grown on a bootstrap resample drawn from the data in a canonical order
//! (sorted by label, then features), so shuffling the input never changes the
//! model. Trees are trained in parallel from per-tree seeds.

use std::cmp::Ordering;
use std::io::{Read, Write};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{FeatureVector, MetaGroup};
use crate::{exec, rng};

pub const N_CLASSES: usize = 3;
const FORMAT: &str = "metatutor-forest";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("no training samples")]
    EmptyData,
    #[error("class counts sum to zero")]
    ZeroCounts,
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid forest config: {0}")]
    Config(String),
    #[error("bootstrap masks are not available (forest was loaded from a file or trained on other data)")]
    NoMasks,
    #[error("no sample was ever out of bag")]
    NoOutOfBag,
    #[error("unsupported model file: {0}")]
    Format(String),
    #[error("malformed forest file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: MetaGroup,
}

impl LabeledSample {
    pub fn new(features: FeatureVector, label: MetaGroup) -> Self {
        LabeledSample { features, label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means round(√d).
    pub features_per_split: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            min_leaf: 1,
            features_per_split: None,
        }
    }
}

impl ForestConfig {
    fn validate(&self, n_features: usize) -> Result<usize, ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::Config("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(ForestError::Config("min_leaf must be >= 1".into()));
        }
        let k = self
            .features_per_split
            .unwrap_or_else(|| ((n_features as f64).sqrt().round() as usize).max(1));
        if k == 0 || k > n_features {
            return Err(ForestError::Config(format!(
                "features_per_split must lie in 1..={n_features}"
            )));
        }
        Ok(k)
    }
}

/// A node in a tree's flat arena; children are arena indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [u32; N_CLASSES],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn leaf_counts(&self, x: &[f64]) -> &[u32; N_CLASSES] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    fn validate(&self, n_features: usize) -> Result<(), ForestError> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(ForestError::Format("empty tree".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Leaf { counts } if counts.iter().all(|&c| c == 0) => {
                    return Err(ForestError::Format("leaf with zero counts".into()))
                }
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } if *feature >= n_features
                    || *left <= i
                    || *right <= i
                    || *left >= n
                    || *right >= n =>
                {
                    return Err(ForestError::Format(format!("bad split node {i}")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Chosen split: samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    format: String,
    version: u32,
    pub n_features: usize,
    pub config: ForestConfig,
    pub seed: u64,
    pub trees: Vec<Tree>,
    /// In-bag flags per tree over the canonical training order; only present
    /// on a freshly trained forest.
    #[serde(skip)]
    in_bag: Option<Vec<Vec<bool>>>,
}

/// Gini impurity `1 − Σ p²` of a class-count vector.
pub fn gini_impurity(counts: [u64; N_CLASSES]) -> Result<f64, ForestError> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(ForestError::ZeroCounts);
    }
    Ok(gini(&counts.map(|c| c as f64), n as f64))
}

fn gini(counts: &[f64; N_CLASSES], n: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

/// Best Gini split of `samples` over the candidate `features` (min leaf 1).
pub fn best_split(samples: &[LabeledSample], features: &[usize]) -> Option<Split> {
    let idx: Vec<usize> = (0..samples.len()).collect();
    let mut feats = features.to_vec();
    feats.sort_unstable();
    best_split_in(samples, &idx, &feats, 1)
}

/// Gains within this margin count as ties, so the lower feature/threshold wins
/// over float noise.
const GAIN_EPS: f64 = 1e-12;

fn best_split_in(
    data: &[LabeledSample],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = idx.len();
    if n < 2 * min_leaf {
        return None;
    }
    let mut total = [0.0; N_CLASSES];
    for &i in idx {
        total[data[i].label.index()] += 1.0;
    }
    let parent = gini(&total, n as f64);
    let mut best: Option<Split> = None;
    let mut order = idx.to_vec();
    for &f in features {
        let val = |i: usize| data[i].features.as_slice()[f];
        order.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
        let mut left = [0.0; N_CLASSES];
        for k in 1..n {
            left[data[order[k - 1]].label.index()] += 1.0;
            let (lo, hi) = (val(order[k - 1]), val(order[k]));
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right: [f64; N_CLASSES] = std::array::from_fn(|c| total[c] - left[c]);
            let (nl, nr) = (k as f64, (n - k) as f64);
            let child = (nl * gini(&left, nl) + nr * gini(&right, nr)) / n as f64;
            let gain = parent - child;
            if gain > GAIN_EPS && best.is_none_or(|b| gain > b.gain + GAIN_EPS) {
                let threshold = lo + (hi - lo) / 2.0;
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

fn grow_tree<R: Rng>(
    data: &[LabeledSample],
    bag: Vec<usize>,
    n_features: usize,
    per_split: usize,
    min_leaf: usize,
    rng: &mut R,
) -> Tree {
    let mut nodes = Vec::new();
    // (node slot, sample indices); children are appended after their parent.
    let mut stack = vec![(0usize, bag)];
    nodes.push(TreeNode::Leaf { counts: [0; 3] });
    while let Some((slot, idx)) = stack.pop() {
        let mut counts = [0u32; N_CLASSES];
        for &i in &idx {
            counts[data[i].label.index()] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure {
            None
        } else {
            let mut feats = index::sample(rng, n_features, per_split).into_vec();
            feats.sort_unstable();
            best_split_in(data, &idx, &feats, min_leaf)
        };
        match split {
            None => nodes[slot] = TreeNode::Leaf { counts },
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .partition(|&&i| data[i].features.as_slice()[s.feature] <= s.threshold);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(TreeNode::Leaf { counts: [0; 3] });
                nodes.push(TreeNode::Leaf { counts: [0; 3] });
                nodes[slot] = TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
                stack.push((right, r));
                stack.push((left, l));
            }
        }
    }
    Tree { nodes }
}

fn canonical(data: &[LabeledSample]) -> Vec<LabeledSample> {
    let mut v = data.to_vec();
    v.sort_by(|a, b| {
        a.label.index().cmp(&b.label.index()).then_with(|| {
            a.features
                .as_slice()
                .iter()
                .zip(b.features.as_slice())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    v
}

fn check_dims(data: &[LabeledSample]) -> Result<usize, ForestError> {
    let d = data.first().ok_or(ForestError::EmptyData)?.features.len();
    for s in data {
        if s.features.len() != d {
            return Err(ForestError::Dimension {
                expected: d,
                found: s.features.len(),
            });
        }
    }
    Ok(d)
}

pub fn train_forest(
    data: &[LabeledSample],
    config: &ForestConfig,
    seed: u64,
) -> Result<Forest, ForestError> {
    let d = check_dims(data)?;
    let per_split = config.validate(d)?;
    let data = canonical(data);
    let n = data.len();
    let grown = exec::map_range(config.n_trees, |t| {
        let mut r = rng::stream_rng(seed, t as u64);
        let mut bag: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
        bag.sort_unstable();
        let mut mask = vec![false; n];
        for &i in &bag {
            mask[i] = true;
        }
        let tree = grow_tree(&data, bag, d, per_split, config.min_leaf, &mut r);
        (tree, mask)
    });
    let (trees, masks) = grown.into_iter().unzip();
    Ok(Forest {
        format: FORMAT.into(),
        version: VERSION,
        n_features: d,
        config: config.clone(),
        seed,
        trees,
        in_bag: Some(masks),
    })
}

fn argmax(p: &[f64; N_CLASSES]) -> MetaGroup {
    let mut best = 0;
    for c in 1..N_CLASSES {
        if p[c] > p[best] {
            best = c;
        }
    }
    MetaGroup::from_index(best).expect("class index in range")
}

fn leaf_freqs(tree: &Tree, x: &[f64]) -> [f64; N_CLASSES] {
    let counts = tree.leaf_counts(x);
    let total: u32 = counts.iter().sum();
    counts.map(|c| c as f64 / total as f64)
}

fn vote<'a>(trees: impl Iterator<Item = &'a Tree>, x: &[f64]) -> Option<[f64; N_CLASSES]> {
    let mut acc = [0.0; N_CLASSES];
    let mut k = 0usize;
    for t in trees {
        let f = leaf_freqs(t, x);
        for c in 0..N_CLASSES {
            acc[c] += f[c];
        }
        k += 1;
    }
    (k > 0).then(|| {
        let p = acc.map(|a| a / k as f64);
        let s: f64 = p.iter().sum();
        p.map(|v| v / s)
    })
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Whether the bootstrap masks needed by [`oob_accuracy`] are present.
    pub fn has_masks(&self) -> bool {
        self.in_bag.is_some()
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), ForestError> {
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn load<R: Read>(r: R) -> Result<Forest, ForestError> {
        let f: Forest = serde_json::from_reader(r)?;
        if f.format != FORMAT || f.version != VERSION {
            return Err(ForestError::Format(format!("{} v{}", f.format, f.version)));
        }
        if f.trees.is_empty() {
            return Err(ForestError::Format("forest has no trees".into()));
        }
        for t in &f.trees {
            t.validate(f.n_features)?;
        }
        Ok(f)
    }
}

/// Class probabilities (mean leaf frequencies) and their argmax, with ties
/// going to the lowest group code.
pub fn predict(
    forest: &Forest,
    features: &FeatureVector,
) -> Result<(MetaGroup, [f64; N_CLASSES]), ForestError> {
    if features.len() != forest.n_features {
        return Err(ForestError::Dimension {
            expected: forest.n_features,
            found: features.len(),
        });
    }
    let p = vote(forest.trees.iter(), features.as_slice()).expect("forest has trees");
    Ok((argmax(&p), p))
}

/// Out-of-bag accuracy on the data the forest was trained on. Samples that
/// were in every bootstrap are skipped.
pub fn oob_accuracy(forest: &Forest, data: &[LabeledSample]) -> Result<f64, ForestError> {
    let masks = forest.in_bag.as_ref().ok_or(ForestError::NoMasks)?;
    if masks.first().is_some_and(|m| m.len() != data.len()) {
        return Err(ForestError::NoMasks);
    }
    let data = canonical(data);
    let (mut hit, mut seen) = (0usize, 0usize);
    for (i, s) in data.iter().enumerate() {
        if s.features.len() != forest.n_features {
            return Err(ForestError::Dimension {
                expected: forest.n_features,
                found: s.features.len(),
            });
        }
        let trees = forest
            .trees
            .iter()
            .zip(masks)
            .filter(|(_, m)| !m[i])
            .map(|(t, _)| t);
        if let Some(p) = vote(trees, s.features.as_slice()) {
            seen += 1;
            hit += usize::from(argmax(&p) == s.label);
        }
    }
    if seen == 0 {
        return Err(ForestError::NoOutOfBag);
    }
    Ok(hit as f64 / seen as f64)
}

/// Fraction of `data` whose predicted group matches its label.
pub fn accuracy(forest: &Forest, data: &[LabeledSample]) -> Result<f64, ForestError> {
    if data.is_empty() {
        return Err(ForestError::EmptyData);
    }
    let mut hit = 0;
    for s in data {
        hit += usize::from(predict(forest, &s.features)?.0 == s.label);
    }
    Ok(hit as f64 / data.len() as f64)
}
