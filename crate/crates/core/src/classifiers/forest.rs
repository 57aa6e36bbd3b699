//! Bagged CART trees with Gini splits.

use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::rng::{self, purpose};
use crate::{class_counts, Error, FeatureMatrix, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Candidate features per split; `None` means `⌈√d⌉`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 10,
            min_samples_split: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

/// One tree as parallel node arrays. Node 0 is the root; `feature[i] < 0`
/// marks a leaf. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Class-1 fraction of the training samples that reached the node.
    pub fraction: Vec<f64>,
    pub samples: Vec<u32>,
}

impl Tree {
    fn empty() -> Self {
        Self {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            fraction: Vec::new(),
            samples: Vec::new(),
        }
    }

    fn push_node(&mut self, fraction: f64, samples: usize) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.fraction.push(fraction);
        self.samples.push(samples as u32);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] < 0
    }

    pub fn leaf_for(&self, row: &[f64]) -> usize {
        let mut node = 0;
        while !self.is_leaf(node) {
            node = if row[self.feature[node] as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
        node
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, node: usize) -> usize {
            if t.is_leaf(node) {
                0
            } else {
                1 + walk(t, t.left[node] as usize).max(walk(t, t.right[node] as usize))
            }
        }
        walk(self, 0)
    }

    fn check(&self, width: usize) -> Result<()> {
        let n = self.n_nodes();
        let lens = [
            self.threshold.len(),
            self.left.len(),
            self.right.len(),
            self.fraction.len(),
            self.samples.len(),
        ];
        if n == 0 || lens.iter().any(|&l| l != n) {
            return Err(Error::Invariant("tree arrays have inconsistent lengths".into()));
        }
        for i in 0..n {
            if !(0.0..=1.0).contains(&self.fraction[i]) {
                return Err(Error::Invariant("leaf fraction outside [0, 1]".into()));
            }
            if self.feature[i] >= 0 {
                let (l, r) = (self.left[i] as usize, self.right[i] as usize);
                if self.feature[i] as usize >= width || l <= i || r <= i || l >= n || r >= n {
                    return Err(Error::Invariant("inconsistent tree node children".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub config: ForestConfig,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Invariant("forest has no trees".into()));
        }
        for t in &self.trees {
            t.check(self.n_features)?;
            if t.depth() > self.config.max_depth {
                return Err(Error::Invariant("tree deeper than max_depth".into()));
            }
        }
        Ok(())
    }
}

/// Split quality as an exact fraction. Minimizing weighted Gini
/// `Σ_side n_side·(1 − Σ_c p_c²) / n` is maximizing
/// `Q = Σ_side (Σ_c count_c²) / n_side`, kept as `num/den` so that equal
/// splits compare equal regardless of rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(left: [usize; 2], right: [usize; 2]) -> Self {
        let sq = |c: [usize; 2]| (c[0] as u128).pow(2) + (c[1] as u128).pow(2);
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        Self {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn beats(&self, other: &Self) -> bool {
        self.num * other.den > other.num * self.den
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub purity: Purity,
}

/// Best split over `features` (visited in ascending order). Candidate
/// thresholds are midpoints of consecutive distinct values; only strict
/// improvements replace the incumbent, which implements the
/// (lower feature, lower threshold) tie rule.
pub(crate) fn best_split(
    x: &FeatureMatrix,
    y: &[Label],
    samples: &[usize],
    features: &[usize],
) -> Option<Split> {
    let total = {
        let mut c = [0usize; 2];
        for &s in samples {
            c[usize::from(y[s])] += 1;
        }
        c
    };
    let mut best: Option<Split> = None;
    let mut column: Vec<(f64, Label)> = Vec::with_capacity(samples.len());
    for &f in features {
        column.clear();
        column.extend(samples.iter().map(|&s| (x.get(s, f), y[s])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0usize; 2];
        for pos in 1..column.len() {
            left[usize::from(column[pos - 1].1)] += 1;
            let (lo, hi) = (column[pos - 1].0, column[pos].0);
            if lo == hi {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let purity = Purity::of(left, right);
            if best.is_none_or(|b| purity.beats(&b.purity)) {
                let mid = lo + (hi - lo) / 2.0;
                // adjacent floats can round the midpoint up onto `hi`
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Split {
                    feature: f,
                    threshold,
                    purity,
                });
            }
        }
    }
    best
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [Label],
    cfg: &'a ForestConfig,
    max_features: usize,
    rng: rng::Rng,
    tree: Tree,
}

impl Builder<'_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let mut counts = [0usize; 2];
        for &s in &samples {
            counts[usize::from(self.y[s])] += 1;
        }
        let n = samples.len();
        let node = self.tree.push_node(counts[1] as f64 / n as f64, n);
        if depth >= self.cfg.max_depth
            || counts[0] == 0
            || counts[1] == 0
            || n < self.cfg.min_samples_split
        {
            return node;
        }
        let mut features =
            rand::seq::index::sample(&mut self.rng, self.x.n_cols(), self.max_features).into_vec();
        features.sort_unstable();
        let Some(split) = best_split(self.x, self.y, &samples, &features) else {
            return node;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&s| self.x.get(s, split.feature) <= split.threshold);
        self.tree.feature[node] = split.feature as i64;
        self.tree.threshold[node] = split.threshold;
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.tree.left[node] = l as u32;
        self.tree.right[node] = r as u32;
        node
    }
}

/// Tree `t` draws its bootstrap sample and split candidates from seed
/// `seed ⊕ t`.
pub fn train_random_forest(
    x: &FeatureMatrix,
    y: &[Label],
    cfg: &ForestConfig,
    seed: u64,
) -> Result<ForestModel> {
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::Empty("forest training data"));
    }
    if y.len() != n {
        return Err(Error::InvalidArgument("label count differs from row count".into()));
    }
    let counts = class_counts(y);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass("forest training data"));
    }
    if cfg.n_trees == 0 || x.n_cols() == 0 {
        return Err(Error::InvalidArgument("forest needs >= 1 tree and >= 1 feature".into()));
    }
    let d = x.n_cols();
    let max_features = cfg
        .max_features
        .unwrap_or_else(|| libm::ceil(libm::sqrt(d as f64)) as usize)
        .clamp(1, d);
    let trees = (0..cfg.n_trees)
        .map(|t| {
            let mut rng = rng::stream(rng::derive(seed, t as u64), purpose::BOOTSTRAP);
            let samples: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                x,
                y,
                cfg,
                max_features,
                rng,
                tree: Tree::empty(),
            };
            b.grow(samples, 0);
            b.tree
        })
        .collect();
    Ok(ForestModel {
        n_features: d,
        config: *cfg,
        seed,
        trees,
    })
}

/// Mean over trees of the reached leaf's class-1 fraction.
pub fn forest_predict_proba(m: &ForestModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    x.ensure_width(m.n_features)?;
    let k = m.trees.len() as f64;
    Ok(x.rows()
        .map(|row| {
            m.trees
                .iter()
                .map(|t| t.fraction[t.leaf_for(row)])
                .sum::<f64>()
                / k
        })
        .collect())
}

impl Classifier for ForestModel {
    fn input_width(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        forest_predict_proba(self, x)
    }
}
