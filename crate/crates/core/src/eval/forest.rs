//! Bagged CART trees with Gini splits.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::encode::EncodedMatrix;
use super::EvalError;
use crate::rng::{derive_seed, seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestMode {
    RandomForest,
    /// Second model slot: a shallower forest seeded independently.
    GradientStub,
}

impl ForestMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ForestMode::RandomForest => "random_forest",
            ForestMode::GradientStub => "gradient_stub",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure (six for the stub mode).
    pub max_depth: Option<usize>,
    /// `None` means floor(sqrt(d)).
    pub features_per_split: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub mode: ForestMode,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            features_per_split: None,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
            mode: ForestMode::RandomForest,
        }
    }
}

impl ForestConfig {
    pub fn effective_max_depth(&self) -> usize {
        match (self.max_depth, self.mode) {
            (Some(d), _) => d,
            (None, ForestMode::GradientStub) => 6,
            (None, ForestMode::RandomForest) => usize::MAX,
        }
    }

    pub fn tree_seed(&self, tree: usize) -> u64 {
        match self.mode {
            ForestMode::RandomForest => self.seed.wrapping_add(tree as u64),
            ForestMode::GradientStub => derive_seed(self.seed, &[0x5354_5542, tree as u64]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { positive: bool },
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { positive } => return positive,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub dim: usize,
}

impl Forest {
    /// Fraction of trees voting positive, per row.
    pub fn predict_proba(&self, m: &EncodedMatrix) -> Result<Vec<f64>, EvalError> {
        let found = m.rows.first().map_or(self.dim, Vec::len);
        if found != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        let n = self.trees.len() as f64;
        Ok(m.rows
            .iter()
            .map(|x| self.trees.iter().filter(|t| t.predict(x)).count() as f64 / n)
            .collect())
    }

    /// Positive when at least half the trees say so.
    pub fn predict(&self, m: &EncodedMatrix) -> Result<Vec<bool>, EvalError> {
        Ok(self.predict_proba(m)?.into_iter().map(|p| p >= 0.5).collect())
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    dim: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl Grower<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        self.nodes.push(Node::Leaf {
            positive: 2 * pos >= idx.len(),
        });
        self.nodes.len() - 1
    }

    /// Best (weighted impurity, threshold) split on one feature.
    fn best_on(&self, idx: &[usize], f: usize, buf: &mut Vec<(f64, bool)>) -> Option<(f64, f64)> {
        // One pass first: constant columns cannot split, and 0/1 columns
        // (the one-hot blocks) have a single candidate threshold.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut binary = true;
        let (mut ones, mut ones_pos, mut total_pos) = (0usize, 0usize, 0usize);
        for &i in idx {
            let v = self.x[i][f];
            lo = lo.min(v);
            hi = hi.max(v);
            total_pos += usize::from(self.y[i]);
            if v == 1.0 {
                ones += 1;
                ones_pos += usize::from(self.y[i]);
            } else if v != 0.0 {
                binary = false;
            }
        }
        if lo >= hi {
            return None;
        }
        if binary {
            let n = idx.len();
            let (nl, nr) = (n - ones, ones);
            if nl < self.min_leaf || nr < self.min_leaf {
                return None;
            }
            let score = (nl as f64 * gini(total_pos - ones_pos, nl) + nr as f64 * gini(ones_pos, nr)) / n as f64;
            return Some((score, 0.5));
        }
        buf.clear();
        buf.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
        buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = buf.len();
        let mut left_pos = 0;
        let mut best: Option<(f64, f64)> = None;
        for i in 0..n - 1 {
            if buf[i].1 {
                left_pos += 1;
            }
            let nl = i + 1;
            if buf[i].0 == buf[i + 1].0 || nl < self.min_leaf || n - nl < self.min_leaf {
                continue;
            }
            let nr = n - nl;
            let score = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr)) / n as f64;
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, buf[i].0 + (buf[i + 1].0 - buf[i].0) / 2.0));
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut Rng, buf: &mut Vec<(f64, bool)>) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        if pos == 0 || pos == idx.len() || depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return self.leaf(&idx);
        }
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        // Look at mtry features; if none of them can split, keep going
        // through the rest.
        for (k, &f) in order.iter().enumerate() {
            if k >= self.mtry && best.is_some() {
                break;
            }
            if let Some((score, thr)) = self.best_on(&idx, f, buf) {
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(&idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { positive: false });
        let left = self.grow(l, depth + 1, rng, buf);
        let right = self.grow(r, depth + 1, rng, buf);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

fn grow_tree(m: &EncodedMatrix, cfg: &ForestConfig, tree: usize) -> Tree {
    let n = m.rows.len();
    let dim = m.dim();
    let mut rng = seeded(cfg.tree_seed(tree));
    let idx: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mtry = cfg.features_per_split.unwrap_or_else(|| dim.isqrt()).clamp(1, dim.max(1));
    let mut g = Grower {
        x: &m.rows,
        y: &m.labels,
        dim,
        mtry,
        min_leaf: cfg.min_samples_leaf.max(1),
        max_depth: cfg.effective_max_depth(),
        nodes: Vec::new(),
    };
    let mut buf = Vec::with_capacity(n);
    g.grow(idx, 0, &mut rng, &mut buf);
    Tree { nodes: g.nodes }
}

/// Grows `cfg.n_trees` trees. Each tree has its own seed, so the result is
/// the same whether trees are grown in parallel or one by one.
pub fn train_forest(m: &EncodedMatrix, cfg: &ForestConfig) -> Result<Forest, EvalError> {
    if cfg.n_trees == 0 {
        return Err(EvalError::NoTrees);
    }
    if m.rows.is_empty() {
        return Err(EvalError::Empty);
    }
    let pos = m.labels.iter().filter(|&&b| b).count();
    if pos == 0 || pos == m.labels.len() {
        return Err(EvalError::SingleClassTraining);
    }
    #[cfg(feature = "std")]
    let trees = {
        use rayon::prelude::*;
        (0..cfg.n_trees).into_par_iter().map(|t| grow_tree(m, cfg, t)).collect()
    };
    #[cfg(not(feature = "std"))]
    let trees = (0..cfg.n_trees).map(|t| grow_tree(m, cfg, t)).collect();
    Ok(Forest { trees, dim: m.dim() })
}
