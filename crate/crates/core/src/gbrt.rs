//! Gradient-boosted regression trees with Newton leaves.
//!
//! Trees grow best-first: the leaf whose best split has the largest gain is
//! split next, until `max_leaves` is reached or no split gains anything.
//! Split candidates are midpoints between consecutive distinct feature
//! values (exact enumeration over presorted columns).

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest denominator used when forming a Newton leaf value.
pub const HESSIAN_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SquaredError,
    Logistic,
    /// Gradients and hessians come from a [`GradientProvider`].
    ExternalGradients,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbrtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    /// `None` derives 1% of the training rows, at least 5.
    pub min_instances_per_leaf: Option<usize>,
    /// L2 penalty on leaf values.
    pub l2: f64,
    pub loss: Loss,
}

impl Default for GbrtConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            learning_rate: 0.01,
            max_leaves: 16,
            min_instances_per_leaf: None,
            l2: 1.0,
            loss: Loss::SquaredError,
        }
    }
}

impl GbrtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_leaves < 2 {
            return Err(Error::Config("max_leaves must be at least 2".into()));
        }
        if self.l2.is_nan() || self.l2 < 0.0 {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        if self.min_instances_per_leaf == Some(0) {
            return Err(Error::Config("min_instances_per_leaf must be positive".into()));
        }
        Ok(())
    }

    pub fn min_leaf(&self, n_rows: usize) -> usize {
        self.min_instances_per_leaf
            .unwrap_or_else(|| ((n_rows as f64 * 0.01).round() as usize).max(5))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub n_features: usize,
    pub loss: Loss,
}

impl BoostedEnsemble {
    pub fn constant(base_score: f64, learning_rate: f64, n_features: usize, loss: Loss) -> Self {
        Self {
            trees: Vec::new(),
            learning_rate,
            base_score,
            n_features,
            loss,
        }
    }

    fn check_dims<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<()> {
        match rows.iter().find(|r| r.as_ref().len() != self.n_features) {
            Some(r) => Err(Error::Shape {
                what: "features",
                expected: self.n_features,
                got: r.as_ref().len(),
            }),
            None => Ok(()),
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict_row_with(x, self.trees.len())
    }

    fn predict_row_with(&self, x: &[f64], n_trees: usize) -> f64 {
        let sum: f64 = self.trees[..n_trees].iter().map(|t| t.predict(x)).sum();
        self.base_score + self.learning_rate * sum
    }

    /// Raw scores: `base_score + learning_rate · Σ trees`.
    pub fn predict<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<f64>> {
        self.predict_with_trees(rows, self.trees.len())
    }

    /// Raw scores using only the first `n_trees` trees.
    pub fn predict_with_trees<R: AsRef<[f64]>>(&self, rows: &[R], n_trees: usize) -> Result<Vec<f64>> {
        self.check_dims(rows)?;
        let n_trees = n_trees.min(self.trees.len());
        Ok(rows
            .iter()
            .map(|r| self.predict_row_with(r.as_ref(), n_trees))
            .collect())
    }

    /// Sigmoid of the raw score.
    pub fn predict_proba<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<f64>> {
        Ok(self.predict(rows)?.into_iter().map(sigmoid).collect())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Supplies per-row first and second order gradients for one boosting round.
pub trait GradientProvider {
    fn gradients(&mut self, round: usize, scores: &[f64], grad: &mut [f64], hess: &mut [f64]) -> Result<()>;
}

/// Column-major copy of the features with row indices presorted per column.
struct Presorted {
    columns: Vec<Vec<f64>>,
    sorted: Vec<Vec<u32>>,
}

impl Presorted {
    fn new<R: AsRef<[f64]>>(rows: &[R], n_features: usize) -> Self {
        let columns: Vec<Vec<f64>> = (0..n_features)
            .map(|j| rows.iter().map(|r| r.as_ref()[j]).collect())
            .collect();
        let sorted = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, sorted }
    }
}

#[derive(Clone, Copy, Debug)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct GrowNode {
    // per-feature row lists in ascending feature order
    rows: Vec<Vec<u32>>,
    count: usize,
    g: f64,
    h: f64,
    best: Option<SplitCandidate>,
}

// Arena node during growth.
enum Grown {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Pending,
}

struct HeapEntry {
    gain: f64,
    slot: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Max gain first; on ties the earlier slot wins.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then(other.slot.cmp(&self.slot))
    }
}

struct TreeGrower<'a> {
    data: &'a Presorted,
    grad: &'a [f64],
    hess: &'a [f64],
    l2: f64,
    min_leaf: usize,
}

impl TreeGrower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.l2).max(HESSIAN_FLOOR)
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.l2).max(HESSIAN_FLOOR)
    }

    fn best_split(&self, node: &GrowNode) -> Option<SplitCandidate> {
        if node.count < 2 * self.min_leaf {
            return None;
        }
        let parent = self.score(node.g, node.h);
        let mut best: Option<SplitCandidate> = None;
        for (feature, rows) in node.rows.iter().enumerate() {
            let col = &self.data.columns[feature];
            let (mut gl, mut hl) = (0.0, 0.0);
            for (pos, pair) in rows.windows(2).enumerate() {
                let (a, b) = (pair[0] as usize, pair[1] as usize);
                gl += self.grad[a];
                hl += self.hess[a];
                let n_left = pos + 1;
                if n_left < self.min_leaf || node.count - n_left < self.min_leaf {
                    continue;
                }
                let (va, vb) = (col[a], col[b]);
                if va == vb {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(node.g - gl, node.h - hl) - parent;
                if gain > best.map_or(1e-12, |b| b.gain) {
                    let mid = va + (vb - va) / 2.0;
                    let threshold = if mid < vb { mid } else { va };
                    best = Some(SplitCandidate {
                        gain,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn make_node(&self, rows: Vec<Vec<u32>>) -> GrowNode {
        let first = &rows[0];
        let g = first.iter().map(|&r| self.grad[r as usize]).sum();
        let h = first.iter().map(|&r| self.hess[r as usize]).sum();
        let mut node = GrowNode {
            count: first.len(),
            rows,
            g,
            h,
            best: None,
        };
        node.best = self.best_split(&node);
        node
    }

    fn grow(&self, n_rows: usize, max_leaves: usize) -> TreeNode {
        if self.data.columns.is_empty() {
            let g: f64 = self.grad.iter().sum();
            let h: f64 = self.hess.iter().sum();
            return TreeNode::Leaf {
                value: self.leaf_value(g, h),
            };
        }
        let root = self.make_node(self.data.sorted.clone());
        let mut arena = vec![Grown::Pending];
        let mut nodes: Vec<Option<GrowNode>> = vec![Some(root)];
        let mut heap = BinaryHeap::new();
        if let Some(b) = nodes[0].as_ref().and_then(|n| n.best) {
            heap.push(HeapEntry { gain: b.gain, slot: 0 });
        }
        let mut leaves = 1;
        let mut go_left = vec![false; n_rows];
        while leaves < max_leaves {
            let Some(HeapEntry { slot, .. }) = heap.pop() else {
                break;
            };
            let node = nodes[slot].take().expect("split node still pending");
            let split = node.best.expect("queued node has a split");
            let col = &self.data.columns[split.feature];
            for &r in &node.rows[0] {
                go_left[r as usize] = col[r as usize] <= split.threshold;
            }
            let mut left_rows = Vec::with_capacity(node.rows.len());
            let mut right_rows = Vec::with_capacity(node.rows.len());
            for list in node.rows {
                let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&i| go_left[i as usize]);
                left_rows.push(l);
                right_rows.push(r);
            }
            let left = self.make_node(left_rows);
            let right = self.make_node(right_rows);
            let (li, ri) = (arena.len(), arena.len() + 1);
            arena.push(Grown::Pending);
            arena.push(Grown::Pending);
            for (idx, child) in [(li, left), (ri, right)] {
                if let Some(b) = child.best {
                    heap.push(HeapEntry { gain: b.gain, slot: idx });
                }
                nodes.push(Some(child));
            }
            arena[slot] = Grown::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: li,
                right: ri,
            };
            leaves += 1;
        }
        for (slot, node) in nodes.into_iter().enumerate() {
            if let Some(n) = node {
                arena[slot] = Grown::Leaf(self.leaf_value(n.g, n.h));
            }
        }
        build_tree(&arena, 0)
    }
}

fn build_tree(arena: &[Grown], slot: usize) -> TreeNode {
    match &arena[slot] {
        Grown::Leaf(v) => TreeNode::Leaf { value: *v },
        Grown::Split {
            feature,
            threshold,
            left,
            right,
        } => TreeNode::Split {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(build_tree(arena, *left)),
            right: Box::new(build_tree(arena, *right)),
        },
        Grown::Pending => unreachable!("every arena slot is resolved"),
    }
}

fn check_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<usize> {
    let n_features = rows.first().map_or(0, |r| r.as_ref().len());
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != n_features {
            return Err(Error::Shape {
                what: "features",
                expected: n_features,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("row {i} has a non-finite feature")));
        }
    }
    Ok(n_features)
}

// All-zero hessians fall back to unit weights.
fn effective_hessians(hess: &[f64]) -> Option<Vec<f64>> {
    if hess.iter().all(|&h| h == 0.0) {
        Some(vec![1.0; hess.len()])
    } else {
        None
    }
}

fn fit_tree_presorted(data: &Presorted, grad: &[f64], hess: &[f64], config: &GbrtConfig) -> TreeNode {
    let fallback = effective_hessians(hess);
    let grower = TreeGrower {
        data,
        grad,
        hess: fallback.as_deref().unwrap_or(hess),
        l2: config.l2,
        min_leaf: config.min_leaf(grad.len()),
    };
    grower.grow(grad.len(), config.max_leaves)
}

/// Fits one regression tree to the given gradients and hessians.
pub fn fit_tree<R: AsRef<[f64]>>(
    rows: &[R],
    grad: &[f64],
    hess: &[f64],
    config: &GbrtConfig,
) -> Result<TreeNode> {
    if rows.is_empty() {
        return Err(Error::Argument("cannot fit a tree on zero rows".into()));
    }
    if grad.len() != rows.len() || hess.len() != rows.len() {
        return Err(Error::Shape {
            what: "gradients",
            expected: rows.len(),
            got: grad.len().min(hess.len()),
        });
    }
    if hess.iter().any(|&h| h < 0.0 || !h.is_finite()) || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Data("gradients must be finite and hessians non-negative".into()));
    }
    config.validate()?;
    let n_features = check_rows(rows)?;
    let data = Presorted::new(rows, n_features);
    Ok(fit_tree_presorted(&data, grad, hess, config))
}

fn boost<R: AsRef<[f64]>>(
    rows: &[R],
    config: &GbrtConfig,
    base_score: f64,
    mut gradients: impl FnMut(usize, &[f64], &mut [f64], &mut [f64]) -> Result<()>,
) -> Result<BoostedEnsemble> {
    config.validate()?;
    if rows.is_empty() {
        return Err(Error::Argument("cannot boost on zero rows".into()));
    }
    let n_features = check_rows(rows)?;
    let data = Presorted::new(rows, n_features);
    let n = rows.len();
    let mut scores = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.n_trees);
    for round in 0..config.n_trees {
        gradients(round, &scores, &mut grad, &mut hess)?;
        if grad.iter().chain(&hess).any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite gradient in round {round}")));
        }
        let tree = fit_tree_presorted(&data, &grad, &hess, config);
        for (s, r) in scores.iter_mut().zip(rows) {
            *s += config.learning_rate * tree.predict(r.as_ref());
        }
        trees.push(tree);
    }
    Ok(BoostedEnsemble {
        trees,
        learning_rate: config.learning_rate,
        base_score,
        n_features,
        loss: config.loss,
    })
}

/// Fits an ensemble to labels under the configured squared or logistic loss.
pub fn fit<R: AsRef<[f64]>>(rows: &[R], targets: &[f64], config: &GbrtConfig) -> Result<BoostedEnsemble> {
    if targets.len() != rows.len() {
        return Err(Error::Shape {
            what: "targets",
            expected: rows.len(),
            got: targets.len(),
        });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::Data("targets must be finite".into()));
    }
    let n = targets.len().max(1) as f64;
    match config.loss {
        Loss::SquaredError => {
            let base = targets.iter().sum::<f64>() / n;
            boost(rows, config, base, |_, scores, grad, hess| {
                for i in 0..scores.len() {
                    grad[i] = scores[i] - targets[i];
                    hess[i] = 1.0;
                }
                Ok(())
            })
        }
        Loss::Logistic => {
            if targets.iter().any(|&t| t != 0.0 && t != 1.0) {
                return Err(Error::Data("logistic loss needs 0/1 targets".into()));
            }
            let p = (targets.iter().sum::<f64>() / n).clamp(1e-6, 1.0 - 1e-6);
            let base = (p / (1.0 - p)).ln();
            boost(rows, config, base, |_, scores, grad, hess| {
                for i in 0..scores.len() {
                    let p = sigmoid(scores[i]);
                    grad[i] = p - targets[i];
                    hess[i] = p * (1.0 - p);
                }
                Ok(())
            })
        }
        Loss::ExternalGradients => Err(Error::Config(
            "external-gradient loss requires fit_with_gradients".into(),
        )),
    }
}

/// Boosting loop whose per-round gradients come from `provider`; base score 0.
pub fn fit_with_gradients<R: AsRef<[f64]>>(
    rows: &[R],
    provider: &mut dyn GradientProvider,
    config: &GbrtConfig,
) -> Result<BoostedEnsemble> {
    let mut config = config.clone();
    config.loss = Loss::ExternalGradients;
    boost(rows, &config, 0.0, |round, scores, grad, hess| {
        provider.gradients(round, scores, grad, hess)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(min_leaf: usize, max_leaves: usize) -> GbrtConfig {
        GbrtConfig {
            min_instances_per_leaf: Some(min_leaf),
            max_leaves,
            ..GbrtConfig::default()
        }
    }

    #[test]
    fn constant_gradients_give_single_newton_leaf() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * 7 % 3) as f64]).collect();
        let g = vec![0.5; 10];
        let h = vec![1.0; 10];
        let tree = fit_tree(&rows, &g, &h, &cfg(1, 8)).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_abs_diff_eq!(tree.predict(&rows[0]), -0.5 * 10.0 / 11.0, epsilon = 1e-12);
    }

    // Exhaustive enumeration of every (feature, threshold) split on small data.
    fn split_gain(rows: &[Vec<f64>], g: &[f64], h: &[f64], l2: f64, f: usize, thr: f64) -> f64 {
        let score = |gs: f64, hs: f64| gs * gs / (hs + l2);
        let (gt, ht): (f64, f64) = (g.iter().sum(), h.iter().sum());
        let (mut gl, mut hl) = (0.0, 0.0);
        for (i, r) in rows.iter().enumerate() {
            if r[f] <= thr {
                gl += g[i];
                hl += h[i];
            }
        }
        score(gl, hl) + score(gt - gl, ht - hl) - score(gt, ht)
    }

    fn brute_force_best_split(rows: &[Vec<f64>], g: &[f64], h: &[f64], l2: f64) -> (usize, f64, f64) {
        let score = |gs: f64, hs: f64| gs * gs / (hs + l2);
        let (gt, ht): (f64, f64) = (g.iter().sum(), h.iter().sum());
        let mut best = (usize::MAX, f64::NAN, f64::NEG_INFINITY);
        for f in 0..rows[0].len() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = (w[0] + w[1]) / 2.0;
                let (mut gl, mut hl) = (0.0, 0.0);
                for (i, r) in rows.iter().enumerate() {
                    if r[f] <= thr {
                        gl += g[i];
                        hl += h[i];
                    }
                }
                let gain = score(gl, hl) + score(gt - gl, ht - hl) - score(gt, ht);
                if gain > best.2 {
                    best = (f, thr, gain);
                }
            }
        }
        best
    }

    #[test]
    fn root_split_matches_exhaustive_search() {
        // Feature 1 separates the gradient signs perfectly; feature 0 is noise.
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|i| vec![((i * 5) % 7) as f64, if i < 9 { i as f64 } else { 20.0 + i as f64 }])
            .collect();
        let g: Vec<f64> = (0..16).map(|i| if i < 9 { 1.0 } else { -1.0 }).collect();
        let h = vec![1.0; 16];
        let (f, thr, _) = brute_force_best_split(&rows, &g, &h, 1.0);
        assert_eq!(f, 1);
        assert_eq!(thr, (8.0 + 29.0) / 2.0);
        let tree = fit_tree(&rows, &g, &h, &cfg(1, 2)).unwrap();
        match tree {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(feature, f);
                assert_eq!(threshold, thr);
            }
            TreeNode::Leaf { .. } => panic!("expected a split"),
        }
    }

    #[test]
    fn root_split_agrees_with_oracle_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(4..=20);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen_range(0..6) as f64).collect())
                .collect();
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let (f, thr, gain) = brute_force_best_split(&rows, &g, &h, 1.0);
            let tree = fit_tree(&rows, &g, &h, &cfg(1, 2)).unwrap();
            match tree {
                TreeNode::Split { feature, threshold, .. } => {
                    assert!(gain > 0.0);
                    if (feature, threshold) != (f, thr) {
                        // Distinct splits may induce the same row partition.
                        let chosen = split_gain(&rows, &g, &h, 1.0, feature, threshold);
                        assert!((chosen - gain).abs() < 1e-9, "{chosen} vs {gain}");
                    }
                }
                TreeNode::Leaf { .. } => assert!(gain.is_nan() || gain <= 1e-12),
            }
        }
    }

    #[test]
    fn too_few_rows_for_min_leaf_gives_root_only() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let g: Vec<f64> = (0..8).map(|i| if i < 4 { 1.0 } else { -1.0 }).collect();
        let tree = fit_tree(&rows, &g, &[1.0; 8], &cfg(5, 16)).unwrap();
        assert_eq!(tree.n_leaves(), 1);
    }

    #[test]
    fn zero_hessians_fall_back_to_counts() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let tree = fit_tree(&rows, &[1.0; 4], &[0.0; 4], &cfg(1, 2)).unwrap();
        assert_abs_diff_eq!(tree.predict(&rows[0]), -4.0 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn argument_errors() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(fit_tree(&empty, &[], &[], &cfg(1, 2)).is_err());
        let rows = vec![vec![1.0], vec![f64::NAN]];
        assert!(fit(&rows, &[0.0, 1.0], &cfg(1, 2)).is_err());
        let rows = vec![vec![1.0], vec![2.0]];
        let zero = GbrtConfig { n_trees: 0, ..cfg(1, 2) };
        assert!(matches!(fit(&rows, &[0.0, 1.0], &zero), Err(Error::Config(_))));
        let bad_lr = GbrtConfig { learning_rate: 0.0, ..cfg(1, 2) };
        assert!(bad_lr.validate().is_err());
    }

    #[test]
    fn squared_error_converges() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 200.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let config = GbrtConfig {
            n_trees: 300,
            learning_rate: 0.1,
            ..cfg(2, 16)
        };
        let model = fit(&rows, &y, &config).unwrap();
        let pred = model.predict(&rows).unwrap();
        let rmse = (pred.iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        assert!(rmse < 0.05, "rmse {rmse}");
    }

    #[test]
    fn squared_error_loss_never_increases() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 13) as f64, (i % 7) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (r[0] * 0.3).sin() + r[1] * 0.1).collect();
        let config = GbrtConfig { n_trees: 40, learning_rate: 0.5, ..cfg(2, 6) };
        let model = fit(&rows, &y, &config).unwrap();
        let mut prev = f64::INFINITY;
        for m in 0..=40 {
            let p = model.predict_with_trees(&rows, m).unwrap();
            let loss: f64 = p.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(loss <= prev + 1e-12, "round {m}: {loss} > {prev}");
            prev = loss;
        }
    }

    #[test]
    fn logistic_loss_trace_is_monotone() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, ((i * 3) % 5) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| f64::from(i >= 20)).collect();
        let config = GbrtConfig {
            n_trees: 50,
            learning_rate: 0.1,
            loss: Loss::Logistic,
            ..cfg(2, 4)
        };
        let model = fit(&rows, &y, &config).unwrap();
        let mut prev = f64::INFINITY;
        for m in 0..=50 {
            let p = model.predict_with_trees(&rows, m).unwrap();
            let ll: f64 = p
                .iter()
                .zip(&y)
                .map(|(&s, &t)| {
                    let q = sigmoid(s);
                    -(t * q.ln() + (1.0 - t) * (1.0 - q).ln())
                })
                .sum();
            assert!(ll <= prev + 1e-12);
            prev = ll;
        }
        let proba = model.predict_proba(&rows).unwrap();
        assert!(proba[0] < 0.5 && proba[39] > 0.5);
    }

    #[test]
    fn deep_fit_reproduces_ten_points() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let config = GbrtConfig { n_trees: 200, learning_rate: 0.3, l2: 0.0, ..cfg(1, 16) };
        let model = fit(&rows, &y, &config).unwrap();
        for (p, t) in model.predict(&rows).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 0.1);
        }
    }

    #[test]
    fn prediction_basics_and_shape_checks() {
        let m = BoostedEnsemble::constant(0.25, 0.1, 2, Loss::SquaredError);
        assert_eq!(m.predict(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(), vec![0.25, 0.25]);
        assert!(matches!(m.predict(&[vec![1.0]]), Err(Error::Shape { .. })));
        let mut single = m.clone();
        single.trees.push(TreeNode::Leaf { value: 2.0 });
        assert_abs_diff_eq!(single.predict_row(&[0.0, 0.0]), 0.25 + 0.1 * 2.0);
    }

    #[test]
    fn fitting_is_deterministic_and_serializable() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i % 9) as f64 * 0.37, (i % 4) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] - r[1]).collect();
        let config = GbrtConfig { n_trees: 20, learning_rate: 0.2, ..cfg(2, 8) };
        let a = fit(&rows, &y, &config).unwrap();
        let b = fit(&rows, &y, &config).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let back: BoostedEnsemble = serde_json::from_str(&json).unwrap();
        let pa = a.predict(&rows).unwrap();
        let pb = back.predict(&rows).unwrap();
        assert!(pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn row_permutation_permutes_predictions() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 30) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (r[0] / 5.0).floor()).collect();
        let config = GbrtConfig { n_trees: 10, learning_rate: 0.3, ..cfg(2, 8) };
        let model = fit(&rows, &y, &config).unwrap();
        let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let mut p = model.predict(&rows).unwrap();
        p.reverse();
        assert_eq!(p, model.predict(&rev).unwrap());
    }

    #[test]
    fn min_leaf_default_is_one_percent_floor_five() {
        let c = GbrtConfig::default();
        assert_eq!(c.min_leaf(100), 5);
        assert_eq!(c.min_leaf(10_000), 100);
    }
}
