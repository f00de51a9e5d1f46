//! CART trees: weighted Gini classification trees and second-order
//! regression trees for gradient boosting.
//!
//! Splits are `x[feature] <= threshold` to the left. Thresholds are midpoints
//! between consecutive distinct values. Candidate splits are scanned by
//! ascending feature index, then ascending threshold, and only a strictly
//! better gain replaces the incumbent, so ties go to the lowest feature and
//! then the lowest threshold.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// A depth-one tree.
    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> Self {
        Tree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: left },
                Node::Leaf { value: right },
            ],
        }
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Index of the leaf node reached by `row`.
    pub fn leaf_index(&self, row: ArrayView1<f64>) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }

    pub(crate) fn set_leaf(&mut self, index: usize, v: f64) {
        if let Node::Leaf { value } = &mut self.nodes[index] {
            *value = v;
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features sampled per split; `None` uses all.
    pub max_features: Option<usize>,
}

/// Node statistics for a split criterion.
trait Criterion {
    type Acc: Copy + Default;
    fn add(&self, acc: &mut Self::Acc, row: usize);
    fn sub(&self, acc: &mut Self::Acc, row: usize);
    /// Larger is better; gain = score(left) + score(right) - score(parent).
    fn score(&self, acc: &Self::Acc) -> f64;
    fn leaf_value(&self, acc: &Self::Acc) -> f64;
    fn is_pure(&self, acc: &Self::Acc) -> bool;
    /// Whether a zero-gain split may still be taken.
    fn allow_zero_gain(&self) -> bool;
}

struct Gini<'a> {
    y: &'a [u8],
    w: &'a [f64],
}

impl Criterion for Gini<'_> {
    type Acc = [f64; 2];
    fn add(&self, acc: &mut [f64; 2], row: usize) {
        acc[usize::from(self.y[row])] += self.w[row];
    }
    fn sub(&self, acc: &mut [f64; 2], row: usize) {
        acc[usize::from(self.y[row])] -= self.w[row];
    }
    fn score(&self, acc: &[f64; 2]) -> f64 {
        let t = acc[0] + acc[1];
        if t <= 0.0 {
            0.0
        } else {
            (acc[0] * acc[0] + acc[1] * acc[1]) / t
        }
    }
    fn leaf_value(&self, acc: &[f64; 2]) -> f64 {
        let t = acc[0] + acc[1];
        if t <= 0.0 {
            0.5
        } else {
            (acc[1] / t).clamp(0.0, 1.0)
        }
    }
    fn is_pure(&self, acc: &[f64; 2]) -> bool {
        acc[0] <= 0.0 || acc[1] <= 0.0
    }
    fn allow_zero_gain(&self) -> bool {
        true
    }
}

struct Newton<'a> {
    grad: &'a [f64],
    hess: &'a [f64],
    reg_lambda: f64,
}

impl Criterion for Newton<'_> {
    type Acc = [f64; 2];
    fn add(&self, acc: &mut [f64; 2], row: usize) {
        acc[0] += self.grad[row];
        acc[1] += self.hess[row];
    }
    fn sub(&self, acc: &mut [f64; 2], row: usize) {
        acc[0] -= self.grad[row];
        acc[1] -= self.hess[row];
    }
    fn score(&self, acc: &[f64; 2]) -> f64 {
        let d = acc[1] + self.reg_lambda;
        if d <= 0.0 {
            0.0
        } else {
            acc[0] * acc[0] / d
        }
    }
    fn leaf_value(&self, acc: &[f64; 2]) -> f64 {
        let d = acc[1] + self.reg_lambda;
        if d <= 0.0 {
            0.0
        } else {
            acc[0] / d
        }
    }
    fn is_pure(&self, _acc: &[f64; 2]) -> bool {
        false
    }
    fn allow_zero_gain(&self) -> bool {
        false
    }
}

struct Builder<'a, C: Criterion> {
    x: ArrayView2<'a, f64>,
    crit: C,
    cfg: TreeConfig,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<C: Criterion> Builder<'_, C> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let mut acc = C::Acc::default();
        for &r in &rows {
            self.crit.add(&mut acc, r);
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.crit.leaf_value(&acc),
        });
        if depth >= self.cfg.max_depth
            || rows.len() < 2 * self.cfg.min_samples_leaf.max(1)
            || self.crit.is_pure(&acc)
        {
            return id;
        }
        let Some(best) = self.find_split(&rows, &acc) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x[[r, best.feature]] <= best.threshold);
        drop(rows);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match (self.cfg.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn find_split(&mut self, rows: &[usize], total: &C::Acc) -> Option<BestSplit> {
        let parent = self.crit.score(total);
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        let n = rows.len();
        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for f in self.candidate_features() {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x[[r, f]], r)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[n - 1].0 {
                continue;
            }
            let mut left = C::Acc::default();
            let mut right = *total;
            for i in 0..n - 1 {
                let (v, r) = sorted[i];
                self.crit.add(&mut left, r);
                self.crit.sub(&mut right, r);
                let next = sorted[i + 1].0;
                if v == next || i + 1 < min_leaf || n - i - 1 < min_leaf {
                    continue;
                }
                let gain = self.crit.score(&left) + self.crit.score(&right) - parent;
                let acceptable = if self.crit.allow_zero_gain() {
                    gain >= -1e-12
                } else {
                    gain > 1e-12
                };
                if !acceptable {
                    continue;
                }
                if best.as_ref().is_none_or(|b| gain > b.gain + 1e-12) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Weighted Gini tree; leaves hold the weighted positive fraction.
/// `rows` may contain duplicates (bootstrap replicates).
pub fn fit_classifier(
    x: ArrayView2<f64>,
    y: &[u8],
    weights: &[f64],
    rows: Vec<usize>,
    cfg: TreeConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    if rows.is_empty() {
        return Tree::leaf(0.5);
    }
    let mut b = Builder {
        x,
        crit: Gini { y, w: weights },
        cfg,
        rng,
        nodes: Vec::new(),
    };
    b.build(rows, 0);
    Tree { nodes: b.nodes }
}

/// Regression tree on gradient/hessian statistics; leaves hold
/// `sum(grad) / (sum(hess) + reg_lambda)`.
pub fn fit_regressor(
    x: ArrayView2<f64>,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    cfg: TreeConfig,
    reg_lambda: f64,
) -> Tree {
    if rows.is_empty() {
        return Tree::leaf(0.0);
    }
    let mut b = Builder {
        x,
        crit: Newton {
            grad,
            hess,
            reg_lambda,
        },
        cfg,
        rng: None,
        nodes: Vec::new(),
    };
    b.build(rows, 0);
    Tree { nodes: b.nodes }
}
