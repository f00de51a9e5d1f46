//! Tree ensembles: bagging, random forest, discrete AdaBoost, RUSBoost and
//! second-order gradient boosting on the logistic loss.
//!
//! Member `i` of a bagged ensemble draws from its own RNG seeded with
//! `seed + i`, so members can be trained in parallel without changing results.

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, softplus};
use super::tree::{fit_classifier, fit_regressor, Tree, TreeConfig};
use super::{LearnerSpec, ModelParams};

fn bootstrap(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

fn member_rng(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64))
}

pub fn fit_forest(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[u8]) -> ModelParams {
    let n = y.len();
    let d = x.ncols();
    let mf = spec.usize_param("max_features");
    let max_features = if mf == 0 {
        (d as f64).sqrt().ceil() as usize
    } else {
        mf.min(d)
    };
    let cfg = TreeConfig {
        max_depth: spec.usize_param("max_depth"),
        min_samples_leaf: spec.usize_param("min_samples_leaf"),
        max_features: Some(max_features.max(1)),
    };
    let w = vec![1.0; n];
    let trees = (0..spec.usize_param("n_estimators"))
        .into_par_iter()
        .map(|i| {
            let mut rng = member_rng(spec.seed, i);
            let rows = bootstrap(&mut rng, n);
            fit_classifier(x, y, &w, rows, cfg, Some(&mut rng))
        })
        .collect();
    ModelParams::Forest { trees }
}

pub fn fit_bagging(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[u8]) -> ModelParams {
    let n = y.len();
    let cfg = TreeConfig {
        max_depth: spec.usize_param("max_depth"),
        min_samples_leaf: spec.usize_param("min_samples_leaf"),
        max_features: None,
    };
    let use_bootstrap = spec.usize_param("bootstrap") == 1;
    let w = vec![1.0; n];
    let trees = (0..spec.usize_param("n_estimators"))
        .into_par_iter()
        .map(|i| {
            let rows = if use_bootstrap {
                bootstrap(&mut member_rng(spec.seed, i), n)
            } else {
                (0..n).collect()
            };
            fit_classifier(x, y, &w, rows, cfg, None)
        })
        .collect();
    ModelParams::Vote { trees }
}

/// Weak learners with their vote weights; probability is `sigmoid(2 F(x))`
/// where `F(x) = sum alpha_t h_t(x)` and `h_t(x)` is +1 or -1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub learners: Vec<Tree>,
    pub alphas: Vec<f64>,
    /// Weighted training error of each accepted learner.
    pub errors: Vec<f64>,
    /// Weighted error of the round that ended boosting early, if any.
    pub rejected_error: Option<f64>,
}

impl BoostModel {
    pub fn margin_row(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        self.learners
            .iter()
            .zip(&self.alphas)
            .map(|(t, a)| if t.predict_row(row) >= 0.5 { *a } else { -*a })
            .sum()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.axis_iter(Axis(0))
            .map(|r| sigmoid(2.0 * self.margin_row(r)))
            .collect()
    }
}

/// Discrete AdaBoost. With `undersample`, each round's weak learner is trained
/// on all minority rows plus an equal-size random draw of majority rows
/// (RUSBoost); errors and weight updates always use the full training set.
pub fn fit_adaboost(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[u8], undersample: bool) -> BoostModel {
    let n = y.len();
    let rounds = spec.usize_param("n_estimators");
    let lr = spec.param("learning_rate");
    let cfg = TreeConfig {
        max_depth: spec.usize_param("max_depth"),
        min_samples_leaf: 1,
        max_features: None,
    };
    let pos: Vec<usize> = (0..n).filter(|&i| y[i] == 1).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| y[i] == 0).collect();
    let (minority, majority) = if pos.len() <= neg.len() {
        (pos, neg)
    } else {
        (neg, pos)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut w = vec![1.0 / n as f64; n];
    let mut model = BoostModel {
        learners: Vec::new(),
        alphas: Vec::new(),
        errors: Vec::new(),
        rejected_error: None,
    };
    for _ in 0..rounds {
        let rows: Vec<usize> = if undersample {
            let mut maj = majority.clone();
            maj.shuffle(&mut rng);
            maj.truncate(minority.len());
            let mut r: Vec<usize> = minority.iter().copied().chain(maj).collect();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let tree = fit_classifier(x, y, &w, rows, cfg, None);
        let h: Vec<u8> = x
            .axis_iter(Axis(0))
            .map(|r| u8::from(tree.predict_row(r) >= 0.5))
            .collect();
        let total: f64 = w.iter().sum();
        let err: f64 = (0..n).filter(|&i| h[i] != y[i]).map(|i| w[i]).sum::<f64>() / total;
        if err >= 0.5 {
            model.rejected_error = Some(err);
            break;
        }
        let e = err.max(1e-10);
        let alpha = lr * 0.5 * ((1.0 - e) / e).ln();
        model.learners.push(tree);
        model.alphas.push(alpha);
        model.errors.push(err);
        if err <= 1e-10 {
            break;
        }
        for i in 0..n {
            let agree = if h[i] == y[i] { 1.0 } else { -1.0 };
            w[i] *= (-alpha * agree).exp();
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
    }
    model
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub init: f64,
    /// Trees with leaves already scaled by the applied step.
    pub trees: Vec<Tree>,
    /// Mean training log-loss before any tree, then after each round.
    pub train_loss: Vec<f64>,
}

impl GbmModel {
    pub fn raw_row(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        self.init + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.axis_iter(Axis(0))
            .map(|r| sigmoid(self.raw_row(r)))
            .collect()
    }
}

fn log_loss(f: f64, y: u8) -> f64 {
    softplus(f) - f64::from(y) * f
}

/// Stagewise regression trees on logistic-loss gradients. Each leaf takes a
/// shrunken Newton step, halved until the loss over its rows does not rise.
pub fn fit_gbm(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[u8]) -> GbmModel {
    let n = y.len();
    let lr = spec.param("learning_rate");
    let reg_lambda = spec.param("reg_lambda");
    let cfg = TreeConfig {
        max_depth: spec.usize_param("max_depth"),
        min_samples_leaf: spec.usize_param("min_samples_leaf"),
        max_features: None,
    };
    let pbar = (y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let init = (pbar / (1.0 - pbar)).ln();
    let mut f = vec![init; n];
    let mean_loss = |f: &[f64]| f.iter().zip(y).map(|(&fi, &yi)| log_loss(fi, yi)).sum::<f64>() / n as f64;
    let mut train_loss = vec![mean_loss(&f)];
    let mut trees = Vec::new();
    for _ in 0..spec.usize_param("n_rounds") {
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let grad: Vec<f64> = p.iter().zip(y).map(|(pi, &yi)| f64::from(yi) - pi).collect();
        let hess: Vec<f64> = p.iter().map(|pi| pi * (1.0 - pi)).collect();
        let mut tree = fit_regressor(x, &grad, &hess, (0..n).collect(), cfg, reg_lambda);
        tree.scale_leaves(lr);
        let leaf_of: Vec<usize> = x.axis_iter(Axis(0)).map(|r| tree.leaf_index(r)).collect();
        let leaves: Vec<(usize, f64)> = tree
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, node)| match node {
                super::Node::Leaf { value } => Some((i, *value)),
                _ => None,
            })
            .collect();
        for (leaf, value) in leaves {
            let rows: Vec<usize> = (0..n).filter(|&i| leaf_of[i] == leaf).collect();
            let before: f64 = rows.iter().map(|&i| log_loss(f[i], y[i])).sum();
            let mut step = value;
            for _ in 0..60 {
                let after: f64 = rows.iter().map(|&i| log_loss(f[i] + step, y[i])).sum();
                if after <= before {
                    break;
                }
                step *= 0.5;
            }
            let after: f64 = rows.iter().map(|&i| log_loss(f[i] + step, y[i])).sum();
            if after > before {
                step = 0.0;
            }
            tree.set_leaf(leaf, step);
            for &i in &rows {
                f[i] += step;
            }
        }
        trees.push(tree);
        train_loss.push(mean_loss(&f));
    }
    GbmModel {
        init,
        trees,
        train_loss,
    }
}
