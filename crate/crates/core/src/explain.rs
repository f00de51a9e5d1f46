//! Shapley-value attributions with an interventional value function:
//! `v(S)` is the mean model score over background rows whose features in `S`
//! are replaced by the explained instance's values.
//!
//! [`shapley_exact`] enumerates all coalitions; [`kernel_shap`] solves the
//! kernel-weighted least-squares problem over enumerated or sampled
//! coalitions, with efficiency imposed as a hard constraint.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::learners::FittedModel;

pub const MAX_EXACT_FEATURES: usize = 14;

/// Anything that maps feature rows to scores.
pub trait ScoreModel: Sync {
    fn n_features(&self) -> usize;
    fn score_rows(&self, x: ArrayView2<f64>) -> Vec<f64>;
}

impl ScoreModel for FittedModel {
    fn n_features(&self) -> usize {
        FittedModel::n_features(self)
    }

    fn score_rows(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.scores(x)
    }
}

/// A closure over one row.
pub struct FnModel<F> {
    pub n_features: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScoreModel for FnModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score_rows(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|r| (self.f)(&r.to_vec()))
            .collect()
    }
}

/// Mean score over several models (a soft vote).
pub struct MeanModel<'a>(pub &'a [FittedModel]);

impl ScoreModel for MeanModel<'_> {
    fn n_features(&self) -> usize {
        self.0.first().map_or(0, |m| m.n_features())
    }

    fn score_rows(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let mut acc = vec![0.0; x.nrows()];
        for m in self.0 {
            for (a, s) in acc.iter_mut().zip(m.scores(x)) {
                *a += s;
            }
        }
        let k = self.0.len().max(1) as f64;
        acc.into_iter().map(|v| v / k).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub base_value: f64,
    pub phi: Vec<f64>,
    pub prediction: f64,
    pub instance: Vec<f64>,
    /// Coalitions evaluated (excluding the empty and full ones for kernel).
    pub n_coalitions: usize,
    /// True when the least-squares system needed a ridge term.
    #[serde(default)]
    pub regularized: bool,
}

fn check(model: &dyn ScoreModel, instance: &[f64], background: ArrayView2<f64>) -> Result<usize> {
    let m = model.n_features();
    if instance.len() != m || background.ncols() != m {
        return Err(invalid(format!(
            "feature mismatch: model has {m}, instance {}, background {}",
            instance.len(),
            background.ncols()
        )));
    }
    if background.nrows() == 0 {
        return Err(invalid("background sample is empty"));
    }
    if m == 0 {
        return Err(invalid("model has no features"));
    }
    Ok(m)
}

/// `v(S)` for coalition bitmask `mask`.
fn coalition_value(model: &dyn ScoreModel, instance: &[f64], background: ArrayView2<f64>, mask: u64) -> f64 {
    let mut hybrid = background.to_owned();
    for (j, &v) in instance.iter().enumerate() {
        if mask >> j & 1 == 1 {
            hybrid.column_mut(j).fill(v);
        }
    }
    let s = model.score_rows(hybrid.view());
    s.iter().sum::<f64>() / s.len() as f64
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Exact attribution by enumerating all `2^M` coalitions.
pub fn shapley_exact(
    model: &dyn ScoreModel,
    instance: &[f64],
    background: ArrayView2<f64>,
) -> Result<Attribution> {
    let m = check(model, instance, background)?;
    if m > MAX_EXACT_FEATURES {
        return Err(invalid(format!(
            "exact attribution supports at most {MAX_EXACT_FEATURES} features, got {m}"
        )));
    }
    let full = 1u64 << m;
    let v: Vec<f64> = (0..full)
        .into_par_iter()
        .map(|mask| coalition_value(model, instance, background, mask))
        .collect();
    let weight: Vec<f64> = (0..m)
        .map(|s| (ln_factorial(s) + ln_factorial(m - s - 1) - ln_factorial(m)).exp())
        .collect();
    let phi = (0..m)
        .map(|j| {
            let bit = 1u64 << j;
            (0..full)
                .filter(|mask| mask & bit == 0)
                .map(|mask| weight[mask.count_ones() as usize] * (v[(mask | bit) as usize] - v[mask as usize]))
                .sum()
        })
        .collect();
    Ok(Attribution {
        base_value: v[0],
        phi,
        prediction: v[(full - 1) as usize],
        instance: instance.to_vec(),
        n_coalitions: full as usize,
        regularized: false,
    })
}

fn binom(n: usize, k: usize) -> f64 {
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp()
}

/// Shapley kernel weight of a coalition of size `s` among `m` features.
pub fn kernel_weight(m: usize, s: usize) -> f64 {
    (m as f64 - 1.0) / (binom(m, s) * s as f64 * (m - s) as f64)
}

/// Kernel SHAP. With `n_coalitions >= 2^M - 2` every proper coalition is
/// enumerated with its exact kernel weight; otherwise sizes are drawn with
/// probability proportional to their total kernel mass and members uniformly.
pub fn kernel_shap(
    model: &dyn ScoreModel,
    instance: &[f64],
    background: ArrayView2<f64>,
    n_coalitions: usize,
    seed: u64,
) -> Result<Attribution> {
    let m = check(model, instance, background)?;
    if n_coalitions < m + 2 {
        return Err(invalid(format!(
            "n_coalitions must be at least M + 2 = {}, got {n_coalitions}",
            m + 2
        )));
    }
    let base = coalition_value(model, instance, background, 0);
    let pred = model.score_rows(Array2::from_shape_vec((1, m), instance.to_vec()).expect("shape").view())[0];
    if m == 1 {
        return Ok(Attribution {
            base_value: base,
            phi: vec![pred - base],
            prediction: pred,
            instance: instance.to_vec(),
            n_coalitions: 0,
            regularized: false,
        });
    }
    let enumerate = m < 63 && (n_coalitions as u128) + 2 >= (1u128 << m);
    let (masks, weights): (Vec<Vec<bool>>, Vec<f64>) = if enumerate {
        (1..(1u64 << m) - 1)
            .map(|mask| {
                let z: Vec<bool> = (0..m).map(|j| mask >> j & 1 == 1).collect();
                let s = mask.count_ones() as usize;
                (z, kernel_weight(m, s))
            })
            .unzip()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mass: Vec<f64> = (1..m).map(|s| 1.0 / (s * (m - s)) as f64).collect();
        let total: f64 = mass.iter().sum();
        (0..n_coalitions)
            .map(|_| {
                let mut t = rng.gen::<f64>() * total;
                let mut s = m - 1;
                for (i, w) in mass.iter().enumerate() {
                    if t < *w {
                        s = i + 1;
                        break;
                    }
                    t -= w;
                }
                let mut z = vec![false; m];
                for j in sample(&mut rng, m, s).into_iter() {
                    z[j] = true;
                }
                (z, 1.0)
            })
            .unzip()
    };
    let values: Vec<f64> = masks
        .par_iter()
        .map(|z| {
            let mask = z.iter().enumerate().fold(0u64, |acc, (j, &b)| acc | (u64::from(b) << j));
            coalition_value(model, instance, background, mask)
        })
        .collect();
    // eliminate the last feature through sum(phi) = pred - base
    let delta = pred - base;
    let k = m - 1;
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for ((z, &w), &v) in masks.iter().zip(&weights).zip(&values) {
        let last = f64::from(u8::from(z[k]));
        let row: Vec<f64> = (0..k).map(|j| f64::from(u8::from(z[j])) - last).collect();
        let target = v - base - last * delta;
        for i in 0..k {
            if row[i] == 0.0 {
                continue;
            }
            rhs[i] += w * row[i] * target;
            for j in 0..k {
                a[(i, j)] += w * row[i] * row[j];
            }
        }
    }
    let (sol, regularized) = match a.clone().cholesky() {
        Some(c) => (c.solve(&rhs), false),
        None => {
            let mut r = a;
            for i in 0..k {
                r[(i, i)] += 1e-10;
            }
            let sol = match r.clone().cholesky() {
                Some(c) => c.solve(&rhs),
                None => r.svd(true, true).solve(&rhs, 1e-14).map_err(|e| invalid(e.to_string()))?,
            };
            (sol, true)
        }
    };
    let mut phi: Vec<f64> = sol.iter().copied().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    Ok(Attribution {
        base_value: base,
        phi,
        prediction: pred,
        instance: instance.to_vec(),
        n_coalitions: masks.len(),
        regularized,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainMethod {
    /// Exact up to the feature cap, kernel beyond it.
    #[default]
    Auto,
    Exact,
    Kernel,
}

/// Coalition budget used by `Auto` above the exact cap.
pub fn default_coalitions(m: usize) -> usize {
    2 * m + 2048
}

pub fn explain_row(
    model: &dyn ScoreModel,
    instance: &[f64],
    background: ArrayView2<f64>,
    method: ExplainMethod,
    seed: u64,
) -> Result<Attribution> {
    let m = model.n_features();
    match method {
        ExplainMethod::Exact => shapley_exact(model, instance, background),
        ExplainMethod::Kernel => kernel_shap(model, instance, background, default_coalitions(m), seed),
        ExplainMethod::Auto if m <= MAX_EXACT_FEATURES => shapley_exact(model, instance, background),
        ExplainMethod::Auto => kernel_shap(model, instance, background, default_coalitions(m), seed),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub feature_names: Vec<String>,
    /// Mean absolute attribution, in feature order.
    pub importance: Vec<f64>,
    /// Feature indices by descending importance (ties by index).
    pub ranking: Vec<usize>,
}

impl GlobalImportance {
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        self.ranking
            .iter()
            .map(|&j| (self.feature_names[j].as_str(), self.importance[j]))
            .collect()
    }
}

/// Mean |phi| per feature over the sample rows; row `i` uses seed `seed + i`.
pub fn global_importance(
    model: &dyn ScoreModel,
    sample: ArrayView2<f64>,
    background: ArrayView2<f64>,
    feature_names: &[String],
    method: ExplainMethod,
    seed: u64,
) -> Result<GlobalImportance> {
    if sample.nrows() == 0 {
        return Err(invalid("explanation sample is empty"));
    }
    if feature_names.len() != model.n_features() {
        return Err(invalid("feature name count does not match the model"));
    }
    let rows: Vec<Vec<f64>> = sample.rows().into_iter().map(|r| r.to_vec()).collect();
    let attrs: Vec<Attribution> = rows
        .par_iter()
        .enumerate()
        .map(|(i, r)| explain_row(model, r, background, method, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let m = model.n_features();
    let n = attrs.len() as f64;
    let importance: Vec<f64> = (0..m)
        .map(|j| attrs.iter().map(|a| a.phi[j].abs()).sum::<f64>() / n)
        .collect();
    let mut ranking: Vec<usize> = (0..m).collect();
    ranking.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    Ok(GlobalImportance {
        feature_names: feature_names.to_vec(),
        importance,
        ranking,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceEntry {
    pub name: String,
    pub value: f64,
    pub phi: f64,
}

/// Per-instance contributions split around the base value: negative ones
/// on the left, positive ones on the right, each by descending |phi|.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcePlot {
    pub base_value: f64,
    pub prediction: f64,
    pub negative: Vec<ForceEntry>,
    pub positive: Vec<ForceEntry>,
}

pub fn force_plot_export(attr: &Attribution, feature_names: &[String]) -> Result<ForcePlot> {
    if feature_names.len() != attr.phi.len() {
        return Err(invalid("feature name count does not match the attribution"));
    }
    let mut negative = Vec::new();
    let mut positive = Vec::new();
    for (j, &phi) in attr.phi.iter().enumerate() {
        let e = ForceEntry {
            name: feature_names[j].clone(),
            value: attr.instance.get(j).copied().unwrap_or(f64::NAN),
            phi,
        };
        if phi < 0.0 {
            negative.push(e);
        } else if phi > 0.0 {
            positive.push(e);
        }
    }
    let by_mag = |a: &ForceEntry, b: &ForceEntry| b.phi.abs().total_cmp(&a.phi.abs());
    negative.sort_by(by_mag);
    positive.sort_by(by_mag);
    Ok(ForcePlot {
        base_value: attr.base_value,
        prediction: attr.prediction,
        negative,
        positive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|j| format!("f{j}")).collect()
    }

    #[test]
    fn additive_and_product_examples() {
        let bg = array![[0.0, 0.0]];
        let add = FnModel { n_features: 2, f: |x: &[f64]| x[0] + x[1] };
        let a = shapley_exact(&add, &[2.0, 3.0], bg.view()).unwrap();
        assert!((a.phi[0] - 2.0).abs() < 1e-12 && (a.phi[1] - 3.0).abs() < 1e-12);
        let mul = FnModel { n_features: 2, f: |x: &[f64]| x[0] * x[1] };
        let a = shapley_exact(&mul, &[1.0, 1.0], bg.view()).unwrap();
        assert!((a.phi[0] - 0.5).abs() < 1e-12 && (a.phi[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dummy_feature_gets_zero() {
        let bg = array![[0.3, 1.0, -2.0], [0.1, 0.0, 5.0]];
        let f = FnModel { n_features: 3, f: |x: &[f64]| x[0] * 2.0 + x[1].sin() };
        let a = shapley_exact(&f, &[1.0, 2.0, 3.0], bg.view()).unwrap();
        assert_eq!(a.phi[2], 0.0);
        assert!((a.base_value + a.phi.iter().sum::<f64>() - a.prediction).abs() < 1e-12);
    }

    #[test]
    fn kernel_matches_exact_when_enumerated() {
        let bg = array![[0.0, 1.0, 2.0, 0.5], [1.0, -1.0, 0.0, 0.2], [0.5, 0.5, 0.5, 0.5]];
        let f = FnModel { n_features: 4, f: |x: &[f64]| x[0] * x[1] + (x[2] - x[3]).max(0.0) + 0.3 * x[3] };
        let x = [1.0, 2.0, -1.0, 3.0];
        let e = shapley_exact(&f, &x, bg.view()).unwrap();
        let k = kernel_shap(&f, &x, bg.view(), 14, 0).unwrap();
        for (a, b) in e.phi.iter().zip(&k.phi) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!(kernel_shap(&f, &x, bg.view(), 5, 0).is_err());
    }

    #[test]
    fn sampled_kernel_keeps_efficiency() {
        let bg = array![[0.0; 6]];
        let f = FnModel { n_features: 6, f: |x: &[f64]| x.iter().enumerate().map(|(j, v)| (j as f64 + 1.0) * v).sum() };
        let a = kernel_shap(&f, &[1.0; 6], bg.view(), 20, 3).unwrap();
        assert!((a.base_value + a.phi.iter().sum::<f64>() - a.prediction).abs() < 1e-9);
        // linear model: every coalition sample is consistent, so phi is exact
        for (j, p) in a.phi.iter().enumerate() {
            assert!((p - (j as f64 + 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn force_plot_partitions() {
        let attr = Attribution {
            base_value: 0.2,
            phi: vec![0.1, -0.3, 0.0, 0.4],
            prediction: 0.4,
            instance: vec![1.0, 2.0, 3.0, 4.0],
            n_coalitions: 16,
            regularized: false,
        };
        let fp = force_plot_export(&attr, &names(4)).unwrap();
        assert_eq!(fp.negative.len(), 1);
        assert_eq!(fp.positive.iter().map(|e| e.name.as_str()).collect::<Vec<_>>(), ["f3", "f0"]);
    }

    #[test]
    fn global_ranking_follows_coefficients() {
        let sample = array![[1.0, 1.0], [-1.0, 0.5], [0.5, -1.0], [-0.5, -0.5]];
        let f = FnModel { n_features: 2, f: |x: &[f64]| 3.0 * x[0] + x[1] };
        let g = global_importance(&f, sample.view(), sample.view(), &names(2), ExplainMethod::Exact, 0).unwrap();
        assert_eq!(g.ranking, vec![0, 1]);
        let zero = FnModel { n_features: 2, f: |_: &[f64]| 0.7 };
        let g = global_importance(&zero, sample.view(), sample.view(), &names(2), ExplainMethod::Exact, 0).unwrap();
        assert_eq!(g.importance, vec![0.0, 0.0]);
    }
}
