//! Feature selection: Pearson and chi-squared filters, and LASSO screening
//! by cyclic coordinate descent.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{data, invalid, Error, Result};
use crate::tabular::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMethod {
    Lasso,
    Pearson,
    Chi2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SelectMethod,
    /// Names of the scored features, in input order.
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    /// Selected feature indices, ascending.
    pub support: Vec<usize>,
    pub lambda: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub converged: Option<bool>,
}

impl SelectionResult {
    pub fn selected_names(&self) -> Vec<String> {
        self.support
            .iter()
            .map(|&j| self.feature_names[j].clone())
            .collect()
    }
}

fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// Top `k` indices by score (ties by lower index), returned ascending.
fn top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(invalid("top_k must be >= 1"));
    }
    if k > scores.len() {
        return Err(invalid(format!(
            "top_k {k} exceeds the number of features {}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut s = order[..k].to_vec();
    s.sort_unstable();
    Ok(s)
}

fn check_xy(x: ArrayView2<f64>, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(invalid("X and y row counts differ"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(data("feature matrix has non-finite values"));
    }
    Ok(())
}

/// Absolute Pearson correlation with the label; constant columns score 0.
pub fn pearson_scores(x: ArrayView2<f64>, y: &[u8]) -> Vec<f64> {
    let n = y.len() as f64;
    let yv: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let ym = yv.iter().sum::<f64>() / n;
    let syy: f64 = yv.iter().map(|v| (v - ym).powi(2)).sum();
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let xm = col.sum() / n;
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for (xi, yi) in col.iter().zip(&yv) {
                sxy += (xi - xm) * (yi - ym);
                sxx += (xi - xm).powi(2);
            }
            if sxx <= 0.0 || syy <= 0.0 {
                0.0
            } else {
                (sxy / (sxx.sqrt() * syy.sqrt())).abs().min(1.0)
            }
        })
        .collect()
}

pub fn pearson_filter(x: ArrayView2<f64>, y: &[u8], top: usize) -> Result<SelectionResult> {
    check_xy(x, y)?;
    let scores = pearson_scores(x, y);
    Ok(SelectionResult {
        method: SelectMethod::Pearson,
        feature_names: default_names(x.ncols()),
        support: top_k(&scores, top)?,
        scores,
        lambda: None,
        weights: None,
        converged: None,
    })
}

/// Pearson chi-squared per feature.
///
/// Each feature contributes a 2x2 contingency of class against
/// `(feature mass, complement mass)`, the complement taken against the column
/// maximum. For 0/1 features this is the classical 2x2 table.
pub fn chi2_scores(x: ArrayView2<f64>, y: &[u8]) -> Result<Vec<f64>> {
    if x.iter().any(|&v| v < 0.0) {
        return Err(data("chi-squared selection requires non-negative features"));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(data("chi-squared selection needs both classes"));
    }
    let n = n_pos + n_neg;
    Ok((0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let cap = col.iter().copied().fold(0.0, f64::max);
            if cap <= 0.0 {
                return 0.0;
            }
            // observed[class][cell]
            let mut obs = [[0.0; 2]; 2];
            for (v, &c) in col.iter().zip(y) {
                let c = usize::from(c);
                obs[c][0] += v;
                obs[c][1] += cap - v;
            }
            let cell_tot = [obs[0][0] + obs[1][0], obs[0][1] + obs[1][1]];
            let class_frac = [n_neg / n, n_pos / n];
            let mut chi = 0.0;
            for c in 0..2 {
                for k in 0..2 {
                    let e = cell_tot[k] * class_frac[c];
                    if e > 0.0 {
                        chi += (obs[c][k] - e).powi(2) / e;
                    }
                }
            }
            chi
        })
        .collect())
}

pub fn chi2_filter(x: ArrayView2<f64>, y: &[u8], top: usize) -> Result<SelectionResult> {
    check_xy(x, y)?;
    let scores = chi2_scores(x, y)?;
    Ok(SelectionResult {
        method: SelectMethod::Chi2,
        feature_names: default_names(x.ncols()),
        support: top_k(&scores, top)?,
        scores,
        lambda: None,
        weights: None,
        converged: None,
    })
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    z.signum() * (z.abs() - lambda).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit {
    pub weights: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Objective value after each sweep.
    pub objective: Vec<f64>,
}

fn centered(y: &[f64]) -> Vec<f64> {
    let m = y.iter().sum::<f64>() / y.len().max(1) as f64;
    y.iter().map(|v| v - m).collect()
}

/// Smallest penalty that zeroes every weight: `max_j |x_j' y_c| / n`.
pub fn lambda_max(x: ArrayView2<f64>, y: &[f64]) -> f64 {
    let yc = centered(y);
    let n = y.len() as f64;
    (0..x.ncols())
        .map(|j| x.column(j).iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>().abs() / n)
        .fold(0.0, f64::max)
}

fn lasso_objective(r: &[f64], w: &[f64], lambda: f64) -> f64 {
    let n = r.len() as f64;
    r.iter().map(|v| v * v).sum::<f64>() / (2.0 * n) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Minimizes `(1/2n)||y_c - Xw||^2 + lambda ||w||_1` by cyclic coordinate
/// descent, where `y_c` is `y` minus its mean.
pub fn lasso_coordinate_descent(
    x: ArrayView2<f64>,
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LassoFit> {
    if x.nrows() != y.len() {
        return Err(invalid("X and y row counts differ"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda must be finite and >= 0"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(data("LASSO inputs must be finite"));
    }
    let n = y.len() as f64;
    let d = x.ncols();
    let col_sq: Vec<f64> = (0..d)
        .map(|j| x.column(j).iter().map(|v| v * v).sum::<f64>() / n)
        .collect();
    let mut r = centered(y);
    let mut w = vec![0.0; d];
    let mut objective = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            if col_sq[j] <= 0.0 {
                continue;
            }
            let col = x.column(j);
            let rho = col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / n + w[j] * col_sq[j];
            let new = soft_threshold(rho, lambda) / col_sq[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (ri, xi) in r.iter_mut().zip(col.iter()) {
                    *ri -= delta * xi;
                }
                w[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        objective.push(lasso_objective(&r, &w, lambda));
        if max_change < tol {
            converged = true;
            break;
        }
    }
    Ok(LassoFit {
        weights: w,
        converged,
        sweeps,
        objective,
    })
}

/// LASSO screening; the support is the set of non-zero weights.
pub fn lasso_fit(
    x: ArrayView2<f64>,
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SelectionResult> {
    let fit = lasso_coordinate_descent(x, y, lambda, tol, max_iter)?;
    Ok(SelectionResult {
        method: SelectMethod::Lasso,
        feature_names: default_names(x.ncols()),
        scores: fit.weights.iter().map(|w| w.abs()).collect(),
        support: (0..fit.weights.len())
            .filter(|&j| fit.weights[j] != 0.0)
            .collect(),
        lambda: Some(lambda),
        weights: Some(fit.weights),
        converged: Some(fit.converged),
    })
}

/// Standardizes columns with the population std (constant columns become 0).
pub fn standardize(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    let n = x.nrows() as f64;
    for mut col in out.columns_mut() {
        let m = col.sum() / n;
        let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        let div = if s > crate::preprocess::STD_FLOOR { s } else { 1.0 };
        col.mapv_inplace(|v| (v - m) / div);
    }
    out
}

/// Projects `table` onto the selected features, keeping order and the target.
pub fn apply_selection(result: &SelectionResult, table: &Table) -> Result<Table> {
    if result.support.is_empty() {
        return Err(invalid("selection support is empty"));
    }
    let mut features = Vec::with_capacity(result.support.len());
    for name in result.selected_names() {
        let col = table
            .column(&name)
            .filter(|_| table.target_name() != Some(name.as_str()))
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        features.push(col.clone());
    }
    table.with_features(features)
}

/// Projects a dense matrix onto the support columns.
pub fn select_columns(result: &SelectionResult, x: &Array2<f64>) -> Result<Array2<f64>> {
    if result.support.is_empty() {
        return Err(invalid("selection support is empty"));
    }
    if let Some(&bad) = result.support.iter().find(|&&j| j >= x.ncols()) {
        return Err(invalid(format!("support index {bad} out of range")));
    }
    Ok(x.select(ndarray::Axis(1), &result.support))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Column;
    use ndarray::array;

    #[test]
    fn pearson_examples() {
        let x = array![[1.0, 0.0, 5.0], [2.0, 0.0, 5.0], [3.0, 1.0, 5.0], [4.0, 1.0, 5.0]];
        let y = [0, 0, 1, 1];
        let s = pearson_scores(x.view(), &y);
        assert!((s[0] - 0.894427).abs() < 5e-7, "{}", s[0]);
        assert!((s[1] - 1.0).abs() < 1e-12);
        assert_eq!(s[2], 0.0);
        let r = pearson_filter(x.view(), &y, 2).unwrap();
        assert_eq!(r.support, vec![0, 1]);
        assert!(pearson_filter(x.view(), &y, 4).is_err());
    }

    #[test]
    fn chi2_examples() {
        let n = 10;
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            if j == 0 {
                f64::from(y[i])
            } else if i < 4 {
                1.0
            } else {
                0.0
            }
        });
        let s = chi2_scores(x.view(), &y).unwrap();
        assert!((s[0] - n as f64).abs() < 1e-12);
        // rows 0..4 hold two of each class
        assert!(s[1].abs() < 1e-12);
        let neg = array![[-1.0], [1.0]];
        assert!(chi2_filter(neg.view(), &[0, 1], 1).is_err());
    }

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn lasso_large_lambda_zeroes_everything() {
        let x = array![[1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [-1.0, -1.0]];
        let y = [1.0, 0.0, 1.0, 0.0];
        let lmax = lambda_max(x.view(), &y);
        let r = lasso_fit(x.view(), &y, lmax, 1e-10, 1000).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.converged, Some(true));
    }

    #[test]
    fn lasso_flags_non_convergence() {
        let x = array![[1.0, 0.9], [-1.0, -0.8], [0.5, 0.7], [-0.5, -0.8]];
        let r = lasso_fit(x.view(), &[1.0, 0.0, 1.0, 0.0], 0.0, 0.0, 2).unwrap();
        assert_eq!(r.converged, Some(false));
        assert!(lasso_fit(x.view(), &[f64::NAN, 0.0, 1.0, 0.0], 0.1, 1e-8, 10).is_err());
    }

    #[test]
    fn apply_selection_projects_in_order() {
        let t = Table::new(
            vec![
                Column::numeric("a", vec![1.0]),
                Column::numeric("b", vec![2.0]),
                Column::numeric("c", vec![3.0]),
                Column::numeric("y", vec![1.0]),
            ],
            Some("y"),
        )
        .unwrap();
        let mut sel = SelectionResult {
            method: SelectMethod::Pearson,
            feature_names: t.feature_names(),
            scores: vec![1.0, 0.0, 1.0],
            support: vec![0, 2],
            lambda: None,
            weights: None,
            converged: None,
        };
        let out = apply_selection(&sel, &t).unwrap();
        assert_eq!(out.feature_names(), vec!["a", "c"]);
        assert_eq!(out.target_name(), Some("y"));
        sel.support = vec![0, 1, 2];
        assert_eq!(apply_selection(&sel, &t).unwrap(), t);
        sel.support.clear();
        assert!(apply_selection(&sel, &t).is_err());
        sel.support = vec![0];
        sel.feature_names[0] = "zzz".into();
        assert!(apply_selection(&sel, &t).is_err());
    }
}
