//! The fold-safe preprocessing chain: impute, encode, scale, select, resample.
//!
//! [`StagePlan::fit`] reads only the rows it is given and returns the
//! training matrix plus a [`FittedStages`] that replays the same chain on new
//! rows. Cross-validation calls it once per fold with the training part only.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{data, invalid, Error, Result};
use crate::evaluate::{roc_auc, stratified_kfold_labels};
use crate::learners::linear::fit_logistic;
use crate::preprocess::{
    apply_impute, apply_scale, fit_impute, fit_loo, fit_scale, EncodeMode, Imputer, LooEncoder,
    OneHotEncoder, Scaler,
};
use crate::resample::{resample_matrix, ResampleSpec};
use crate::select::{
    chi2_filter, lambda_max, lasso_fit, pearson_filter, standardize, SelectMethod,
    SelectionResult,
};
use crate::tabular::{Column, ColumnKind, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    #[default]
    Loo,
    OneHot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub encoder: EncoderKind,
    pub impute: bool,
    pub scale: bool,
    pub loo_smoothing: f64,
    /// Standard deviation of multiplicative Gaussian jitter applied to the
    /// leave-one-out codes of training rows. Within a category those codes
    /// differ only by the row's own label, which trees can split on; the
    /// jitter hides that gap. Zero gives the exact leave-one-out codes.
    pub loo_noise: f64,
    pub max_cardinality: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            encoder: EncoderKind::Loo,
            impute: true,
            scale: true,
            loo_smoothing: 0.0,
            loo_noise: 0.1,
            max_cardinality: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub method: SelectMethod,
    /// Filters default to half the features, rounded up. For LASSO this caps
    /// the support by absolute weight.
    #[serde(default)]
    pub top_k: Option<usize>,
    /// Fixed LASSO penalty; chosen on a log grid by inner CV when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StagePlan {
    pub preprocess: PreprocessConfig,
    pub resample: ResampleSpec,
    pub select: Option<SelectConfig>,
}

/// Everything learned from a training table, applied verbatim to new rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedStages {
    pub input_features: Vec<String>,
    pub input_schema: BTreeMap<String, ColumnKind>,
    pub imputer: Option<Imputer>,
    pub loo: Option<LooEncoder>,
    pub one_hot: Option<OneHotEncoder>,
    pub scaler: Option<Scaler>,
    pub selection: Option<SelectionResult>,
    pub output_features: Vec<String>,
}

/// Training matrix after every stage, resampling included.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub x: Array2<f64>,
    pub labels: Vec<Option<u8>>,
    pub feature_names: Vec<String>,
}

const LASSO_TOL: f64 = 1e-6;
const LASSO_MAX_ITER: usize = 1000;
const LAMBDA_GRID: usize = 5;
const LAMBDA_INNER_FOLDS: usize = 3;

fn jitter_columns(t: &Table, names: &[String], sd: f64, seed: u64) -> Result<Table> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::standard();
    let cols = t
        .feature_columns()
        .map(|c| {
            if !names.iter().any(|n| n == c.name()) {
                return c.clone();
            }
            let v = c.as_numeric().expect("encoded column is numeric");
            let jittered = v
                .iter()
                .zip(c.missing())
                .map(|(&x, &m)| {
                    let z = normal.inverse_cdf(rng.gen_range(f64::EPSILON..1.0));
                    (!m).then_some(x * (1.0 + sd * z))
                })
                .collect();
            Column::numeric_opt(c.name(), jittered)
        })
        .collect();
    t.with_features(cols)
}

impl StagePlan {
    pub fn validate(&self) -> Result<()> {
        self.resample.validate()?;
        if !(self.preprocess.loo_smoothing >= 0.0 && self.preprocess.loo_smoothing.is_finite()) {
            return Err(invalid("loo_smoothing must be a finite value >= 0"));
        }
        if !(self.preprocess.loo_noise >= 0.0 && self.preprocess.loo_noise.is_finite()) {
            return Err(invalid("loo_noise must be a finite value >= 0"));
        }
        if let Some(sel) = &self.select {
            if sel.top_k == Some(0) {
                return Err(invalid("top_k must be >= 1"));
            }
            if let Some(l) = sel.lambda {
                if !(l >= 0.0 && l.is_finite()) {
                    return Err(invalid("lambda must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Fits every stage on `train`; `seed` drives resampling and λ search.
    pub fn fit(&self, train: &Table, seed: u64) -> Result<(FittedStages, TrainingSet)> {
        self.validate()?;
        if train.target().is_none() {
            return Err(invalid("training table needs a target column"));
        }
        let input_features = train.feature_names();
        let input_schema = train.schema();
        let mut t = train.clone();
        let imputer = if self.preprocess.impute {
            let imp = fit_impute(&t)?;
            t = apply_impute(&imp, &t)?;
            Some(imp)
        } else {
            None
        };
        let has_categorical = t.feature_columns().any(|c| c.kind() == ColumnKind::Categorical);
        let (mut loo, mut one_hot) = (None, None);
        if has_categorical {
            match self.preprocess.encoder {
                EncoderKind::Loo => {
                    let enc = fit_loo(&t, self.preprocess.loo_smoothing)?;
                    let cats: Vec<String> = t
                        .feature_columns()
                        .filter(|c| c.kind() == ColumnKind::Categorical)
                        .map(|c| c.name().to_string())
                        .collect();
                    t = enc.transform(&t, EncodeMode::FitRows)?;
                    if self.preprocess.loo_noise > 0.0 {
                        t = jitter_columns(&t, &cats, self.preprocess.loo_noise, seed)?;
                    }
                    loo = Some(enc);
                }
                EncoderKind::OneHot => {
                    let enc = OneHotEncoder::fit(&t, self.preprocess.max_cardinality)?;
                    t = enc.transform(&t)?;
                    one_hot = Some(enc);
                }
            }
        }
        let scaler = if self.preprocess.scale {
            let s = fit_scale(&t)?;
            t = apply_scale(&s, &t)?;
            Some(s)
        } else {
            None
        };
        let x = t.feature_matrix()?;
        let labels = t.labels().expect("target checked above");
        let names = t.feature_names();
        let selection = match &self.select {
            Some(cfg) => Some(fit_selection(cfg, &x, &labels, &names, seed)?),
            None => None,
        };
        let (x, names) = match &selection {
            Some(sel) => (x.select(Axis(1), &sel.support), sel.selected_names()),
            None => (x, names),
        };
        let spec = ResampleSpec {
            seed: self.resample.seed.wrapping_add(seed),
            ..self.resample.clone()
        };
        let (x, labels) = resample_matrix(&x, &labels, &spec)?;
        let stages = FittedStages {
            input_features,
            input_schema,
            imputer,
            loo,
            one_hot,
            scaler,
            selection,
            output_features: names.clone(),
        };
        Ok((
            stages,
            TrainingSet {
                x,
                labels,
                feature_names: names,
            },
        ))
    }
}

fn labeled_part(x: &Array2<f64>, labels: &[Option<u8>]) -> (Array2<f64>, Vec<u8>) {
    let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    let y = rows.iter().map(|&i| labels[i].expect("filtered")).collect();
    (x.select(Axis(0), &rows), y)
}

fn fit_selection(
    cfg: &SelectConfig,
    x: &Array2<f64>,
    labels: &[Option<u8>],
    names: &[String],
    seed: u64,
) -> Result<SelectionResult> {
    let (xl, y) = labeled_part(x, labels);
    if y.is_empty() {
        return Err(data("feature selection needs labeled rows"));
    }
    let d = x.ncols();
    let top = cfg.top_k.unwrap_or(d.div_ceil(2)).min(d);
    let mut result = match cfg.method {
        SelectMethod::Pearson => pearson_filter(xl.view(), &y, top)?,
        SelectMethod::Chi2 => {
            // shift each column so its training minimum is zero
            let mut shifted = xl.clone();
            for mut col in shifted.columns_mut() {
                let m = col.iter().copied().fold(f64::INFINITY, f64::min);
                col.mapv_inplace(|v| v - m);
            }
            chi2_filter(shifted.view(), &y, top)?
        }
        SelectMethod::Lasso => {
            let xs = standardize(&xl);
            let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
            let mut r = match cfg.lambda {
                Some(l) => lasso_fit(xs.view(), &yf, l, LASSO_TOL, LASSO_MAX_ITER)?,
                None => lasso_auto(&xs, &y, &yf, seed)?,
            };
            if let Some(k) = cfg.top_k {
                if r.support.len() > k {
                    let mut order = r.support.clone();
                    order.sort_by(|&a, &b| r.scores[b].total_cmp(&r.scores[a]).then(a.cmp(&b)));
                    order.truncate(k);
                    order.sort_unstable();
                    r.support = order;
                }
            }
            r
        }
    };
    if result.support.is_empty() {
        return Err(data("feature selection kept no features"));
    }
    result.feature_names = names.to_vec();
    Ok(result)
}

/// λ from a log grid over `[1e-3 λ_max, λ_max]`, scored by the inner-CV AUROC
/// of a logistic model on the selected columns. Sparser wins ties.
fn lasso_auto(xs: &Array2<f64>, y: &[u8], yf: &[f64], seed: u64) -> Result<SelectionResult> {
    let lmax = lambda_max(xs.view(), yf);
    let folds = stratified_kfold_labels(y, LAMBDA_INNER_FOLDS, seed).ok();
    let mut best: Option<(f64, SelectionResult)> = None;
    for i in (0..LAMBDA_GRID).rev() {
        let exp = -3.0 * (1.0 - i as f64 / (LAMBDA_GRID - 1) as f64);
        let lambda = lmax * 10f64.powf(exp);
        let r = lasso_fit(xs.view(), yf, lambda, LASSO_TOL, LASSO_MAX_ITER)?;
        if r.support.is_empty() {
            continue;
        }
        let score = match &folds {
            Some(folds) => inner_auroc(&xs.select(Axis(1), &r.support), y, folds),
            None => 0.0,
        };
        if best.as_ref().is_none_or(|(s, _)| score > *s + 1e-12) {
            best = Some((score, r));
        }
    }
    match best {
        Some((_, r)) => Ok(r),
        None => {
            // every grid point was empty: fall back to the smallest penalty
            lasso_fit(xs.view(), yf, lmax * 1e-3, LASSO_TOL, LASSO_MAX_ITER)
        }
    }
}

fn inner_auroc(x: &Array2<f64>, y: &[u8], folds: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    for test in folds {
        let mut is_test = vec![false; y.len()];
        test.iter().for_each(|&i| is_test[i] = true);
        let train: Vec<usize> = (0..y.len()).filter(|&i| !is_test[i]).collect();
        let ytr: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let yte: Vec<u8> = test.iter().map(|&i| y[i]).collect();
        let m = fit_logistic(x.select(Axis(0), &train).view(), &ytr, 1e-3, 100, 1e-8);
        let s = m.predict(x.select(Axis(0), test).view());
        total += roc_auc(&yte, &s).map(|(_, a)| a).unwrap_or(0.5);
    }
    total / folds.len() as f64
}

impl FittedStages {
    /// Keeps the fitted input columns (and the target when present), dropping
    /// anything else.
    pub fn project(&self, table: &Table) -> Result<Table> {
        let mut columns = Vec::with_capacity(self.input_features.len() + 1);
        for name in &self.input_features {
            let col = table
                .column(name)
                .filter(|_| table.target_name() != Some(name.as_str()))
                .ok_or_else(|| Error::MissingColumn(name.clone()))?;
            if let Some(&kind) = self.input_schema.get(name) {
                if col.kind() != kind {
                    return Err(data(format!(
                        "column `{name}` is {:?} but was {:?} at training time",
                        col.kind(),
                        kind
                    )));
                }
            }
            columns.push(col.clone());
        }
        let target = table.target().cloned();
        let target_name = target.as_ref().map(|t| t.name().to_string());
        if let Some(t) = target {
            columns.push(t);
        }
        let out = Table::new(columns, target_name.as_deref())?;
        Ok(match table.label_mapping() {
            Some(m) => out.with_label_mapping(m.clone()),
            None => out,
        })
    }

    /// Model-ready matrix for rows the stages were not fitted on.
    pub fn transform(&self, table: &Table) -> Result<Array2<f64>> {
        let mut t = self.project(table)?;
        if let Some(imp) = &self.imputer {
            t = apply_impute(imp, &t)?;
        }
        if let Some(enc) = &self.loo {
            t = enc.transform(&t, EncodeMode::NewRows)?;
        }
        if let Some(enc) = &self.one_hot {
            t = enc.transform(&t)?;
        }
        if let Some(s) = &self.scaler {
            t = apply_scale(s, &t)?;
        }
        let x = t.feature_matrix()?;
        Ok(match &self.selection {
            Some(sel) => x.select(Axis(1), &sel.support),
            None => x,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resample::ResampleMethod;
    use crate::tabular::Column;

    fn table() -> Table {
        let cat: Vec<Option<&str>> = ["a", "b", "a", "b", "a", "c", "b", "a"].iter().map(|s| Some(*s)).collect();
        Table::new(
            vec![
                Column::numeric_opt(
                    "n",
                    vec![Some(1.0), None, Some(3.0), Some(4.0), Some(5.0), Some(6.0), Some(7.0), Some(8.0)],
                ),
                Column::categorical("c", &cat),
                Column::numeric("y", vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
            ],
            Some("y"),
        )
        .unwrap()
    }

    #[test]
    fn default_plan_produces_complete_matrix() {
        let (st, ts) = StagePlan::default().fit(&table(), 0).unwrap();
        assert_eq!(ts.x.dim(), (8, 2));
        assert!(ts.x.iter().all(|v| v.is_finite()));
        let new = st.transform(&table()).unwrap();
        assert_eq!(new.dim(), (8, 2));
        assert_eq!(st.output_features, vec!["n", "c"]);
    }

    #[test]
    fn loo_noise_only_touches_training_codes() {
        let plain = StagePlan {
            preprocess: PreprocessConfig {
                loo_noise: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let noisy = StagePlan {
            preprocess: PreprocessConfig {
                loo_noise: 0.1,
                ..Default::default()
            },
            ..Default::default()
        };
        let (a, ta) = plain.fit(&table(), 0).unwrap();
        let (b, tb) = noisy.fit(&table(), 0).unwrap();
        assert_eq!(a.loo, b.loo);
        assert_ne!(ta.x.column(1), tb.x.column(1));
        assert_eq!(noisy.fit(&table(), 0).unwrap().1.x, tb.x);
    }

    #[test]
    fn one_hot_and_selection() {
        let plan = StagePlan {
            preprocess: PreprocessConfig {
                encoder: EncoderKind::OneHot,
                ..Default::default()
            },
            select: Some(SelectConfig {
                method: SelectMethod::Pearson,
                top_k: Some(2),
                lambda: None,
            }),
            ..Default::default()
        };
        let (st, ts) = plan.fit(&table(), 0).unwrap();
        assert_eq!(ts.x.ncols(), 2);
        assert_eq!(st.transform(&table()).unwrap().ncols(), 2);
    }

    #[test]
    fn resampling_only_touches_training_matrix() {
        let plan = StagePlan {
            resample: ResampleSpec {
                method: ResampleMethod::RandomOver,
                ..Default::default()
            },
            ..Default::default()
        };
        let t = table().take_rows(&[0, 1, 2, 3, 5, 6]);
        let (st, ts) = plan.fit(&t, 3).unwrap();
        assert_eq!(ts.x.nrows(), 8);
        assert_eq!(st.transform(&t).unwrap().nrows(), 6);
    }

    #[test]
    fn missing_input_column_is_named() {
        let (st, _) = StagePlan::default().fit(&table(), 0).unwrap();
        let t = table();
        let cut = t.with_features(vec![t.column("n").unwrap().clone()]).unwrap();
        match st.transform(&cut) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "c"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lasso_auto_lambda_keeps_informative_feature() {
        let n = 60;
        let y: Vec<f64> = (0..n).map(|i| f64::from(i % 2 == 0)).collect();
        let signal: Vec<f64> = y.iter().enumerate().map(|(i, v)| v * 2.0 + (i as f64 * 0.37).sin() * 0.3).collect();
        let noise: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let t = Table::new(
            vec![Column::numeric("s", signal), Column::numeric("z", noise), Column::numeric("y", y)],
            Some("y"),
        )
        .unwrap();
        let plan = StagePlan {
            select: Some(SelectConfig {
                method: SelectMethod::Lasso,
                top_k: None,
                lambda: None,
            }),
            ..Default::default()
        };
        let (st, _) = plan.fit(&t, 1).unwrap();
        let sel = st.selection.unwrap();
        assert!(sel.support.contains(&0));
        assert!(sel.lambda.unwrap() > 0.0);
    }
}
