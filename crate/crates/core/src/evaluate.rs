//! Classification metrics, ROC / PR curves, the critical ratio and
//! leakage-safe stratified cross-validation.

use std::io::Write;
use std::time::Instant;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{data, invalid, Result};
use crate::learners::{fit, threshold_scores, FittedModel, LearnerSpec};
use crate::stages::{FittedStages, StagePlan};
use crate::tabular::Table;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(invalid(format!(
            "length mismatch: {} labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fn_ += 1,
            _ => return Err(invalid("labels and predictions must be 0 or 1")),
        }
    }
    Ok(cm)
}

/// A ratio metric; `defined` is false when its denominator was zero, in which
/// case `value` is 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub defined: bool,
}

fn ratio(num: f64, den: f64) -> Ratio {
    if den > 0.0 {
        Ratio {
            value: num / den,
            defined: true,
        }
    } else {
        Ratio {
            value: 0.0,
            defined: false,
        }
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Ratio {
    ratio((cm.tp + cm.tn) as f64, cm.total() as f64)
}

pub fn precision(cm: &ConfusionMatrix) -> Ratio {
    ratio(cm.tp as f64, (cm.tp + cm.fp) as f64)
}

pub fn recall(cm: &ConfusionMatrix) -> Ratio {
    ratio(cm.tp as f64, (cm.tp + cm.fn_) as f64)
}

pub fn f1(cm: &ConfusionMatrix) -> Ratio {
    let p = precision(cm);
    let r = recall(cm);
    if !(p.defined && r.defined) {
        return Ratio {
            value: 0.0,
            defined: false,
        };
    }
    ratio(2.0 * p.value * r.value, p.value + r.value)
}

/// Ordered curve points with the score threshold that produced each one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurvePoints {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl CurvePoints {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// CSV with header `threshold,x,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "threshold,x,y")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{}", self.thresholds[i], self.x[i], self.y[i])?;
        }
        Ok(())
    }
}

fn check_scores(y_true: &[u8], scores: &[f64]) -> Result<(usize, usize)> {
    if y_true.len() != scores.len() {
        return Err(invalid("labels and scores differ in length"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(data("scores must be finite"));
    }
    let pos = y_true.iter().filter(|&&v| v == 1).count();
    if y_true.iter().any(|&v| v > 1) {
        return Err(invalid("labels must be 0 or 1"));
    }
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(data("curve needs both classes present"));
    }
    Ok((pos, neg))
}

/// Cumulative (tp, fp) after each distinct score, highest first.
fn sweep(y_true: &[u8], scores: &[f64]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if y_true[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((s, tp, fp));
    }
    out
}

/// ROC curve (FPR, TPR) with tied scores grouped; area by the trapezoid rule.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<(CurvePoints, f64)> {
    let (pos, neg) = check_scores(y_true, scores)?;
    let mut c = CurvePoints {
        x: vec![0.0],
        y: vec![0.0],
        thresholds: vec![f64::INFINITY],
    };
    for (s, tp, fp) in sweep(y_true, scores) {
        c.x.push(fp as f64 / neg as f64);
        c.y.push(tp as f64 / pos as f64);
        c.thresholds.push(s);
    }
    let auc = (1..c.len())
        .map(|i| (c.x[i] - c.x[i - 1]) * (c.y[i] + c.y[i - 1]) / 2.0)
        .sum();
    Ok((c, auc))
}

/// Precision-recall curve (recall, precision) and average precision
/// `sum (R_i - R_{i-1}) P_i`.
pub fn pr_auc(y_true: &[u8], scores: &[f64]) -> Result<(CurvePoints, f64)> {
    let (pos, _) = check_scores(y_true, scores)?;
    let mut c = CurvePoints {
        x: vec![0.0],
        y: vec![1.0],
        thresholds: vec![f64::INFINITY],
    };
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (s, tp, fp) in sweep(y_true, scores) {
        let r = tp as f64 / pos as f64;
        let p = tp as f64 / (tp + fp) as f64;
        ap += (r - prev_r) * p;
        prev_r = r;
        c.x.push(r);
        c.y.push(p);
        c.thresholds.push(s);
    }
    Ok((c, ap))
}

/// Overall accuracy per second of elapsed time.
pub fn critical_ratio(overall_accuracy: f64, elapsed_seconds: f64) -> Result<f64> {
    if !(elapsed_seconds > 0.0) || !elapsed_seconds.is_finite() {
        return Err(invalid(format!(
            "elapsed time must be positive, got {elapsed_seconds}"
        )));
    }
    Ok(overall_accuracy / elapsed_seconds)
}

/// Test-fold indices (each ascending) for `k` stratified folds over labels.
pub fn stratified_kfold_labels(y: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let labels: Vec<Option<u8>> = y.iter().map(|&v| Some(v)).collect();
    kfold_strata(&labels, k, seed)
}

/// Stratified folds over a table's labels; unlabeled rows form their own
/// stratum and are spread across folds the same way.
pub fn stratified_kfold(table: &Table, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let labels = table
        .labels()
        .ok_or_else(|| invalid("stratified folds need a target column"))?;
    kfold_strata(&labels, k, seed)
}

fn kfold_strata(labels: &[Option<u8>], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(invalid(format!("k must be >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for class in [Some(0u8), Some(1u8), None] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if class.is_some() && idx.len() < k {
            return Err(data(format!(
                "k = {k} exceeds the {} rows of class {}",
                idx.len(),
                class.unwrap_or(0)
            )));
        }
        idx.shuffle(&mut rng);
        for (j, &i) in idx.iter().enumerate() {
            folds[(offset + j) % k].push(i);
        }
        // continue filling where this stratum stopped so fold sizes stay even
        offset = (offset + idx.len()) % k;
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Metrics of one scored, labeled sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auroc: f64,
    pub pr_auc: f64,
    /// Names of metrics reported as 0 because they were undefined.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

pub fn score_metrics(y_true: &[u8], scores: &[f64], threshold: f64) -> Result<Metrics> {
    let pred = threshold_scores(scores, threshold);
    let cm = confusion(y_true, &pred)?;
    let mut undefined = Vec::new();
    let mut take = |name: &str, r: Ratio| {
        if !r.defined {
            undefined.push(name.to_string());
        }
        r.value
    };
    let accuracy = take("accuracy", accuracy(&cm));
    let precision = take("precision", precision(&cm));
    let recall = take("recall", recall(&cm));
    let f1 = take("f1", f1(&cm));
    let (auroc, pr) = match (roc_auc(y_true, scores), pr_auc(y_true, scores)) {
        (Ok((_, a)), Ok((_, p))) => (a, p),
        _ => {
            undefined.push("auroc".into());
            undefined.push("pr_auc".into());
            (0.0, 0.0)
        }
    };
    Ok(Metrics {
        confusion: cm,
        accuracy,
        precision,
        recall,
        f1,
        auroc,
        pr_auc: pr,
        undefined,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: Metrics,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

/// Aggregate of the per-fold values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auroc: f64,
    pub pr_auc: f64,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

impl MetricSummary {
    fn from_fold(f: &FoldResult) -> Self {
        MetricSummary {
            accuracy: f.metrics.accuracy,
            precision: f.metrics.precision,
            recall: f.metrics.recall,
            f1: f.metrics.f1,
            auroc: f.metrics.auroc,
            pr_auc: f.metrics.pr_auc,
            fit_seconds: f.fit_seconds,
            predict_seconds: f.predict_seconds,
        }
    }

    fn to_array(self) -> [f64; 8] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.auroc,
            self.pr_auc,
            self.fit_seconds,
            self.predict_seconds,
        ]
    }

    fn from_array(a: [f64; 8]) -> Self {
        MetricSummary {
            accuracy: a[0],
            precision: a[1],
            recall: a[2],
            f1: a[3],
            auroc: a[4],
            pr_auc: a[5],
            fit_seconds: a[6],
            predict_seconds: a[7],
        }
    }

    /// Whether the metric columns (timings excluded) are identical.
    pub fn same_metrics(&self, other: &MetricSummary) -> bool {
        self.to_array()[..6] == other.to_array()[..6]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub learner: LearnerSpec,
    pub k_folds: usize,
    pub threshold: f64,
    pub folds: Vec<FoldResult>,
    pub mean: MetricSummary,
    /// Population standard deviation across folds.
    pub std: MetricSummary,
    /// Mean accuracy over mean fit + predict seconds per fold.
    pub critical_ratio: f64,
    /// Out-of-fold labels and scores, aligned; used for curves.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oof_labels: Vec<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oof_scores: Vec<f64>,
}

impl EvalReport {
    pub fn from_folds(
        learner: LearnerSpec,
        threshold: f64,
        folds: Vec<FoldResult>,
        oof_labels: Vec<u8>,
        oof_scores: Vec<f64>,
    ) -> Result<Self> {
        if folds.is_empty() {
            return Err(invalid("no folds to aggregate"));
        }
        let n = folds.len() as f64;
        let rows: Vec<[f64; 8]> = folds
            .iter()
            .map(|f| MetricSummary::from_fold(f).to_array())
            .collect();
        let mut mean = [0.0; 8];
        let mut std = [0.0; 8];
        for j in 0..8 {
            mean[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            std[j] = (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
        }
        let mean = MetricSummary::from_array(mean);
        let elapsed = (mean.fit_seconds + mean.predict_seconds).max(f64::MIN_POSITIVE);
        Ok(EvalReport {
            learner,
            k_folds: folds.len(),
            threshold,
            critical_ratio: critical_ratio(mean.accuracy, elapsed)?,
            folds,
            mean,
            std: MetricSummary::from_array(std),
            oof_labels,
            oof_scores,
        })
    }

    pub fn roc_curve(&self) -> Result<CurvePoints> {
        roc_auc(&self.oof_labels, &self.oof_scores).map(|(c, _)| c)
    }

    pub fn pr_curve(&self) -> Result<CurvePoints> {
        pr_auc(&self.oof_labels, &self.oof_scores).map(|(c, _)| c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub k_folds: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k_folds: 10,
            seed: 0,
            threshold: 0.5,
        }
    }
}

/// Everything fitted inside one fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldFit {
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub stages: FittedStages,
    pub model: FittedModel,
}

/// Fits the stages on `train`, then the learner on the stage output. Kinds
/// that cannot use unlabeled rows do not see them.
pub fn fit_pipeline(
    spec: &LearnerSpec,
    plan: &StagePlan,
    train: &Table,
    seed: u64,
) -> Result<(FittedStages, FittedModel)> {
    let (stages, ts) = plan.fit(train, seed)?;
    let learner = spec.clone().with_seed(spec.seed.wrapping_add(seed));
    let (x, labels) = if spec.kind.accepts_unlabeled() || ts.labels.iter().all(Option::is_some) {
        (ts.x, ts.labels)
    } else {
        let rows: Vec<usize> = (0..ts.labels.len()).filter(|&i| ts.labels[i].is_some()).collect();
        (ts.x.select(Axis(0), &rows), rows.iter().map(|&i| ts.labels[i]).collect())
    };
    let model = fit(&learner, x.view(), &labels)?.with_feature_names(ts.feature_names);
    Ok((stages, model))
}

/// Fits stages and model on `train`, scores `test`, and times both halves.
pub fn fit_and_score(
    spec: &LearnerSpec,
    plan: &StagePlan,
    train: &Table,
    test: &Table,
    seed: u64,
) -> Result<(FittedStages, FittedModel, Vec<f64>, f64, f64)> {
    let start = Instant::now();
    let (stages, model) = fit_pipeline(spec, plan, train, seed)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let x = stages.transform(test)?;
    let scores = model.predict_proba(x.view())?;
    let predict_seconds = start.elapsed().as_secs_f64();
    Ok((stages, model, scores, fit_seconds, predict_seconds))
}

/// Cross-validation that also returns each fold's fitted stages and model.
pub fn cross_validate_detailed(
    spec: &LearnerSpec,
    table: &Table,
    plan: &StagePlan,
    opts: &CvOptions,
) -> Result<(EvalReport, Vec<FoldFit>)> {
    spec.validate()?;
    plan.validate()?;
    let labels = table
        .labels()
        .ok_or_else(|| invalid("cross-validation needs a target column"))?;
    let folds = stratified_kfold(table, opts.k_folds, opts.seed)?;
    let results: Vec<Result<(FoldResult, FoldFit, Vec<u8>, Vec<f64>)>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_all)| {
            let mut in_test = vec![false; table.n_rows()];
            test_all.iter().for_each(|&i| in_test[i] = true);
            let train_rows: Vec<usize> = (0..table.n_rows()).filter(|&i| !in_test[i]).collect();
            let test_rows: Vec<usize> = test_all.iter().copied().filter(|&i| labels[i].is_some()).collect();
            let train = table.take_rows(&train_rows);
            let test = table.take_rows(&test_rows);
            let seed = opts.seed.wrapping_add(f as u64);
            let (stages, model, scores, fit_s, pred_s) = fit_and_score(spec, plan, &train, &test, seed)?;
            let y: Vec<u8> = test_rows.iter().map(|&i| labels[i].expect("labeled")).collect();
            let metrics = score_metrics(&y, &scores, opts.threshold)?;
            Ok((
                FoldResult {
                    fold: f,
                    metrics,
                    fit_seconds: fit_s,
                    predict_seconds: pred_s,
                },
                FoldFit {
                    fold: f,
                    train_rows,
                    test_rows,
                    stages,
                    model,
                },
                y,
                scores,
            ))
        })
        .collect();
    let mut fold_results = Vec::new();
    let mut fits = Vec::new();
    let mut oof_labels = Vec::new();
    let mut oof_scores = Vec::new();
    for r in results {
        let (fr, ff, y, s) = r?;
        fold_results.push(fr);
        fits.push(ff);
        oof_labels.extend(y);
        oof_scores.extend(s);
    }
    let report = EvalReport::from_folds(spec.clone(), opts.threshold, fold_results, oof_labels, oof_scores)?;
    Ok((report, fits))
}

pub fn cross_validate(
    spec: &LearnerSpec,
    table: &Table,
    plan: &StagePlan,
    opts: &CvOptions,
) -> Result<EvalReport> {
    cross_validate_detailed(spec, table, plan, opts).map(|(r, _)| r)
}

/// Metrics for a fitted pipeline on a labeled table it was not trained on.
pub fn evaluate_fitted(
    stages: &FittedStages,
    models: &[FittedModel],
    table: &Table,
    threshold: f64,
) -> Result<(Metrics, Vec<f64>)> {
    let labels = table
        .labels()
        .ok_or_else(|| invalid("evaluation data needs the target column"))?;
    let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    if rows.is_empty() {
        return Err(data("evaluation data has no labeled rows"));
    }
    let x = stages.transform(table)?.select(Axis(0), &rows);
    let scores = mean_scores(models, &x)?;
    let y: Vec<u8> = rows.iter().map(|&i| labels[i].expect("labeled")).collect();
    Ok((score_metrics(&y, &scores, threshold)?, scores))
}

/// Mean probability across models (a soft vote when there is more than one).
pub fn mean_scores(models: &[FittedModel], x: &ndarray::Array2<f64>) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(invalid("no models to score with"));
    }
    let mut acc = vec![0.0; x.nrows()];
    for m in models {
        for (a, s) in acc.iter_mut().zip(m.predict_proba(x.view())?) {
            *a += s;
        }
    }
    let k = models.len() as f64;
    Ok(acc.into_iter().map(|v| v / k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerKind;
    use crate::tabular::Column;

    #[test]
    fn confusion_counts() {
        let cm = confusion(&[1, 0, 1, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!((cm.tp, cm.tn, cm.fn_, cm.fp), (1, 1, 1, 1));
        assert!(confusion(&[1], &[1, 0]).is_err());
        let cm = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
    }

    #[test]
    fn ratio_metrics() {
        let cm = ConfusionMatrix { tp: 1, fp: 1, fn_: 1, tn: 0 };
        assert_eq!(precision(&cm).value, 0.5);
        assert_eq!(recall(&cm).value, 0.5);
        assert_eq!(f1(&cm).value, 0.5);
        let cm = ConfusionMatrix { tp: 0, fp: 0, fn_: 3, tn: 2 };
        assert_eq!(precision(&cm), Ratio { value: 0.0, defined: false });
        let cm = ConfusionMatrix { tp: 3, fp: 1, fn_: 2, tn: 0 };
        assert!((f1(&cm).value - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);
        assert!((precision(&cm).value - 0.75).abs() < 1e-15);
        assert!((recall(&cm).value - 0.6).abs() < 1e-15);
    }

    #[test]
    fn roc_examples() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap().1, 1.0);
        assert_eq!(roc_auc(&[0, 1, 0, 1], &[0.3; 4]).unwrap().1, 0.5);
        let (c, a) = roc_auc(&[1, 1, 0, 0], &[0.9, 0.4, 0.5, 0.1]).unwrap();
        assert_eq!(a, 0.75);
        assert_eq!((c.x[0], c.y[0]), (0.0, 0.0));
        assert_eq!((*c.x.last().unwrap(), *c.y.last().unwrap()), (1.0, 1.0));
        assert!(roc_auc(&[1, 1], &[0.2, 0.3]).is_err());
    }

    #[test]
    fn average_precision_examples() {
        assert_eq!(pr_auc(&[0, 1, 1], &[0.1, 0.8, 0.9]).unwrap().1, 1.0);
        assert_eq!(pr_auc(&[1, 0, 0, 0], &[0.9, 0.2, 0.1, 0.3]).unwrap().1, 1.0);
        assert_eq!(pr_auc(&[0, 1, 0], &[0.9, 0.5, 0.1]).unwrap().1, 0.5);
    }

    #[test]
    fn critical_ratio_arithmetic() {
        assert_eq!(critical_ratio(0.88, 2.0).unwrap(), 0.44);
        assert_eq!(critical_ratio(1.0, 1.0).unwrap(), 1.0);
        assert!(critical_ratio(0.9, 0.0).is_err());
    }

    fn balanced(n_pos: usize, n_neg: usize) -> Table {
        let n = n_pos + n_neg;
        let y: Vec<f64> = (0..n).map(|i| f64::from(i < n_pos)).collect();
        // positives and negatives separated by a wide gap on x
        let x: Vec<f64> = (0..n).map(|i| if i < n_pos { i as f64 } else { i as f64 + 1000.0 }).collect();
        Table::new(vec![Column::numeric("x", x), Column::numeric("y", y)], Some("y")).unwrap()
    }

    #[test]
    fn kfold_is_balanced_partition() {
        let t = balanced(50, 50);
        let folds = stratified_kfold(&t, 10, 4).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.iter().filter(|&&i| i < 50).count(), 5);
            assert_eq!(f.len(), 10);
        }
        assert_eq!(folds, stratified_kfold(&t, 10, 4).unwrap());
        assert!(stratified_kfold(&t, 1, 4).is_err());
        assert!(stratified_kfold(&balanced(3, 50), 4, 0).is_err());
    }

    #[test]
    fn majority_baseline_and_separable_data() {
        // no signal: the tree predicts the 10% base rate everywhere
        let n = 100;
        let y: Vec<f64> = (0..n).map(|i| f64::from(i % 10 == 0)).collect();
        let t = Table::new(
            vec![Column::numeric("c", vec![1.0; n]), Column::numeric("y", y)],
            Some("y"),
        )
        .unwrap();
        let spec = LearnerSpec::new(LearnerKind::DecisionTree);
        let r = cross_validate(&spec, &t, &StagePlan::default(), &CvOptions::default()).unwrap();
        assert!((r.mean.accuracy - 0.9).abs() < 1e-12);
        assert_eq!(r.mean.recall, 0.0);

        let r = cross_validate(&spec, &balanced(40, 60), &StagePlan::default(), &CvOptions::default()).unwrap();
        assert_eq!(r.mean.accuracy, 1.0);
        let again = cross_validate(&spec, &balanced(40, 60), &StagePlan::default(), &CvOptions::default()).unwrap();
        assert!(r.mean.same_metrics(&again.mean));
        assert_eq!(r.oof_scores, again.oof_scores);
    }
}
