//! End-to-end runs: load, split, cross-validate every configured learner
//! (plain and tuned), rank them, refit the winner on the training split and
//! package it with its fitted stages as a self-contained artifact.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{data, invalid, Error, Result};
use crate::evaluate::{
    evaluate_fitted, fit_and_score, fit_pipeline, mean_scores, score_metrics, stratified_kfold,
    CvOptions, EvalReport, FoldResult, Metrics,
};
use crate::explain::{
    explain_row, force_plot_export, global_importance, Attribution, ExplainMethod, ForcePlot,
    GlobalImportance, MeanModel,
};
use crate::learners::{threshold_scores, FittedModel, LearnerSpec};
use crate::plot::{bar_chart, line_plot};
use crate::resample::ResampleSpec;
use crate::stages::{FittedStages, PreprocessConfig, SelectConfig, StagePlan};
use crate::tabular::{load_csv, split_train_test, ColumnKind, LabelMapping, Table};
use crate::tune::{
    bayes_search, default_space, grid_search, random_search, CvObjective, LossKind, ParamSpace,
    SearchMethod, TuningResult,
};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TABMLART";

fn default_train_fraction() -> f64 {
    0.4
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub target: String,
    #[serde(default)]
    pub schema: BTreeMap<String, ColumnKind>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub stratified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    pub method: SearchMethod,
    /// Trials for random and Bayesian search; grids run in full.
    pub budget: usize,
    pub n_init: usize,
    pub loss: LossKind,
    pub inner_folds: usize,
    /// Search spaces keyed by learner kind name; defaults otherwise.
    pub spaces: BTreeMap<String, ParamSpace>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            method: SearchMethod::None,
            budget: 20,
            n_init: 5,
            loss: LossKind::Auroc,
            inner_folds: 3,
            spaces: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    pub k_folds: usize,
    pub threshold: f64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            k_folds: 10,
            threshold: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    /// Compute global importance for the chosen model at the end of a run.
    pub enabled: bool,
    pub method: ExplainMethod,
    pub background_size: usize,
    pub sample_size: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            enabled: false,
            method: ExplainMethod::Auto,
            background_size: 100,
            sample_size: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub resample: ResampleSpec,
    #[serde(default)]
    pub select: Option<SelectConfig>,
    pub learners: Vec<LearnerSpec>,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    /// Adds a soft-vote row over the top three learners by AUROC.
    #[serde(default)]
    pub ensemble: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    /// Minimal config: given learners, defaults everywhere else.
    pub fn new(target: &str, learners: Vec<LearnerSpec>) -> Self {
        PipelineConfig {
            data: DataConfig {
                path: None,
                target: target.to_string(),
                schema: BTreeMap::new(),
                train_fraction: default_train_fraction(),
                seed: 0,
                stratified: true,
            },
            preprocess: PreprocessConfig::default(),
            resample: ResampleSpec::default(),
            select: None,
            learners,
            tune: TuneConfig::default(),
            evaluate: EvaluateConfig::default(),
            explain: ExplainConfig::default(),
            ensemble: false,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_json(&text)
    }

    pub fn plan(&self) -> StagePlan {
        StagePlan {
            preprocess: self.preprocess.clone(),
            resample: self.resample.clone(),
            select: self.select.clone(),
        }
    }

    pub fn cv_options(&self) -> CvOptions {
        CvOptions {
            k_folds: self.evaluate.k_folds,
            seed: self.data.seed,
            threshold: self.evaluate.threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learners.is_empty() {
            return Err(invalid("config lists no learners"));
        }
        for l in &self.learners {
            l.validate()?;
        }
        if self.evaluate.k_folds < 2 {
            return Err(invalid("evaluate.k_folds must be >= 2"));
        }
        if !(self.evaluate.threshold >= 0.0 && self.evaluate.threshold <= 1.0) {
            return Err(invalid("evaluate.threshold must be in [0, 1]"));
        }
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return Err(invalid("data.train_fraction must be in (0, 1)"));
        }
        if self.data.target.is_empty() {
            return Err(invalid("data.target is empty"));
        }
        self.plan().validate()?;
        match self.tune.method {
            SearchMethod::None => {}
            SearchMethod::Grid => {}
            SearchMethod::Random => {
                if self.tune.budget < 1 {
                    return Err(invalid("tune.budget must be >= 1"));
                }
            }
            SearchMethod::Bayes => {
                if self.tune.n_init < 1 || self.tune.budget <= self.tune.n_init {
                    return Err(invalid("Bayesian tuning needs 1 <= n_init < budget"));
                }
            }
        }
        if self.tune.method != SearchMethod::None && self.tune.inner_folds < 2 {
            return Err(invalid("tune.inner_folds must be >= 2"));
        }
        for (kind, space) in &self.tune.spaces {
            kind.parse::<crate::learners::LearnerKind>()?;
            space.validate()?;
        }
        Ok(())
    }

    fn space_for(&self, spec: &LearnerSpec) -> ParamSpace {
        self.tune
            .spaces
            .get(spec.kind.name())
            .cloned()
            .unwrap_or_else(|| default_space(spec.kind))
    }
}

/// Runs the configured search over `space` for `base` on `table`.
pub fn tune_learner(
    cfg: &PipelineConfig,
    base: &LearnerSpec,
    table: &Table,
    seed: u64,
) -> Result<TuningResult> {
    let space = cfg.space_for(base);
    let obj = CvObjective {
        base: base.clone(),
        table,
        plan: cfg.plan(),
        cv: CvOptions {
            k_folds: cfg.tune.inner_folds,
            seed,
            threshold: cfg.evaluate.threshold,
        },
        loss: cfg.tune.loss,
    };
    match cfg.tune.method {
        SearchMethod::Grid => grid_search(&obj, &space),
        SearchMethod::Random => random_search(&obj, &space, cfg.tune.budget, seed),
        SearchMethod::Bayes => bayes_search(
            &obj,
            &space.as_ranges(Some(base.kind)),
            cfg.tune.budget,
            cfg.tune.n_init,
            seed,
        ),
        SearchMethod::None => Err(invalid("tuning is disabled")),
    }
}

fn with_params(base: &LearnerSpec, params: &BTreeMap<String, f64>) -> LearnerSpec {
    let mut s = base.clone();
    for (k, v) in params {
        s.params.insert(k.clone(), *v);
    }
    s
}

/// Nested cross-validation: every outer fold tunes on its own training part
/// with an inner CV, then scores the tuned learner on the held-out fold.
pub fn nested_cross_validate(
    cfg: &PipelineConfig,
    base: &LearnerSpec,
    table: &Table,
) -> Result<(EvalReport, Vec<TuningResult>)> {
    let opts = cfg.cv_options();
    let labels = table
        .labels()
        .ok_or_else(|| invalid("cross-validation needs a target column"))?;
    let folds = stratified_kfold(table, opts.k_folds, opts.seed)?;
    let plan = cfg.plan();
    let results: Vec<Result<_>> = folds
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
            let tuning = tune_learner(cfg, base, &train, seed)?;
            let spec = with_params(base, &tuning.best_params);
            let (_, _, scores, fit_s, pred_s) = fit_and_score(&spec, &plan, &train, &test, seed)?;
            let y: Vec<u8> = test_rows.iter().map(|&i| labels[i].expect("labeled")).collect();
            let metrics = score_metrics(&y, &scores, opts.threshold)?;
            Ok((
                FoldResult {
                    fold: f,
                    metrics,
                    fit_seconds: fit_s,
                    predict_seconds: pred_s,
                },
                tuning,
                y,
                scores,
            ))
        })
        .collect();
    let mut folds_out = Vec::new();
    let mut tunings = Vec::new();
    let (mut oy, mut os) = (Vec::new(), Vec::new());
    for r in results {
        let (fr, t, y, s) = r?;
        folds_out.push(fr);
        tunings.push(t);
        oy.extend(y);
        os.extend(s);
    }
    let report = EvalReport::from_folds(base.clone(), opts.threshold, folds_out, oy, os)?;
    Ok((report, tunings))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub label: String,
    pub learner: String,
    pub tuned: bool,
    /// Specs behind the row; several for the soft-vote ensemble.
    pub specs: Vec<LearnerSpec>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auroc: f64,
    pub pr_auc: f64,
    /// Mean fit + predict seconds per fold.
    pub seconds: f64,
    pub critical_ratio: f64,
    /// Configured tuning loss of the row.
    pub loss: f64,
}

impl LeaderboardRow {
    fn from_report(label: String, learner: String, tuned: bool, specs: Vec<LearnerSpec>, r: &EvalReport, loss: LossKind) -> Self {
        LeaderboardRow {
            label,
            learner,
            tuned,
            specs,
            accuracy: r.mean.accuracy,
            precision: r.mean.precision,
            recall: r.mean.recall,
            f1: r.mean.f1,
            auroc: r.mean.auroc,
            pr_auc: r.mean.pr_auc,
            seconds: r.mean.fit_seconds + r.mean.predict_seconds,
            critical_ratio: r.critical_ratio,
            loss: loss.loss(&r.mean),
        }
    }

    /// Metric columns that are reproducible run to run (no timings).
    pub fn metric_columns(&self) -> [f64; 7] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.auroc,
            self.pr_auc,
            self.loss,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    Accuracy,
    Precision,
    Recall,
    F1,
    Auroc,
    PrAuc,
    Seconds,
    CriticalRatio,
    Loss,
}

impl FromStr for SortKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| invalid(format!("unknown leaderboard column `{s}`")))
    }
}

impl SortKey {
    fn get(self, r: &LeaderboardRow) -> f64 {
        match self {
            SortKey::Accuracy => r.accuracy,
            SortKey::Precision => r.precision,
            SortKey::Recall => r.recall,
            SortKey::F1 => r.f1,
            SortKey::Auroc => r.auroc,
            SortKey::PrAuc => r.pr_auc,
            SortKey::Seconds => r.seconds,
            SortKey::CriticalRatio => r.critical_ratio,
            SortKey::Loss => r.loss,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub rows: Vec<LeaderboardRow>,
    /// Learners that failed, with the error message.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<(String, String)>,
}

impl Leaderboard {
    /// Stable sort by one column.
    pub fn sort_by(&mut self, key: SortKey, descending: bool) {
        self.rows.sort_by(|a, b| {
            let o = key.get(a).total_cmp(&key.get(b));
            if descending {
                o.reverse()
            } else {
                o
            }
        });
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "label,learner,tuned,accuracy,precision,recall,f1,auroc,pr_auc,seconds,critical_ratio,loss\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.label, r.learner, r.tuned, r.accuracy, r.precision, r.recall, r.f1, r.auroc, r.pr_auc, r.seconds, r.critical_ratio, r.loss
            ));
        }
        s
    }
}

impl fmt::Display for Leaderboard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28} {:>8} {:>9} {:>8} {:>8} {:>8} {:>10} {:>12}",
            "learner", "accuracy", "precision", "recall", "f1", "auroc", "seconds", "crit_ratio"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<28} {:>8.4} {:>9.4} {:>8.4} {:>8.4} {:>8.4} {:>10.4} {:>12.4}",
                r.label, r.accuracy, r.precision, r.recall, r.f1, r.auroc, r.seconds, r.critical_ratio
            )?;
        }
        for (l, e) in &self.failures {
            writeln!(f, "{l}: FAILED ({e})")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub target: String,
    pub label_mapping: Option<LabelMapping>,
    pub stages: FittedStages,
    /// One model, or the members of a soft vote.
    pub models: Vec<FittedModel>,
    pub chosen: LeaderboardRow,
    pub report: EvalReport,
    /// Metrics on the held-out split.
    pub holdout: Option<Metrics>,
    /// Stage-transformed training rows used as the explanation background.
    pub background: Vec<Vec<f64>>,
    /// Scores of the training split through the deployed path.
    pub train_scores: Vec<f64>,
    pub created_unix_secs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub labels: Vec<u8>,
    pub probabilities: Vec<f64>,
}

impl ModelArtifact {
    pub fn threshold(&self) -> f64 {
        self.config.evaluate.threshold
    }

    pub fn feature_names(&self) -> &[String] {
        &self.stages.output_features
    }

    pub fn background_matrix(&self) -> Result<Array2<f64>> {
        let m = self.stages.output_features.len();
        let flat: Vec<f64> = self.background.iter().flatten().copied().collect();
        Array2::from_shape_vec((self.background.len(), m), flat).map_err(|e| Error::Artifact(e.to_string()))
    }

    /// Loads a CSV with the training schema; the target is decoded with the
    /// training label mapping when the file has that column.
    pub fn load_input(&self, path: impl AsRef<Path>) -> Result<Table> {
        let path = path.as_ref();
        let headers = crate::tabular::csv_headers(path)?;
        let schema: BTreeMap<String, ColumnKind> = self
            .stages
            .input_schema
            .iter()
            .filter(|(k, _)| headers.contains(k))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        if headers.contains(&self.target) {
            let mapping = self.label_mapping.clone().unwrap_or_default();
            crate::tabular::load_csv_mapped(path, &schema, &self.target, &mapping)
        } else {
            load_csv(path, &schema, None)
        }
    }
}

pub fn predict_batch(artifact: &ModelArtifact, raw: &Table) -> Result<Prediction> {
    let x = artifact.stages.transform(raw)?;
    let probabilities = mean_scores(&artifact.models, &x)?;
    Ok(Prediction {
        labels: threshold_scores(&probabilities, artifact.threshold()),
        probabilities,
    })
}

/// Single-split evaluation of an artifact on labeled data.
pub fn evaluate_artifact(artifact: &ModelArtifact, table: &Table) -> Result<EvalReport> {
    let start = Instant::now();
    let (metrics, scores) = evaluate_fitted(&artifact.stages, &artifact.models, table, artifact.threshold())?;
    let predict_seconds = start.elapsed().as_secs_f64();
    let labels: Vec<u8> = table.labels().unwrap_or_default().into_iter().flatten().collect();
    let fold = FoldResult {
        fold: 0,
        metrics,
        fit_seconds: artifact.models.iter().map(|m| m.fit_seconds).sum(),
        predict_seconds,
    };
    let spec = artifact.chosen.specs.first().cloned().ok_or_else(|| Error::Artifact("artifact has no learner".into()))?;
    EvalReport::from_folds(spec, artifact.threshold(), vec![fold], labels, scores)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub row: Option<usize>,
    pub attribution: Option<Attribution>,
    pub force_plot: Option<ForcePlot>,
    pub global: GlobalImportance,
}

fn sample_rows(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Attribution for one row (when given) plus global importance over a
/// seeded sample of `table`.
pub fn explain_artifact(artifact: &ModelArtifact, table: &Table, row: Option<usize>, seed: u64) -> Result<Explanation> {
    let x = artifact.stages.transform(table)?;
    if x.nrows() == 0 {
        return Err(data("no rows to explain"));
    }
    let background = artifact.background_matrix()?;
    let model = MeanModel(&artifact.models);
    let method = artifact.config.explain.method;
    let names = artifact.feature_names().to_vec();
    let (attribution, force_plot) = match row {
        Some(i) => {
            if i >= x.nrows() {
                return Err(invalid(format!("row {i} out of range ({} rows)", x.nrows())));
            }
            let a = explain_row(&model, &x.row(i).to_vec(), background.view(), method, seed)?;
            let fp = force_plot_export(&a, &names)?;
            (Some(a), Some(fp))
        }
        None => (None, None),
    };
    let rows = sample_rows(x.nrows(), artifact.config.explain.sample_size, seed);
    let global = global_importance(&model, x.select(Axis(0), &rows).view(), background.view(), &names, method, seed)?;
    Ok(Explanation {
        row,
        attribution,
        force_plot,
        global,
    })
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub leaderboard: Leaderboard,
    pub artifact: ModelArtifact,
    /// CV report per leaderboard row, same order.
    pub reports: Vec<(String, EvalReport)>,
    /// Final (full training split) tuning per tuned learner.
    pub tuning: Vec<(String, TuningResult)>,
    pub importance: Option<GlobalImportance>,
}

struct LearnerOutcome {
    rows: Vec<(LeaderboardRow, EvalReport)>,
    tuning: Option<(String, TuningResult)>,
}

fn evaluate_learner(cfg: &PipelineConfig, spec: &LearnerSpec, train: &Table) -> Result<LearnerOutcome> {
    let name = spec.kind.name().to_string();
    let report = crate::evaluate::cross_validate(spec, train, &cfg.plan(), &cfg.cv_options())?;
    let mut rows = vec![(
        LeaderboardRow::from_report(name.clone(), name.clone(), false, vec![spec.clone()], &report, cfg.tune.loss),
        report,
    )];
    let mut tuning = None;
    if cfg.tune.method != SearchMethod::None {
        let (nested, _) = nested_cross_validate(cfg, spec, train)?;
        let final_tuning = tune_learner(cfg, spec, train, cfg.data.seed)?;
        let tuned_spec = with_params(spec, &final_tuning.best_params);
        let label = format!("{name}+tuned");
        rows.push((
            LeaderboardRow::from_report(label.clone(), name, true, vec![tuned_spec], &nested, cfg.tune.loss),
            nested,
        ));
        tuning = Some((label, final_tuning));
    }
    Ok(LearnerOutcome { rows, tuning })
}

/// Soft vote of the top three rows by AUROC, scored from their out-of-fold
/// predictions (all rows share the same folds).
fn ensemble_row(rows: &[(LeaderboardRow, EvalReport)], loss: LossKind) -> Result<Option<(LeaderboardRow, EvalReport)>> {
    if rows.len() < 2 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].0.auroc.total_cmp(&rows[a].0.auroc).then(a.cmp(&b)));
    order.truncate(3);
    let members: Vec<&(LeaderboardRow, EvalReport)> = order.iter().map(|&i| &rows[i]).collect();
    let first = &members[0].1;
    let n = first.oof_scores.len();
    if members.iter().any(|(_, r)| r.oof_scores.len() != n || r.oof_labels != first.oof_labels) {
        return Err(invalid("ensemble members were evaluated on different folds"));
    }
    let scores: Vec<f64> = (0..n)
        .map(|i| members.iter().map(|(_, r)| r.oof_scores[i]).sum::<f64>() / members.len() as f64)
        .collect();
    let mut folds = Vec::new();
    let mut start = 0;
    for (f, fold) in first.folds.iter().enumerate() {
        let len = fold.metrics.confusion.total();
        let y = &first.oof_labels[start..start + len];
        let s = &scores[start..start + len];
        folds.push(FoldResult {
            fold: f,
            metrics: score_metrics(y, s, first.threshold)?,
            fit_seconds: members.iter().map(|(_, r)| r.folds[f].fit_seconds).sum(),
            predict_seconds: members.iter().map(|(_, r)| r.folds[f].predict_seconds).sum(),
        });
        start += len;
    }
    let specs: Vec<LearnerSpec> = members.iter().flat_map(|(row, _)| row.specs.clone()).collect();
    let report = EvalReport::from_folds(specs[0].clone(), first.threshold, folds, first.oof_labels.clone(), scores)?;
    let label = format!(
        "ensemble({})",
        members.iter().map(|(r, _)| r.label.as_str()).collect::<Vec<_>>().join(",")
    );
    Ok(Some((
        LeaderboardRow::from_report(label, "soft_vote".into(), members.iter().any(|(r, _)| r.tuned), specs, &report, loss),
        report,
    )))
}

pub fn run_automl(cfg: &PipelineConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let path = cfg
        .data
        .path
        .as_ref()
        .ok_or_else(|| invalid("config has no data.path"))?;
    let table = load_csv(path, &cfg.data.schema, Some(&cfg.data.target))?;
    run_automl_on(cfg, &table)
}

/// [`run_automl`] on an already loaded table.
pub fn run_automl_on(cfg: &PipelineConfig, table: &Table) -> Result<RunOutput> {
    cfg.validate()?;
    if table.target_name() != Some(cfg.data.target.as_str()) {
        return Err(Error::MissingColumn(cfg.data.target.clone()));
    }
    for name in cfg.data.schema.keys() {
        if table.column(name).is_none() {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let (train, test) = split_train_test(table, cfg.data.train_fraction, cfg.data.stratified, cfg.data.seed)?;
    let outcomes: Vec<(String, Result<LearnerOutcome>)> = cfg
        .learners
        .par_iter()
        .map(|spec| (spec.kind.name().to_string(), evaluate_learner(cfg, spec, &train)))
        .collect();
    let mut rows = Vec::new();
    let mut tuning = Vec::new();
    let mut failures = Vec::new();
    for (name, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                rows.extend(o.rows);
                tuning.extend(o.tuning);
            }
            Err(e) => {
                log::warn!("learner {name} failed: {e}");
                failures.push((name, e.to_string()));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Runtime(format!(
            "every learner failed: {}",
            failures.iter().map(|(n, e)| format!("{n}: {e}")).collect::<Vec<_>>().join("; ")
        )));
    }
    if cfg.ensemble {
        match ensemble_row(&rows, cfg.tune.loss) {
            Ok(Some(r)) => rows.push(r),
            Ok(None) => {}
            Err(e) => failures.push(("ensemble".into(), e.to_string())),
        }
    }
    let mut best = 0;
    for (i, (r, _)) in rows.iter().enumerate() {
        if r.loss < rows[best].0.loss {
            best = i;
        }
    }
    let (chosen, report) = rows[best].clone();
    let plan = cfg.plan();
    let mut stages = None;
    let mut models = Vec::new();
    for spec in &chosen.specs {
        let (st, m) = fit_pipeline(spec, &plan, &train, cfg.data.seed)?;
        stages.get_or_insert(st);
        models.push(m);
    }
    let stages = stages.expect("chosen row has at least one spec");
    let holdout = if test.n_rows() > 0 {
        Some(evaluate_fitted(&stages, &models, &test, cfg.evaluate.threshold)?.0)
    } else {
        None
    };
    let train_x = stages.transform(&train)?;
    let train_scores = mean_scores(&models, &train_x)?;
    let bg_rows = sample_rows(train_x.nrows(), cfg.explain.background_size, cfg.data.seed);
    let background: Vec<Vec<f64>> = bg_rows.iter().map(|&i| train_x.row(i).to_vec()).collect();
    let artifact = ModelArtifact {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        target: cfg.data.target.clone(),
        label_mapping: table.label_mapping().cloned(),
        stages,
        models,
        chosen,
        report,
        holdout,
        background,
        train_scores,
        created_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let importance = if cfg.explain.enabled && test.n_rows() > 0 {
        Some(explain_artifact(&artifact, &test, None, cfg.data.seed)?.global)
    } else {
        None
    };
    let reports = rows.iter().map(|(r, rep)| (r.label.clone(), rep.clone())).collect();
    Ok(RunOutput {
        leaderboard: Leaderboard {
            rows: rows.into_iter().map(|(r, _)| r).collect(),
            failures,
        },
        artifact,
        reports,
        tuning,
        importance,
    })
}

/// Binary envelope: magic, format version (u32 LE), SHA-256 of the payload,
/// payload length (u64 LE), then the JSON payload.
pub fn artifact_bytes(artifact: &ModelArtifact) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(artifact)?;
    let digest = Sha256::digest(&payload);
    let mut out = Vec::with_capacity(payload.len() + 52);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&artifact.format_version.to_le_bytes());
    out.extend_from_slice(&digest);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn artifact_from_bytes(bytes: &[u8]) -> Result<ModelArtifact> {
    let header = MAGIC.len() + 4 + 32 + 8;
    if bytes.len() < header || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Artifact("not a model artifact".into()));
    }
    let mut at = MAGIC.len();
    let version = u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    at += 4;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let digest = &bytes[at..at + 32];
    at += 32;
    let len = u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes")) as usize;
    at += 8;
    let payload = &bytes[at..];
    if payload.len() != len {
        return Err(Error::Artifact("artifact is truncated or has trailing bytes".into()));
    }
    if Sha256::digest(payload).as_slice() != digest {
        return Err(Error::Artifact("checksum mismatch; the file is corrupted".into()));
    }
    let artifact: ModelArtifact = serde_json::from_slice(payload)?;
    if artifact.format_version != version {
        return Err(Error::Artifact("header and payload versions disagree".into()));
    }
    Ok(artifact)
}

pub fn save_artifact(artifact: &ModelArtifact, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = artifact_bytes(artifact)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<ModelArtifact> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    artifact_from_bytes(&bytes)
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '+' { c } else { '_' })
        .collect()
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Leaderboard CSV/JSON, per-row ROC and PR curve CSVs, and SVG plots.
/// Returns the written paths.
pub fn emit_reports(
    leaderboard: &Leaderboard,
    reports: &[(String, EvalReport)],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    if leaderboard.rows.is_empty() {
        return Err(invalid("leaderboard is empty; nothing to report"));
    }
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        write_file(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    put("leaderboard.json".into(), serde_json::to_vec_pretty(leaderboard)?)?;
    put("leaderboard.csv".into(), leaderboard.to_csv().into_bytes())?;
    let mut roc_series = Vec::new();
    let mut pr_series = Vec::new();
    for (label, report) in reports {
        let (Ok(roc), Ok(pr)) = (report.roc_curve(), report.pr_curve()) else {
            continue;
        };
        let mut buf = Vec::new();
        roc.write_csv(&mut buf).map_err(|e| Error::io(dir, e))?;
        put(format!("roc_{}.csv", file_label(label)), buf)?;
        let mut buf = Vec::new();
        pr.write_csv(&mut buf).map_err(|e| Error::io(dir, e))?;
        put(format!("pr_{}.csv", file_label(label)), buf)?;
        roc_series.push((label.clone(), roc.x.iter().copied().zip(roc.y.iter().copied()).collect()));
        pr_series.push((label.clone(), pr.x.iter().copied().zip(pr.y.iter().copied()).collect()));
    }
    put(
        "roc.svg".into(),
        line_plot("ROC (out-of-fold)", "false positive rate", "true positive rate", &roc_series, true).into_bytes(),
    )?;
    put(
        "pr.svg".into(),
        line_plot("Precision-recall (out-of-fold)", "recall", "precision", &pr_series, false).into_bytes(),
    )?;
    let labels: Vec<String> = leaderboard.rows.iter().map(|r| r.label.clone()).collect();
    let ratios: Vec<f64> = leaderboard.rows.iter().map(|r| r.critical_ratio).collect();
    put(
        "critical_ratio.svg".into(),
        bar_chart("Critical ratio (accuracy / second)", &labels, &ratios).into_bytes(),
    )?;
    Ok(written)
}

/// Global-importance JSON and bar chart.
pub fn emit_importance(importance: &GlobalImportance, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("importance.json");
    write_file(&json, &serde_json::to_vec_pretty(importance)?)?;
    let ranked = importance.ranked();
    let labels: Vec<String> = ranked.iter().map(|(n, _)| n.to_string()).collect();
    let values: Vec<f64> = ranked.iter().map(|(_, v)| *v).collect();
    let svg = dir.join("importance.svg");
    write_file(&svg, bar_chart("Mean |SHAP value|", &labels, &values).as_bytes())?;
    Ok(vec![json, svg])
}

/// Writes a whole run: reports, artifact, tuning and run metadata.
pub fn write_run(run: &RunOutput, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    let mut written = emit_reports(&run.leaderboard, &run.reports, dir)?;
    let p = dir.join("reports.json");
    write_file(&p, &serde_json::to_vec(&run.reports)?)?;
    written.push(p);
    if !run.tuning.is_empty() {
        let p = dir.join("tuning.json");
        write_file(&p, &serde_json::to_vec_pretty(&run.tuning)?)?;
        written.push(p);
    }
    if let Some(h) = &run.artifact.holdout {
        let p = dir.join("holdout.json");
        write_file(&p, &serde_json::to_vec_pretty(h)?)?;
        written.push(p);
    }
    if let Some(imp) = &run.importance {
        written.extend(emit_importance(imp, dir)?);
    }
    let p = dir.join("model.bin");
    save_artifact(&run.artifact, &p)?;
    written.push(p);
    Ok(written)
}

/// Re-emits plots and CSVs from a directory written by [`write_run`].
pub fn report_from_dir(run_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = run_dir.as_ref();
    let read = |name: &str| -> Result<Vec<u8>> {
        let p = dir.join(name);
        fs::read(&p).map_err(|e| Error::io(&p, e))
    };
    let leaderboard: Leaderboard = serde_json::from_slice(&read("leaderboard.json")?)?;
    let reports: Vec<(String, EvalReport)> = serde_json::from_slice(&read("reports.json")?)?;
    emit_reports(&leaderboard, &reports, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerKind;
    use crate::synthgen::{generate, GeneratorSpec, Shape};

    fn small_table() -> Table {
        let mut spec = GeneratorSpec::preset(Shape::Failure);
        spec.n_rows = 600;
        spec.positive_rate = 0.2;
        generate(&spec).unwrap()
    }

    fn config(learners: Vec<LearnerSpec>) -> PipelineConfig {
        let mut c = PipelineConfig::new("machine_failure", learners);
        c.evaluate.k_folds = 3;
        c
    }

    #[test]
    fn row_counts_follow_tuning() {
        let t = small_table();
        let learners = vec![
            LearnerSpec::new(LearnerKind::LogisticRegression),
            LearnerSpec::new(LearnerKind::GaussianNb),
        ];
        let run = run_automl_on(&config(learners.clone()), &t).unwrap();
        assert_eq!(run.leaderboard.rows.len(), 2);
        let mut cfg = config(learners);
        cfg.tune.method = SearchMethod::Grid;
        cfg.tune.spaces.insert("logistic_regression".into(), ParamSpace::new().grid("l2", &[1e-3, 1.0]));
        cfg.tune.spaces.insert("gaussian_nb".into(), ParamSpace::new().grid("var_floor", &[1e-9, 1e-3]));
        let run = run_automl_on(&cfg, &t).unwrap();
        assert_eq!(run.leaderboard.rows.len(), 4);
        assert_eq!(run.tuning.len(), 2);
    }

    #[test]
    fn failing_learner_is_isolated() {
        let t = small_table();
        let mut cfg = config(vec![
            LearnerSpec::new(LearnerKind::LogisticRegression),
            LearnerSpec::new(LearnerKind::GaussianNb),
        ]);
        cfg.tune.method = SearchMethod::Grid;
        cfg.tune.spaces.insert("logistic_regression".into(), ParamSpace::new().grid("l2", &[1e-3, 1.0]));
        // a continuous range cannot be enumerated by grid search
        cfg.tune.spaces.insert(
            "gaussian_nb".into(),
            ParamSpace::new().range("var_floor", 1e-9, 1e-3, crate::tune::Scale::Log, false),
        );
        let run = run_automl_on(&cfg, &t).unwrap();
        assert_eq!(run.leaderboard.rows.len(), 2);
        assert!(run.leaderboard.rows.iter().all(|r| r.learner == "logistic_regression"));
        assert_eq!(run.leaderboard.failures.len(), 1);
        assert_eq!(run.leaderboard.failures[0].0, "gaussian_nb");

        cfg.learners.remove(0);
        assert!(matches!(run_automl_on(&cfg, &t), Err(Error::Runtime(_))));
    }

    #[test]
    fn artifact_envelope_rejects_tampering() {
        let t = small_table();
        let run = run_automl_on(&config(vec![LearnerSpec::new(LearnerKind::LogisticRegression)]), &t).unwrap();
        let bytes = artifact_bytes(&run.artifact).unwrap();
        let back = artifact_from_bytes(&bytes).unwrap();
        assert_eq!(back, run.artifact);
        let mut bad = bytes.clone();
        let last = bad.len() - 2;
        bad[last] ^= 1;
        assert!(matches!(artifact_from_bytes(&bad), Err(Error::Artifact(_))));
        let mut old = bytes;
        old[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(artifact_from_bytes(&old), Err(Error::UnsupportedVersion { found: 0, .. })));
    }

    #[test]
    fn predict_ignores_extra_columns_and_names_missing_ones() {
        let t = small_table();
        let run = run_automl_on(&config(vec![LearnerSpec::new(LearnerKind::LogisticRegression)]), &t).unwrap();
        let p = predict_batch(&run.artifact, &t).unwrap();
        let mut cols = t.columns().to_vec();
        cols.insert(0, crate::tabular::Column::numeric("extra", vec![7.0; t.n_rows()]));
        let wider = Table::new(cols, Some("machine_failure")).unwrap();
        assert_eq!(predict_batch(&run.artifact, &wider).unwrap(), p);
        let narrower = t.with_features(t.feature_columns().skip(1).cloned().collect()).unwrap();
        match predict_batch(&run.artifact, &narrower) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "air_temp"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn emit_reports_counts_and_is_repeatable() {
        let t = small_table();
        let cfg = config(vec![
            LearnerSpec::new(LearnerKind::LogisticRegression),
            LearnerSpec::new(LearnerKind::DecisionTree),
        ]);
        let run = run_automl_on(&cfg, &t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_reports(&run.leaderboard, &run.reports, dir.path()).unwrap();
        let roc = files.iter().filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("roc_")).count();
        assert_eq!(roc, 2);
        let before: Vec<Vec<u8>> = files.iter().map(|p| fs::read(p).unwrap()).collect();
        emit_reports(&run.leaderboard, &run.reports, dir.path()).unwrap();
        let after: Vec<Vec<u8>> = files.iter().map(|p| fs::read(p).unwrap()).collect();
        assert_eq!(before, after);
        assert!(emit_reports(&Leaderboard::default(), &[], dir.path()).is_err());
    }

    #[test]
    fn ensemble_row_averages_members() {
        let t = small_table();
        let mut cfg = config(vec![
            LearnerSpec::new(LearnerKind::LogisticRegression),
            LearnerSpec::new(LearnerKind::GaussianNb),
            LearnerSpec::new(LearnerKind::DecisionTree).with("max_depth", 3.0),
        ]);
        cfg.ensemble = true;
        let run = run_automl_on(&cfg, &t).unwrap();
        assert_eq!(run.leaderboard.rows.len(), 4);
        let last = run.leaderboard.rows.last().unwrap();
        assert_eq!(last.learner, "soft_vote");
        assert_eq!(last.specs.len(), 3);
    }
}
