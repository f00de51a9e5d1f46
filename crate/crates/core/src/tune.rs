//! Hyperparameter search: exhaustive grid, random sampling, and Bayesian
//! optimization with a Gaussian-process surrogate and expected improvement.
//!
//! Searches are generic over [`TrialObjective`]; [`CvObjective`] scores a
//! learner by cross-validated loss on a table.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{invalid, Result};
use crate::evaluate::{cross_validate, CvOptions, MetricSummary};
use crate::learners::{Hyperparams, LearnerKind, LearnerSpec};
use crate::stages::StagePlan;
use crate::tabular::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Dimension {
    Grid {
        values: Vec<f64>,
    },
    Range {
        lo: f64,
        hi: f64,
        #[serde(default)]
        scale: Scale,
        #[serde(default)]
        integer: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDim {
    pub name: String,
    #[serde(flatten)]
    pub dim: Dimension,
}

/// Ordered search space; grid order follows dimension order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSpace {
    pub dims: Vec<ParamDim>,
}

impl ParamSpace {
    pub fn new() -> Self {
        ParamSpace::default()
    }

    pub fn grid(mut self, name: &str, values: &[f64]) -> Self {
        self.dims.push(ParamDim {
            name: name.to_string(),
            dim: Dimension::Grid {
                values: values.to_vec(),
            },
        });
        self
    }

    pub fn range(mut self, name: &str, lo: f64, hi: f64, scale: Scale, integer: bool) -> Self {
        self.dims.push(ParamDim {
            name: name.to_string(),
            dim: Dimension::Range {
                lo,
                hi,
                scale,
                integer,
            },
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(invalid("search space has no dimensions"));
        }
        for d in &self.dims {
            match &d.dim {
                Dimension::Grid { values } => {
                    if values.is_empty() {
                        return Err(invalid(format!("grid for `{}` is empty", d.name)));
                    }
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(invalid(format!("grid for `{}` has a non-finite value", d.name)));
                    }
                }
                Dimension::Range { lo, hi, scale, .. } => {
                    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                        return Err(invalid(format!("range for `{}` needs lo < hi", d.name)));
                    }
                    if *scale == Scale::Log && *lo <= 0.0 {
                        return Err(invalid(format!("log range for `{}` needs lo > 0", d.name)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Replaces each grid by a range over its extent: log scale when every
    /// value is positive and the extent spans at least two decades.
    pub fn as_ranges(&self, kind: Option<LearnerKind>) -> ParamSpace {
        let dims = self
            .dims
            .iter()
            .map(|d| match &d.dim {
                Dimension::Grid { values } if values.len() >= 2 => {
                    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let integer = kind
                        .and_then(|k| k.schema().iter().find(|p| p.name == d.name).map(|p| p.integer))
                        .unwrap_or(false);
                    let scale = if lo > 0.0 && hi / lo >= 100.0 { Scale::Log } else { Scale::Linear };
                    ParamDim {
                        name: d.name.clone(),
                        dim: Dimension::Range { lo, hi, scale, integer },
                    }
                }
                _ => d.clone(),
            })
            .collect();
        ParamSpace { dims }
    }

    /// Cartesian product in lexicographic order (last dimension fastest).
    pub fn grid_points(&self) -> Result<Vec<Hyperparams>> {
        let mut points = vec![Hyperparams::new()];
        for d in &self.dims {
            let Dimension::Grid { values } = &d.dim else {
                return Err(invalid(format!("`{}` has no explicit grid", d.name)));
            };
            if values.is_empty() {
                return Err(invalid(format!("grid for `{}` is empty", d.name)));
            }
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.insert(d.name.clone(), v);
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Hyperparams {
        let u: Vec<f64> = self.dims.iter().map(|_| rng.gen::<f64>()).collect();
        self.decode(&u)
    }

    /// Maps a point of the unit cube to parameter values.
    fn decode(&self, u: &[f64]) -> Hyperparams {
        self.dims
            .iter()
            .zip(u)
            .map(|(d, &ui)| {
                let v = match &d.dim {
                    Dimension::Grid { values } => {
                        let i = ((ui * values.len() as f64) as usize).min(values.len() - 1);
                        values[i]
                    }
                    Dimension::Range { lo, hi, scale, integer } => {
                        let v = match scale {
                            Scale::Linear => lo + ui * (hi - lo),
                            Scale::Log => (lo.ln() + ui * (hi.ln() - lo.ln())).exp(),
                        };
                        let v = v.clamp(*lo, *hi);
                        if *integer {
                            v.round().clamp(lo.ceil(), hi.floor())
                        } else {
                            v
                        }
                    }
                };
                (d.name.clone(), v)
            })
            .collect()
    }

    /// Position of parameter values in the unit cube.
    fn encode(&self, p: &Hyperparams) -> Vec<f64> {
        self.dims
            .iter()
            .map(|d| {
                let v = p[&d.name];
                match &d.dim {
                    Dimension::Grid { values } => {
                        if values.len() == 1 {
                            0.5
                        } else {
                            let i = values.iter().position(|&g| g == v).unwrap_or(0);
                            i as f64 / (values.len() - 1) as f64
                        }
                    }
                    Dimension::Range { lo, hi, scale, .. } => match scale {
                        Scale::Linear => (v - lo) / (hi - lo),
                        Scale::Log => (v.ln() - lo.ln()) / (hi.ln() - lo.ln()),
                    },
                }
            })
            .collect()
    }
}

/// Per-kind default grids.
pub fn default_space(kind: LearnerKind) -> ParamSpace {
    let lr = [1e-3, 1e-2, 1e-1, 3e-1];
    let l2 = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2];
    let s = ParamSpace::new();
    match kind {
        LearnerKind::LogisticRegression => s.grid("l2", &l2),
        LearnerKind::DecisionTree => s
            .grid("max_depth", &[2.0, 4.0, 8.0, 16.0, 32.0])
            .grid("min_samples_leaf", &[1.0, 5.0, 20.0]),
        LearnerKind::RandomForest => s
            .grid("n_estimators", &[50.0, 100.0, 200.0])
            .grid("max_depth", &[4.0, 8.0, 16.0, 32.0]),
        LearnerKind::Bagging => s
            .grid("n_estimators", &[10.0, 25.0, 50.0])
            .grid("max_depth", &[4.0, 8.0, 16.0, 32.0]),
        LearnerKind::Adaboost | LearnerKind::Rusboost => s
            .grid("n_estimators", &[25.0, 50.0, 100.0])
            .grid("learning_rate", &lr)
            .grid("max_depth", &[1.0, 2.0, 3.0]),
        LearnerKind::GradientBoosting => s
            .grid("n_rounds", &[50.0, 100.0, 200.0])
            .grid("learning_rate", &lr)
            .grid("max_depth", &[2.0, 3.0, 5.0]),
        LearnerKind::GaussianNb => s.grid("var_floor", &[1e-12, 1e-9, 1e-6, 1e-3]),
        LearnerKind::Knn => s.grid("k", &[1.0, 3.0, 5.0, 9.0, 15.0]),
        LearnerKind::LinearSvm => s.grid("l2", &l2),
        LearnerKind::Mlp => s
            .grid("hidden", &[8.0, 16.0, 32.0, 64.0])
            .grid("learning_rate", &[1e-2, 1e-1, 3e-1])
            .grid("l2", &[1e-4, 1e-2]),
        LearnerKind::SelfTraining => s.grid("confidence", &[0.8, 0.9, 0.95, 0.99]),
        LearnerKind::KmeansAnomaly => s.grid("n_clusters", &[2.0, 4.0, 8.0, 16.0]),
    }
}

/// [`default_space`] looked up by kind name.
pub fn default_space_named(kind: &str) -> Result<ParamSpace> {
    Ok(default_space(kind.parse()?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `1 - AUROC`
    #[default]
    Auroc,
    /// `1 - accuracy`
    Accuracy,
    /// `1 - precision`
    Precision,
}

impl LossKind {
    pub fn loss(self, m: &MetricSummary) -> f64 {
        1.0 - match self {
            LossKind::Auroc => m.auroc,
            LossKind::Accuracy => m.accuracy,
            LossKind::Precision => m.precision,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricSummary>,
}

pub trait TrialObjective: Sync {
    fn evaluate(&self, params: &Hyperparams) -> Result<TrialOutcome>;
}

/// Adapts a plain loss function.
pub struct FnObjective<F>(pub F);

impl<F> TrialObjective for FnObjective<F>
where
    F: Fn(&Hyperparams) -> f64 + Sync,
{
    fn evaluate(&self, params: &Hyperparams) -> Result<TrialOutcome> {
        Ok(TrialOutcome {
            loss: (self.0)(params),
            metrics: None,
        })
    }
}

/// Cross-validated loss of `base` with trial parameters layered on top.
pub struct CvObjective<'a> {
    pub base: LearnerSpec,
    pub table: &'a Table,
    pub plan: StagePlan,
    pub cv: CvOptions,
    pub loss: LossKind,
}

impl CvObjective<'_> {
    pub fn spec_for(&self, params: &Hyperparams) -> LearnerSpec {
        let mut spec = self.base.clone();
        for (k, v) in params {
            spec.params.insert(k.clone(), *v);
        }
        spec
    }
}

impl TrialObjective for CvObjective<'_> {
    fn evaluate(&self, params: &Hyperparams) -> Result<TrialOutcome> {
        let report = cross_validate(&self.spec_for(params), self.table, &self.plan, &self.cv)?;
        Ok(TrialOutcome {
            loss: self.loss.loss(&report.mean),
            metrics: Some(report.mean),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    #[default]
    Grid,
    Random,
    Bayes,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: Hyperparams,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricSummary>,
    pub seconds: f64,
}

/// Loss change when one parameter of the best point moves to a neighbor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub param: String,
    pub value: f64,
    pub loss: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub method: SearchMethod,
    pub trials: Vec<Trial>,
    pub best_index: usize,
    pub best_params: Hyperparams,
    pub best_loss: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sensitivity: Vec<Sensitivity>,
}

fn run_trial(obj: &dyn TrialObjective, params: Hyperparams) -> Result<Trial> {
    let start = Instant::now();
    let out = obj.evaluate(&params)?;
    Ok(Trial {
        params,
        loss: out.loss,
        metrics: out.metrics,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn finish(method: SearchMethod, trials: Vec<Trial>) -> Result<TuningResult> {
    if trials.is_empty() {
        return Err(invalid("no trials were run"));
    }
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        // strict improvement keeps the earliest trial on ties
        if t.loss < trials[best].loss {
            best = i;
        }
    }
    Ok(TuningResult {
        method,
        best_index: best,
        best_params: trials[best].params.clone(),
        best_loss: trials[best].loss,
        trials,
        sensitivity: Vec::new(),
    })
}

fn run_parallel(obj: &dyn TrialObjective, points: Vec<Hyperparams>) -> Result<Vec<Trial>> {
    points
        .into_par_iter()
        .map(|p| run_trial(obj, p))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

pub fn grid_search(obj: &dyn TrialObjective, space: &ParamSpace) -> Result<TuningResult> {
    space.validate()?;
    let points = space.grid_points()?;
    finish(SearchMethod::Grid, run_parallel(obj, points)?)
}

pub fn random_search(
    obj: &dyn TrialObjective,
    space: &ParamSpace,
    budget: usize,
    seed: u64,
) -> Result<TuningResult> {
    space.validate()?;
    if budget < 1 {
        return Err(invalid("budget must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..budget).map(|_| space.sample(&mut rng)).collect();
    finish(SearchMethod::Random, run_parallel(obj, points)?)
}

const GP_NOISE: f64 = 1e-6;
const EI_CANDIDATES: usize = 256;

/// Zero-mean GP with a squared-exponential kernel on standardized losses.
struct Gp {
    xs: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    length: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

impl Gp {
    fn fit(xs: &[Vec<f64>], ys: &[f64]) -> Option<Gp> {
        let n = xs.len();
        let mut dists = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                dists.push(sq_dist(&xs[i], &xs[j]).sqrt());
            }
        }
        dists.sort_by(f64::total_cmp);
        let median = if dists.is_empty() { 0.0 } else { dists[dists.len() / 2] };
        let length = if median > 1e-12 { median } else { 1.0 };
        let kernel = |a: &[f64], b: &[f64]| (-sq_dist(a, b) / (2.0 * length * length)).exp();
        let mut jitter = GP_NOISE;
        for _ in 0..8 {
            let k = DMatrix::from_fn(n, n, |i, j| kernel(&xs[i], &xs[j]) + if i == j { jitter } else { 0.0 });
            if let Some(chol) = k.cholesky() {
                let alpha = chol.solve(&DVector::from_column_slice(ys));
                return Some(Gp {
                    xs: xs.to_vec(),
                    alpha,
                    chol,
                    length,
                });
            }
            jitter *= 10.0;
        }
        None
    }

    fn predict(&self, x: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(
            self.xs.len(),
            self.xs
                .iter()
                .map(|xi| (-sq_dist(xi, x) / (2.0 * self.length * self.length)).exp()),
        );
        let mean = ks.dot(&self.alpha);
        let v = self.chol.solve(&ks);
        let var = (1.0 - ks.dot(&v)).max(0.0);
        (mean, var.sqrt())
    }
}

/// Expected improvement below `best` for a minimization problem.
fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    let gap = best - mean;
    if sd < 1e-12 {
        return gap.max(0.0);
    }
    let z = gap / sd;
    let n = Normal::standard();
    gap * n.cdf(z) + sd * n.pdf(z)
}

pub fn bayes_search(
    obj: &dyn TrialObjective,
    space: &ParamSpace,
    budget: usize,
    n_init: usize,
    seed: u64,
) -> Result<TuningResult> {
    space.validate()?;
    if !space.dims.iter().any(|d| matches!(d.dim, Dimension::Range { .. })) {
        return Err(invalid(
            "Bayesian search needs at least one range dimension; use grid or random search",
        ));
    }
    if n_init < 1 || budget <= n_init {
        return Err(invalid(format!(
            "Bayesian search needs 1 <= n_init < budget (got n_init {n_init}, budget {budget})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<Hyperparams> = (0..n_init).map(|_| space.sample(&mut rng)).collect();
    let mut trials = run_parallel(obj, init)?;
    while trials.len() < budget {
        let xs: Vec<Vec<f64>> = trials.iter().map(|t| space.encode(&t.params)).collect();
        let raw: Vec<f64> = trials.iter().map(|t| t.loss).collect();
        let m = raw.iter().sum::<f64>() / raw.len() as f64;
        let sd = (raw.iter().map(|v| (v - m).powi(2)).sum::<f64>() / raw.len() as f64).sqrt();
        let sd = if sd > 1e-12 { sd } else { 1.0 };
        let ys: Vec<f64> = raw.iter().map(|v| (v - m) / sd).collect();
        let best = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let gp = Gp::fit(&xs, &ys);
        let mut pick: Option<(f64, Hyperparams)> = None;
        for _ in 0..EI_CANDIDATES {
            let cand = space.sample(&mut rng);
            let ei = match &gp {
                Some(gp) => {
                    let (mu, s) = gp.predict(&space.encode(&cand));
                    expected_improvement(mu, s, best)
                }
                None => 0.0,
            };
            if pick.as_ref().is_none_or(|(e, _)| ei > *e) {
                pick = Some((ei, cand));
            }
        }
        let (_, next) = pick.expect("candidate set is non-empty");
        trials.push(run_trial(obj, next)?);
    }
    finish(SearchMethod::Bayes, trials)
}

/// One-at-a-time perturbation of the best point: grid dimensions move to
/// their neighboring values, ranges by a tenth of their unit-cube extent.
pub fn sensitivity(
    obj: &dyn TrialObjective,
    space: &ParamSpace,
    result: &TuningResult,
) -> Result<Vec<Sensitivity>> {
    let base = &result.best_params;
    let mut probes = Vec::new();
    for d in &space.dims {
        let Some(&v) = base.get(&d.name) else { continue };
        let moves: Vec<f64> = match &d.dim {
            Dimension::Grid { values } => match values.iter().position(|&g| g == v) {
                Some(i) => [i.checked_sub(1), Some(i + 1)]
                    .into_iter()
                    .flatten()
                    .filter_map(|j| values.get(j).copied())
                    .collect(),
                None => Vec::new(),
            },
            Dimension::Range { .. } => {
                let u = space.encode(base);
                let j = space.dims.iter().position(|x| x.name == d.name).expect("present");
                [-0.1, 0.1]
                    .iter()
                    .map(|delta| {
                        let mut w = u.clone();
                        w[j] = (w[j] + delta).clamp(0.0, 1.0);
                        space.decode(&w)[&d.name]
                    })
                    .filter(|&x| x != v)
                    .collect()
            }
        };
        for m in moves {
            let mut p = base.clone();
            p.insert(d.name.clone(), m);
            probes.push((d.name.clone(), m, p));
        }
    }
    probes
        .into_par_iter()
        .map(|(name, value, p)| {
            let loss = obj.evaluate(&p)?.loss;
            Ok(Sensitivity {
                param: name,
                value,
                loss,
                delta: loss - result.best_loss,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_and_order() {
        let space = ParamSpace::new().grid("a", &[1.0, 2.0, 3.0]).grid("b", &[0.0, 1.0, 2.0, 3.0]);
        let obj = FnObjective(|_: &Hyperparams| 0.5);
        let r = grid_search(&obj, &space).unwrap();
        assert_eq!(r.trials.len(), 12);
        assert_eq!(r.trials[1].params["b"], 1.0);
        assert_eq!(r.trials[4].params["a"], 2.0);
        // all tied: earliest wins
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn grid_rejects_ranges_and_empty_grids() {
        let obj = FnObjective(|_: &Hyperparams| 0.0);
        assert!(grid_search(&obj, &ParamSpace::new().grid("a", &[])).is_err());
        assert!(grid_search(&obj, &ParamSpace::new().range("a", 0.0, 1.0, Scale::Linear, false)).is_err());
    }

    #[test]
    fn random_budget_and_bounds() {
        let space = ParamSpace::new().range("l", 1e-4, 1.0, Scale::Log, false);
        let obj = FnObjective(|p: &Hyperparams| p["l"]);
        let r = random_search(&obj, &space, 20, 5).unwrap();
        assert_eq!(r.trials.len(), 20);
        assert!(r.trials.iter().all(|t| (1e-4..=1.0).contains(&t.params["l"])));
        let again = random_search(&obj, &space, 20, 5).unwrap();
        let params = |r: &TuningResult| r.trials.iter().map(|t| t.params.clone()).collect::<Vec<_>>();
        assert_eq!(params(&r), params(&again));
        assert!(random_search(&obj, &space, 0, 5).is_err());
    }

    #[test]
    fn bayes_contracts() {
        let space = ParamSpace::new().range("x", 0.0, 1.0, Scale::Linear, false);
        let obj = FnObjective(|p: &Hyperparams| (p["x"] - 0.3).powi(2));
        let r = bayes_search(&obj, &space, 25, 5, 11).unwrap();
        assert_eq!(r.trials.len(), 25);
        assert!((r.best_params["x"] - 0.3).abs() < 0.05);
        let r = bayes_search(&obj, &space, 6, 5, 11).unwrap();
        assert_eq!(r.trials.len(), 6);
        let flat = FnObjective(|_: &Hyperparams| 1.0);
        assert_eq!(bayes_search(&flat, &space, 10, 3, 0).unwrap().trials.len(), 10);
        assert!(bayes_search(&obj, &space, 5, 5, 0).is_err());
        assert!(bayes_search(&obj, &ParamSpace::new().grid("g", &[1.0]), 5, 2, 0).is_err());
    }

    #[test]
    fn default_spaces_are_valid_for_every_kind() {
        for kind in LearnerKind::ALL {
            let space = default_space(kind);
            space.validate().unwrap();
            for p in space.grid_points().unwrap() {
                let mut spec = LearnerSpec::new(kind);
                spec.params = p;
                spec.validate().unwrap();
            }
            space.as_ranges(Some(kind)).validate().unwrap();
        }
        assert!(default_space(LearnerKind::Knn).dims.iter().any(|d| d.name == "k"));
        assert!(default_space_named("nope").is_err());
    }

    #[test]
    fn sensitivity_probes_neighbors() {
        let space = ParamSpace::new().grid("a", &[1.0, 2.0, 3.0]);
        let obj = FnObjective(|p: &Hyperparams| (p["a"] - 2.0).abs());
        let r = grid_search(&obj, &space).unwrap();
        let s = sensitivity(&obj, &space, &r).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|x| x.delta == 1.0));
    }
}
