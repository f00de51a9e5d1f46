//! Synthetic binary-classification tables in three shapes: card fraud,
//! machine failure and product backorder.
//!
//! Labels are assigned by exact count and then shuffled. Numeric features are
//! Gaussian with a class-dependent mean shift on the first half of them;
//! categorical features are uniform for negatives and tilted toward higher
//! category codes for positives. The generating parameters determine the
//! Bayes-optimal AUROC, see [`bayes_auroc`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};
use crate::tabular::{Column, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Fraud,
    Failure,
    Backorder,
}

impl std::str::FromStr for Shape {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fraud" => Ok(Shape::Fraud),
            "failure" => Ok(Shape::Failure),
            "backorder" => Ok(Shape::Backorder),
            _ => Err(invalid(format!("unknown shape `{s}` (fraud|failure|backorder)"))),
        }
    }
}

impl Shape {
    pub fn target_name(self) -> &'static str {
        match self {
            Shape::Fraud => "is_fraud",
            Shape::Failure => "machine_failure",
            Shape::Backorder => "went_on_backorder",
        }
    }

    fn numeric_names(self) -> &'static [&'static str] {
        match self {
            Shape::Fraud => &["amount", "hour", "distance_home", "distance_last", "ratio_median", "velocity_1h", "velocity_24h", "account_age", "merchant_risk", "device_score"],
            Shape::Failure => &["air_temp", "process_temp", "rot_speed", "torque", "tool_wear", "vibration", "power", "humidity", "pressure", "current", "voltage"],
            Shape::Backorder => &["national_inv", "lead_time", "in_transit", "forecast_3m", "forecast_6m", "forecast_9m", "sales_1m", "sales_3m", "sales_6m", "sales_9m", "min_bank", "pieces_past_due"],
        }
    }

    fn categorical_names(self) -> &'static [&'static str] {
        match self {
            Shape::Fraud => &["channel", "merchant_category", "card_type", "country"],
            Shape::Failure => &["type", "line", "shift"],
            Shape::Backorder => &["supplier_tier", "ppap_risk", "stop_auto_buy"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub shape: Shape,
    pub n_rows: usize,
    pub n_numeric: usize,
    pub n_categorical: usize,
    /// One entry per categorical column.
    pub cardinalities: Vec<usize>,
    pub positive_rate: f64,
    pub signal_strength: f64,
    pub noise: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Shape defaults: fraud 180,000 rows; failure 10,000 rows with 14
    /// features; backorder 20,000 rows.
    pub fn preset(shape: Shape) -> Self {
        let (n_rows, n_numeric, cardinalities, positive_rate, signal_strength) = match shape {
            Shape::Fraud => (180_000, 10, vec![3, 12, 4, 20], 0.02, 1.5),
            Shape::Failure => (10_000, 11, vec![3, 4, 3], 0.035, 2.0),
            Shape::Backorder => (20_000, 12, vec![4, 3, 2], 0.05, 1.0),
        };
        GeneratorSpec {
            shape,
            n_rows,
            n_numeric,
            n_categorical: cardinalities.len(),
            cardinalities,
            positive_rate,
            signal_strength,
            noise: 0.5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows < 2 {
            return Err(invalid("n_rows must be >= 2"));
        }
        if self.n_numeric + self.n_categorical < 1 {
            return Err(invalid("at least one feature is required"));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate <= 0.5) {
            return Err(invalid("positive_rate must be in (0, 0.5]"));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return Err(invalid("signal_strength must be finite and >= 0"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(invalid("noise must be finite and >= 0"));
        }
        if self.cardinalities.len() != self.n_categorical {
            return Err(invalid(format!(
                "{} cardinalities given for {} categorical columns",
                self.cardinalities.len(),
                self.n_categorical
            )));
        }
        if let Some(c) = self.cardinalities.iter().find(|&&c| c < 2) {
            return Err(invalid(format!("cardinality {c} is below 2")));
        }
        if self.n_positive() < 1 {
            return Err(invalid("positive_rate x n_rows rounds to zero positives"));
        }
        Ok(())
    }

    pub fn n_positive(&self) -> usize {
        (self.positive_rate * self.n_rows as f64).round() as usize
    }

    pub fn n_informative(&self) -> usize {
        self.n_numeric.div_ceil(2)
    }

    /// Within-class standard deviation of numeric features.
    pub fn sigma(&self) -> f64 {
        (1.0 + self.noise * self.noise).sqrt()
    }

    /// Per-informative-feature mean shift for positives.
    pub fn shift(&self) -> f64 {
        if self.n_informative() == 0 {
            0.0
        } else {
            self.signal_strength / (self.n_informative() as f64).sqrt()
        }
    }

    /// Categorical tilt: positives draw code `c` with probability
    /// proportional to `exp(tilt * c)`.
    pub fn tilt(&self) -> f64 {
        0.25 * self.signal_strength
    }

    fn positive_pmf(&self, card: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..card).map(|c| (self.tilt() * c as f64).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }
}

fn feature_name(names: &[&str], prefix: &str, j: usize) -> String {
    names.get(j).map_or_else(|| format!("{prefix}_{j}"), |s| s.to_string())
}

fn draw_category(rng: &mut ChaCha8Rng, pmf: &[f64]) -> usize {
    let mut t = rng.gen::<f64>();
    for (c, p) in pmf.iter().enumerate() {
        if t < *p {
            return c;
        }
        t -= p;
    }
    pmf.len() - 1
}

pub fn generate(spec: &GeneratorSpec) -> Result<Table> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_rows;
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < spec.n_positive())).collect();
    labels.shuffle(&mut rng);
    let normal = Normal::standard();
    let sigma = spec.sigma();
    let shift = spec.shift();
    let mut columns = Vec::new();
    for j in 0..spec.n_numeric {
        let mu = if j < spec.n_informative() { shift } else { 0.0 };
        let values = labels
            .iter()
            .map(|&y| {
                // open interval keeps the inverse CDF finite
                let u = rng.gen_range(f64::EPSILON..1.0);
                let z = normal.inverse_cdf(u);
                f64::from(y) * mu + sigma * z
            })
            .collect();
        columns.push(Column::numeric(feature_name(spec.shape.numeric_names(), "num", j), values));
    }
    for (j, &card) in spec.cardinalities.iter().enumerate() {
        let pos = spec.positive_pmf(card);
        let neg = vec![1.0 / card as f64; card];
        let values: Vec<Option<String>> = labels
            .iter()
            .map(|&y| {
                let c = draw_category(&mut rng, if y == 1 { &pos } else { &neg });
                Some(format!("{}{}", (b'A' + (j as u8 % 26)) as char, c))
            })
            .collect();
        columns.push(Column::categorical(
            feature_name(spec.shape.categorical_names(), "cat", j),
            &values,
        ));
    }
    let target = spec.shape.target_name();
    columns.push(Column::numeric(target, labels.iter().map(|&y| f64::from(y)).collect()));
    Table::new(columns, Some(target))
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// AUROC of the Bayes-optimal score (the log-likelihood ratio) under the
/// generating distribution.
pub fn bayes_auroc(spec: &GeneratorSpec) -> f64 {
    let a = if spec.n_numeric == 0 {
        0.0
    } else {
        spec.signal_strength.powi(2) / spec.sigma().powi(2)
    };
    // distribution of (sum of positive codes) - (sum of negative codes)
    let mut pos = vec![1.0];
    let mut neg = vec![1.0];
    for &card in &spec.cardinalities {
        pos = convolve(&pos, &spec.positive_pmf(card));
        neg = convolve(&neg, &vec![1.0 / card as f64; card]);
    }
    let offset = neg.len() as i64 - 1;
    let neg_rev: Vec<f64> = neg.iter().rev().copied().collect();
    let diff = convolve(&pos, &neg_rev);
    let h = spec.tilt();
    let normal = Normal::standard();
    diff.iter()
        .enumerate()
        .map(|(i, &p)| {
            let m = (i as i64 - offset) as f64;
            let cat = h * m;
            let win = if a > 0.0 {
                normal.cdf((a + cat) / (2.0 * a).sqrt())
            } else if cat > 0.0 {
                1.0
            } else if cat == 0.0 {
                0.5
            } else {
                0.0
            };
            p * win
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_preset_shape() {
        let mut spec = GeneratorSpec::preset(Shape::Failure);
        spec.n_rows = 10_000;
        let t = generate(&spec).unwrap();
        assert_eq!(t.n_rows(), 10_000);
        assert_eq!(t.n_features(), 14);
        assert!(t.target().is_some());
    }

    #[test]
    fn exact_positive_count() {
        let spec = GeneratorSpec {
            positive_rate: 0.01,
            ..GeneratorSpec::preset(Shape::Failure)
        };
        let t = generate(&spec).unwrap();
        let pos = t.labels().unwrap().iter().filter(|l| **l == Some(1)).count();
        assert_eq!(pos, 100);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let mut spec = GeneratorSpec::preset(Shape::Backorder);
        spec.n_rows = 500;
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        spec.seed = 1;
        let other = generate(&spec).unwrap();
        spec.seed = 0;
        assert_ne!(generate(&spec).unwrap(), other);
    }

    #[test]
    fn bayes_auroc_limits() {
        let mut spec = GeneratorSpec::preset(Shape::Failure);
        spec.signal_strength = 0.0;
        assert!((bayes_auroc(&spec) - 0.5).abs() < 1e-12);
        spec.signal_strength = 8.0;
        assert!(bayes_auroc(&spec) > 0.999);
        // Gaussian part alone: Phi(sqrt(a/2))
        spec.cardinalities.clear();
        spec.n_categorical = 0;
        spec.signal_strength = 1.0;
        let a: f64 = 1.0 / spec.sigma().powi(2);
        let expect = Normal::standard().cdf((a / 2.0).sqrt());
        assert!((bayes_auroc(&spec) - expect).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = GeneratorSpec::preset(Shape::Fraud);
        spec.positive_rate = 0.6;
        assert!(generate(&spec).is_err());
        let mut spec = GeneratorSpec::preset(Shape::Failure);
        spec.cardinalities = vec![1, 2, 3];
        assert!(generate(&spec).is_err());
        spec.cardinalities = vec![2];
        assert!(generate(&spec).is_err());
    }
}
