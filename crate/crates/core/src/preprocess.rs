//! Categorical encoding, imputation and standardization.
//!
//! Every stage is split into a `fit` that reads a table and returns an
//! immutable fitted object, and an `apply`/`transform` that maps a table to a
//! new table. Fitted stages key categories by their raw string, so they can
//! be applied to tables whose dictionaries were built independently.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{data, invalid, Error, Result};
use crate::tabular::{Column, ColumnKind, ColumnValues, Table};

/// Running target aggregate for one category.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub sum: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooColumn {
    pub name: String,
    pub stats: BTreeMap<String, CategoryStats>,
}

/// Leave-one-out target encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooEncoder {
    pub columns: Vec<LooColumn>,
    pub global_target_mean: f64,
    pub smoothing: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeMode {
    /// Rows the encoder was fitted on: each row's own label is excluded.
    FitRows,
    /// Unseen rows: plain smoothed category mean.
    NewRows,
}

pub fn fit_loo(table: &Table, smoothing: f64) -> Result<LooEncoder> {
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(invalid("smoothing must be a finite value >= 0"));
    }
    let labels = table
        .labels()
        .ok_or_else(|| invalid("leave-one-out encoding requires a target"))?;
    let labeled: Vec<f64> = labels.iter().flatten().map(|&l| f64::from(l)).collect();
    if labeled.is_empty() {
        return Err(data("leave-one-out encoding needs at least one labeled row"));
    }
    let global_target_mean = labeled.iter().sum::<f64>() / labeled.len() as f64;
    let mut columns = Vec::new();
    for col in table.feature_columns() {
        if col.kind() != ColumnKind::Categorical {
            continue;
        }
        let mut stats: BTreeMap<String, CategoryStats> = BTreeMap::new();
        for (row, label) in labels.iter().enumerate() {
            let (Some(cat), Some(y)) = (col.category(row), label) else {
                continue;
            };
            let e = stats.entry(cat.to_string()).or_insert(CategoryStats {
                sum: 0.0,
                count: 0,
            });
            e.sum += f64::from(*y);
            e.count += 1;
        }
        columns.push(LooColumn {
            name: col.name().to_string(),
            stats,
        });
    }
    if columns.is_empty() {
        log::warn!("no categorical columns; leave-one-out encoder is the identity");
    }
    Ok(LooEncoder {
        columns,
        global_target_mean,
        smoothing,
    })
}

impl LooEncoder {
    pub fn is_identity(&self) -> bool {
        self.columns.is_empty()
    }

    /// Encoded value of one cell.
    pub fn encode_value(
        &self,
        stats: Option<&CategoryStats>,
        own_label: Option<u8>,
        mode: EncodeMode,
    ) -> f64 {
        let Some(st) = stats else {
            return self.global_target_mean;
        };
        let s = self.smoothing;
        let (sum, count) = match (mode, own_label) {
            (EncodeMode::FitRows, Some(y)) => (st.sum - f64::from(y), st.count as f64 - 1.0),
            _ => (st.sum, st.count as f64),
        };
        let denom = count + s;
        if count <= 0.0 || denom <= 0.0 {
            return self.global_target_mean;
        }
        (sum + s * self.global_target_mean) / denom
    }

    pub fn transform(&self, table: &Table, mode: EncodeMode) -> Result<Table> {
        let labels = match mode {
            EncodeMode::FitRows => Some(
                table
                    .labels()
                    .ok_or_else(|| invalid("fit_rows encoding requires the target column"))?,
            ),
            EncodeMode::NewRows => None,
        };
        let by_name: HashMap<&str, &LooColumn> =
            self.columns.iter().map(|c| (c.name.as_str(), c)).collect();
        for c in &self.columns {
            if table.column(&c.name).is_none() {
                return Err(Error::MissingColumn(c.name.clone()));
            }
        }
        let mut features = Vec::new();
        for col in table.feature_columns() {
            let Some(enc) = by_name.get(col.name()) else {
                features.push(col.clone());
                continue;
            };
            if col.kind() != ColumnKind::Categorical {
                return Err(data(format!(
                    "column `{}` was categorical when the encoder was fitted",
                    col.name()
                )));
            }
            let values = (0..table.n_rows())
                .map(|row| match col.category(row) {
                    None => f64::NAN,
                    Some(cat) => {
                        let own = labels.as_ref().and_then(|l| l[row]);
                        self.encode_value(enc.stats.get(cat), own, mode)
                    }
                })
                .collect();
            features.push(Column::numeric(col.name(), values));
        }
        table.with_features(features)
    }
}

pub fn transform_loo(encoder: &LooEncoder, table: &Table, mode: EncodeMode) -> Result<Table> {
    encoder.transform(table, mode)
}

/// Indicator encoder; categories ordered by first appearance in the fit table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    pub columns: Vec<(String, Vec<String>)>,
}

impl OneHotEncoder {
    pub fn fit(table: &Table, max_cardinality: usize) -> Result<Self> {
        let mut columns = Vec::new();
        for col in table.feature_columns() {
            if col.kind() != ColumnKind::Categorical {
                continue;
            }
            let mut cats: Vec<String> = Vec::new();
            for row in 0..table.n_rows() {
                if let Some(c) = col.category(row) {
                    if !cats.iter().any(|k| k == c) {
                        cats.push(c.to_string());
                    }
                }
            }
            if cats.len() > max_cardinality {
                return Err(data(format!(
                    "column `{}` has cardinality {} above the one-hot cap {}",
                    col.name(),
                    cats.len(),
                    max_cardinality
                )));
            }
            columns.push((col.name().to_string(), cats));
        }
        Ok(OneHotEncoder { columns })
    }

    pub fn transform(&self, table: &Table) -> Result<Table> {
        let by_name: HashMap<&str, &Vec<String>> =
            self.columns.iter().map(|(n, c)| (n.as_str(), c)).collect();
        for (n, _) in &self.columns {
            if table.column(n).is_none() {
                return Err(Error::MissingColumn(n.clone()));
            }
        }
        let mut features = Vec::new();
        for col in table.feature_columns() {
            let Some(cats) = by_name.get(col.name()) else {
                features.push(col.clone());
                continue;
            };
            if col.kind() != ColumnKind::Categorical {
                return Err(data(format!(
                    "column `{}` was categorical when the encoder was fitted",
                    col.name()
                )));
            }
            for cat in cats.iter() {
                let values = (0..table.n_rows())
                    .map(|row| match col.category(row) {
                        Some(c) if c == cat => 1.0,
                        _ => 0.0,
                    })
                    .collect();
                features.push(Column::numeric(format!("{}={}", col.name(), cat), values));
            }
        }
        table.with_features(features)
    }
}

/// Replaces each categorical column of cardinality k by k indicator columns.
pub fn one_hot(table: &Table, max_cardinality: usize) -> Result<Table> {
    OneHotEncoder::fit(table, max_cardinality)?.transform(table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImputeValue {
    Mean { value: f64 },
    Mode { value: String },
}

/// Mean / modal-category imputer over feature columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub columns: Vec<(String, ImputeValue)>,
}

pub fn fit_impute(table: &Table) -> Result<Imputer> {
    let mut columns = Vec::new();
    for col in table.feature_columns() {
        if col.missing_count() == col.len() {
            return Err(data(format!(
                "column `{}` is entirely missing; nothing to impute from",
                col.name()
            )));
        }
        let value = match col.values() {
            ColumnValues::Numeric(v) => {
                let present: Vec<f64> = v
                    .iter()
                    .zip(col.missing())
                    .filter(|(_, &m)| !m)
                    .map(|(&x, _)| x)
                    .collect();
                ImputeValue::Mean {
                    value: present.iter().sum::<f64>() / present.len() as f64,
                }
            }
            ColumnValues::Categorical { .. } => {
                // first-seen order breaks ties
                let mut order: Vec<&str> = Vec::new();
                let mut counts: HashMap<&str, usize> = HashMap::new();
                for row in 0..col.len() {
                    if let Some(c) = col.category(row) {
                        let e = counts.entry(c).or_insert(0);
                        if *e == 0 {
                            order.push(c);
                        }
                        *e += 1;
                    }
                }
                let mut best = order[0];
                for &c in &order[1..] {
                    if counts[c] > counts[best] {
                        best = c;
                    }
                }
                ImputeValue::Mode {
                    value: best.to_string(),
                }
            }
        };
        columns.push((col.name().to_string(), value));
    }
    Ok(Imputer { columns })
}

pub fn apply_impute(imputer: &Imputer, table: &Table) -> Result<Table> {
    let by_name: HashMap<&str, &ImputeValue> =
        imputer.columns.iter().map(|(n, v)| (n.as_str(), v)).collect();
    for (n, _) in &imputer.columns {
        if table.column(n).is_none() {
            return Err(Error::MissingColumn(n.clone()));
        }
    }
    let mut features = Vec::new();
    for col in table.feature_columns() {
        let Some(fill) = by_name.get(col.name()) else {
            features.push(col.clone());
            continue;
        };
        if col.missing_count() == 0 {
            features.push(col.clone());
            continue;
        }
        let filled = match (col.values(), fill) {
            (ColumnValues::Numeric(v), ImputeValue::Mean { value }) => Column::numeric(
                col.name(),
                v.iter()
                    .zip(col.missing())
                    .map(|(&x, &m)| if m { *value } else { x })
                    .collect(),
            ),
            (ColumnValues::Categorical { codes, dictionary }, ImputeValue::Mode { value }) => {
                let mut dictionary = dictionary.clone();
                let code = match dictionary.iter().position(|d| d == value) {
                    Some(p) => p as u32,
                    None => {
                        dictionary.push(value.clone());
                        (dictionary.len() - 1) as u32
                    }
                };
                let codes = codes
                    .iter()
                    .zip(col.missing())
                    .map(|(&c, &m)| if m { code } else { c })
                    .collect();
                Column::from_codes(col.name(), codes, dictionary)
            }
            _ => {
                return Err(data(format!(
                    "column `{}` changed kind since the imputer was fitted",
                    col.name()
                )))
            }
        };
        features.push(filled);
    }
    table.with_features(features)
}

pub const STD_FLOOR: f64 = 1e-12;

/// Per-column standardization with the population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<ScaleStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

pub fn fit_scale(table: &Table) -> Result<Scaler> {
    let mut columns = Vec::new();
    for col in table.feature_columns() {
        let Some(v) = col.as_numeric() else { continue };
        let present: Vec<f64> = v
            .iter()
            .zip(col.missing())
            .filter(|(_, &m)| !m)
            .map(|(&x, _)| x)
            .collect();
        if present.is_empty() {
            return Err(data(format!("column `{}` has no values to scale", col.name())));
        }
        let n = present.len() as f64;
        let mean = present.iter().sum::<f64>() / n;
        let std = (present.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        columns.push(ScaleStats {
            name: col.name().to_string(),
            mean,
            std,
        });
    }
    Ok(Scaler { columns })
}

impl ScaleStats {
    pub fn apply(&self, x: f64) -> f64 {
        let div = if self.std > STD_FLOOR { self.std } else { 1.0 };
        (x - self.mean) / div
    }
}

pub fn apply_scale(scaler: &Scaler, table: &Table) -> Result<Table> {
    let by_name: HashMap<&str, &ScaleStats> =
        scaler.columns.iter().map(|s| (s.name.as_str(), s)).collect();
    for s in &scaler.columns {
        if table.column(&s.name).is_none() {
            return Err(Error::MissingColumn(s.name.clone()));
        }
    }
    let mut features = Vec::new();
    for col in table.feature_columns() {
        match (by_name.get(col.name()), col.as_numeric()) {
            (Some(st), Some(v)) => features.push(Column::numeric(
                col.name(),
                v.iter().map(|&x| st.apply(x)).collect(),
            )),
            (Some(_), None) => {
                return Err(data(format!(
                    "column `{}` was numeric when the scaler was fitted",
                    col.name()
                )))
            }
            (None, _) => features.push(col.clone()),
        }
    }
    table.with_features(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat_table(cats: &[&str], y: &[f64]) -> Table {
        let c: Vec<Option<&str>> = cats.iter().map(|s| Some(*s)).collect();
        Table::new(
            vec![Column::categorical("c", &c), Column::numeric("y", y.to_vec())],
            Some("y"),
        )
        .unwrap()
    }

    #[test]
    fn loo_aggregates_and_formulas() {
        let t = cat_table(&["A", "A", "A", "B"], &[1.0, 0.0, 1.0, 0.0]);
        let enc = fit_loo(&t, 0.0).unwrap();
        let a = enc.columns[0].stats["A"];
        assert_eq!((a.sum, a.count), (2.0, 3));
        let fit = enc.transform(&t, EncodeMode::FitRows).unwrap();
        let v = fit.column("c").unwrap().as_numeric().unwrap();
        assert_eq!(v[0], 0.5);
        assert_eq!(v[1], 1.0);
        // singleton category falls back to the global mean
        assert_eq!(v[3], 0.5);
        let new = enc.transform(&t, EncodeMode::NewRows).unwrap();
        let v = new.column("c").unwrap().as_numeric().unwrap();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn loo_unseen_category_gets_global_mean() {
        let t = cat_table(&["A", "A", "B", "B", "B", "B", "B", "B", "B", "B"], &[1., 1., 1., 0., 0., 0., 0., 0., 0., 0.]);
        let enc = fit_loo(&t, 0.0).unwrap();
        assert!((enc.global_target_mean - 0.3).abs() < 1e-15);
        let new = cat_table(&["Z"], &[0.0]);
        let out = enc.transform(&new, EncodeMode::NewRows).unwrap();
        assert!((out.column("c").unwrap().as_numeric().unwrap()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn loo_without_categoricals_is_identity() {
        let t = Table::new(
            vec![Column::numeric("x", vec![1.0, 2.0]), Column::numeric("y", vec![0.0, 1.0])],
            Some("y"),
        )
        .unwrap();
        let enc = fit_loo(&t, 0.0).unwrap();
        assert!(enc.is_identity());
        assert_eq!(enc.transform(&t, EncodeMode::FitRows).unwrap(), t);
    }

    #[test]
    fn loo_fit_rows_requires_target() {
        let t = cat_table(&["A", "A"], &[1.0, 0.0]);
        let enc = fit_loo(&t, 0.0).unwrap();
        let no_target = Table::new(vec![Column::categorical("c", &[Some("A")])], None).unwrap();
        assert!(enc.transform(&no_target, EncodeMode::FitRows).is_err());
        assert!(enc.transform(&no_target, EncodeMode::NewRows).is_ok());
    }

    #[test]
    fn loo_columns_are_independent() {
        let a = [Some("p"), Some("p"), Some("q"), Some("q")];
        let b = [Some("u"), Some("v"), Some("u"), Some("v")];
        let t = Table::new(
            vec![
                Column::categorical("a", &a),
                Column::categorical("b", &b),
                Column::numeric("y", vec![1.0, 1.0, 0.0, 0.0]),
            ],
            Some("y"),
        )
        .unwrap();
        let enc = fit_loo(&t, 0.0).unwrap();
        let only_a = Table::new(
            vec![Column::categorical("a", &a), Column::numeric("y", vec![1.0, 1.0, 0.0, 0.0])],
            Some("y"),
        )
        .unwrap();
        let enc_a = fit_loo(&only_a, 0.0).unwrap();
        assert_eq!(enc.columns[0], enc_a.columns[0]);
    }

    #[test]
    fn one_hot_blocks() {
        let t = Table::new(
            vec![Column::categorical("c", &[Some("A"), Some("B"), Some("A"), None])],
            None,
        )
        .unwrap();
        let out = one_hot(&t, 10).unwrap();
        assert_eq!(out.feature_names(), vec!["c=A", "c=B"]);
        assert_eq!(out.columns()[0].as_numeric().unwrap(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(out.columns()[1].as_numeric().unwrap(), &[0.0, 1.0, 0.0, 0.0]);

        let same = Table::new(vec![Column::categorical("c", &[Some("A"); 3])], None).unwrap();
        let out = one_hot(&same, 10).unwrap();
        assert_eq!(out.columns().len(), 1);
        assert_eq!(out.columns()[0].as_numeric().unwrap(), &[1.0; 3]);
    }

    #[test]
    fn one_hot_cap_names_column() {
        let vals: Vec<Option<String>> = (0..1000).map(|i| Some(format!("v{i}"))).collect();
        let t = Table::new(vec![Column::categorical("wide", &vals)], None).unwrap();
        let err = one_hot(&t, 100).unwrap_err().to_string();
        assert!(err.contains("wide"), "{err}");
    }

    #[test]
    fn impute_mean_and_mode() {
        let t = Table::new(
            vec![
                Column::numeric_opt("n", vec![Some(1.0), None, Some(3.0), Some(2.0)]),
                Column::categorical("c", &[Some("A"), Some("A"), None, Some("B")]),
            ],
            None,
        )
        .unwrap();
        let imp = fit_impute(&t).unwrap();
        let out = apply_impute(&imp, &t).unwrap();
        assert_eq!(out.column("n").unwrap().as_numeric().unwrap()[1], 2.0);
        assert_eq!(out.column("c").unwrap().category(2), Some("A"));
        assert_eq!(out.column("c").unwrap().missing_count(), 0);
    }

    #[test]
    fn impute_mode_ties_go_to_first_seen() {
        let t = Table::new(
            vec![Column::categorical("c", &[Some("B"), Some("A"), None, Some("A"), Some("B")])],
            None,
        )
        .unwrap();
        let imp = fit_impute(&t).unwrap();
        assert_eq!(imp.columns[0].1, ImputeValue::Mode { value: "B".into() });
    }

    #[test]
    fn impute_identity_and_all_missing() {
        let t = Table::new(vec![Column::numeric("n", vec![1.0, 2.0])], None).unwrap();
        let imp = fit_impute(&t).unwrap();
        assert_eq!(apply_impute(&imp, &t).unwrap(), t);
        let empty = Table::new(vec![Column::numeric("n", vec![f64::NAN, f64::NAN])], None).unwrap();
        assert!(fit_impute(&empty).is_err());
    }

    #[test]
    fn scale_examples() {
        let t = Table::new(
            vec![Column::numeric("a", vec![0.0, 10.0]), Column::numeric("k", vec![4.0, 4.0])],
            None,
        )
        .unwrap();
        let s = fit_scale(&t).unwrap();
        let out = apply_scale(&s, &t).unwrap();
        assert_eq!(out.column("a").unwrap().as_numeric().unwrap(), &[-1.0, 1.0]);
        assert_eq!(out.column("k").unwrap().as_numeric().unwrap(), &[0.0, 0.0]);
    }
}
