//! Column-typed tables, CSV ingestion, profiling and train/test splitting.
//!
//! A [`Table`] owns an ordered list of [`Column`]s. Numeric columns store
//! `f64` values (`NaN` at missing positions), categorical columns store codes
//! into a per-column dictionary. Every column carries an explicit missing
//! mask; nothing is imputed at load time.
//!
//! The optional target column is numeric with values in `{0, 1}` after
//! ingestion. The raw label that sorts first lexicographically maps to `0`
//! and the mapping is kept on the table so reports can print raw labels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{data, invalid, Error, Result};

/// Code stored for a missing categorical entry.
pub const MISSING_CODE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ColumnValues {
    Numeric(Vec<f64>),
    Categorical {
        codes: Vec<u32>,
        dictionary: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    name: String,
    values: ColumnValues,
    missing: Vec<bool>,
}

impl Column {
    /// Numeric column; `NaN` entries are flagged missing.
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| v.is_nan()).collect();
        Column {
            name: name.into(),
            values: ColumnValues::Numeric(values),
            missing,
        }
    }

    /// Numeric column with `None` as missing.
    pub fn numeric_opt(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column::numeric(
            name,
            values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        )
    }

    /// Categorical column; codes are assigned in order of first appearance.
    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, values: &[Option<S>]) -> Self {
        let mut dictionary: Vec<String> = Vec::new();
        let mut lookup: HashMap<String, u32> = HashMap::new();
        let mut codes = Vec::with_capacity(values.len());
        let mut missing = Vec::with_capacity(values.len());
        for v in values {
            match v {
                Some(s) => {
                    let s = s.as_ref();
                    let code = match lookup.get(s) {
                        Some(&c) => c,
                        None => {
                            let c = dictionary.len() as u32;
                            dictionary.push(s.to_string());
                            lookup.insert(s.to_string(), c);
                            c
                        }
                    };
                    codes.push(code);
                    missing.push(false);
                }
                None => {
                    codes.push(MISSING_CODE);
                    missing.push(true);
                }
            }
        }
        Column {
            name: name.into(),
            values: ColumnValues::Categorical { codes, dictionary },
            missing,
        }
    }

    pub(crate) fn from_codes(
        name: impl Into<String>,
        codes: Vec<u32>,
        dictionary: Vec<String>,
    ) -> Self {
        let missing = codes.iter().map(|&c| c == MISSING_CODE).collect();
        Column {
            name: name.into(),
            values: ColumnValues::Categorical { codes, dictionary },
            missing,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        match self.values {
            ColumnValues::Numeric(_) => ColumnKind::Numeric,
            ColumnValues::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn values(&self) -> &ColumnValues {
        &self.values
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.values {
            ColumnValues::Numeric(v) => Some(v),
            _ => None,
        }
    }

    pub fn dictionary(&self) -> Option<&[String]> {
        match &self.values {
            ColumnValues::Categorical { dictionary, .. } => Some(dictionary),
            _ => None,
        }
    }

    pub fn codes(&self) -> Option<&[u32]> {
        match &self.values {
            ColumnValues::Categorical { codes, .. } => Some(codes),
            _ => None,
        }
    }

    /// Raw category string at `row`, `None` if missing or numeric.
    pub fn category(&self, row: usize) -> Option<&str> {
        match &self.values {
            ColumnValues::Categorical { codes, dictionary } if !self.missing[row] => {
                Some(dictionary[codes[row] as usize].as_str())
            }
            _ => None,
        }
    }

    fn take(&self, rows: &[usize]) -> Column {
        let missing = rows.iter().map(|&r| self.missing[r]).collect();
        let values = match &self.values {
            ColumnValues::Numeric(v) => ColumnValues::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnValues::Categorical { codes, dictionary } => ColumnValues::Categorical {
                codes: rows.iter().map(|&r| codes[r]).collect(),
                dictionary: dictionary.clone(),
            },
        };
        Column {
            name: self.name.clone(),
            values,
            missing,
        }
    }

    fn cell_string(&self, row: usize) -> String {
        if self.missing[row] {
            return String::new();
        }
        match &self.values {
            ColumnValues::Numeric(v) => format!("{}", v[row]),
            ColumnValues::Categorical { codes, dictionary } => {
                dictionary[codes[row] as usize].clone()
            }
        }
    }
}

/// Raw labels behind the `{0, 1}` target encoding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping {
    pub negative: String,
    pub positive: String,
}

impl LabelMapping {
    /// Original label text for a 0/1 code.
    pub fn decode(&self, label: u8) -> &str {
        if label == 1 {
            &self.positive
        } else {
            &self.negative
        }
    }
}

impl Default for LabelMapping {
    fn default() -> Self {
        LabelMapping {
            negative: "0".into(),
            positive: "1".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    columns: Vec<Column>,
    n_rows: usize,
    target_index: Option<usize>,
    label_mapping: Option<LabelMapping>,
}

impl Table {
    /// Builds a table, checking lengths, unique names and a binary target.
    pub fn new(columns: Vec<Column>, target: Option<&str>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if c.len() != n_rows {
                return Err(data(format!(
                    "column `{}` has {} rows, expected {}",
                    c.name,
                    c.len(),
                    n_rows
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(data(format!("duplicate column name `{}`", c.name)));
            }
        }
        let target_index = match target {
            Some(name) => {
                let idx = columns
                    .iter()
                    .position(|c| c.name == name)
                    .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
                let col = &columns[idx];
                let ok = match col.as_numeric() {
                    Some(v) => v
                        .iter()
                        .zip(&col.missing)
                        .all(|(&x, &m)| m || x == 0.0 || x == 1.0),
                    None => false,
                };
                if !ok {
                    return Err(data(format!("target `{name}` must be numeric 0/1")));
                }
                Some(idx)
            }
            None => None,
        };
        Ok(Table {
            columns,
            n_rows,
            target_index,
            label_mapping: target_index.map(|_| LabelMapping::default()),
        })
    }

    /// Numeric feature table built from a dense matrix and optional labels.
    pub fn from_matrix(
        names: &[String],
        x: &Array2<f64>,
        target: Option<(&str, &[Option<u8>])>,
    ) -> Result<Self> {
        if names.len() != x.ncols() {
            return Err(invalid("feature names do not match matrix width"));
        }
        let mut columns: Vec<Column> = names
            .iter()
            .enumerate()
            .map(|(j, n)| Column::numeric(n.clone(), x.column(j).to_vec()))
            .collect();
        let target_name = match target {
            Some((name, labels)) => {
                columns.push(Column::numeric(
                    name,
                    labels
                        .iter()
                        .map(|l| l.map_or(f64::NAN, f64::from))
                        .collect(),
                ));
                Some(name)
            }
            None => None,
        };
        Table::new(columns, target_name)
    }

    pub fn with_label_mapping(mut self, mapping: LabelMapping) -> Self {
        if self.target_index.is_some() {
            self.label_mapping = Some(mapping);
        }
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn target_index(&self) -> Option<usize> {
        self.target_index
    }

    pub fn target(&self) -> Option<&Column> {
        self.target_index.map(|i| &self.columns[i])
    }

    pub fn target_name(&self) -> Option<&str> {
        self.target().map(Column::name)
    }

    pub fn label_mapping(&self) -> Option<&LabelMapping> {
        self.label_mapping.as_ref()
    }

    /// Per-row labels; `None` for unlabeled rows.
    pub fn labels(&self) -> Option<Vec<Option<u8>>> {
        let t = self.target()?;
        let v = t.as_numeric()?;
        Some(
            v.iter()
                .zip(&t.missing)
                .map(|(&x, &m)| if m { None } else { Some(x as u8) })
                .collect(),
        )
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns
            .iter()
            .enumerate()
            .filter(move |(i, _)| Some(*i) != self.target_index)
            .map(|(_, c)| c)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_columns().map(|c| c.name.clone()).collect()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - usize::from(self.target_index.is_some())
    }

    /// Column kinds keyed by name; feeds back into [`load_csv`] as overrides.
    pub fn schema(&self) -> BTreeMap<String, ColumnKind> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != self.target_index)
            .map(|(_, c)| (c.name.clone(), c.kind()))
            .collect()
    }

    /// New table with the given rows, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> Table {
        Table {
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            n_rows: rows.len(),
            target_index: self.target_index,
            label_mapping: self.label_mapping.clone(),
        }
    }

    /// Replaces the feature columns, keeping the target (appended last).
    pub fn with_features(&self, features: Vec<Column>) -> Result<Table> {
        let mut columns = features;
        let target = self.target().cloned();
        let name = target.as_ref().map(|t| t.name.clone());
        if let Some(t) = target {
            columns.push(t);
        }
        let mut out = Table::new(columns, name.as_deref())?;
        out.label_mapping = self.label_mapping.clone();
        Ok(out)
    }

    /// Dense feature matrix; every feature must be numeric with no missing entries.
    pub fn feature_matrix(&self) -> Result<Array2<f64>> {
        let feats: Vec<&Column> = self.feature_columns().collect();
        let mut x = Array2::zeros((self.n_rows, feats.len()));
        for (j, c) in feats.iter().enumerate() {
            let v = c.as_numeric().ok_or_else(|| {
                data(format!("feature `{}` is categorical; encode it first", c.name))
            })?;
            if c.missing_count() > 0 {
                return Err(data(format!(
                    "feature `{}` has missing values; impute first",
                    c.name
                )));
            }
            for (i, &val) in v.iter().enumerate() {
                if !val.is_finite() {
                    return Err(data(format!("feature `{}` has a non-finite value", c.name)));
                }
                x[[i, j]] = val;
            }
        }
        Ok(x)
    }
}

/// Reads a CSV file. `schema` overrides inferred kinds by column name.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &BTreeMap<String, ColumnKind>,
    target: Option<&str>,
) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, target)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: Read>(
    reader: R,
    schema: &BTreeMap<String, ColumnKind>,
    target: Option<&str>,
) -> Result<Table> {
    read_impl(reader, schema, target, None)
}

/// Like [`read_csv`], but the target is decoded with a known label mapping,
/// so files holding a single class (or none) keep the training encoding.
pub fn read_csv_mapped<R: Read>(
    reader: R,
    schema: &BTreeMap<String, ColumnKind>,
    target: &str,
    mapping: &LabelMapping,
) -> Result<Table> {
    read_impl(reader, schema, Some(target), Some(mapping))
}

pub fn load_csv_mapped(
    path: impl AsRef<Path>,
    schema: &BTreeMap<String, ColumnKind>,
    target: &str,
    mapping: &LabelMapping,
) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_mapped(file, schema, target, mapping)
}

/// Names in the header row of a CSV file.
pub fn csv_headers(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

fn read_impl<R: Read>(
    reader: R,
    schema: &BTreeMap<String, ColumnKind>,
    target: Option<&str>,
    known: Option<&LabelMapping>,
) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(data("missing header row"));
    }
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in rdr.records() {
        let record = record?;
        for (j, field) in record.iter().enumerate() {
            cells[j].push(field.to_string());
        }
    }
    if let Some(t) = target {
        if !headers.iter().any(|h| h == t) {
            return Err(Error::MissingColumn(t.to_string()));
        }
    }
    for name in schema.keys() {
        if !headers.contains(name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }

    let mut columns = Vec::with_capacity(headers.len());
    let mut mapping = None;
    for (name, raw) in headers.iter().zip(cells) {
        if Some(name.as_str()) == target {
            let (col, m) = match known {
                Some(k) => (parse_target_known(name, &raw, k)?, Some(k.clone())),
                None => parse_target(name, &raw)?,
            };
            mapping = m;
            columns.push(col);
            continue;
        }
        let kind = schema.get(name).copied().unwrap_or_else(|| infer_kind(&raw));
        columns.push(parse_column(name, &raw, kind)?);
    }
    let mut table = Table::new(columns, target)?;
    if let Some(m) = mapping {
        table.label_mapping = Some(m);
    }
    Ok(table)
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn infer_kind(raw: &[String]) -> ColumnKind {
    if raw
        .iter()
        .filter(|s| !s.is_empty())
        .all(|s| parse_number(s).is_some())
    {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

fn parse_column(name: &str, raw: &[String], kind: ColumnKind) -> Result<Column> {
    match kind {
        ColumnKind::Numeric => {
            let mut values = Vec::with_capacity(raw.len());
            for (i, s) in raw.iter().enumerate() {
                if s.is_empty() {
                    values.push(f64::NAN);
                } else {
                    values.push(parse_number(s).ok_or_else(|| {
                        data(format!(
                            "column `{name}` row {i}: `{s}` is not a finite number"
                        ))
                    })?);
                }
            }
            Ok(Column::numeric(name, values))
        }
        ColumnKind::Categorical => {
            let opt: Vec<Option<&str>> = raw
                .iter()
                .map(|s| if s.is_empty() { None } else { Some(s.as_str()) })
                .collect();
            Ok(Column::categorical(name, &opt))
        }
    }
}

fn parse_target_known(name: &str, raw: &[String], mapping: &LabelMapping) -> Result<Column> {
    let mut values = Vec::with_capacity(raw.len());
    for (i, s) in raw.iter().enumerate() {
        values.push(if s.is_empty() {
            f64::NAN
        } else if *s == mapping.negative {
            0.0
        } else if *s == mapping.positive {
            1.0
        } else {
            return Err(data(format!(
                "target `{name}` row {i}: label `{s}` is neither `{}` nor `{}`",
                mapping.negative, mapping.positive
            )));
        });
    }
    Ok(Column::numeric(name, values))
}

fn parse_target(name: &str, raw: &[String]) -> Result<(Column, Option<LabelMapping>)> {
    let mut distinct: Vec<&str> = raw
        .iter()
        .filter(|s| !s.is_empty())
        .map(String::as_str)
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    distinct.sort_unstable();
    if distinct.is_empty() {
        return Ok((Column::numeric(name, vec![f64::NAN; raw.len()]), None));
    }
    if distinct.len() != 2 {
        return Err(data(format!(
            "target `{name}` must have exactly 2 distinct values, found {}",
            distinct.len()
        )));
    }
    let mapping = LabelMapping {
        negative: distinct[0].to_string(),
        positive: distinct[1].to_string(),
    };
    let values = raw
        .iter()
        .map(|s| {
            if s.is_empty() {
                f64::NAN
            } else if *s == mapping.negative {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    Ok((Column::numeric(name, values), Some(mapping)))
}

/// Writes the table as CSV; the target is written with its raw labels.
pub fn write_csv<W: Write>(table: &Table, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(table.columns.iter().map(|c| c.name.as_str()))?;
    let mapping = table.label_mapping.clone().unwrap_or_default();
    for row in 0..table.n_rows {
        let rec: Vec<String> = table
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if Some(j) == table.target_index && !c.missing[row] {
                    let v = c.as_numeric().map_or(0.0, |v| v[row]);
                    if v == 1.0 {
                        mapping.positive.clone()
                    } else {
                        mapping.negative.clone()
                    }
                } else {
                    c.cell_string(row)
                }
            })
            .collect();
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(table, std::io::BufWriter::new(file))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnProfile {
    Numeric {
        name: String,
        missing_count: usize,
        min: Option<f64>,
        max: Option<f64>,
        mean: Option<f64>,
        std: Option<f64>,
    },
    Categorical {
        name: String,
        missing_count: usize,
        cardinality: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub n_rows: usize,
    pub columns: Vec<ColumnProfile>,
    /// `(n_negative, n_positive)` over labeled rows.
    pub class_counts: Option<(usize, usize)>,
    /// Majority count over minority count; absent when a class is empty.
    pub imbalance_ratio: Option<f64>,
    pub label_mapping: Option<LabelMapping>,
}

/// Per-column statistics plus class balance. Std is the population std.
pub fn profile(table: &Table) -> Result<ProfileReport> {
    if table.n_rows == 0 {
        return Err(data("cannot profile an empty table"));
    }
    let columns = table
        .columns
        .iter()
        .map(|c| match &c.values {
            ColumnValues::Numeric(v) => {
                let present: Vec<f64> = v
                    .iter()
                    .zip(&c.missing)
                    .filter(|(_, &m)| !m)
                    .map(|(&x, _)| x)
                    .collect();
                let (min, max, mean, std) = if present.is_empty() {
                    (None, None, None, None)
                } else {
                    let n = present.len() as f64;
                    let mean = present.iter().sum::<f64>() / n;
                    let var = present.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                    (
                        present.iter().copied().reduce(f64::min),
                        present.iter().copied().reduce(f64::max),
                        Some(mean),
                        Some(var.sqrt()),
                    )
                };
                ColumnProfile::Numeric {
                    name: c.name.clone(),
                    missing_count: c.missing_count(),
                    min,
                    max,
                    mean,
                    std,
                }
            }
            ColumnValues::Categorical { codes, .. } => {
                let distinct: HashSet<u32> = codes
                    .iter()
                    .zip(&c.missing)
                    .filter(|(_, &m)| !m)
                    .map(|(&k, _)| k)
                    .collect();
                ColumnProfile::Categorical {
                    name: c.name.clone(),
                    missing_count: c.missing_count(),
                    cardinality: distinct.len(),
                }
            }
        })
        .collect();
    let class_counts = table.labels().map(|labels| {
        let pos = labels.iter().filter(|l| **l == Some(1)).count();
        let neg = labels.iter().filter(|l| **l == Some(0)).count();
        (neg, pos)
    });
    let imbalance_ratio = class_counts.and_then(|(neg, pos)| {
        let (maj, min) = (neg.max(pos), neg.min(pos));
        (min > 0).then(|| maj as f64 / min as f64)
    });
    Ok(ProfileReport {
        n_rows: table.n_rows,
        columns,
        class_counts,
        imbalance_ratio,
        label_mapping: table.label_mapping.clone(),
    })
}

/// Splits rows into disjoint train and test tables.
///
/// Stratified splits round the train share of every class (unlabeled rows
/// form their own stratum) and keep at least one row of each class on both
/// sides. Rows keep their original relative order.
pub fn split_train_test(
    table: &Table,
    train_fraction: f64,
    stratified: bool,
    seed: u64,
) -> Result<(Table, Table)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    if stratified {
        let labels = table
            .labels()
            .ok_or_else(|| invalid("stratified split requires a target"))?;
        for class in [Some(0u8), Some(1u8), None] {
            let mut idx: Vec<usize> = (0..table.n_rows).filter(|&i| labels[i] == class).collect();
            if idx.is_empty() {
                continue;
            }
            if class.is_some() && idx.len() < 2 {
                return Err(data(format!(
                    "class {} has a single row; a stratified split is infeasible",
                    class.unwrap_or(0)
                )));
            }
            idx.shuffle(&mut rng);
            let mut n_train = (train_fraction * idx.len() as f64).round() as usize;
            if class.is_some() {
                n_train = n_train.clamp(1, idx.len() - 1);
            }
            train.extend_from_slice(&idx[..n_train]);
            test.extend_from_slice(&idx[n_train..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..table.n_rows).collect();
        idx.shuffle(&mut rng);
        let n_train = (train_fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((table.take_rows(&train), table.take_rows(&test)))
}
