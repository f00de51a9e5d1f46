//! Class-imbalance correction: SMOTE, random oversampling and random
//! undersampling.
//!
//! All methods work on labeled rows only; unlabeled rows pass through
//! untouched. Original rows keep their order and new rows are appended.
//! The minority class is the labeled class with fewer rows (class 1 on ties).

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{data, invalid, Result};
use crate::tabular::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    Smote,
    RandomOver,
    RandomUnder,
    #[default]
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleSpec {
    pub method: ResampleMethod,
    pub k_neighbors: usize,
    /// Desired minority/majority ratio in (0, 1].
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for ResampleSpec {
    fn default() -> Self {
        ResampleSpec {
            method: ResampleMethod::None,
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl ResampleSpec {
    pub fn smote(seed: u64) -> Self {
        ResampleSpec {
            method: ResampleMethod::Smote,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 {
            return Err(invalid("k_neighbors must be >= 1"));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(invalid(format!(
                "target_ratio must be in (0, 1], got {}",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

/// Provenance of one SMOTE row: `x = x[seed] + gap * (x[neighbor] - x[seed])`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticRow {
    pub seed: usize,
    pub neighbor: usize,
    pub gap: f64,
}

struct ClassSplit {
    minority_label: u8,
    minority: Vec<usize>,
    majority: Vec<usize>,
}

fn split_classes(labels: &[Option<u8>]) -> ClassSplit {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Some(1)).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Some(0)).collect();
    if pos.len() <= neg.len() {
        ClassSplit {
            minority_label: 1,
            minority: pos,
            majority: neg,
        }
    } else {
        ClassSplit {
            minority_label: 0,
            minority: neg,
            majority: pos,
        }
    }
}

fn oversample_count(split: &ClassSplit, ratio: f64) -> Result<usize> {
    let wanted = (ratio * split.majority.len() as f64 - 1e-9).ceil().max(0.0) as usize;
    if wanted < split.minority.len() {
        return Err(invalid(format!(
            "target_ratio {ratio} is below the observed ratio {}/{}; oversampling cannot lower it",
            split.minority.len(),
            split.majority.len()
        )));
    }
    Ok(wanted - split.minority.len())
}

fn squared_distance(x: &Array2<f64>, a: usize, b: usize) -> f64 {
    x.row(a)
        .iter()
        .zip(x.row(b).iter())
        .map(|(p, q)| (p - q).powi(2))
        .sum()
}

/// The `k` nearest rows of `of` among `pool` (excluding itself), ties by row index.
pub fn nearest_in(x: &Array2<f64>, pool: &[usize], of: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = pool
        .iter()
        .filter(|&&j| j != of)
        .map(|&j| (squared_distance(x, of, j), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// SMOTE on a dense matrix, returning the augmented data and row provenance.
pub fn smote_matrix(
    x: &Array2<f64>,
    labels: &[Option<u8>],
    spec: &ResampleSpec,
) -> Result<(Array2<f64>, Vec<Option<u8>>, Vec<SyntheticRow>)> {
    spec.validate()?;
    let split = split_classes(labels);
    let m = split.minority.len();
    if m < 2 {
        return Err(data(format!(
            "SMOTE needs at least 2 minority rows, found {m}"
        )));
    }
    let n_new = oversample_count(&split, spec.target_ratio)?;
    let k = spec.k_neighbors.min(m - 1);
    let neighbors: Vec<Vec<usize>> = split
        .minority
        .iter()
        .map(|&i| nearest_in(x, &split.minority, i, k))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = x.ncols();
    let mut out = Array2::zeros((x.nrows() + n_new, d));
    out.slice_mut(ndarray::s![..x.nrows(), ..]).assign(x);
    let mut provenance = Vec::with_capacity(n_new);
    for s in 0..n_new {
        let pick = rng.gen_range(0..m);
        let seed_row = split.minority[pick];
        let nn = neighbors[pick][rng.gen_range(0..k)];
        let gap: f64 = rng.gen();
        let row = x.nrows() + s;
        for j in 0..d {
            let a = x[[seed_row, j]];
            out[[row, j]] = a + gap * (x[[nn, j]] - a);
        }
        provenance.push(SyntheticRow {
            seed: seed_row,
            neighbor: nn,
            gap,
        });
    }
    let mut y = labels.to_vec();
    y.extend(std::iter::repeat_n(Some(split.minority_label), n_new));
    Ok((out, y, provenance))
}

pub fn random_over_matrix(
    x: &Array2<f64>,
    labels: &[Option<u8>],
    spec: &ResampleSpec,
) -> Result<(Array2<f64>, Vec<Option<u8>>)> {
    spec.validate()?;
    let split = split_classes(labels);
    if split.minority.is_empty() {
        return Err(data("random oversampling needs minority rows"));
    }
    let n_new = oversample_count(&split, spec.target_ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows: Vec<usize> = (0..x.nrows()).collect();
    rows.extend((0..n_new).map(|_| split.minority[rng.gen_range(0..split.minority.len())]));
    let mut y = labels.to_vec();
    y.extend(std::iter::repeat_n(Some(split.minority_label), n_new));
    Ok((x.select(Axis(0), &rows), y))
}

/// Row indices kept by random undersampling, in ascending order.
pub fn random_under_rows(labels: &[Option<u8>], spec: &ResampleSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    let split = split_classes(labels);
    if split.minority.is_empty() {
        return Err(data("random undersampling needs minority rows"));
    }
    let observed = split.minority.len() as f64 / split.majority.len() as f64;
    if spec.target_ratio < observed - 1e-12 {
        return Err(invalid(format!(
            "target_ratio {} is below the observed ratio {observed}; undersampling cannot lower it",
            spec.target_ratio
        )));
    }
    let keep = ((split.minority.len() as f64 / spec.target_ratio).round() as usize)
        .clamp(split.minority.len().min(split.majority.len()), split.majority.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut majority = split.majority.clone();
    majority.shuffle(&mut rng);
    majority.truncate(keep);
    let mut dropped = vec![true; labels.len()];
    for &i in majority.iter().chain(&split.minority) {
        dropped[i] = false;
    }
    for (i, l) in labels.iter().enumerate() {
        if l.is_none() {
            dropped[i] = false;
        }
    }
    Ok((0..labels.len()).filter(|&i| !dropped[i]).collect())
}

/// Dispatches on `spec.method` over a dense matrix.
pub fn resample_matrix(
    x: &Array2<f64>,
    labels: &[Option<u8>],
    spec: &ResampleSpec,
) -> Result<(Array2<f64>, Vec<Option<u8>>)> {
    match spec.method {
        ResampleMethod::None => Ok((x.clone(), labels.to_vec())),
        ResampleMethod::Smote => smote_matrix(x, labels, spec).map(|(x, y, _)| (x, y)),
        ResampleMethod::RandomOver => random_over_matrix(x, labels, spec),
        ResampleMethod::RandomUnder => {
            let rows = random_under_rows(labels, spec)?;
            Ok((
                x.select(Axis(0), &rows),
                rows.iter().map(|&i| labels[i]).collect(),
            ))
        }
    }
}

fn table_parts(table: &Table) -> Result<(Array2<f64>, Vec<Option<u8>>)> {
    let labels = table
        .labels()
        .ok_or_else(|| invalid("resampling requires a target"))?;
    let x = table.feature_matrix().map_err(|e| {
        data(format!("resampling needs numeric, complete features ({e})"))
    })?;
    Ok((x, labels))
}

fn rebuild(table: &Table, x: &Array2<f64>, y: &[Option<u8>]) -> Result<Table> {
    let target = table.target_name().unwrap_or("target").to_string();
    let out = Table::from_matrix(&table.feature_names(), x, Some((&target, y)))?;
    Ok(match table.label_mapping() {
        Some(m) => out.with_label_mapping(m.clone()),
        None => out,
    })
}

pub fn smote(table: &Table, spec: &ResampleSpec) -> Result<Table> {
    let (x, y) = table_parts(table)?;
    let (x, y, _) = smote_matrix(&x, &y, spec)?;
    rebuild(table, &x, &y)
}

pub fn random_over(table: &Table, spec: &ResampleSpec) -> Result<Table> {
    let (x, y) = table_parts(table)?;
    let (x, y) = random_over_matrix(&x, &y, spec)?;
    rebuild(table, &x, &y)
}

pub fn random_under(table: &Table, spec: &ResampleSpec) -> Result<Table> {
    let labels = table
        .labels()
        .ok_or_else(|| invalid("resampling requires a target"))?;
    let rows = random_under_rows(&labels, spec)?;
    Ok(table.take_rows(&rows))
}

pub fn resample(table: &Table, spec: &ResampleSpec) -> Result<Table> {
    match spec.method {
        ResampleMethod::None => Ok(table.clone()),
        ResampleMethod::Smote => smote(table, spec),
        ResampleMethod::RandomOver => random_over(table, spec),
        ResampleMethod::RandomUnder => random_under(table, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn counts(y: &[Option<u8>]) -> (usize, usize) {
        (
            y.iter().filter(|l| **l == Some(0)).count(),
            y.iter().filter(|l| **l == Some(1)).count(),
        )
    }

    fn blobs(neg: usize, pos: usize) -> (Array2<f64>, Vec<Option<u8>>) {
        let n = neg + pos;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * 7 + j * 3) as f64 % 11.0);
        let y = (0..n).map(|i| Some(u8::from(i >= neg))).collect();
        (x, y)
    }

    #[test]
    fn smote_on_diagonal_pair_stays_on_diagonal() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [5.0, 0.0], [6.0, 0.0], [7.0, 0.0], [8.0, 0.0]];
        let y = vec![Some(1), Some(1), Some(0), Some(0), Some(0), Some(0)];
        let spec = ResampleSpec {
            method: ResampleMethod::Smote,
            k_neighbors: 1,
            ..Default::default()
        };
        let (out, y2, prov) = smote_matrix(&x, &y, &spec).unwrap();
        assert_eq!(prov.len(), 2);
        assert_eq!(counts(&y2), (4, 4));
        for r in 6..out.nrows() {
            let (a, b) = (out[[r, 0]], out[[r, 1]]);
            assert_eq!(a, b);
            assert!((0.0..=1.0).contains(&a));
        }
        assert_eq!(out.slice(ndarray::s![..6, ..]), x);
    }

    #[test]
    fn smote_count_formula() {
        let (x, y) = blobs(90, 10);
        let (out, y2, _) = smote_matrix(&x, &y, &ResampleSpec::smote(1)).unwrap();
        assert_eq!(out.nrows(), 180);
        assert_eq!(counts(&y2), (90, 90));
    }

    #[test]
    fn smote_rejects_single_minority_row() {
        let (x, y) = blobs(9, 1);
        assert!(smote_matrix(&x, &y, &ResampleSpec::smote(1)).is_err());
    }

    #[test]
    fn smote_deterministic() {
        let (x, y) = blobs(40, 8);
        let a = smote_matrix(&x, &y, &ResampleSpec::smote(9)).unwrap();
        let b = smote_matrix(&x, &y, &ResampleSpec::smote(9)).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn random_over_duplicates_minority() {
        let (x, y) = blobs(4, 2);
        let spec = ResampleSpec {
            method: ResampleMethod::RandomOver,
            ..Default::default()
        };
        let (out, y2) = random_over_matrix(&x, &y, &spec).unwrap();
        assert_eq!(out.nrows(), 8);
        assert_eq!(counts(&y2), (4, 4));
        for r in 6..8 {
            assert!((4..6).any(|m| out.row(r) == x.row(m)));
        }
        let same = ResampleSpec {
            target_ratio: 0.5,
            ..spec
        };
        let (out, _) = random_over_matrix(&x, &y, &same).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn random_under_keeps_ratio() {
        let (_, y) = blobs(100, 10);
        let mut spec = ResampleSpec {
            method: ResampleMethod::RandomUnder,
            target_ratio: 0.5,
            ..Default::default()
        };
        let rows = random_under_rows(&y, &spec).unwrap();
        let kept: Vec<Option<u8>> = rows.iter().map(|&i| y[i]).collect();
        assert_eq!(counts(&kept), (20, 10));
        spec.target_ratio = 1.0;
        let rows = random_under_rows(&y, &spec).unwrap();
        let kept: Vec<Option<u8>> = rows.iter().map(|&i| y[i]).collect();
        assert_eq!(counts(&kept), (10, 10));
        spec.target_ratio = 0.05;
        assert!(random_under_rows(&y, &spec).is_err());
    }

    #[test]
    fn unlabeled_rows_pass_through() {
        let (x, mut y) = blobs(10, 3);
        y[0] = None;
        let (out, y2, _) = smote_matrix(&x, &y, &ResampleSpec::smote(0)).unwrap();
        assert_eq!(y2[0], None);
        assert_eq!(out.nrows(), 13 + 6);
    }
}
