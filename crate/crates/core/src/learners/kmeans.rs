//! Unsupervised anomaly scoring with k-means.
//!
//! The score is the distance to the nearest centroid, min-max normalized over
//! the training rows and clipped to `[0, 1]`. Labels are ignored.

use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmeansModel {
    pub centroids: Vec<Vec<f64>>,
    pub min_distance: f64,
    pub max_distance: f64,
    pub iterations: usize,
}

fn sq_dist(a: ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(row: ArrayView1<f64>, centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(row, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn fit(x: ArrayView2<f64>, n_clusters: usize, max_iter: usize, seed: u64) -> KmeansModel {
    let n = x.nrows();
    let k = n_clusters.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = vec![x.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = x.axis_iter(Axis(0)).map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        centroids.push(x.row(pick).to_vec());
        let c = centroids.last().expect("just pushed");
        for (di, r) in d2.iter_mut().zip(x.axis_iter(Axis(0))) {
            *di = di.min(sq_dist(r, c));
        }
    }
    let mut assign: Vec<usize> = vec![usize::MAX; n];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        for (a, r) in assign.iter_mut().zip(x.axis_iter(Axis(0))) {
            let (c, _) = nearest(r, &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let d = x.ncols();
        let mut sums = vec![vec![0.0; d]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (&a, r) in assign.iter().zip(x.axis_iter(Axis(0))) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(r.iter()) {
                *s += v;
            }
        }
        for (c, cen) in centroids.iter_mut().enumerate() {
            if counts[c] > 0 {
                for (v, s) in cen.iter_mut().zip(&sums[c]) {
                    *v = s / counts[c] as f64;
                }
            }
        }
    }
    let dists: Vec<f64> = x
        .axis_iter(Axis(0))
        .map(|r| nearest(r, &centroids).1.sqrt())
        .collect();
    KmeansModel {
        min_distance: dists.iter().copied().fold(f64::INFINITY, f64::min),
        max_distance: dists.iter().copied().fold(0.0, f64::max),
        centroids,
        iterations,
    }
}

impl KmeansModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let span = self.max_distance - self.min_distance;
        x.axis_iter(Axis(0))
            .map(|r| {
                let d = nearest(r, &self.centroids).1.sqrt();
                if span <= 0.0 {
                    if d > self.max_distance { 1.0 } else { 0.0 }
                } else {
                    ((d - self.min_distance) / span).clamp(0.0, 1.0)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn outlier_scores_highest() {
        let x = array![[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0], [5.1, 5.0], [20.0, -20.0]];
        let m = fit(x.view(), 1, 50, 3);
        let s = m.predict(x.view());
        let top = s.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(top, 5);
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
