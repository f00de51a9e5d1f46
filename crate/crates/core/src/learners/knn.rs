//! k-nearest-neighbor classifier; the score is the positive vote fraction.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub n_features: usize,
    /// Row-major training features.
    pub x: Vec<f64>,
    pub y: Vec<u8>,
}

impl KnnModel {
    pub fn fit(x: ArrayView2<f64>, y: &[u8], k: usize) -> Self {
        KnnModel {
            k: k.max(1),
            n_features: x.ncols(),
            x: x.iter().copied().collect(),
            y: y.to_vec(),
        }
    }

    fn train(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.y.len(), self.n_features), self.x.clone())
            .expect("stored shape is consistent")
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let train = self.train();
        let k = self.k.min(self.y.len());
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.y.len());
        x.axis_iter(Axis(0))
            .map(|q| {
                dist.clear();
                dist.extend(train.axis_iter(Axis(0)).enumerate().map(|(i, r)| {
                    let d: f64 = r.iter().zip(q.iter()).map(|(a, b)| (a - b).powi(2)).sum();
                    (d, i)
                }));
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < dist.len() {
                    dist.select_nth_unstable_by(k - 1, cmp);
                }
                let votes = dist[..k].iter().filter(|(_, i)| self.y[*i] == 1).count();
                votes as f64 / k as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_neighbor_returns_own_label() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]];
        let m = KnnModel::fit(x.view(), &[0, 1, 1], 1);
        assert_eq!(m.predict(x.view()), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn vote_fraction_and_index_ties() {
        let x = array![[0.0], [1.0], [-1.0], [10.0]];
        let m = KnnModel::fit(x.view(), &[1, 0, 1, 0], 2);
        // rows 1 and 2 tie at distance 1; lower index wins
        assert_eq!(m.predict(array![[0.0]].view()), vec![0.5]);
        let m = KnnModel::fit(x.view(), &[1, 0, 1, 0], 3);
        assert!((m.predict(array![[0.0]].view())[0] - 2.0 / 3.0).abs() < 1e-15);
    }
}
