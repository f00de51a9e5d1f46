//! Gaussian naive Bayes with a per-feature variance floor.

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    /// Indexed by class (0, 1).
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

pub fn fit(x: ArrayView2<f64>, y: &[u8], var_floor: f64) -> GaussianNbModel {
    let d = x.ncols();
    let n = y.len() as f64;
    let mut counts = [0.0; 2];
    let mut means = [vec![0.0; d], vec![0.0; d]];
    let mut variances = [vec![0.0; d], vec![0.0; d]];
    for (row, &c) in x.axis_iter(Axis(0)).zip(y) {
        let c = usize::from(c);
        counts[c] += 1.0;
        for (m, v) in means[c].iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|m| *m /= counts[c]);
    }
    for (row, &c) in x.axis_iter(Axis(0)).zip(y) {
        let c = usize::from(c);
        for j in 0..d {
            variances[c][j] += (row[j] - means[c][j]).powi(2);
        }
    }
    for c in 0..2 {
        variances[c]
            .iter_mut()
            .for_each(|v| *v = (*v / counts[c]).max(var_floor));
    }
    GaussianNbModel {
        priors: [counts[0] / n, counts[1] / n],
        means,
        variances,
    }
}

impl GaussianNbModel {
    fn log_joint(&self, row: ndarray::ArrayView1<f64>, c: usize) -> f64 {
        let mut s = self.priors[c].ln();
        for j in 0..row.len() {
            let v = self.variances[c][j];
            s -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (row[j] - self.means[c][j]).powi(2) / v);
        }
        s
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.axis_iter(Axis(0))
            .map(|r| {
                let l0 = self.log_joint(r, 0);
                let l1 = self.log_joint(r, 1);
                super::linear::sigmoid(l1 - l0)
            })
            .collect()
    }
}
