//! One-hidden-layer perceptron: tanh hidden units, logistic output, trained by
//! full-batch gradient descent on mean log-loss plus an L2 penalty on weights.
//!
//! Parameters are handled as one flat vector laid out as
//! `[w1 (hidden x d, row-major), b1 (hidden), w2 (hidden), b2]`.

use ndarray::{ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, softplus};
use super::LearnerSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_features: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
    /// Training objective after each iteration.
    pub losses: Vec<f64>,
}

pub fn n_params(d: usize, hidden: usize) -> usize {
    hidden * d + hidden + hidden + 1
}

fn forward_row(params: &[f64], d: usize, hidden: usize, row: ndarray::ArrayView1<f64>, h: &mut [f64]) -> f64 {
    let (w1, rest) = params.split_at(hidden * d);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let mut z = b2[0];
    for k in 0..hidden {
        let a: f64 = w1[k * d..(k + 1) * d].iter().zip(row.iter()).map(|(w, v)| w * v).sum::<f64>() + b1[k];
        h[k] = a.tanh();
        z += w2[k] * h[k];
    }
    z
}

/// Objective and its gradient with respect to the flat parameter vector.
pub fn loss_and_grad(
    params: &[f64],
    hidden: usize,
    x: ArrayView2<f64>,
    y: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let d = x.ncols();
    let n = y.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut h = vec![0.0; hidden];
    let w2_off = hidden * d + hidden;
    for (row, &yi) in x.axis_iter(Axis(0)).zip(y) {
        let z = forward_row(params, d, hidden, row, &mut h);
        loss += softplus(z) - yi * z;
        let dz = (sigmoid(z) - yi) / n;
        grad[w2_off + hidden] += dz;
        for k in 0..hidden {
            grad[w2_off + k] += dz * h[k];
            let da = dz * params[w2_off + k] * (1.0 - h[k] * h[k]);
            grad[hidden * d + k] += da;
            for (g, v) in grad[k * d..(k + 1) * d].iter_mut().zip(row.iter()) {
                *g += da * v;
            }
        }
    }
    loss /= n;
    let mut penalty = 0.0;
    for i in (0..hidden * d).chain(w2_off..w2_off + hidden) {
        penalty += params[i] * params[i];
        grad[i] += l2 * params[i];
    }
    (loss + 0.5 * l2 * penalty, grad)
}

/// Xavier-uniform weights, zero biases.
pub fn init_params(d: usize, hidden: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; n_params(d, hidden)];
    let r1 = (6.0 / (d + hidden) as f64).sqrt();
    for v in p[..hidden * d].iter_mut() {
        *v = rng.gen_range(-r1..r1);
    }
    let r2 = (6.0 / (hidden + 1) as f64).sqrt();
    let off = hidden * d + hidden;
    for v in p[off..off + hidden].iter_mut() {
        *v = rng.gen_range(-r2..r2);
    }
    p
}

pub fn fit(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[u8]) -> MlpModel {
    let hidden = spec.usize_param("hidden").max(1);
    let lr = spec.param("learning_rate");
    let l2 = spec.param("l2");
    let d = x.ncols();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut params = init_params(d, hidden, spec.seed);
    let mut losses = Vec::new();
    for _ in 0..spec.usize_param("max_iter") {
        let (_, g) = loss_and_grad(&params, hidden, x, &yf, l2);
        for (p, gi) in params.iter_mut().zip(&g) {
            *p -= lr * gi;
        }
        losses.push(loss_and_grad(&params, hidden, x, &yf, l2).0);
    }
    MlpModel {
        n_features: d,
        hidden,
        params,
        losses,
    }
}

impl MlpModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let mut h = vec![0.0; self.hidden];
        x.axis_iter(Axis(0))
            .map(|r| sigmoid(forward_row(&self.params, self.n_features, self.hidden, r, &mut h)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerKind;
    use ndarray::array;

    #[test]
    fn gradient_matches_finite_differences() {
        let x = array![[0.5, -1.0], [1.5, 0.3], [-0.7, 0.8], [0.1, 0.1]];
        let y = [1.0, 0.0, 1.0, 0.0];
        let p = init_params(2, 3, 7);
        let (_, g) = loss_and_grad(&p, 3, x.view(), &y, 1e-2);
        for i in 0..p.len() {
            let h = 1e-6;
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (loss_and_grad(&a, 3, x.view(), &y, 1e-2).0 - loss_and_grad(&b, 3, x.view(), &y, 1e-2).0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn learns_xor() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let spec = LearnerSpec::new(LearnerKind::Mlp)
            .with("hidden", 8.0)
            .with("learning_rate", 1.0)
            .with("max_iter", 3000.0)
            .with("l2", 0.0)
            .with_seed(1);
        let m = fit(&spec, x.view(), &[0, 1, 1, 0]);
        let p = m.predict(x.view());
        assert!(p[0] < 0.5 && p[1] > 0.5 && p[2] > 0.5 && p[3] < 0.5, "{p:?}");
    }
}
