//! Linear learners: L2-regularized logistic regression (damped Newton) and a
//! hinge-loss linear SVM with Platt calibration.

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(w: &[f64], row: ArrayView1<f64>) -> f64 {
    w.iter().zip(row.iter()).map(|(a, b)| a * b).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn decision(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.axis_iter(Axis(0))
            .map(|r| dot(&self.weights, r) + self.intercept)
            .collect()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.decision(x).into_iter().map(sigmoid).collect()
    }
}

/// Mean negative log-likelihood plus `l2/2 * ||w||^2` (intercept unpenalized),
/// with its gradient `(dw, db)`.
pub fn logistic_objective(
    w: &[f64],
    b: f64,
    x: ArrayView2<f64>,
    y: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &yi) in x.axis_iter(Axis(0)).zip(y) {
        let z = dot(w, row) + b;
        loss += softplus(z) - yi * z;
        let r = sigmoid(z) - yi;
        for (g, v) in gw.iter_mut().zip(row.iter()) {
            *g += r * v;
        }
        gb += r;
    }
    loss /= n;
    for (g, wi) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    (loss, gw, gb / n)
}

/// Damped Newton iterations with Armijo backtracking.
pub fn fit_logistic(
    x: ArrayView2<f64>,
    y: &[u8],
    l2: f64,
    max_iter: usize,
    tol: f64,
) -> LogisticModel {
    let d = x.ncols();
    let n = y.len() as f64;
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut w = vec![0.0; d];
    let pbar = (yf.iter().sum::<f64>() / n).clamp(1e-6, 1.0 - 1e-6);
    let mut b = (pbar / (1.0 - pbar)).ln();
    let (mut loss, mut gw, mut gb) = logistic_objective(&w, b, x, &yf, l2);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < tol {
            converged = true;
            break;
        }
        iterations += 1;
        // Hessian over (w, b)
        let m = d + 1;
        let mut h = DMatrix::<f64>::zeros(m, m);
        for row in x.axis_iter(Axis(0)) {
            let pr = sigmoid(dot(&w, row) + b);
            let s = pr * (1.0 - pr) / n;
            for i in 0..d {
                let si = s * row[i];
                for j in 0..=i {
                    h[(i, j)] += si * row[j];
                }
                h[(d, i)] += si;
            }
            h[(d, d)] += s;
        }
        for i in 0..m {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        for i in 0..d {
            h[(i, i)] += l2;
        }
        for i in 0..m {
            h[(i, i)] += 1e-10;
        }
        let g = DVector::from_iterator(m, gw.iter().copied().chain([gb]));
        let step = match h.cholesky() {
            Some(c) => c.solve(&g),
            None => g.clone(),
        };
        let slope: f64 = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let w_new: Vec<f64> = w.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let b_new = b - t * step[d];
            let (l_new, gw_new, gb_new) = logistic_objective(&w_new, b_new, x, &yf, l2);
            if l_new <= loss - 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                loss = l_new;
                gw = gw_new;
                gb = gb_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    LogisticModel {
        weights: w,
        intercept: b,
        iterations,
        converged,
    }
}

/// Platt sigmoid `p = 1 / (1 + exp(a*f + b))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn apply(&self, f: f64) -> f64 {
        sigmoid(-(self.a * f + self.b))
    }

    /// Newton fit on smoothed targets.
    pub fn fit(decision: &[f64], y: &[u8]) -> Platt {
        let n_pos = y.iter().filter(|&&v| v == 1).count() as f64;
        let n_neg = y.len() as f64 - n_pos;
        let hi = (n_pos + 1.0) / (n_pos + 2.0);
        let lo = 1.0 / (n_neg + 2.0);
        let t: Vec<f64> = y.iter().map(|&v| if v == 1 { hi } else { lo }).collect();
        let objective = |a: f64, b: f64| -> f64 {
            decision
                .iter()
                .zip(&t)
                .map(|(&f, &ti)| {
                    // p = sigmoid(-(a f + b)); loss = -t log p - (1-t) log(1-p)
                    let z = a * f + b;
                    ti * softplus(z) + (1.0 - ti) * softplus(-z)
                })
                .sum()
        };
        let mut a = 0.0;
        let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
        let mut fval = objective(a, b);
        for _ in 0..100 {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
            for (&f, &ti) in decision.iter().zip(&t) {
                let p = sigmoid(-(a * f + b));
                let q = p * (1.0 - p);
                let d = ti - p;
                h11 += f * f * q;
                h22 += q;
                h21 += f * q;
                g1 += f * d;
                g2 += d;
            }
            if g1.abs() < 1e-10 && g2.abs() < 1e-10 {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            if det.abs() < 1e-300 {
                break;
            }
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            let mut moved = false;
            while step >= 1e-10 {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Platt { a, b }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub platt: Platt,
}

impl SvmModel {
    pub fn decision(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.axis_iter(Axis(0))
            .map(|r| dot(&self.weights, r) + self.intercept)
            .collect()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.decision(x)
            .into_iter()
            .map(|f| self.platt.apply(f))
            .collect()
    }
}

/// Hinge loss + `l2/2 ||w||^2` by subgradient steps over rows in order,
/// step `1 / (l2 * (t + t0))`; the returned weights average the last epoch.
pub fn fit_svm(x: ArrayView2<f64>, y: &[u8], l2: f64, epochs: usize) -> SvmModel {
    let d = x.ncols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let t0 = 1.0 / (l2 * 0.1);
    let mut t = 0.0;
    let mut avg_w = vec![0.0; d];
    let mut avg_b = 0.0;
    for epoch in 0..epochs {
        let last = epoch + 1 == epochs;
        for (row, &label) in x.axis_iter(Axis(0)).zip(y) {
            t += 1.0;
            let eta = 1.0 / (l2 * (t + t0));
            let s = if label == 1 { 1.0 } else { -1.0 };
            let margin = s * (dot(&w, row) + b);
            for wi in w.iter_mut() {
                *wi *= 1.0 - eta * l2;
            }
            if margin < 1.0 {
                for (wi, v) in w.iter_mut().zip(row.iter()) {
                    *wi += eta * s * v;
                }
                b += eta * s;
            }
            if last {
                for (a, wi) in avg_w.iter_mut().zip(&w) {
                    *a += wi;
                }
                avg_b += b;
            }
        }
    }
    let n = y.len() as f64;
    avg_w.iter_mut().for_each(|v| *v /= n);
    avg_b /= n;
    let mut model = SvmModel {
        weights: avg_w,
        intercept: avg_b,
        platt: Platt { a: -1.0, b: 0.0 },
    };
    let f = model.decision(x);
    model.platt = Platt::fit(&f, y);
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn separable() -> (Array2<f64>, Vec<u8>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.1;
            rows.extend_from_slice(&[2.0 + t, 2.0 - t * 0.5]);
            y.push(1);
            rows.extend_from_slice(&[-2.0 - t, -2.0 + t * 0.5]);
            y.push(0);
        }
        (Array2::from_shape_vec((40, 2), rows).unwrap(), y)
    }

    #[test]
    fn logistic_separates_blobs() {
        let (x, y) = separable();
        let m = fit_logistic(x.view(), &y, 1e-3, 100, 1e-8);
        let p = m.predict(x.view());
        for (pi, yi) in p.iter().zip(&y) {
            assert_eq!(u8::from(*pi >= 0.5), *yi);
        }
        assert!(m.converged);
    }

    #[test]
    fn svm_separates_blobs_with_calibrated_scores() {
        let (x, y) = separable();
        let m = fit_svm(x.view(), &y, 1e-3, 50);
        let p = m.predict(x.view());
        for (pi, yi) in p.iter().zip(&y) {
            assert!((0.0..=1.0).contains(pi));
            assert_eq!(u8::from(*pi >= 0.5), *yi);
        }
    }

    #[test]
    fn platt_is_increasing_in_margin() {
        let f = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 0.2, -0.2];
        let y = [0, 0, 0, 1, 1, 1, 0, 1];
        let pl = Platt::fit(&f, &y);
        assert!(pl.a < 0.0);
        assert!(pl.apply(1.0) > pl.apply(-1.0));
    }
}
