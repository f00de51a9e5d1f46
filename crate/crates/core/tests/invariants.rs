use ndarray::Array2;
use proptest::prelude::*;

use tabml::evaluate::{confusion, critical_ratio, roc_auc, score_metrics, stratified_kfold_labels};
use tabml::explain::{kernel_shap, FnModel};
use tabml::preprocess::{apply_scale, fit_loo, fit_scale, one_hot, EncodeMode};
use tabml::resample::{smote_matrix, ResampleSpec};
use tabml::select::soft_threshold;
use tabml::tabular::{Column, Table};

fn labels_and_scores() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (4usize..80).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..2, n).prop_map(|mut y| {
                y[0] = 0;
                y[1] = 1;
                y
            }),
            proptest::collection::vec(-5.0f64..5.0, n),
        )
    })
}

proptest! {
    #[test]
    fn auroc_is_bounded_and_rank_based((y, s) in labels_and_scores()) {
        let (_, a) = roc_auc(&y, &s).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let squashed: Vec<f64> = s.iter().map(|v| v.tanh() * 3.0 + 1.0).collect();
        let (_, b) = roc_auc(&y, &squashed).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let flipped: Vec<f64> = s.iter().map(|v| -v).collect();
        let (_, c) = roc_auc(&y, &flipped).unwrap();
        prop_assert!((a + c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confusion_counts_every_row((y, s) in labels_and_scores(), thr in 0.0f64..1.0) {
        let pred: Vec<u8> = s.iter().map(|v| u8::from(v.tanh() * 0.5 + 0.5 >= thr)).collect();
        let cm = confusion(&y, &pred).unwrap();
        prop_assert_eq!(cm.total(), y.len());
        prop_assert_eq!(cm.tp + cm.fn_, y.iter().filter(|v| **v == 1).count());
    }

    #[test]
    fn metrics_stay_in_unit_interval((y, s) in labels_and_scores(), thr in 0.0f64..1.0) {
        let p: Vec<f64> = s.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        let m = score_metrics(&y, &p, thr).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1, m.auroc, m.pr_auc] {
            prop_assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn folds_partition_rows_and_balance_classes(mut y in proptest::collection::vec(0u8..2, 16..200), k in 2usize..8, seed in any::<u64>()) {
        // at least k rows per class
        for i in 0..k {
            y[2 * i] = 0;
            y[2 * i + 1] = 1;
        }
        let folds = stratified_kfold_labels(&y, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        for class in 0..2u8 {
            let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| y[i] == class).count()).collect();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1, "{counts:?}");
        }
    }

    #[test]
    fn scaled_columns_have_zero_mean_unit_variance(v in proptest::collection::vec(-1e3f64..1e3, 2..100)) {
        let t = Table::new(vec![Column::numeric("x", v.clone())], None).unwrap();
        let out = apply_scale(&fit_scale(&t).unwrap(), &t).unwrap();
        let z = out.column("x").unwrap().as_numeric().unwrap();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread > 1e-6 {
            let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn one_hot_rows_sum_to_presence(codes in proptest::collection::vec(proptest::option::of(0u8..5), 1..60)) {
        let cats: Vec<Option<String>> = codes.iter().map(|c| c.map(|c| format!("c{c}"))).collect();
        let t = Table::new(vec![Column::categorical("k", &cats)], None).unwrap();
        let out = one_hot(&t, 10).unwrap();
        for (i, c) in codes.iter().enumerate() {
            let sum: f64 = out.feature_columns().map(|col| col.as_numeric().unwrap()[i]).sum();
            prop_assert_eq!(sum, if c.is_some() { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn loo_codes_exclude_the_row_itself(rows in proptest::collection::vec((0u8..3, 0u8..2), 2..60)) {
        let cats: Vec<Option<String>> = rows.iter().map(|(c, _)| Some(format!("c{c}"))).collect();
        let y: Vec<f64> = rows.iter().map(|(_, l)| f64::from(*l)).collect();
        let t = Table::new(vec![Column::categorical("k", &cats), Column::numeric("y", y.clone())], Some("y")).unwrap();
        let enc = fit_loo(&t, 0.0).unwrap();
        let out = enc.transform(&t, EncodeMode::FitRows).unwrap();
        let codes = out.column("k").unwrap().as_numeric().unwrap();
        let global = y.iter().sum::<f64>() / y.len() as f64;
        for (i, (c, _)) in rows.iter().enumerate() {
            let others: Vec<f64> = (0..rows.len()).filter(|&j| j != i && rows[j].0 == *c).map(|j| y[j]).collect();
            let want = if others.is_empty() { global } else { others.iter().sum::<f64>() / others.len() as f64 };
            prop_assert!((codes[i] - want).abs() < 1e-12, "row {i}: {} vs {want}", codes[i]);
        }
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero(z in -10.0f64..10.0, l in 0.0f64..5.0) {
        let s = soft_threshold(z, l);
        prop_assert!(s.abs() <= z.abs());
        prop_assert!(s == 0.0 || s.signum() == z.signum());
        prop_assert!((z - s).abs() <= l + 1e-12);
    }

    #[test]
    fn smote_preserves_originals(n_min in 2usize..10, n_maj in 12usize..40, seed in any::<u64>()) {
        let n = n_min + n_maj;
        let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 31 + j * 7) % 13) as f64 - seed as f64 % 5.0);
        let labels: Vec<Option<u8>> = (0..n).map(|i| Some(u8::from(i < n_min))).collect();
        let (out, y, prov) = smote_matrix(&x, &labels, &ResampleSpec::smote(seed)).unwrap();
        prop_assert_eq!(out.slice(ndarray::s![..n, ..]), x.view());
        prop_assert_eq!(&y[..n], &labels[..]);
        prop_assert_eq!(out.nrows(), n + prov.len());
        prop_assert_eq!(y.iter().filter(|v| **v == Some(1)).count(), n_maj);
    }

    #[test]
    fn sampled_kernel_shap_is_efficient(w in proptest::collection::vec(-2.0f64..2.0, 12), seed in any::<u64>()) {
        let bg = Array2::from_shape_fn((8, 12), |(i, j)| ((i + 3 * j) % 5) as f64 * 0.3);
        let x: Vec<f64> = (0..12).map(|j| j as f64 * 0.1).collect();
        let w2 = w.clone();
        let model = FnModel { n_features: 12, f: move |r: &[f64]| (r.iter().zip(&w2).map(|(a, b)| a * b).sum::<f64>()).tanh() };
        let a = kernel_shap(&model, &x, bg.view(), 200, seed).unwrap();
        prop_assert!((a.phi.iter().sum::<f64>() + a.base_value - a.prediction).abs() < 1e-9);
    }

    #[test]
    fn critical_ratio_rewards_speed(acc in 0.01f64..1.0, t in 0.01f64..100.0, k in 1.01f64..10.0) {
        prop_assert!(critical_ratio(acc, t).unwrap() > critical_ratio(acc, t * k).unwrap());
    }
}

#[test]
fn folds_refuse_more_folds_than_class_rows() {
    let y = [0u8, 0, 0, 0, 0, 0, 1, 1];
    assert!(stratified_kfold_labels(&y, 3, 0).is_err());
    assert!(stratified_kfold_labels(&y, 2, 0).is_ok());
}
