use fxlab_core::analysis::{correlation_matrix, pearson, tree_importance, ForestConfig};
use fxlab_core::data::{TimeSeriesFrame, YearMonth};
use fxlab_core::metrics::{evaluate, mape, mpe, rmse};
use fxlab_core::synthetic::{rng, white_noise};
use proptest::prelude::*;
use rand::Rng;

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

#[test]
fn independent_noise_is_nearly_uncorrelated() {
    let mut r = rng(42);
    let cols = (0..4).map(|j| (format!("c{j}"), white_noise(&mut r, 1000))).collect();
    let frame = TimeSeriesFrame::from_columns(YearMonth::new(1900, 1).unwrap(), cols).unwrap();
    let m = correlation_matrix(&frame).unwrap();
    for a in 0..4 {
        assert_eq!(m.values[a][a], 1.0);
        for b in 0..4 {
            assert_eq!(m.values[a][b], m.values[b][a]);
            if a != b {
                assert!(m.values[a][b].abs() < 0.1, "{a},{b}: {}", m.values[a][b]);
            }
        }
    }
}

#[test]
fn dominant_feature_gets_most_importance() {
    let mut r = rng(7);
    let x: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| r.random::<f64>()).collect()).collect();
    let y: Vec<f64> = x.iter().map(|row| 5.0 * row[0] + 1e-3 * r.random::<f64>()).collect();
    let report = tree_importance(&names(4), &x, &y, &ForestConfig::default()).unwrap();
    assert!(report.importances[0] >= 0.8, "{:?}", report.importances);
}

#[test]
fn pure_noise_has_no_dominant_feature() {
    let mut r = rng(8);
    let x: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| r.random::<f64>()).collect()).collect();
    let y: Vec<f64> = (0..300).map(|_| r.random::<f64>()).collect();
    let report = tree_importance(&names(4), &x, &y, &ForestConfig::default()).unwrap();
    let max = report.importances.iter().cloned().fold(0.0, f64::max);
    assert!(max < 0.5, "{:?}", report.importances);
}

#[test]
fn importance_is_deterministic() {
    let mut r = rng(9);
    let x: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| r.random::<f64>()).collect()).collect();
    let y: Vec<f64> = x.iter().map(|row| row[1] - row[2]).collect();
    let config = ForestConfig {
        trees: 20,
        max_depth: 4,
        seed: 5,
    };
    let a = tree_importance(&names(3), &x, &y, &config).unwrap();
    let b = tree_importance(&names(3), &x, &y, &config).unwrap();
    assert_eq!(a, b);
}

fn positive_pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-100.0f64..100.0, prop_oneof![-50.0f64..-0.1, 0.1f64..50.0]), 1..40)
}

proptest! {
    #[test]
    fn metric_inequalities(pairs in positive_pairs()) {
        let (pred, actual): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = evaluate(&pred, &actual).unwrap();
        prop_assert_eq!(r.accuracy_pct, 100.0 - 100.0 * r.mape);
        prop_assert!(r.mpe.abs() <= r.mape * (1.0 + 1e-12));
        let mean_err = pred.iter().zip(&actual).map(|(p, a)| p - a).sum::<f64>() / pred.len() as f64;
        prop_assert!(r.rmse >= mean_err.abs() * (1.0 - 1e-12));
    }

    #[test]
    fn metrics_are_permutation_invariant(pairs in positive_pairs(), seed in 0u64..1000) {
        let mut shuffled = pairs.clone();
        let mut r = rng(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, r.random_range(0..=i));
        }
        let (p1, a1): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (p2, a2): (Vec<f64>, Vec<f64>) = shuffled.into_iter().unzip();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs());
        prop_assert!(close(mape(&p1, &a1).unwrap(), mape(&p2, &a2).unwrap()));
        prop_assert!(close(mpe(&p1, &a1).unwrap(), mpe(&p2, &a2).unwrap()));
        prop_assert!(close(rmse(&p1, &a1).unwrap(), rmse(&p2, &a2).unwrap()));
    }

    #[test]
    fn pearson_affine_invariance(
        xs in prop::collection::vec(-10.0f64..10.0, 3..30),
        noise_seed in 0u64..1000,
        scale in 0.1f64..10.0,
        shift in -100.0f64..100.0,
    ) {
        let mut r = rng(noise_seed);
        let ys: Vec<f64> = xs.iter().map(|x| x + r.random_range(-5.0..5.0)).collect();
        prop_assume!(xs.iter().any(|v| *v != xs[0]));
        let base = pearson(&xs, &ys).unwrap();
        let mapped: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        prop_assert!((pearson(&mapped, &ys).unwrap() - base).abs() < 1e-12);
        let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
        prop_assert!((pearson(&xs, &neg).unwrap() + base).abs() < 1e-12);
    }

    #[test]
    fn importances_form_a_distribution(seed in 0u64..500) {
        let mut r = rng(seed);
        let x: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| r.random::<f64>()).collect()).collect();
        let y: Vec<f64> = (0..30).map(|_| r.random::<f64>()).collect();
        let config = ForestConfig { trees: 5, max_depth: 3, seed };
        let rep = tree_importance(&names(3), &x, &y, &config).unwrap();
        prop_assert!(rep.importances.iter().all(|v| *v >= 0.0));
        prop_assert!((rep.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
