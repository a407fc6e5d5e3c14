//! Property checks for the statistical tests, VAR, SVR and data layers.

use fxlab_core::data::{country_delta, TimeSeriesFrame, YearMonth};
use fxlab_core::stattests::{adf_test, default_max_lag, granger_causality, RegressionKind};
use fxlab_core::svr::{fit_svr, SvrConfig};
use fxlab_core::synthetic::{random_walk, rng, white_noise};
use fxlab_core::var::{fit_var, select_lag_aic};
use proptest::prelude::*;

fn frame(columns: Vec<Vec<f64>>) -> TimeSeriesFrame {
    let start = YearMonth::new(2001, 1).unwrap();
    TimeSeriesFrame::from_columns(
        start,
        columns
            .into_iter()
            .enumerate()
            .map(|(j, c)| (format!("v{j}"), c))
            .collect(),
    )
    .unwrap()
}

#[test]
fn adf_size_under_the_null() {
    let mut r = rng(71);
    let n = 300;
    let rejections = (0..1000)
        .filter(|_| {
            let walk = random_walk(&mut r, n);
            adf_test(&walk, default_max_lag(n), RegressionKind::Constant)
                .unwrap()
                .reject_unit_root
        })
        .count();
    let rate = rejections as f64 / 1000.0;
    assert!((rate - 0.05).abs() <= 0.03, "size {rate}");
}

#[test]
fn granger_size_under_the_null() {
    let mut r = rng(72);
    let n = 300;
    let rejections = (0..1000)
        .filter(|_| {
            let f = frame(vec![white_noise(&mut r, n), white_noise(&mut r, n)]);
            granger_causality(&f, "v0", "v1", 2).unwrap().reject_noncausality
        })
        .count();
    let rate = rejections as f64 / 1000.0;
    assert!((rate - 0.05).abs() <= 0.03, "size {rate}");
}

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adf_statistic_is_affine_invariant(
        seed in 0u64..1000,
        a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        b in -1e3f64..1e3,
    ) {
        let mut r = rng(seed);
        let noise = white_noise(&mut r, 120);
        let y: Vec<f64> = noise.iter().scan(0.0, |acc, e| { *acc = 0.7 * *acc + e; Some(*acc) }).collect();
        let scaled: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let max_lag = default_max_lag(y.len());
        let s1 = adf_test(&y, max_lag, RegressionKind::Constant).unwrap();
        let s2 = adf_test(&scaled, max_lag, RegressionKind::Constant).unwrap();
        prop_assert_eq!(s1.lag_order_used, s2.lag_order_used);
        prop_assert!((s1.statistic - s2.statistic).abs() < 1e-8 * (1.0 + s1.statistic.abs()));
    }

    #[test]
    fn granger_outputs_are_in_range(x in series(40..80), seed in 0u64..1000, lags in 1usize..4) {
        let mut r = rng(seed);
        let y: Vec<f64> = white_noise(&mut r, x.len()).iter().zip(&x).map(|(e, v)| e + 0.3 * v).collect();
        let f = frame(vec![x, y]);
        let g = granger_causality(&f, "v0", "v1", lags).unwrap();
        prop_assert!(g.f_statistic >= 0.0);
        prop_assert!((0.0..=1.0).contains(&g.p_value));
    }

    #[test]
    fn var_residuals_satisfy_normal_equations(seed in 0u64..1000, k in 1usize..4, p in 1usize..4) {
        let mut r = rng(seed);
        let cols: Vec<Vec<f64>> = (0..k).map(|_| random_walk(&mut r, 80)).collect();
        let f = frame(cols.clone());
        let m = fit_var(&f, p).unwrap();
        prop_assert_eq!(m.residuals.len(), 80 - p);
        for j in 0..k {
            let e: Vec<f64> = m.residuals.iter().map(|row| row[j]).collect();
            let mut regressors: Vec<Vec<f64>> = vec![vec![1.0; 80 - p]];
            for tau in 1..=p {
                for c in &cols {
                    regressors.push((p..80).map(|t| c[t - tau]).collect());
                }
            }
            for x in &regressors {
                let dot: f64 = x.iter().zip(&e).map(|(a, b)| a * b).sum();
                let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt() * e.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(dot.abs() <= 1e-8 * (1.0 + scale), "{} vs {}", dot, scale);
            }
        }
    }

    #[test]
    fn aic_lag_never_exceeds_the_cap(seed in 0u64..1000, cap in 1usize..6) {
        let mut r = rng(seed);
        let f = frame(vec![white_noise(&mut r, 100), random_walk(&mut r, 100)]);
        let p = select_lag_aic(&f, cap).unwrap();
        prop_assert!((1..=cap).contains(&p));
    }

    #[test]
    fn svr_fits_satisfy_kkt_balance_and_translation(
        seed in 0u64..1000,
        n in 3usize..25,
        c in 0.1f64..100.0,
        gamma in 0.05f64..5.0,
        shift in -100.0f64..100.0,
    ) {
        let mut r = rng(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| white_noise(&mut r, 2)).collect();
        let y: Vec<f64> = x.iter().zip(white_noise(&mut r, n)).map(|(row, e)| row[0] - 0.5 * row[1] + 0.3 * e).collect();
        let config = SvrConfig { c, gamma, epsilon: 0.1, tolerance: 1e-9, max_iterations: 1_000_000 };
        let model = fit_svr(&x, &y, &config).unwrap();
        prop_assert!(model.kkt_violation(&x, &y).unwrap() <= 10.0 * config.tolerance.max(1e-6));
        prop_assert!(model.dual_coefs.iter().sum::<f64>().abs() < 1e-9 * (1.0 + c));

        let shifted: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let moved = fit_svr(&x, &shifted, &config).unwrap();
        for row in &x {
            let d = moved.predict(row).unwrap() - model.predict(row).unwrap() - shift;
            prop_assert!(d.abs() < 1e-8 * (1.0 + shift.abs()), "{}", d);
        }
    }

    #[test]
    fn country_delta_is_antisymmetric(a in series(1..30), seed in 0u64..1000) {
        let mut r = rng(seed);
        let b = white_noise(&mut r, a.len());
        let fa = frame(vec![a.clone(), b.clone()]);
        let fb = frame(vec![b, a]);
        let ab = country_delta(&fa, &fb).unwrap();
        let ba = country_delta(&fb, &fa).unwrap();
        for (u, v) in ab.values().iter().zip(ba.values()) {
            prop_assert_eq!(*u, -*v);
        }
    }

    #[test]
    fn corrupted_csv_never_yields_a_broken_frame(
        edits in prop::collection::vec((0usize..400, prop::sample::select(vec!["", ",", "\n", "x", "-", "1", "2001-13", "NaN", " "])), 1..6),
    ) {
        let f = frame(vec![vec![1.5, 2.5, 3.5, 4.5], vec![-1.0, 0.0, 1.0, 2.0]]);
        let mut text = f.to_csv_string();
        for (pos, insert) in edits {
            let at = pos.min(text.len());
            if text.is_char_boundary(at) {
                let end = (at + 1).min(text.len());
                text.replace_range(at..end, insert);
            }
        }
        if let Ok(parsed) = TimeSeriesFrame::parse_csv(&text, None) {
            prop_assert!(parsed.n_rows() >= 1 && parsed.n_cols() >= 1);
            prop_assert_eq!(parsed.values().len(), parsed.n_rows() * parsed.n_cols());
            prop_assert!(parsed.values().iter().all(|v| v.is_finite()));
            for w in parsed.dates().windows(2) {
                prop_assert_eq!(w[0].succ(), w[1]);
            }
        }
    }
}
