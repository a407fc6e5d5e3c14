//! The SMO solver against an accelerated projected-gradient dual oracle.

use fxlab_core::oracles::{svr_dual_objective, svr_dual_oracle};
use fxlab_core::svr::{fit_svr, SvrConfig};
use fxlab_core::synthetic::rng;
use rand::Rng;

struct Instance {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    config: SvrConfig,
}

fn instance(seed: u64) -> Instance {
    let mut r = rng(1000 + seed);
    let n = r.random_range(5..=20);
    let d = r.random_range(1..=4);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random::<f64>()).collect()).collect();
    let y = x
        .iter()
        .map(|row| (3.0 * row.iter().sum::<f64>()).sin() + 0.2 * r.random::<f64>())
        .collect();
    let config = SvrConfig {
        c: r.random_range(0.5..5.0),
        gamma: r.random_range(0.5..5.0),
        epsilon: r.random_range(0.01..0.2),
        tolerance: 1e-9,
        max_iterations: 1_000_000,
    };
    Instance { x, y, config }
}

#[test]
fn smo_matches_dual_oracle_on_random_instances() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let Instance { x, y, config } = instance(seed);
        let model = fit_svr(&x, &y, &config).unwrap();
        let oracle = svr_dual_oracle(&x, &y, config.c, config.gamma, config.epsilon, 200_000, 1e-13);

        // The kernel part of the prediction is unique; the bias need not be.
        let se: f64 = x
            .iter()
            .map(|row| {
                let ours = model.predict(row).unwrap() - model.bias;
                let theirs = oracle.predict(&x, config.gamma, row) - oracle.bias;
                (ours - theirs).powi(2)
            })
            .sum();
        let rmse = (se / x.len() as f64).sqrt();
        worst = worst.max(rmse);
        assert!(
            rmse < 1e-3,
            "seed {seed}: prediction rmse {rmse} (oracle iters {})",
            oracle.iterations
        );
        let (lo, hi) = oracle.bias_interval;
        assert!(
            model.bias >= lo - 1e-3 && model.bias <= hi + 1e-3,
            "seed {seed}: bias {} outside [{lo}, {hi}]",
            model.bias
        );

        let kernel: Vec<Vec<f64>> = x
            .iter()
            .map(|a| {
                x.iter()
                    .map(|b| fxlab_core::svr::rbf_kernel(a, b, config.gamma).unwrap())
                    .collect()
            })
            .collect();
        let mut beta = vec![0.0; x.len()];
        for (sv, b) in model.support_vectors.iter().zip(&model.dual_coefs) {
            let i = x.iter().position(|row| row == sv).unwrap();
            beta[i] = *b;
        }
        let obj = svr_dual_objective(&kernel, &y, config.epsilon, &beta);
        assert!(
            (obj - oracle.objective).abs() < 1e-3,
            "seed {seed}: {obj} vs {}",
            oracle.objective
        );
        assert!(model.dual_coefs.iter().sum::<f64>().abs() < 1e-9);
        assert!(model.kkt_violation(&x, &y).unwrap() <= 10.0 * config.tolerance.max(1e-6));
    }
    eprintln!("worst prediction rmse {worst:e}");
}
