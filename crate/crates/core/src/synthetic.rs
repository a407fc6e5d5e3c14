//! Seeded simulators for tests, benchmarks and demo panels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{TimeSeriesFrame, YearMonth};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Driftless Gaussian random walk starting from the first innovation.
pub fn random_walk(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    white_noise(rng, n)
        .into_iter()
        .map(|e| {
            acc += e;
            acc
        })
        .collect()
}

/// Simulates `y_t = alpha + sum_tau A_tau y_{t-tau} + sigma * e_t` with
/// `coefs[tau][j][i]` the effect of variable `i` at lag `tau + 1` on `j`.
/// The first `burn_in` draws are discarded.
pub fn simulate_var(
    rng: &mut impl Rng,
    alpha: &[f64],
    coefs: &[Vec<Vec<f64>>],
    sigma: f64,
    n: usize,
    burn_in: usize,
) -> Vec<Vec<f64>> {
    let k = alpha.len();
    let p = coefs.len();
    let mut rows: Vec<Vec<f64>> = vec![vec![0.0; k]; p];
    for _ in 0..(n + burn_in) {
        let t = rows.len();
        let mut next = alpha.to_vec();
        for (tau, a) in coefs.iter().enumerate() {
            let lagged = &rows[t - tau - 1];
            for (j, row) in a.iter().enumerate() {
                next[j] += row.iter().zip(lagged).map(|(c, y)| c * y).sum::<f64>();
            }
        }
        for v in next.iter_mut() {
            let e: f64 = StandardNormal.sample(rng);
            *v += sigma * e;
        }
        rows.push(next);
    }
    rows.split_off(p + burn_in)
}

pub const PANEL_COLUMNS: [&str; 8] = [
    "forex",
    "cpi",
    "iip",
    "interest",
    "money_supply",
    "reserves",
    "stock_index",
    "trade",
];

/// Two-country monthly panel shaped like the USD/INR study: 297 months
/// starting April 1994, identical headers in both files.
///
/// Every macro variable is a drifting random walk in each country. The
/// exchange rate (present, identically, in both files) is a random walk whose
/// monthly change loads on last month's changes in the country deltas.
pub fn synthetic_panel(seed: u64) -> (TimeSeriesFrame, TimeSeriesFrame) {
    synthetic_panel_with_len(seed, 297)
}

pub fn synthetic_panel_with_len(seed: u64, months: usize) -> (TimeSeriesFrame, TimeSeriesFrame) {
    let mut rng = rng(seed);
    // (usa start, usa drift, ind start, ind drift, innovation sd, forex loading)
    let specs: [(f64, f64, f64, f64, f64, f64); 7] = [
        (150.0, 0.025, 40.0, 0.05625, 0.40, -0.30),
        (90.0, 0.0125, 60.0, 0.04375, 1.20, 0.15),
        (5.5, -0.00125, 11.0, -0.0025, 0.15, 0.20),
        (3500.0, 1.5, 250.0, 1.125, 25.0, -0.10),
        (70.0, 0.1125, 25.0, 0.15, 8.0, -0.20),
        (400.0, 0.5, 3000.0, 11.875, 60.0, 0.05),
        (-30.0, -0.01875, -8.0, -0.00625, 3.0, 0.10),
    ];
    let mut usa_cols = Vec::with_capacity(7);
    let mut ind_cols = Vec::with_capacity(7);
    for &(u0, du, v0, dv, sd, _) in &specs {
        let mut walk = |start: f64, drift: f64| {
            let mut level = start;
            (0..months)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    level += drift + sd * e;
                    level
                })
                .collect::<Vec<f64>>()
        };
        usa_cols.push(walk(u0, du));
        ind_cols.push(walk(v0, dv));
    }

    let mut forex = Vec::with_capacity(months);
    let mut level = 31.4;
    for t in 0..months {
        let mut step = 0.03;
        if t >= 2 {
            for (i, spec) in specs.iter().enumerate() {
                let d1 = usa_cols[i][t - 1] - ind_cols[i][t - 1];
                let d2 = usa_cols[i][t - 2] - ind_cols[i][t - 2];
                let drift = spec.1 - spec.3;
                // Loadings are per innovation sd of the delta change.
                step += spec.5 * 0.5 * ((d1 - d2) - drift) / (spec.4 * std::f64::consts::SQRT_2);
            }
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        level += step + 0.5 * e;
        forex.push(level);
    }

    let start = YearMonth::new(1994, 4).expect("valid month");
    let build = |cols: &[Vec<f64>]| {
        let mut all = vec![(PANEL_COLUMNS[0].to_string(), forex.clone())];
        all.extend(
            PANEL_COLUMNS[1..]
                .iter()
                .map(|s| s.to_string())
                .zip(cols.iter().cloned()),
        );
        TimeSeriesFrame::from_columns(start, all).expect("simulated values are finite")
    };
    (build(&usa_cols), build(&ind_cols))
}

/// Next-value task on a unit sine wave: input `sin(2 pi t / period)`,
/// target the value one step later, for `t = 0..len`.
pub fn sine_task(len: usize, period: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let wave = |t: usize| (2.0 * std::f64::consts::PI * t as f64 / period).sin();
    let inputs = (0..len).map(|t| vec![wave(t)]).collect();
    let targets = (0..len).map(|t| wave(t + 1)).collect();
    (inputs, targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_shape_and_determinism() {
        let (usa, ind) = synthetic_panel(1);
        assert_eq!(usa.n_rows(), 297);
        assert_eq!(usa.names(), ind.names());
        assert_eq!(usa.dates()[296].to_string(), "2018-12");
        assert_eq!(usa.column(0), ind.column(0));
        assert_eq!(synthetic_panel(1), (usa, ind));
        assert_ne!(synthetic_panel(2).0, synthetic_panel(1).0);
    }

    #[test]
    fn var_simulation_without_noise_is_deterministic_decay() {
        let mut r = rng(0);
        let rows = simulate_var(&mut r, &[1.0], &[vec![vec![0.5]]], 0.0, 5, 0);
        assert_eq!(rows, vec![vec![1.0], vec![1.5], vec![1.75], vec![1.875], vec![1.9375]]);
    }
}
