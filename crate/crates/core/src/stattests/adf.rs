use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{adf_critical_values, CriticalValues, TestError};
use crate::linalg::least_squares_vec;

/// Deterministic terms in the Dickey-Fuller regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    #[default]
    Constant,
    ConstantTrend,
}

impl RegressionKind {
    fn n_terms(self) -> usize {
        match self {
            RegressionKind::Constant => 1,
            RegressionKind::ConstantTrend => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    /// gamma_hat / se(gamma_hat).
    pub statistic: f64,
    pub gamma_hat: f64,
    pub se_gamma: f64,
    pub lag_order_used: usize,
    pub regression_kind: RegressionKind,
    /// Observations in the final regression.
    pub nobs: usize,
    pub critical_values: CriticalValues,
    pub critical_5pct: f64,
    pub reject_unit_root: bool,
}

/// Schwert's rule of thumb, `floor(12 * (n / 100)^(1/4))`.
pub fn default_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

struct AdfFit {
    gamma: f64,
    se: f64,
    rss: f64,
    nobs: usize,
    n_params: usize,
}

/// Regresses `dy[t]` on deterministic terms, `y[t-1]` and `lags` lagged
/// differences, for `t` in `first..y.len()`.
fn fit_adf(y: &[f64], dy: &[f64], lags: usize, first: usize, kind: RegressionKind) -> Result<AdfFit, TestError> {
    let nobs = y.len() - first;
    let det = kind.n_terms();
    let n_params = det + 1 + lags;
    if nobs <= n_params {
        return Err(TestError::SingularRegression);
    }
    let mut x = DMatrix::zeros(nobs, n_params);
    let mut target = DVector::zeros(nobs);
    for (r, t) in (first..y.len()).enumerate() {
        x[(r, 0)] = 1.0;
        if kind == RegressionKind::ConstantTrend {
            x[(r, 1)] = t as f64;
        }
        x[(r, det)] = y[t - 1];
        for i in 1..=lags {
            // dy[k] = y[k + 1] - y[k], so Δy_{t-i} = dy[t - i - 1].
            x[(r, det + i)] = dy[t - i - 1];
        }
        target[r] = dy[t - 1];
    }
    let fit = least_squares_vec(&x, &target).map_err(|_| TestError::SingularRegression)?;
    let rss = fit.rss(0);
    let sigma2 = rss / (nobs - n_params) as f64;
    let se = (sigma2 * fit.xtx_inv_diag(det)).sqrt();
    if se.is_nan() || se <= 0.0 {
        return Err(TestError::SingularRegression);
    }
    Ok(AdfFit {
        gamma: fit.coef[(det, 0)],
        se,
        rss,
        nobs,
        n_params,
    })
}

/// Augmented Dickey-Fuller test of a unit root in `series`.
///
/// The augmentation order is chosen by AIC over `0..=max_lag` on a common
/// sample, then the chosen regression is refitted on all usable rows. The
/// search range is capped so that every candidate regression keeps at least
/// half the sample.
pub fn adf_test(series: &[f64], max_lag: usize, kind: RegressionKind) -> Result<AdfResult, TestError> {
    let n = series.len();
    if n < max_lag + 10 {
        return Err(TestError::SeriesTooShort {
            needed: max_lag + 10,
            got: n,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(TestError::NonFinite);
    }
    let max_lag = max_lag.min((n / 2).saturating_sub(kind.n_terms() + 1));
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();

    let mut best: Option<(f64, usize)> = None;
    for lags in 0..=max_lag {
        let fit = fit_adf(series, &dy, lags, max_lag + 1, kind)?;
        let nobs = fit.nobs as f64;
        let aic = nobs * (fit.rss / nobs).ln() + 2.0 * fit.n_params as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lags));
        }
    }
    let lags = best.map(|(_, l)| l).unwrap_or(0);
    let fit = fit_adf(series, &dy, lags, lags + 1, kind)?;
    let statistic = fit.gamma / fit.se;
    let critical_values = adf_critical_values(kind, fit.nobs);
    Ok(AdfResult {
        statistic,
        gamma_hat: fit.gamma,
        se_gamma: fit.se,
        lag_order_used: lags,
        regression_kind: kind,
        nobs: fit.nobs,
        critical_values,
        critical_5pct: critical_values.five_pct,
        reject_unit_root: statistic < critical_values.five_pct,
    })
}
