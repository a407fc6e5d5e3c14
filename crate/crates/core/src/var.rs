//! Vector autoregression fitted equation by equation with OLS.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, TimeSeriesFrame};
use crate::linalg::least_squares;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VarError {
    #[error("lag order must be at least 1")]
    InvalidLag,
    #[error("series too short: need at least {needed} rows, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("lagged design matrix is singular")]
    SingularRegression,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Fitted VAR(p): `y_t = alpha + sum_tau A_tau y_{t-tau} + e_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    pub p: usize,
    pub names: Vec<String>,
    pub alpha: Vec<f64>,
    /// `coefs[tau - 1][j][i]`: effect of variable `i` at lag `tau` on equation `j`.
    #[serde(rename = "A")]
    pub coefs: Vec<Vec<Vec<f64>>>,
    /// Maximum-likelihood residual covariance.
    pub sigma: Vec<Vec<f64>>,
    /// Residual rows aligned with fitted rows `p..n`; not serialized.
    #[serde(skip)]
    pub residuals: Vec<Vec<f64>>,
}

impl VarModel {
    pub fn k(&self) -> usize {
        self.names.len()
    }

    /// One-step prediction from `lags`, where `lags(tau)` yields the row at lag `tau`.
    fn predict_with<'a>(&self, lags: impl Fn(usize) -> &'a [f64]) -> Vec<f64> {
        let mut out = self.alpha.clone();
        for (tau, a) in self.coefs.iter().enumerate() {
            let row = lags(tau + 1);
            for (j, eq) in a.iter().enumerate() {
                out[j] += eq.iter().zip(row).map(|(c, y)| c * y).sum::<f64>();
            }
        }
        out
    }

    /// Companion-form spectral radius; below 1 means the process is stable.
    pub fn spectral_radius(&self) -> f64 {
        let (k, p) = (self.k(), self.p);
        let mut companion = DMatrix::zeros(k * p, k * p);
        for (tau, a) in self.coefs.iter().enumerate() {
            for j in 0..k {
                for i in 0..k {
                    companion[(j, tau * k + i)] = a[j][i];
                }
            }
        }
        for r in k..k * p {
            companion[(r, r - k)] = 1.0;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Unconditional mean `(I - sum A_tau)^-1 alpha`, if defined.
    pub fn implied_mean(&self) -> Option<Vec<f64>> {
        let k = self.k();
        let mut m = DMatrix::<f64>::identity(k, k);
        for a in &self.coefs {
            for j in 0..k {
                for i in 0..k {
                    m[(j, i)] -= a[j][i];
                }
            }
        }
        let mu = m.lu().solve(&DVector::from_column_slice(&self.alpha))?;
        Some(mu.iter().copied().collect())
    }
}

/// Lagged regressors `[1, y_{t-1}, ..., y_{t-p}]` for rows `t` in `first..n`,
/// with the matching response rows.
pub(crate) fn lagged_design(frame: &TimeSeriesFrame, p: usize, first: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, k) = (frame.n_rows(), frame.n_cols());
    let rows = n - first;
    let mut x = DMatrix::zeros(rows, 1 + k * p);
    let mut y = DMatrix::zeros(rows, k);
    for (r, t) in (first..n).enumerate() {
        x[(r, 0)] = 1.0;
        for tau in 1..=p {
            for (i, &v) in frame.row(t - tau).iter().enumerate() {
                x[(r, 1 + (tau - 1) * k + i)] = v;
            }
        }
        for (j, &v) in frame.row(t).iter().enumerate() {
            y[(r, j)] = v;
        }
    }
    (x, y)
}

fn fit_on_rows(frame: &TimeSeriesFrame, p: usize, first: usize) -> Result<VarModel, VarError> {
    let k = frame.n_cols();
    let (x, y) = lagged_design(frame, p, first);
    let fit = least_squares(&x, &y).map_err(|_| VarError::SingularRegression)?;
    let t_eff = x.nrows() as f64;
    let sigma_m = fit.residuals.transpose() * &fit.residuals / t_eff;
    let coefs = (0..p)
        .map(|tau| {
            (0..k)
                .map(|j| (0..k).map(|i| fit.coef[(1 + tau * k + i, j)]).collect())
                .collect()
        })
        .collect();
    Ok(VarModel {
        p,
        names: frame.names().to_vec(),
        alpha: (0..k).map(|j| fit.coef[(0, j)]).collect(),
        coefs,
        sigma: (0..k).map(|r| sigma_m.row(r).iter().copied().collect()).collect(),
        residuals: (0..fit.residuals.nrows())
            .map(|r| fit.residuals.row(r).iter().copied().collect())
            .collect(),
    })
}

/// Fits every equation of a VAR(`p`) on all usable rows of `frame`.
pub fn fit_var(frame: &TimeSeriesFrame, p: usize) -> Result<VarModel, VarError> {
    if p == 0 {
        return Err(VarError::InvalidLag);
    }
    let needed = frame.n_cols() * p + p + 2;
    if frame.n_rows() < needed {
        return Err(VarError::SeriesTooShort {
            needed,
            got: frame.n_rows(),
        });
    }
    fit_on_rows(frame, p, p)
}

fn log_det(sigma: &[Vec<f64>]) -> Option<f64> {
    let k = sigma.len();
    let m = DMatrix::from_fn(k, k, |r, c| sigma[r][c]);
    let chol = m.cholesky()?;
    Some(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `ln det Sigma_p + 2 (k^2 p + k) / T` for `p = 1..=max_lag` on the common
/// sample of rows `max_lag..n`.
pub fn aic_table(frame: &TimeSeriesFrame, max_lag: usize) -> Result<Vec<f64>, VarError> {
    if max_lag == 0 {
        return Err(VarError::InvalidLag);
    }
    let k = frame.n_cols();
    let needed = k * max_lag + max_lag + 10;
    if frame.n_rows() < needed {
        return Err(VarError::SeriesTooShort {
            needed,
            got: frame.n_rows(),
        });
    }
    let t_eff = (frame.n_rows() - max_lag) as f64;
    (1..=max_lag)
        .map(|p| {
            let model = fit_on_rows(frame, p, max_lag)?;
            let ld = log_det(&model.sigma).ok_or(VarError::SingularRegression)?;
            Ok(ld + 2.0 * ((k * k * p + k) as f64) / t_eff)
        })
        .collect()
}

/// Lag order in `1..=max_lag` minimising AIC; ties go to the smaller order.
pub fn select_lag_aic(frame: &TimeSeriesFrame, max_lag: usize) -> Result<usize, VarError> {
    let table = aic_table(frame, max_lag)?;
    let mut best = 0;
    for (i, &v) in table.iter().enumerate() {
        if v < table[best] {
            best = i;
        }
    }
    Ok(best + 1)
}

/// Iterated multi-step forecasts; `history` holds the last `p` rows, oldest first.
pub fn forecast_var(model: &VarModel, history: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>, VarError> {
    if history.len() != model.p {
        return Err(VarError::ShapeMismatch(format!(
            "history has {} rows, model needs {}",
            history.len(),
            model.p
        )));
    }
    if let Some(row) = history.iter().find(|r| r.len() != model.k()) {
        return Err(VarError::ShapeMismatch(format!(
            "history row has {} values, model has {} variables",
            row.len(),
            model.k()
        )));
    }
    let mut window = history.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let len = window.len();
        let next = model.predict_with(|tau| window[len - tau].as_slice());
        window.push(next.clone());
        out.push(next);
    }
    Ok(out)
}

/// One-step-ahead level forecasts of `target` over `test_range` of a
/// differenced `frame`. Each prediction uses actual lagged differences and
/// is added to `level_anchor[i]`, the last observed level before row `i`.
pub fn rolling_one_step(
    model: &VarModel,
    frame: &TimeSeriesFrame,
    test_range: Range<usize>,
    target: &str,
    level_anchor: &[f64],
) -> Result<Vec<f64>, VarError> {
    if frame.names() != model.names.as_slice() {
        return Err(VarError::ShapeMismatch("frame columns differ from model".into()));
    }
    if test_range.is_empty() {
        return Ok(Vec::new());
    }
    if level_anchor.len() != test_range.len() {
        return Err(VarError::ShapeMismatch(format!(
            "{} anchors for {} test rows",
            level_anchor.len(),
            test_range.len()
        )));
    }
    if test_range.start < model.p || test_range.end > frame.n_rows() {
        return Err(VarError::ShapeMismatch(format!(
            "test rows {test_range:?} need {} prior rows within a {}-row frame",
            model.p,
            frame.n_rows()
        )));
    }
    let j = frame.column_index(target)?;
    Ok(test_range
        .zip(level_anchor)
        .map(|(t, anchor)| anchor + model.predict_with(|tau| frame.row(t - tau))[j])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::YearMonth;
    use crate::synthetic::{rng, simulate_var};

    fn frame_from_rows(names: &[&str], rows: &[Vec<f64>]) -> TimeSeriesFrame {
        let cols = names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.to_string(), rows.iter().map(|r| r[j]).collect()))
            .collect();
        TimeSeriesFrame::from_columns(YearMonth::new(2000, 1).unwrap(), cols).unwrap()
    }

    fn constant_model(c: Vec<f64>, p: usize) -> VarModel {
        let k = c.len();
        VarModel {
            p,
            names: (0..k).map(|i| format!("v{i}")).collect(),
            alpha: c,
            coefs: vec![vec![vec![0.0; k]; k]; p],
            sigma: vec![vec![0.0; k]; k],
            residuals: vec![],
        }
    }

    #[test]
    fn noiseless_ar1_is_recovered_exactly() {
        let y: Vec<f64> = (0..30).map(|t| 64.0 * 0.5f64.powi(t)).collect();
        let f = frame_from_rows(&["y"], &y.iter().map(|&v| vec![v]).collect::<Vec<_>>());
        let m = fit_var(&f, 1).unwrap();
        assert!((m.coefs[0][0][0] - 0.5).abs() < 1e-10);
        assert!(m.alpha[0].abs() < 1e-10);
    }

    #[test]
    fn normal_equations_hold() {
        let a = vec![
            vec![vec![0.4, 0.1], vec![-0.2, 0.3]],
            vec![vec![0.1, 0.0], vec![0.05, -0.1]],
        ];
        let rows = simulate_var(&mut rng(3), &[0.5, -1.0], &a, 1.0, 300, 50);
        let f = frame_from_rows(&["a", "b"], &rows);
        let m = fit_var(&f, 2).unwrap();
        let (x, y) = lagged_design(&f, 2, 2);
        for j in 0..2 {
            let e = DVector::from_iterator(m.residuals.len(), m.residuals.iter().map(|r| r[j]));
            let ne = x.transpose() * e;
            let scale = (x.transpose() * y.column(j)).norm();
            assert!(ne.norm() <= 1e-8 * scale, "{}", ne.norm() / scale);
        }
        // Sigma is symmetric PSD.
        assert!((m.sigma[0][1] - m.sigma[1][0]).abs() < 1e-12);
        assert!(log_det(&m.sigma).is_some());
    }

    #[test]
    fn zero_lag_is_rejected() {
        let f = frame_from_rows(&["y"], &(0..20).map(|t| vec![t as f64]).collect::<Vec<_>>());
        assert_eq!(fit_var(&f, 0).unwrap_err(), VarError::InvalidLag);
    }

    #[test]
    fn forecast_examples() {
        let m = constant_model(vec![2.0, -1.0], 2);
        let f = forecast_var(&m, &[vec![0.0, 0.0], vec![5.0, 5.0]], 3).unwrap();
        assert!(f.iter().all(|r| r == &vec![2.0, -1.0]));

        let mut m = constant_model(vec![0.0], 1);
        m.coefs[0][0][0] = 0.5;
        assert_eq!(
            forecast_var(&m, &[vec![8.0]], 3).unwrap(),
            vec![vec![4.0], vec![2.0], vec![1.0]]
        );

        let m = constant_model(vec![0.0, 0.0], 3);
        assert!(matches!(
            forecast_var(&m, &[vec![0.0, 0.0], vec![0.0, 0.0]], 1),
            Err(VarError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn stable_forecasts_converge_to_implied_mean() {
        let a = vec![vec![vec![0.5, 0.2], vec![-0.1, 0.4]]];
        let rows = simulate_var(&mut rng(8), &[1.0, 2.0], &a, 0.5, 500, 100);
        let f = frame_from_rows(&["a", "b"], &rows);
        let m = fit_var(&f, 1).unwrap();
        assert!(m.spectral_radius() < 1.0);
        let mu = m.implied_mean().unwrap();
        let fc = forecast_var(&m, &[vec![50.0, -50.0]], 100).unwrap();
        let last = fc.last().unwrap();
        for j in 0..2 {
            assert!((last[j] - mu[j]).abs() < 1e-6 * (1.0 + mu[j].abs()));
        }
    }

    #[test]
    fn rolling_forecast_examples() {
        let rows: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64, (t * t) as f64]).collect();
        let f = frame_from_rows(&["v0", "v1"], &rows);

        let m = constant_model(vec![0.0, 0.0], 1);
        let anchors = [10.0, 11.0, 12.5];
        assert_eq!(
            rolling_one_step(&m, &f, 3..6, "v0", &anchors).unwrap(),
            anchors.to_vec()
        );
        assert!(rolling_one_step(&m, &f, 3..3, "v0", &[]).unwrap().is_empty());

        let mut m = constant_model(vec![0.3, 0.0], 2);
        m.coefs[0][0] = vec![0.5, -0.1];
        m.coefs[1][0] = vec![0.25, 0.2];
        // t = 4: 0.3 + 0.5*3 - 0.1*9 + 0.25*2 + 0.2*4 = 2.2, plus anchor 100.
        let got = rolling_one_step(&m, &f, 4..5, "v0", &[100.0]).unwrap();
        assert!((got[0] - 102.2).abs() < 1e-12);

        assert!(matches!(
            rolling_one_step(&m, &f, 1..3, "v0", &[0.0, 0.0]),
            Err(VarError::ShapeMismatch(_))
        ));
        assert!(matches!(
            rolling_one_step(&m, &f, 4..6, "v0", &[0.0]),
            Err(VarError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn aic_prefers_true_order_on_var2() {
        let a = vec![
            vec![vec![0.3, 0.0, 0.1], vec![0.0, 0.3, 0.0], vec![0.1, 0.0, 0.2]],
            vec![vec![0.4, 0.0, 0.0], vec![0.0, -0.4, 0.0], vec![0.0, 0.2, 0.3]],
        ];
        let rows = simulate_var(&mut rng(4), &[0.0; 3], &a, 1.0, 1000, 100);
        let f = frame_from_rows(&["a", "b", "c"], &rows);
        let p = select_lag_aic(&f, 5).unwrap();
        assert_eq!(p, 2);
        assert!(select_lag_aic(&f, 1).unwrap() <= 1);
    }

    #[test]
    fn json_schema_fields() {
        let m = constant_model(vec![1.0], 1);
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        for key in ["p", "names", "alpha", "A", "sigma"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v.get("residuals").is_none());
    }
}
