use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{TestError, SIGNIFICANCE};
use crate::data::TimeSeriesFrame;
use crate::linalg::least_squares_vec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub cause: String,
    pub effect: String,
    pub lags: usize,
    pub f_statistic: f64,
    pub p_value: f64,
    pub reject_noncausality: bool,
}

/// Pairwise results; `results[i][j]` tests `names[i]` causing `names[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerMatrix {
    pub names: Vec<String>,
    pub lags: usize,
    pub results: Vec<Vec<Option<GrangerResult>>>,
}

impl GrangerMatrix {
    pub fn iter(&self) -> impl Iterator<Item = &GrangerResult> {
        self.results.iter().flatten().flatten()
    }
}

fn rss(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64, TestError> {
    least_squares_vec(design, y)
        .map(|fit| fit.rss(0))
        .map_err(|_| TestError::SingularRegression)
}

/// F-test of whether `lags` lags of `cause` improve an autoregression of
/// `effect` on its own `lags` lags (both with an intercept).
pub fn granger_causality(
    frame: &TimeSeriesFrame,
    cause: &str,
    effect: &str,
    lags: usize,
) -> Result<GrangerResult, TestError> {
    if lags == 0 {
        return Err(TestError::InvalidArgument("lags must be >= 1".into()));
    }
    let rows = frame.n_rows();
    if rows < 3 * lags + 10 {
        return Err(TestError::SeriesTooShort {
            needed: 3 * lags + 10,
            got: rows,
        });
    }
    let x = frame.column_by_name(cause)?;
    let y = frame.column_by_name(effect)?;
    let n = rows - lags;
    let mut unrestricted = DMatrix::zeros(n, 1 + 2 * lags);
    let mut target = DVector::zeros(n);
    for (r, t) in (lags..rows).enumerate() {
        unrestricted[(r, 0)] = 1.0;
        for l in 1..=lags {
            unrestricted[(r, l)] = y[t - l];
            unrestricted[(r, lags + l)] = x[t - l];
        }
        target[r] = y[t];
    }
    let restricted = unrestricted.columns(0, 1 + lags).into_owned();
    let rss_u = rss(&unrestricted, &target)?;
    let rss_r = rss(&restricted, &target)?;

    let df1 = lags as f64;
    let df2 = (n - 2 * lags - 1) as f64;
    let (f_statistic, p_value) = if rss_u > 0.0 {
        let f = (((rss_r - rss_u) / df1) / (rss_u / df2)).max(0.0);
        let dist = FisherSnedecor::new(df1, df2).map_err(|e| TestError::InvalidArgument(e.to_string()))?;
        (f, dist.sf(f).clamp(0.0, 1.0))
    } else if rss_r > 0.0 {
        // Cause lags explain the effect exactly.
        (f64::MAX, 0.0)
    } else {
        (0.0, 1.0)
    };
    Ok(GrangerResult {
        cause: cause.to_string(),
        effect: effect.to_string(),
        lags,
        f_statistic,
        p_value,
        reject_noncausality: p_value < SIGNIFICANCE,
    })
}

/// Runs [`granger_causality`] over every ordered pair of distinct columns.
pub fn granger_matrix(frame: &TimeSeriesFrame, lags: usize) -> Result<GrangerMatrix, TestError> {
    let names = frame.names().to_vec();
    let mut results = Vec::with_capacity(names.len());
    for cause in &names {
        let mut row = Vec::with_capacity(names.len());
        for effect in &names {
            row.push(if cause == effect {
                None
            } else {
                Some(granger_causality(frame, cause, effect, lags)?)
            });
        }
        results.push(row);
    }
    Ok(GrangerMatrix { names, lags, results })
}
