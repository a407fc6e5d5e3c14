//! Hypothesis tests used to vet model inputs.

mod adf;
mod critical;
mod dw;
mod granger;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;

pub use adf::{adf_test, default_max_lag, AdfResult, RegressionKind};
pub use critical::{adf_critical_values, CriticalValues};
pub use dw::{durbin_watson, durbin_watson_with_band, DwInterpretation, DwResult, DEFAULT_NO_AUTOCORR_BAND};
pub use granger::{granger_causality, granger_matrix, GrangerMatrix, GrangerResult};

/// Decision level used by every test in this module.
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestError {
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("regression design matrix is singular")]
    SingularRegression,
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("residuals are all zero")]
    AllZero,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Flat record written to the test report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test: String,
    pub series: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub critical_5pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    pub decision: String,
}

impl AdfResult {
    pub fn record(&self, series: &str) -> TestRecord {
        TestRecord {
            test: "adf".into(),
            series: series.into(),
            statistic: self.statistic,
            critical_5pct: Some(self.critical_5pct),
            p_value: None,
            decision: if self.reject_unit_root {
                "stationary"
            } else {
                "non-stationary"
            }
            .into(),
        }
    }
}

impl GrangerResult {
    pub fn record(&self) -> TestRecord {
        TestRecord {
            test: "granger".into(),
            series: format!("{}->{}", self.cause, self.effect),
            statistic: self.f_statistic,
            critical_5pct: None,
            p_value: Some(self.p_value),
            decision: if self.reject_noncausality {
                "causes"
            } else {
                "no-causality"
            }
            .into(),
        }
    }
}

impl DwResult {
    pub fn record(&self, series: &str) -> TestRecord {
        TestRecord {
            test: "durbin_watson".into(),
            series: series.into(),
            statistic: self.statistic,
            critical_5pct: None,
            p_value: None,
            decision: self.interpretation.as_str().into(),
        }
    }
}
