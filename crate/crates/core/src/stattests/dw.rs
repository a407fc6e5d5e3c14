use serde::{Deserialize, Serialize};

use super::TestError;

/// Statistics inside this closed band read as "no autocorrelation".
pub const DEFAULT_NO_AUTOCORR_BAND: (f64, f64) = (1.7, 2.3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DwInterpretation {
    PositiveAutocorr,
    None,
    NegativeAutocorr,
}

impl DwInterpretation {
    pub fn as_str(self) -> &'static str {
        match self {
            DwInterpretation::PositiveAutocorr => "positive-autocorr",
            DwInterpretation::None => "none",
            DwInterpretation::NegativeAutocorr => "negative-autocorr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwResult {
    pub statistic: f64,
    pub interpretation: DwInterpretation,
}

pub fn durbin_watson(residuals: &[f64]) -> Result<DwResult, TestError> {
    durbin_watson_with_band(residuals, DEFAULT_NO_AUTOCORR_BAND)
}

pub fn durbin_watson_with_band(residuals: &[f64], band: (f64, f64)) -> Result<DwResult, TestError> {
    if residuals.len() < 2 {
        return Err(TestError::SeriesTooShort {
            needed: 2,
            got: residuals.len(),
        });
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(TestError::NonFinite);
    }
    let den: f64 = residuals.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return Err(TestError::AllZero);
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let statistic = (num / den).clamp(0.0, 4.0);
    let interpretation = if statistic < band.0 {
        DwInterpretation::PositiveAutocorr
    } else if statistic > band.1 {
        DwInterpretation::NegativeAutocorr
    } else {
        DwInterpretation::None
    };
    Ok(DwResult {
        statistic,
        interpretation,
    })
}
