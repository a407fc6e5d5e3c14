//! Forecast accuracy metrics on level forecasts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("prediction has {pred} values but actual has {actual}")]
    LengthMismatch { pred: usize, actual: usize },
    #[error("actual value at index {0} is zero")]
    ZeroActual(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mape: f64,
    pub mpe: f64,
    pub rmse: f64,
    pub accuracy_pct: f64,
    pub n: usize,
}

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<(), MetricsError> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    Ok(())
}

fn relative_errors(pred: &[f64], actual: &[f64]) -> Result<Vec<f64>, MetricsError> {
    check_lengths(pred, actual)?;
    pred.iter()
        .zip(actual)
        .enumerate()
        .map(|(i, (p, a))| {
            if *a == 0.0 {
                Err(MetricsError::ZeroActual(i))
            } else {
                Ok((p - a) / a)
            }
        })
        .collect()
}

/// Mean absolute percentage error, as a fraction.
pub fn mape(pred: &[f64], actual: &[f64]) -> Result<f64, MetricsError> {
    let rel = relative_errors(pred, actual)?;
    Ok(rel.iter().map(|r| r.abs()).sum::<f64>() / rel.len() as f64)
}

/// Mean percentage error, as a signed fraction. Positive means the forecast
/// runs high.
pub fn mpe(pred: &[f64], actual: &[f64]) -> Result<f64, MetricsError> {
    let rel = relative_errors(pred, actual)?;
    Ok(rel.iter().sum::<f64>() / rel.len() as f64)
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(pred, actual)?;
    let sq: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok((sq / pred.len() as f64).sqrt())
}

pub fn accuracy_pct(mape: f64) -> f64 {
    100.0 - 100.0 * mape
}

pub fn evaluate(pred: &[f64], actual: &[f64]) -> Result<MetricsReport, MetricsError> {
    let mape = mape(pred, actual)?;
    Ok(MetricsReport {
        mape,
        mpe: mpe(pred, actual)?,
        rmse: rmse(pred, actual)?,
        accuracy_pct: accuracy_pct(mape),
        n: pred.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_cases() {
        let (actual, pred) = ([100.0, 200.0], [110.0, 180.0]);
        assert!((mape(&pred, &actual).unwrap() - 0.1).abs() < 1e-15);
        assert!(mpe(&pred, &actual).unwrap().abs() < 1e-15);
        assert_eq!(rmse(&[3.0], &[0.0]).unwrap(), 3.0);
        assert!((rmse(&[1.0, 2.0], &[0.0, 0.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn perfect_forecast() {
        let y = [1.0, 2.0, 3.0];
        let r = evaluate(&y, &y).unwrap();
        assert_eq!(
            r,
            MetricsReport {
                mape: 0.0,
                mpe: 0.0,
                rmse: 0.0,
                accuracy_pct: 100.0,
                n: 3
            }
        );
    }

    #[test]
    fn accuracy_from_reported_mape() {
        assert!((accuracy_pct(0.0369) - 96.31).abs() < 1e-9);
        assert!((accuracy_pct(0.0217) - 97.83).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 0.0]), Err(MetricsError::ZeroActual(1)));
        assert!(matches!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(evaluate(&[], &[]), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn json_keys() {
        let r = evaluate(&[1.0], &[2.0]).unwrap();
        let v = serde_json::to_value(r).unwrap();
        for key in ["mape", "mpe", "rmse", "accuracy_pct", "n"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
