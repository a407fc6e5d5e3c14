use serde::{Deserialize, Serialize};

use super::RegressionKind;

/// MacKinnon (2010) response-surface coefficients for the single-series
/// Dickey-Fuller tau distribution: `b0 + b1/T + b2/T^2 + b3/T^3`,
/// rows for the 1%, 5% and 10% levels.
const TAU_CONSTANT: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];

const TAU_CONSTANT_TREND: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.380],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub one_pct: f64,
    pub five_pct: f64,
    pub ten_pct: f64,
}

/// Finite-sample Dickey-Fuller critical values for `nobs` regression observations.
pub fn adf_critical_values(kind: RegressionKind, nobs: usize) -> CriticalValues {
    let table = match kind {
        RegressionKind::Constant => &TAU_CONSTANT,
        RegressionKind::ConstantTrend => &TAU_CONSTANT_TREND,
    };
    let inv = 1.0 / nobs.max(1) as f64;
    let eval = |b: &[f64; 4]| b[0] + inv * (b[1] + inv * (b[2] + inv * b[3]));
    CriticalValues {
        one_pct: eval(&table[0]),
        five_pct: eval(&table[1]),
        ten_pct: eval(&table[2]),
    }
}
