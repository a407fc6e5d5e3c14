//! Cross-country macroeconomic forecasting toolkit.
//!
//! The crate is organised around the forecasting pipeline for a bilateral
//! exchange rate:
//!
//! * [`data`] loads monthly panels, builds country deltas, scales and
//!   differences series, and splits them chronologically.
//! * [`stattests`] holds the augmented Dickey-Fuller unit-root test, the
//!   pairwise Granger causality F-test and the Durbin-Watson statistic.
//! * [`var`] fits vector autoregressions and produces iterated or rolling
//!   one-step forecasts.
//! * [`svr`] is an epsilon-insensitive support vector regressor with an RBF
//!   kernel and an SMO-style dual solver.
//! * [`lstm`] is a single-layer peephole LSTM trained by backpropagation
//!   through time.
//! * [`metrics`] and [`analysis`] score forecasts and explain features.

pub mod analysis;
pub mod data;
mod linalg;
pub mod lstm;
pub mod metrics;
#[cfg(any(test, feature = "oracles"))]
#[doc(hidden)]
pub mod oracles;
pub mod stattests;
pub mod svr;
pub mod synthetic;
pub mod var;

pub use data::{ScalingParams, SplitSpec, TimeSeriesFrame, YearMonth};
pub use metrics::MetricsReport;
