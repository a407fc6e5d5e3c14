//! Feature analysis: Pearson correlations and random-forest importance by
//! variance decrease.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TimeSeriesFrame;
use crate::synthetic::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("series {0} has zero variance")]
    ZeroVariance(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no tree found a split that reduces variance")]
    NoSplit,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(format!("{} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooFewSamples {
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 {
        return Err(AnalysisError::ZeroVariance("x".to_string()));
    }
    if syy == 0.0 {
        return Err(AnalysisError::ZeroVariance("y".to_string()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("variable,{}\n", self.names.join(","));
        for (name, row) in self.names.iter().zip(&self.values) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        out
    }
}

pub fn correlation_matrix(frame: &TimeSeriesFrame) -> Result<CorrelationMatrix, AnalysisError> {
    if frame.n_rows() < 2 {
        return Err(AnalysisError::TooFewSamples {
            needed: 2,
            got: frame.n_rows(),
        });
    }
    let k = frame.n_cols();
    let columns: Vec<Vec<f64>> = (0..k).map(|j| frame.column(j)).collect();
    for (name, col) in frame.names().iter().zip(&columns) {
        if col.iter().all(|v| *v == col[0]) {
            return Err(AnalysisError::ZeroVariance(name.clone()));
        }
    }
    let mut values = vec![vec![1.0; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let r = pearson(&columns[a], &columns[b]).map_err(|e| match e {
                AnalysisError::ZeroVariance(_) => AnalysisError::ZeroVariance(frame.names()[a].clone()),
                other => other,
            })?;
            values[a][b] = r;
            values[b][a] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: frame.names().to_vec(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 200,
            max_depth: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub names: Vec<String>,
    pub importances: Vec<f64>,
    pub trees: usize,
    pub seed: u64,
}

impl ImportanceReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("feature,importance\n");
        for (name, v) in self.names.iter().zip(&self.importances) {
            out.push_str(&format!("{name},{v}\n"));
        }
        out
    }
}

pub const MIN_IMPORTANCE_SAMPLES: usize = 10;

struct Split {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

/// Sum of squared deviations from the mean.
fn sse(sum: f64, sum_sq: f64, n: f64) -> f64 {
    (sum_sq - sum * sum / n).max(0.0)
}

/// Best variance-reducing split of `rows` on `feature`, scanning midpoints of
/// the sorted unique values. The decrease is per sample at the node.
fn best_split_on(x: &[Vec<f64>], y: &[f64], rows: &[usize], feature: usize, centre: f64) -> Option<Split> {
    let mut order: Vec<(f64, f64)> = rows.iter().map(|&r| (x[r][feature], y[r] - centre)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = order.len() as f64;
    let total: f64 = order.iter().map(|p| p.1).sum();
    let total_sq: f64 = order.iter().map(|p| p.1 * p.1).sum();
    let parent = sse(total, total_sq, n);
    let (mut left, mut left_sq) = (0.0, 0.0);
    let mut best: Option<Split> = None;
    for i in 0..order.len() - 1 {
        left += order[i].1;
        left_sq += order[i].1 * order[i].1;
        if order[i].0 == order[i + 1].0 {
            continue;
        }
        let nl = (i + 1) as f64;
        let children = sse(left, left_sq, nl) + sse(total - left, total_sq - left_sq, n - nl);
        let decrease = (parent - children) / n;
        if best
            .as_ref()
            .is_none_or(|b| decrease > b.decrease + 1e-12 * b.decrease.abs())
        {
            best = Some(Split {
                feature,
                threshold: 0.5 * (order[i].0 + order[i + 1].0),
                decrease,
            });
        }
    }
    best
}

fn choose(x: &[Vec<f64>], y: &[f64], rows: &[usize], features: &[usize]) -> Option<Split> {
    let centre = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
    let mut best: Option<Split> = None;
    for &f in features {
        if let Some(s) = best_split_on(x, y, rows, f, centre) {
            if best
                .as_ref()
                .is_none_or(|b| s.decrease > b.decrease + 1e-12 * b.decrease.abs())
            {
                best = Some(s);
            }
        }
    }
    best
}

struct Forest<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    max_depth: usize,
    /// Bootstrap sample size.
    total: f64,
}

fn grow(forest: &Forest, rows: Vec<usize>, depth: usize, r: &mut impl Rng, credit: &mut [f64]) {
    let Forest { x, y, .. } = *forest;
    if depth >= forest.max_depth || rows.len() < 2 {
        return;
    }
    let d = x[0].len();
    let k = (d as f64).sqrt().ceil() as usize;
    let mut subset: Vec<usize> = sample(r, d, k.min(d)).into_vec();
    subset.sort_unstable();
    let split = choose(x, y, &rows, &subset).or_else(|| {
        // Every sampled feature is constant here: try the rest.
        let rest: Vec<usize> = (0..d).filter(|f| !subset.contains(f)).collect();
        choose(x, y, &rows, &rest)
    });
    let Some(split) = split else { return };
    if split.decrease <= 0.0 {
        return;
    }
    credit[split.feature] += rows.len() as f64 / forest.total * split.decrease;
    let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
    grow(forest, left, depth + 1, r, credit);
    grow(forest, right, depth + 1, r, credit);
}

/// Random-forest feature importance: each split credits its feature with
/// the node's share of the bootstrap sample times the variance decrease;
/// credits are summed over trees and normalised to sum to one.
pub fn tree_importance(
    names: &[String],
    x: &[Vec<f64>],
    y: &[f64],
    config: &ForestConfig,
) -> Result<ImportanceReport, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(format!(
            "{} rows vs {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < MIN_IMPORTANCE_SAMPLES {
        return Err(AnalysisError::TooFewSamples {
            needed: MIN_IMPORTANCE_SAMPLES,
            got: x.len(),
        });
    }
    let d = names.len();
    if d == 0 || x.iter().any(|row| row.len() != d) {
        return Err(AnalysisError::LengthMismatch(format!(
            "every row must have {d} features"
        )));
    }
    if config.trees == 0 || config.max_depth == 0 {
        return Err(AnalysisError::InvalidArgument(
            "trees and max_depth must be positive".to_string(),
        ));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidArgument("inputs must be finite".to_string()));
    }
    let n = x.len();
    let mut master = rng(config.seed);
    let tree_seeds: Vec<u64> = (0..config.trees).map(|_| master.random()).collect();
    let forest = Forest {
        x,
        y,
        max_depth: config.max_depth,
        total: n as f64,
    };
    let mut credit = vec![0.0; d];
    for seed in tree_seeds {
        let mut r = rng(seed);
        let rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
        grow(&forest, rows, 0, &mut r, &mut credit);
    }
    let sum: f64 = credit.iter().sum();
    if sum <= 0.0 {
        return Err(AnalysisError::NoSplit);
    }
    Ok(ImportanceReport {
        names: names.to_vec(),
        importances: credit.iter().map(|c| c / sum).collect(),
        trees: config.trees,
        seed: config.seed,
    })
}
