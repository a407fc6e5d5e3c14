//! Epsilon-insensitive support vector regression with an RBF kernel.
//!
//! The dual is solved over the usual `2n` multipliers `(alpha, alpha*)` by
//! pairwise sequential minimal optimization: the first index is the maximal
//! KKT violator, the second maximises the second-order objective decrease.
//! Only the differences `beta_i = alpha_i - alpha*_i` are kept in the model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvrError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("every grid cell failed to fit")]
    AllCellsFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c: 1000.0,
            gamma: 0.001,
            epsilon: 0.1,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<(), SvrError> {
        let bad = |m: &str| Err(SvrError::InvalidConfig(m.to_string()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("C must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be non-negative");
        }
        if !(self.tolerance > 0.0 && self.tolerance < self.epsilon + self.c) {
            return bad("tolerance must be positive and below epsilon + C");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub config: SvrConfig,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i - alpha*_i` for each stored support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    /// Set when every target lay within `epsilon` of the mean and no
    /// optimisation was run.
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default)]
    pub iterations: usize,
}

/// `exp(-gamma * |x1 - x2|^2)`.
pub fn rbf_kernel(x1: &[f64], x2: &[f64], gamma: f64) -> Result<f64, SvrError> {
    if x1.len() != x2.len() {
        return Err(SvrError::DimensionMismatch {
            expected: x1.len(),
            got: x2.len(),
        });
    }
    Ok(rbf(x1, x2, gamma))
}

fn rbf(x1: &[f64], x2: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize, SvrError> {
    if x.len() != y.len() {
        return Err(SvrError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(SvrError::TooFewSamples {
            needed: 2,
            got: x.len(),
        });
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(SvrError::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(SvrError::NonFinite);
    }
    Ok(d)
}

/// Dual solver state over `2n` multipliers; index `s < n` is `alpha_s`
/// (sign +1), `s >= n` is `alpha*_{s-n}` (sign -1).
struct Solver<'a> {
    n: usize,
    kernel: &'a [f64],
    c: f64,
    a: Vec<f64>,
    grad: Vec<f64>,
    #[cfg(debug_assertions)]
    lin: Vec<f64>,
}

const TAU: f64 = 1e-12;

/// Candidates closer than this count as tied and the lower index wins. A
/// pair update leaves both multipliers with equal violation, so exact ties
/// are routine and must not be decided by rounding noise.
fn tie_margin(v: f64) -> f64 {
    1e-12 * (1.0 + v.abs())
}

impl Solver<'_> {
    fn sign(&self, s: usize) -> f64 {
        if s < self.n {
            1.0
        } else {
            -1.0
        }
    }

    fn k(&self, s: usize, t: usize) -> f64 {
        self.kernel[(s % self.n) * self.n + t % self.n]
    }

    fn q(&self, s: usize, t: usize) -> f64 {
        self.sign(s) * self.sign(t) * self.k(s, t)
    }

    fn in_up(&self, s: usize) -> bool {
        if s < self.n {
            self.a[s] < self.c
        } else {
            self.a[s] > 0.0
        }
    }

    fn in_low(&self, s: usize) -> bool {
        if s < self.n {
            self.a[s] > 0.0
        } else {
            self.a[s] < self.c
        }
    }

    /// Primal-form dual objective `1/2 a'Qa + p'a` (minimised).
    #[cfg(debug_assertions)]
    fn objective(&self) -> f64 {
        self.a
            .iter()
            .zip(self.grad.iter().zip(&self.lin))
            .map(|(a, (g, p))| 0.5 * a * (g + p))
            .sum()
    }

    /// Returns the working pair, or `None` once the violation gap is below `tol`.
    fn select(&self, tol: f64) -> Option<(usize, usize)> {
        let m = 2 * self.n;
        let mut g_max = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for s in 0..m {
            if self.in_up(s) {
                let v = -self.sign(s) * self.grad[s];
                if i == usize::MAX || v > g_max + tie_margin(g_max) {
                    g_max = v;
                    i = s;
                }
            }
        }
        let mut g_min = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_decrease = f64::INFINITY;
        for t in 0..m {
            if !self.in_low(t) {
                continue;
            }
            let v = -self.sign(t) * self.grad[t];
            g_min = g_min.min(v);
            let diff = g_max - v;
            if diff > 0.0 && i != usize::MAX {
                let quad = (self.k(i, i) + self.k(t, t) - 2.0 * self.k(i, t)).max(TAU);
                let decrease = -diff * diff / quad;
                if j == usize::MAX || decrease < best_decrease - 1e-12 * best_decrease.abs() {
                    best_decrease = decrease;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < tol {
            None
        } else {
            Some((i, j))
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.a[i], self.a[j]);
        let (ai, aj) = if self.sign(i) != self.sign(j) {
            let quad = (self.q(i, i) + self.q(j, j) + 2.0 * self.q(i, j)).max(TAU);
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = old_i - old_j;
            let (mut ai, mut aj) = (old_i + delta, old_j + delta);
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
            (ai, aj)
        } else {
            let quad = (self.q(i, i) + self.q(j, j) - 2.0 * self.q(i, j)).max(TAU);
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = old_i + old_j;
            let (mut ai, mut aj) = (old_i - delta, old_j + delta);
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
            (ai, aj)
        };
        self.a[i] = ai;
        self.a[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..2 * self.n {
            self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
        }
    }

    /// Offset from free multipliers, or the middle of the feasible interval
    /// when every multiplier sits at a bound.
    fn bias(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum, mut free) = (0.0, 0usize);
        for s in 0..2 * self.n {
            let yg = self.sign(s) * self.grad[s];
            let upper = self.a[s] >= self.c;
            let lower = self.a[s] <= 0.0;
            if upper {
                if self.sign(s) < 0.0 {
                    ub = ub.min(yg)
                } else {
                    lb = lb.max(yg)
                }
            } else if lower {
                if self.sign(s) > 0.0 {
                    ub = ub.min(yg)
                } else {
                    lb = lb.max(yg)
                }
            } else {
                sum += yg;
                free += 1;
            }
        }
        let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
        -rho
    }
}

/// Fits an epsilon-SVR to rows `x` and targets `y`.
pub fn fit_svr(x: &[Vec<f64>], y: &[f64], config: &SvrConfig) -> Result<SvrModel, SvrError> {
    config.validate()?;
    check_inputs(x, y)?;
    let n = x.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    if y.iter().all(|v| (v - mean).abs() <= config.epsilon) {
        return Ok(SvrModel {
            config: *config,
            support_vectors: vec![],
            dual_coefs: vec![],
            bias: mean,
            degenerate: true,
            iterations: 0,
        });
    }

    let mut kernel = vec![0.0; n * n];
    for r in 0..n {
        for c in r..n {
            let v = rbf(&x[r], &x[c], config.gamma);
            kernel[r * n + c] = v;
            kernel[c * n + r] = v;
        }
    }
    // The constraint sum(beta) = 0 makes the dual invariant to shifting y, so
    // solve on centred targets and fold the mean back into the bias.
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let lin: Vec<f64> = (0..2 * n)
        .map(|s| {
            if s < n {
                config.epsilon - centred[s]
            } else {
                config.epsilon + centred[s - n]
            }
        })
        .collect();
    let mut solver = Solver {
        n,
        kernel: &kernel,
        c: config.c,
        a: vec![0.0; 2 * n],
        #[cfg(debug_assertions)]
        grad: lin.clone(),
        #[cfg(not(debug_assertions))]
        grad: lin,
        #[cfg(debug_assertions)]
        lin,
    };

    let mut iterations = 0;
    #[cfg(debug_assertions)]
    let mut last_objective = 0.0;
    while let Some((i, j)) = solver.select(config.tolerance) {
        if iterations == config.max_iterations {
            return Err(SvrError::NoConvergence(iterations));
        }
        solver.update(i, j);
        iterations += 1;
        #[cfg(debug_assertions)]
        {
            let obj = solver.objective();
            debug_assert!(
                obj <= last_objective + 1e-9 * (1.0 + obj.abs()),
                "dual objective increased: {last_objective} -> {obj}"
            );
            last_objective = obj;
        }
    }

    let bias = solver.bias() + mean;
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (i, xi) in x.iter().enumerate() {
        let beta = solver.a[i] - solver.a[i + n];
        if beta != 0.0 {
            support_vectors.push(xi.clone());
            dual_coefs.push(beta);
        }
    }
    Ok(SvrModel {
        config: *config,
        support_vectors,
        dual_coefs,
        bias,
        degenerate: false,
        iterations,
    })
}

impl SvrModel {
    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, SvrError> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(SvrError::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, b)| b * rbf(sv, x, self.config.gamma))
            .sum::<f64>()
            + self.bias)
    }

    pub fn predict_many(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, SvrError> {
        x.iter().map(|r| self.predict(r)).collect()
    }

    /// Largest violation of the epsilon-tube complementarity conditions over
    /// the training set: interior points must carry no weight and points at
    /// the box bound must lie on or outside the tube.
    pub fn kkt_violation(&self, x: &[Vec<f64>], y: &[f64]) -> Result<f64, SvrError> {
        let eps = self.config.epsilon;
        let c = self.config.c;
        let mut worst: f64 = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let r = yi - self.predict(xi)?;
            let beta = self
                .support_vectors
                .iter()
                .position(|sv| sv == xi)
                .map_or(0.0, |p| self.dual_coefs[p]);
            let v = if beta == 0.0 {
                (r.abs() - eps).max(0.0)
            } else if beta >= c {
                (eps - r).max(0.0)
            } else if beta <= -c {
                (r + eps).max(0.0)
            } else if beta > 0.0 {
                (r - eps).abs()
            } else {
                (r + eps).abs()
            };
            worst = worst.max(v);
        }
        Ok(worst)
    }
}

/// Free-function form of [`SvrModel::predict`].
pub fn predict_svr(model: &SvrModel, x: &[f64]) -> Result<f64, SvrError> {
    model.predict(x)
}

/// One row of the cross-validation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub config: SvrConfig,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: Option<f64>,
    pub error: Option<String>,
}

/// Expanding-window folds: the data is cut into `folds + 1` blocks and fold
/// `k` trains on blocks `0..k` and validates on block `k`.
pub fn expanding_folds(n: usize, folds: usize) -> Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    let block = n / (folds + 1);
    (1..=folds)
        .map(|k| {
            let end = if k == folds { n } else { (k + 1) * block };
            (0..k * block, k * block..end)
        })
        .collect()
}

/// Picks the config with the lowest mean validation RMSE; ties go to the
/// smaller `C`, then the smaller `gamma`.
pub fn grid_search(
    x: &[Vec<f64>],
    y: &[f64],
    grid: &[SvrConfig],
    folds: usize,
) -> Result<(SvrConfig, Vec<CvCell>), SvrError> {
    if grid.is_empty() {
        return Err(SvrError::EmptyGrid);
    }
    if folds < 2 {
        return Err(SvrError::InvalidConfig("at least 2 folds required".into()));
    }
    check_inputs(x, y)?;
    let needed = 2 * (folds + 1);
    if x.len() < needed {
        return Err(SvrError::TooFewSamples { needed, got: x.len() });
    }
    let splits = expanding_folds(x.len(), folds);
    let table: Vec<CvCell> = grid
        .iter()
        .map(|cfg| {
            let mut fold_rmse = Vec::with_capacity(folds);
            for (train, valid) in &splits {
                let fitted =
                    fit_svr(&x[train.clone()], &y[train.clone()], cfg).and_then(|m| m.predict_many(&x[valid.clone()]));
                match fitted {
                    Ok(pred) => {
                        let se: f64 = pred.iter().zip(&y[valid.clone()]).map(|(p, a)| (p - a).powi(2)).sum();
                        fold_rmse.push((se / valid.len() as f64).sqrt());
                    }
                    Err(e) => {
                        return CvCell {
                            config: *cfg,
                            fold_rmse,
                            mean_rmse: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            }
            let mean = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
            CvCell {
                config: *cfg,
                fold_rmse,
                mean_rmse: Some(mean),
                error: None,
            }
        })
        .collect();
    let best = table
        .iter()
        .filter_map(|cell| cell.mean_rmse.map(|m| (m, cell.config)))
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.c.total_cmp(&b.1.c))
                .then(a.1.gamma.total_cmp(&b.1.gamma))
        })
        .map(|(_, cfg)| cfg)
        .ok_or(SvrError::AllCellsFailed)?;
    Ok((best, table))
}
