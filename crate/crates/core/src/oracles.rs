//! Slow, independent reference computations for tests. Nothing here shares
//! code with the production solvers.

/// Solution of the epsilon-SVR dual found by accelerated projected gradient.
#[derive(Debug, Clone)]
pub struct DualSolution {
    /// `alpha_i - alpha*_i` for every training point (zeros included).
    pub beta: Vec<f64>,
    pub bias: f64,
    /// Every bias in this closed interval minimises the primal loss for
    /// `beta`; it is a single point whenever a free support vector exists.
    pub bias_interval: (f64, f64),
    /// Dual objective `-1/2 b'Kb - eps sum|b| + y'b` (maximised).
    pub objective: f64,
    pub iterations: usize,
}

impl DualSolution {
    pub fn predict(&self, x: &[Vec<f64>], gamma: f64, at: &[f64]) -> f64 {
        self.beta
            .iter()
            .zip(x)
            .map(|(b, xi)| {
                let d2: f64 = xi.iter().zip(at).map(|(p, q)| (p - q).powi(2)).sum();
                b * (-gamma * d2).exp()
            })
            .sum::<f64>()
            + self.bias
    }
}

pub fn svr_dual_objective(kernel: &[Vec<f64>], y: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * kernel[i][j] * beta[j];
        }
    }
    -0.5 * quad - eps * beta.iter().map(|b| b.abs()).sum::<f64>() + y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
}

/// Euclidean projection of `u` onto `{0 <= a <= c, sum z_s a_s = 0}` with
/// `z_s = +1` for the first half and `-1` for the second.
fn project(u: &[f64], c: f64) -> Vec<f64> {
    let m = u.len();
    let half = m / 2;
    let z = |s: usize| if s < half { 1.0 } else { -1.0 };
    let at = |lambda: f64| -> f64 { (0..m).map(|s| z(s) * (u[s] - lambda * z(s)).clamp(0.0, c)).sum() };
    // g(lambda) is non-increasing and piecewise linear with these breakpoints.
    let mut points: Vec<f64> = (0..m).flat_map(|s| [z(s) * u[s], z(s) * (u[s] - c)]).collect();
    points.sort_by(f64::total_cmp);
    let (mut lo, mut hi) = (points[0] - 1.0, points[points.len() - 1] + 1.0);
    for w in points.windows(2) {
        if at(w[0]) >= 0.0 && at(w[1]) <= 0.0 {
            lo = w[0];
            hi = w[1];
            break;
        }
    }
    let (glo, ghi) = (at(lo), at(hi));
    let lambda = if (glo - ghi).abs() < 1e-300 {
        lo
    } else {
        lo + glo * (hi - lo) / (glo - ghi)
    };
    (0..m).map(|s| (u[s] - lambda * z(s)).clamp(0.0, c)).collect()
}

/// Interval of biases minimising the primal epsilon-insensitive loss for
/// fixed `f0 = K beta` (the loss is convex and piecewise linear).
fn primal_bias(residuals: &[f64], eps: f64) -> (f64, f64) {
    let loss = |b: f64| residuals.iter().map(|r| ((r - b).abs() - eps).max(0.0)).sum::<f64>();
    let mut points: Vec<f64> = residuals.iter().flat_map(|r| [r - eps, r + eps]).collect();
    points.sort_by(f64::total_cmp);
    let best = points.iter().map(|&b| loss(b)).fold(f64::INFINITY, f64::min);
    let flat = 1e-10 * (1.0 + best);
    let minimisers: Vec<f64> = points.iter().copied().filter(|&b| loss(b) <= best + flat).collect();
    (minimisers[0], minimisers[minimisers.len() - 1])
}

/// Solves the epsilon-SVR dual over the `2n` multipliers with FISTA and
/// gradient-based restarts. Stops once the projected-gradient fixed-point
/// residual drops below `step_tol`, or after `max_iter` iterations.
pub fn svr_dual_oracle(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    gamma: f64,
    eps: f64,
    max_iter: usize,
    step_tol: f64,
) -> DualSolution {
    let n = y.len();
    let kernel: Vec<Vec<f64>> = x
        .iter()
        .map(|a| {
            x.iter()
                .map(|b| (-gamma * a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>()).exp())
                .collect()
        })
        .collect();
    // Gradient of 1/2 a'Qa + p'a with Q = [[K, -K], [-K, K]].
    let grad = |a: &[f64]| -> Vec<f64> {
        let beta: Vec<f64> = (0..n).map(|i| a[i] - a[i + n]).collect();
        let kb: Vec<f64> = (0..n).map(|i| (0..n).map(|j| kernel[i][j] * beta[j]).sum()).collect();
        (0..2 * n)
            .map(|s| {
                if s < n {
                    kb[s] + eps - y[s]
                } else {
                    -kb[s - n] + eps + y[s - n]
                }
            })
            .collect()
    };
    // The largest row sum bounds lambda_max(K); the gradient is 2 lambda_max(K)-Lipschitz.
    let lipschitz = 2.0 * kernel.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    let pg_step = |a: &[f64], g: &[f64]| -> Vec<f64> {
        let moved: Vec<f64> = a.iter().zip(g).map(|(ai, gi)| ai - gi / lipschitz).collect();
        project(&moved, c)
    };

    let mut a = vec![0.0; 2 * n];
    let mut v = a.clone();
    let mut t: f64 = 1.0;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let g = grad(&v);
        let next = pg_step(&v, &g);
        // Restart momentum when it points uphill.
        let uphill: f64 = g.iter().zip(next.iter().zip(&a)).map(|(gi, (p, q))| gi * (p - q)).sum();
        let t_next = if uphill > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let momentum = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        v = next.iter().zip(&a).map(|(p, q)| p + momentum * (p - q)).collect();
        a = next;
        t = t_next;

        let residual: f64 = pg_step(&a, &grad(&a))
            .iter()
            .zip(&a)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual < step_tol {
            break;
        }
    }

    let beta: Vec<f64> = (0..n).map(|i| a[i] - a[i + n]).collect();
    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..n).map(|j| kernel[i][j] * beta[j]).sum::<f64>())
        .collect();
    let bias_interval = primal_bias(&residuals, eps);
    DualSolution {
        bias: 0.5 * (bias_interval.0 + bias_interval.1),
        bias_interval,
        objective: svr_dual_objective(&kernel, y, eps, &beta),
        beta,
        iterations,
    }
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Random LSTM instance (parameters and a sequence) for gradient checks.
pub fn lstm_instance(
    input_dim: usize,
    hidden_dim: usize,
    len: usize,
    seed: u64,
) -> (crate::lstm::LstmParams, crate::lstm::SupervisedSequence) {
    use rand::Rng;
    let mut r = crate::synthetic::rng(seed);
    let mut params = crate::lstm::LstmParams::zeros(input_dim, hidden_dim);
    let flat: Vec<f64> = (0..params.n_params()).map(|_| r.random_range(-1.0..1.0)).collect();
    params.set_flat(&flat).expect("length matches");
    let inputs = (0..len)
        .map(|_| (0..input_dim).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let targets = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
    let seq = crate::lstm::SupervisedSequence::new(inputs, targets).expect("valid sequence");
    (params, seq)
}

/// Relative error `|g - fd| / max(|g|, |fd|)` (Euclidean norms) between the
/// backpropagated gradient and central differences of the forward loss.
pub fn lstm_gradient_error(params: &crate::lstm::LstmParams, seq: &crate::lstm::SupervisedSequence, h: f64) -> f64 {
    use crate::lstm::{backward_sequence, forward_sequence};
    let pass = forward_sequence(params, seq).expect("forward pass");
    let analytic = backward_sequence(params, seq, &pass).expect("backward pass").flatten();
    let mut probe = params.clone();
    let numeric = central_difference(
        |flat| {
            probe.set_flat(flat).expect("length matches");
            forward_sequence(&probe, seq).expect("forward pass").loss
        },
        &params.flatten(),
        h,
    );
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
