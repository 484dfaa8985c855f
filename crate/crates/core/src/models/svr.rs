//! Epsilon-insensitive support vector regression with an RBF kernel,
//! trained by sequential minimal optimization on the 2n-variable dual.

use serde::{Deserialize, Serialize};

use super::window::{Regressor, Windowed};
use crate::error::{Error, Result};
use crate::series::FeatureFrame;

/// Stopping tolerance on the maximal KKT violation.
pub const KKT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// `None` means `1 / feature_count`.
    pub gamma: Option<f64>,
    pub window: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            gamma: None,
            window: 8,
        }
    }
}

impl SvrParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(self.c > 0.0) || !self.c.is_finite() {
            return bad("c", "must be positive");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon", "must be non-negative");
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return bad("gamma", "must be positive");
            }
        }
        if self.window == 0 {
            return bad("window", "must be at least 1");
        }
        Ok(())
    }
}

pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(rbf(x, y, gamma))
}

fn rbf(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// A fitted kernel machine over scaled feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svr {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha - alpha*` for each support vector.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub params: SvrParams,
    pub iterations: usize,
}

/// Dual objective `1/2 b'Kb + eps*sum|.| - z'b` written in terms of the
/// split variables, for `b = alpha - alpha*`.
pub fn dual_objective(kernel: &[f64], targets: &[f64], alpha: &[f64], alpha_star: &[f64], epsilon: f64) -> f64 {
    let n = targets.len();
    let beta: Vec<f64> = alpha.iter().zip(alpha_star).map(|(a, s)| a - s).collect();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * beta[j] * kernel[i * n + j];
        }
    }
    let lin: f64 = (0..n)
        .map(|i| epsilon * (alpha[i] + alpha_star[i]) - targets[i] * beta[i])
        .sum();
    0.5 * quad + lin
}

pub fn kernel_matrix(rows: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = rows.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(&rows[i], &rows[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Full solver state, exposed for convergence checks.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

/// Solves the epsilon-SVR dual with working-set selection using second
/// order information. Variables `0..n` are `alpha` (label +1), `n..2n` are
/// `alpha*` (label -1).
pub fn smo(kernel: &[f64], targets: &[f64], c: f64, epsilon: f64) -> Result<SmoSolution> {
    let n = targets.len();
    let l = 2 * n;
    let y = |t: usize| if t < n { 1.0 } else { -1.0 };
    let k = |a: usize, b: usize| kernel[(a % n) * n + b % n];
    let q = |a: usize, b: usize| y(a) * y(b) * k(a, b);
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { epsilon - targets[t] } else { epsilon + targets[t - n] })
        .collect();
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let max_iter = 10_000 * l.max(1);

    let mut iter = 0;
    loop {
        // i: maximal violating index
        let mut gmax = f64::NEG_INFINITY;
        let mut i = None;
        for t in 0..l {
            let score = if y(t) > 0.0 {
                (!upper(alpha[t])).then(|| -grad[t])
            } else {
                (!lower(alpha[t])).then_some(grad[t])
            };
            if let Some(s) = score {
                if s >= gmax {
                    gmax = s;
                    i = Some(t);
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = None;
        let mut best = f64::INFINITY;
        if let Some(i) = i {
            for t in 0..l {
                let (grad_diff, quad) = if y(t) > 0.0 {
                    if lower(alpha[t]) {
                        continue;
                    }
                    gmax2 = gmax2.max(grad[t]);
                    (gmax + grad[t], 1.0 + 1.0 - 2.0 * y(i) * q(i, t))
                } else {
                    if upper(alpha[t]) {
                        continue;
                    }
                    gmax2 = gmax2.max(-grad[t]);
                    (gmax - grad[t], 1.0 + 1.0 + 2.0 * y(i) * q(i, t))
                };
                if grad_diff > 0.0 {
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        j = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i, j) else { break };
        if gmax + gmax2 < KKT_TOLERANCE {
            break;
        }
        if iter >= max_iter {
            return Err(Error::NonConvergence { iterations: iter });
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        if y(i) != y(j) {
            let quad = (2.0 + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..l {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // rho: average of y*G over free variables, else the midpoint of the
    // feasible interval.
    let (mut ub, mut lb, mut sum_free, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..l {
        let yg = y(t) * grad[t];
        if upper(alpha[t]) {
            if y(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    let alpha_star = alpha.split_off(n);
    Ok(SmoSolution {
        alpha,
        alpha_star,
        rho,
        iterations: iter,
    })
}

impl Svr {
    pub fn fit(features: &[Vec<f64>], targets: &[f64], params: &SvrParams) -> Result<Self> {
        params.validate()?;
        if features.len() < 2 || features.len() != targets.len() {
            return Err(Error::DegenerateInput(format!(
                "need at least 2 rows with one target each, got {} rows and {} targets",
                features.len(),
                targets.len()
            )));
        }
        let width = features[0].len();
        if width == 0 || features.iter().any(|r| r.len() != width) {
            return Err(Error::DegenerateInput("feature rows must share a non-zero width".into()));
        }
        if features.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite feature or target".into()));
        }
        let gamma = params.gamma.unwrap_or(1.0 / width as f64);
        let kernel = kernel_matrix(features, gamma);
        let sol = smo(&kernel, targets, params.c, params.epsilon)?;
        let mut support_vectors = Vec::new();
        let mut dual_coeffs = Vec::new();
        for (i, row) in features.iter().enumerate() {
            let coef = sol.alpha[i] - sol.alpha_star[i];
            if coef != 0.0 {
                support_vectors.push(row.clone());
                dual_coeffs.push(coef);
            }
        }
        Ok(Self {
            support_vectors,
            dual_coeffs,
            bias: -sol.rho,
            gamma,
            params: *params,
            iterations: sol.iterations,
        })
    }
}

impl Regressor for Svr {
    fn feature_count(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    fn predict(&self, row: &[f64]) -> Result<f64> {
        let mut acc = self.bias;
        for (sv, coef) in self.support_vectors.iter().zip(&self.dual_coeffs) {
            acc += coef * rbf_kernel(sv, row, self.gamma)?;
        }
        Ok(acc)
    }
}

/// Windowed SVR operating on price frames.
pub type SvrModel = Windowed<Svr>;

pub fn train(frame: &FeatureFrame, params: &SvrParams, multivariate: bool) -> Result<SvrModel> {
    params.validate()?;
    Windowed::train(frame, params.window, multivariate, |x, y| Svr::fit(x, y, params))
}
