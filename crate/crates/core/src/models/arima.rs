//! ARIMA(p, d, q) by conditional sum of squares.
//!
//! The d-differenced series `w` follows
//! `w_t = c + sum_i phi_i w_{t-i} + e_t + sum_j theta_j e_{t-j}`
//! with pre-sample innovations fixed at zero. An intercept `c` is estimated
//! only when `d == 0`, so differenced models forecast without drift.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, monic_from_roots, monic_roots};
use crate::series::{difference_n, mse, split_indices, undifference, SplitSpec};

pub const MAX_P: usize = 5;
pub const MAX_D: usize = 2;
pub const MAX_Q: usize = 5;
const MAX_ITERATIONS: usize = 500;
/// Largest modulus allowed for an inverse characteristic root.
const ROOT_LIMIT: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self> {
        let order = Self { p, d, q };
        order.validate()?;
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > MAX_P || self.d > MAX_D || self.q > MAX_Q {
            return Err(Error::InvalidParameter {
                name: "order",
                reason: format!("{self} exceeds ({MAX_P},{MAX_D},{MAX_Q})"),
            });
        }
        if self.p + self.q == 0 && self.d == 0 {
            return Err(Error::InvalidParameter {
                name: "order",
                reason: "(0,0,0) has nothing to estimate".into(),
            });
        }
        Ok(())
    }

    /// Minimum series length accepted by [`fit`].
    pub fn min_length(&self) -> usize {
        10 * (self.p + self.q + 1) + self.d
    }

    fn has_intercept(&self) -> bool {
        self.d == 0
    }

    fn n_params(&self) -> usize {
        self.p + self.q + usize::from(self.has_intercept())
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// Fitted ARIMA model with the state needed to forecast from the end of the
/// training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub intercept: f64,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub sigma2: f64,
    /// Last `d` observed levels.
    pub level_tail: Vec<f64>,
    /// Last `p` values of the differenced series.
    pub diff_tail: Vec<f64>,
    /// Last `q` in-sample innovations.
    pub resid_tail: Vec<f64>,
    /// Innovations that entered the objective.
    pub n_effective: usize,
}

/// A model together with its in-sample innovations (aligned so that
/// `residuals[i]` belongs to differenced index `p + i`).
#[derive(Debug, Clone)]
pub struct ArimaFit {
    pub model: ArimaModel,
    pub residuals: Vec<f64>,
}

struct Params<'a> {
    order: ArimaOrder,
    beta: &'a [f64],
}

impl Params<'_> {
    fn intercept(&self) -> f64 {
        if self.order.has_intercept() {
            self.beta[0]
        } else {
            0.0
        }
    }
    fn ar(&self) -> &[f64] {
        let o = usize::from(self.order.has_intercept());
        &self.beta[o..o + self.order.p]
    }
    fn ma(&self) -> &[f64] {
        let o = usize::from(self.order.has_intercept()) + self.order.p;
        &self.beta[o..o + self.order.q]
    }
}

/// CSS innovations for `w`, starting at index `p`.
fn innovations(w: &[f64], params: &Params) -> Vec<f64> {
    let p = params.order.p;
    let (c, ar, ma) = (params.intercept(), params.ar(), params.ma());
    let mut e = Vec::with_capacity(w.len() - p);
    for t in p..w.len() {
        let mut v = w[t] - c;
        for (i, phi) in ar.iter().enumerate() {
            v -= phi * w[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            let k = t - p;
            if k > j {
                v -= theta * e[k - 1 - j];
            }
        }
        e.push(v);
    }
    e
}

/// Innovations and their Jacobian `de/dbeta` (row-major, one row per
/// innovation).
fn innovations_with_jacobian(w: &[f64], params: &Params) -> (Vec<f64>, Vec<f64>) {
    let order = params.order;
    let p = order.p;
    let k = order.n_params();
    let e = innovations(w, params);
    let ma = params.ma();
    let n = e.len();
    let mut jac = vec![0.0; n * k];
    let icpt = usize::from(order.has_intercept());
    for s in 0..n {
        let t = s + p;
        let mut row = vec![0.0; k];
        if order.has_intercept() {
            row[0] = -1.0;
        }
        for i in 0..p {
            row[icpt + i] = -w[t - 1 - i];
        }
        for j in 0..order.q {
            if s > j {
                row[icpt + p + j] = -e[s - 1 - j];
            }
        }
        // propagate through the MA recursion
        for (j, theta) in ma.iter().enumerate() {
            if s > j {
                let prev = (s - 1 - j) * k;
                for m in 0..k {
                    row[m] -= theta * jac[prev + m];
                }
            }
        }
        jac[s * k..(s + 1) * k].copy_from_slice(&row);
    }
    (e, jac)
}

fn sse(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum()
}

/// Moves every inverse root of `lambda^n + c_1 lambda^(n-1) + ... + c_n`
/// strictly inside the unit circle (reflection, then a cap at
/// [`ROOT_LIMIT`]). Returns `None` when already admissible.
fn constrain_roots(monic: &[f64]) -> Option<Vec<f64>> {
    if monic.is_empty() {
        return None;
    }
    let roots = monic_roots(monic);
    if roots.iter().all(|r| r.norm() < ROOT_LIMIT) {
        return None;
    }
    let fixed: Vec<Complex64> = roots
        .into_iter()
        .map(|r| {
            let r = if r.norm() > 1.0 { 1.0 / r.conj() } else { r };
            if r.norm() > ROOT_LIMIT {
                r * (ROOT_LIMIT / r.norm())
            } else {
                r
            }
        })
        .collect();
    Some(monic_from_roots(&fixed))
}

/// Makes the AR part stationary and the MA part invertible.
fn reflect(order: ArimaOrder, beta: &mut [f64]) {
    let icpt = usize::from(order.has_intercept());
    let ar = &mut beta[icpt..icpt + order.p];
    let monic: Vec<f64> = ar.iter().map(|phi| -phi).collect();
    if let Some(c) = constrain_roots(&monic) {
        for (phi, ci) in ar.iter_mut().zip(c) {
            *phi = -ci;
        }
    }
    let ma = &mut beta[icpt + order.p..icpt + order.p + order.q];
    if let Some(c) = constrain_roots(ma) {
        ma.copy_from_slice(&c);
    }
}

/// True when every inverse root lies strictly inside the unit circle.
pub fn roots_admissible(monic: &[f64]) -> bool {
    monic_roots(monic).iter().all(|r| r.norm() < 1.0)
}

/// Hannan-Rissanen starting values: long autoregression for innovation
/// proxies, then least squares on lagged values and lagged proxies.
fn hannan_rissanen(w: &[f64], order: ArimaOrder) -> Vec<f64> {
    let k = order.n_params();
    let icpt = usize::from(order.has_intercept());
    let (p, q) = (order.p, order.q);
    let n = w.len();

    let ols = |rows: std::ops::Range<usize>, cols: &dyn Fn(usize) -> Vec<f64>| {
        let design: Vec<f64> = rows.clone().flat_map(cols).collect();
        let y: Vec<f64> = rows.clone().map(|t| w[t]).collect();
        let width = design.len() / y.len().max(1);
        least_squares(&design, y.len(), width, &y).ok()
    };

    if q == 0 {
        if let Some(fit) = ols(p..n, &|t| {
            let mut row = Vec::with_capacity(k);
            if icpt == 1 {
                row.push(1.0);
            }
            row.extend((1..=p).map(|i| w[t - i]));
            row
        }) {
            return fit.coef;
        }
        return vec![0.0; k];
    }

    let m = (2 * (p + q)).max(8).min(n / 4).max(1);
    let proxies = ols(m..n, &|t| {
        std::iter::once(1.0)
            .chain((1..=m).map(|i| w[t - i]))
            .collect()
    });
    let Some(long) = proxies else {
        return vec![0.0; k];
    };
    // ehat[t] for t >= m
    let ehat = |t: usize| long.residuals[t - m];
    let start = m + q.max(p);
    if start + k + 2 >= n {
        return vec![0.0; k];
    }
    match ols(start..n, &|t| {
        let mut row = Vec::with_capacity(k);
        if icpt == 1 {
            row.push(1.0);
        }
        row.extend((1..=p).map(|i| w[t - i]));
        row.extend((1..=q).map(|j| ehat(t - j)));
        row
    }) {
        Some(fit) => fit.coef,
        None => vec![0.0; k],
    }
}

fn gauss_newton(w: &[f64], order: ArimaOrder, mut beta: Vec<f64>) -> Result<Vec<f64>> {
    let k = beta.len();
    if k == 0 {
        return Ok(beta);
    }
    reflect(order, &mut beta);
    let mut current = sse(&innovations(w, &Params { order, beta: &beta }));
    for _ in 0..MAX_ITERATIONS {
        let (e, jac) = innovations_with_jacobian(w, &Params { order, beta: &beta });
        let neg_e: Vec<f64> = e.iter().map(|v| -v).collect();
        let Ok(step) = least_squares(&jac, e.len(), k, &neg_e) else {
            return Ok(beta);
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-10 {
            let mut cand: Vec<f64> = beta
                .iter()
                .zip(&step.coef)
                .map(|(b, d)| b + alpha * d)
                .collect();
            reflect(order, &mut cand);
            let value = sse(&innovations(w, &Params { order, beta: &cand }));
            if value.is_finite() && value <= current {
                accepted = Some((cand, value));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, value)) = accepted else {
            return Ok(beta);
        };
        let step_norm = beta
            .iter()
            .zip(&cand)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let improvement = current - value;
        beta = cand;
        current = value;
        if improvement <= 1e-12 * (current + 1e-300) || step_norm < 1e-10 {
            return Ok(beta);
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Fits without the order admissibility check (used for trial fits such as
/// the white-noise mean model).
pub(crate) fn fit_unchecked(values: &[f64], order: ArimaOrder) -> Result<ArimaFit> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingValues("price".into()));
    }
    if values.len() < order.min_length() {
        return Err(Error::TooShort {
            needed: order.min_length(),
            got: values.len(),
        });
    }
    let w = difference_n(values, order.d)?;
    let (lo, hi) = w
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = lo.abs().max(hi.abs()).max(1.0);
    if hi - lo <= 1e-12 * scale && order.p + order.q > 0 {
        return Err(Error::DegenerateSeries(format!(
            "differenced series is constant; {order} is not identifiable"
        )));
    }

    let init = hannan_rissanen(&w, order);
    let beta = gauss_newton(&w, order, init)?;
    let params = Params { order, beta: &beta };
    let residuals = innovations(&w, &params);
    let n_effective = residuals.len();
    let sigma2 = (sse(&residuals) / n_effective as f64).max(f64::MIN_POSITIVE);

    let model = ArimaModel {
        order,
        intercept: params.intercept(),
        ar_coeffs: params.ar().to_vec(),
        ma_coeffs: params.ma().to_vec(),
        sigma2,
        level_tail: values[values.len() - order.d..].to_vec(),
        diff_tail: w[w.len() - order.p..].to_vec(),
        resid_tail: residuals[residuals.len() - order.q.min(residuals.len())..].to_vec(),
        n_effective,
    };
    Ok(ArimaFit { model, residuals })
}

/// Fits ARIMA(`order`) to a fully observed series.
pub fn fit(values: &[f64], order: ArimaOrder) -> Result<ArimaModel> {
    order.validate()?;
    Ok(fit_unchecked(values, order)?.model)
}

/// As [`fit`], also returning the in-sample innovations.
pub fn fit_detailed(values: &[f64], order: ArimaOrder) -> Result<ArimaFit> {
    order.validate()?;
    fit_unchecked(values, order)
}

impl ArimaModel {
    /// Assembles a model from explicit coefficients and forecasting state.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        order: ArimaOrder,
        intercept: f64,
        ar_coeffs: Vec<f64>,
        ma_coeffs: Vec<f64>,
        sigma2: f64,
        level_tail: Vec<f64>,
        diff_tail: Vec<f64>,
        resid_tail: Vec<f64>,
    ) -> Result<Self> {
        order.validate()?;
        let check = |name: &'static str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("length {got}, expected {want}"),
                })
            }
        };
        check("ar_coeffs", ar_coeffs.len(), order.p)?;
        check("ma_coeffs", ma_coeffs.len(), order.q)?;
        check("level_tail", level_tail.len(), order.d)?;
        check("diff_tail", diff_tail.len(), order.p)?;
        check("resid_tail", resid_tail.len(), order.q)?;
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma2",
                reason: format!("{sigma2} is not positive"),
            });
        }
        Ok(Self {
            order,
            intercept,
            ar_coeffs,
            ma_coeffs,
            sigma2,
            level_tail,
            diff_tail,
            resid_tail,
            n_effective: 0,
        })
    }

    /// Akaike information criterion of the CSS fit.
    pub fn aic(&self) -> f64 {
        self.n_effective as f64 * self.sigma2.ln() + 2.0 * (self.order.n_params() + 1) as f64
    }

    /// `horizon`-step forecast on the original level scale, future
    /// innovations set to zero.
    pub fn forecast(&self, horizon: usize) -> Result<Vec<f64>> {
        if horizon == 0 {
            return Err(Error::InvalidHorizon);
        }
        let (p, q) = (self.order.p, self.order.q);
        let mut w = self.diff_tail.clone();
        let mut e = self.resid_tail.clone();
        // left-pad short residual history with zeros
        while e.len() < q {
            e.insert(0, 0.0);
        }
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut next = self.intercept;
            for (i, phi) in self.ar_coeffs.iter().enumerate() {
                next += phi * w[w.len() - 1 - i];
            }
            for (j, theta) in self.ma_coeffs.iter().enumerate() {
                next += theta * e[e.len() - 1 - j];
            }
            if p > 0 {
                w.push(next);
            }
            if q > 0 {
                e.push(0.0);
            }
            out.push(next);
        }

        // integrate back through each differencing level
        let d = self.order.d;
        for level in (0..d).rev() {
            let tail = difference_n(&self.level_tail, level)?;
            let anchor = *tail.last().expect("level tail has d - level values");
            out = undifference(&out, &[anchor], 1)?;
        }
        Ok(out)
    }
}

/// Fits on each training partition, forecasts the matching test window and
/// returns the mean held-out MSE.
pub fn evaluate(values: &[f64], order: ArimaOrder, split: &SplitSpec) -> Result<f64> {
    let folds = split_indices(values.len(), split)?;
    let mut total = 0.0;
    for (train, test) in &folds {
        let model = fit(&values[train.clone()], order)?;
        let pred = model.forecast(test.len())?;
        total += mse(&values[test.clone()], &pred)?;
    }
    Ok(total / folds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise(seed: u64, n: usize, sd: f64) -> Vec<f64> {
        let mut rng = CounterRng::new(seed);
        (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn ar1(seed: u64, n: usize, phi: f64, sd: f64) -> Vec<f64> {
        let e = noise(seed, n + 100, sd);
        let mut y = vec![0.0; n + 100];
        for t in 1..y.len() {
            y[t] = phi * y[t - 1] + e[t];
        }
        y.split_off(100)
    }

    fn ma1(seed: u64, n: usize, theta: f64) -> Vec<f64> {
        let e = noise(seed, n + 1, 1.0);
        (1..=n).map(|t| e[t] + theta * e[t - 1]).collect()
    }

    /// Lag-one OLS slope (with intercept), computed independently.
    fn ols_ar1(y: &[f64]) -> f64 {
        let x = &y[..y.len() - 1];
        let z = &y[1..];
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let mz = z.iter().sum::<f64>() / z.len() as f64;
        let sxz: f64 = x.iter().zip(z).map(|(a, b)| (a - mx) * (b - mz)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        sxz / sxx
    }

    /// Innovations algorithm estimate of theta_1 for an MA(1) from sample
    /// autocovariances (Brockwell & Davis, iteration m).
    fn innovations_ma1(y: &[f64], m: usize) -> f64 {
        let n = y.len();
        let mean = y.iter().sum::<f64>() / n as f64;
        let gamma = |h: usize| {
            (0..n - h).map(|t| (y[t] - mean) * (y[t + h] - mean)).sum::<f64>() / n as f64
        };
        let g: Vec<f64> = (0..=m).map(gamma).collect();
        let mut v = vec![g[0]];
        let mut theta: Vec<Vec<f64>> = vec![vec![0.0]];
        for i in 1..=m {
            let mut th = vec![0.0; i + 1];
            for k in 0..i {
                let mut s = g[i - k];
                for j in 0..k {
                    s -= theta[k][k - j] * th[i - j] * v[j];
                }
                th[i - k] = s / v[k];
            }
            let vi = g[0] - (0..i).map(|j| th[i - j].powi(2) * v[j]).sum::<f64>();
            theta.push(th);
            v.push(vi);
        }
        theta[m][1]
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let y: Vec<f64> = ar1(7, 1000, 0.6, 0.1).iter().map(|v| v + 3.0).collect();
        let model = fit(&y, ArimaOrder::new(1, 0, 0).unwrap()).unwrap();
        let phi = model.ar_coeffs[0];
        assert!((0.5..=0.7).contains(&phi), "phi {phi}");
        // CSS with an intercept and no MA part is exactly lag-one OLS.
        assert!((phi - ols_ar1(&y)).abs() < 1e-9);
    }

    #[test]
    fn recovers_ma1_coefficient() {
        let y = ma1(11, 2000, 0.4);
        let model = fit(&y, ArimaOrder::new(0, 0, 1).unwrap()).unwrap();
        let theta = model.ma_coeffs[0];
        assert!((0.3..=0.5).contains(&theta), "theta {theta}");
        let oracle = innovations_ma1(&y, 25);
        assert!((theta - oracle).abs() < 0.05, "css {theta} vs innovations {oracle}");
    }

    #[test]
    fn white_noise_ma_is_near_zero() {
        // seed 1: sample lag-one autocorrelation 0.008
        let y = noise(1, 2000, 1.0);
        let model = fit(&y, ArimaOrder::new(0, 0, 1).unwrap()).unwrap();
        assert!(model.ma_coeffs[0].abs() < 0.05, "theta {}", model.ma_coeffs[0]);
    }

    #[test]
    fn random_walk_forecast_is_flat() {
        let mut y = vec![5.0];
        for z in noise(3, 200, 0.3) {
            y.push(y.last().unwrap() + z);
        }
        *y.last_mut().unwrap() = 5.2;
        let model = fit(&y, ArimaOrder::new(0, 1, 0).unwrap()).unwrap();
        assert_eq!(model.forecast(4).unwrap(), vec![5.2; 4]);
    }

    #[test]
    fn ar1_forecast_decays_geometrically() {
        let order = ArimaOrder::new(1, 0, 0).unwrap();
        let model =
            ArimaModel::from_parts(order, 0.0, vec![0.5], vec![], 1.0, vec![], vec![2.0], vec![])
                .unwrap();
        let f = model.forecast(3).unwrap();
        assert_eq!(f, vec![1.0, 0.5, 0.25]);

        let model =
            ArimaModel::from_parts(order, 1.5, vec![0.5], vec![], 1.0, vec![], vec![10.0], vec![])
                .unwrap();
        let long = model.forecast(200).unwrap();
        assert!((long[199] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fitted_models_are_stationary_and_invertible() {
        let mut y = vec![0.0];
        for z in noise(8, 600, 1.0) {
            y.push(y.last().unwrap() + z);
        }
        for (p, d, q) in [(2, 0, 1), (1, 1, 1), (2, 1, 2)] {
            let m = fit(&y, ArimaOrder::new(p, d, q).unwrap()).unwrap();
            let ar: Vec<f64> = m.ar_coeffs.iter().map(|v| -v).collect();
            assert!(roots_admissible(&ar), "{p},{d},{q}: {:?}", m.ar_coeffs);
            assert!(roots_admissible(&m.ma_coeffs), "{p},{d},{q}: {:?}", m.ma_coeffs);
            assert!(m.sigma2 > 0.0);
        }
    }

    #[test]
    fn residual_mean_near_zero_with_intercept() {
        let y: Vec<f64> = ar1(21, 800, 0.5, 1.0).iter().map(|v| v + 10.0).collect();
        let fitted = fit_detailed(&y, ArimaOrder::new(1, 0, 1).unwrap()).unwrap();
        let n = fitted.residuals.len() as f64;
        let mean = fitted.residuals.iter().sum::<f64>() / n;
        let sd = (fitted.residuals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 0.05 * sd);
    }

    #[test]
    fn shift_equivariant_when_differenced() {
        let mut y = vec![4.0];
        for z in noise(9, 300, 0.2) {
            y.push(y.last().unwrap() + z);
        }
        let order = ArimaOrder::new(1, 1, 1).unwrap();
        let base = fit(&y, order).unwrap().forecast(10).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + 7.5).collect();
        let moved = fit(&shifted, order).unwrap().forecast(10).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            assert!((b - a - 7.5).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_refit() {
        let y = ar1(4, 400, 0.3, 1.0);
        let order = ArimaOrder::new(2, 0, 1).unwrap();
        assert_eq!(fit(&y, order).unwrap(), fit(&y, order).unwrap());
    }

    #[test]
    fn held_out_error_close_to_innovation_variance() {
        let y = ar1(12, 2000, 0.6, 1.0);
        let m = evaluate(&y, ArimaOrder::new(1, 0, 0).unwrap(), &SplitSpec::holdout(0.9)).unwrap();
        assert!(m < 2.0, "mse {m}");
    }

    #[test]
    fn linear_trend_is_extrapolated_exactly() {
        let y: Vec<f64> = (0..100).map(|t| 2.0 + 0.05 * t as f64).collect();
        let m = evaluate(&y, ArimaOrder::new(0, 2, 0).unwrap(), &SplitSpec::holdout(0.9)).unwrap();
        assert!(m < 1e-18);
        assert!(matches!(
            fit(&y, ArimaOrder::new(1, 1, 0).unwrap()),
            Err(Error::DegenerateSeries(_))
        ));
    }

    #[test]
    fn order_bounds_and_length() {
        assert!(ArimaOrder::new(6, 0, 0).is_err());
        assert!(ArimaOrder::new(0, 3, 0).is_err());
        assert!(ArimaOrder::new(0, 0, 0).is_err());
        assert!(ArimaOrder::new(0, 1, 0).is_ok());
        let y = noise(1, 25, 1.0);
        assert!(matches!(
            fit(&y, ArimaOrder::new(1, 0, 1).unwrap()),
            Err(Error::TooShort { needed: 30, .. })
        ));
        let m = fit(&noise(2, 100, 1.0), ArimaOrder::new(1, 0, 0).unwrap()).unwrap();
        assert!(matches!(m.forecast(0), Err(Error::InvalidHorizon)));
    }
}
