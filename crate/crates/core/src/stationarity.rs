//! Augmented Dickey-Fuller test, correlograms and ARIMA order suggestion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::models::arima::{fit_unchecked, ArimaOrder, MAX_P, MAX_Q};
use crate::series::difference_n;

/// MacKinnon (2010) response-surface coefficients for the constant-only
/// Dickey-Fuller test with one variable: `cv(T) = b0 + b1/T + b2/T^2 + b3/T^3`.
const CRITICAL_SURFACE: [(f64, [f64; 4]); 3] = [
    (0.01, [-3.43035, -6.5393, -16.786, -79.433]),
    (0.05, [-2.86154, -2.8903, -4.234, -40.040]),
    (0.10, [-2.56677, -1.5384, -2.809, 0.0]),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub one_pct: f64,
    pub five_pct: f64,
    pub ten_pct: f64,
}

impl CriticalValues {
    /// Finite-sample critical values for `nobs` regression observations.
    pub fn for_nobs(nobs: usize) -> Self {
        let t = nobs as f64;
        let eval = |b: &[f64; 4]| b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t);
        Self {
            one_pct: eval(&CRITICAL_SURFACE[0].1),
            five_pct: eval(&CRITICAL_SURFACE[1].1),
            ten_pct: eval(&CRITICAL_SURFACE[2].1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lag_order: usize,
    pub nobs: usize,
    pub critical_values: CriticalValues,
    pub stationary_at_5pct: bool,
}

/// Schwert's rule `floor(12 (n/100)^(1/4))`, capped so the test's length
/// requirement holds.
pub fn default_max_lag(n: usize) -> usize {
    let schwert = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    schwert.min(n.saturating_sub(20))
}

/// Design rows for the Dickey-Fuller regression
/// `dy_t = a + g y_{t-1} + sum_{i=1..lag} b_i dy_{t-i}` over `dy` indices
/// `start..`. Column order: constant, lagged level, lagged differences.
fn df_design(y: &[f64], dy: &[f64], lag: usize, start: usize) -> (Vec<f64>, Vec<f64>) {
    let k = 2 + lag;
    let mut design = Vec::with_capacity((dy.len() - start) * k);
    let mut target = Vec::with_capacity(dy.len() - start);
    for t in start..dy.len() {
        design.push(1.0);
        design.push(y[t]);
        design.extend((1..=lag).map(|i| dy[t - i]));
        target.push(dy[t]);
    }
    (design, target)
}

/// ADF test with a constant and no trend. The augmentation lag is chosen
/// by AIC over `0..=max_lag` on a common sample, then the regression is
/// re-run on all observations available at that lag.
pub fn adf_test(values: &[f64], max_lag: usize) -> Result<AdfResult> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingValues("price".into()));
    }
    let n = values.len();
    if n < 20 + max_lag {
        return Err(Error::TooShort {
            needed: 20 + max_lag,
            got: n,
        });
    }
    let dy: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();

    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=max_lag {
        let (x, y) = df_design(values, &dy, lag, max_lag);
        let fit = least_squares(&x, y.len(), 2 + lag, &y)?;
        let nobs = y.len() as f64;
        let aic = nobs * (fit.rss / nobs).ln() + 2.0 * (2 + lag) as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lag));
        }
    }
    let lag = best.map(|(_, l)| l).unwrap_or(0);

    let (x, y) = df_design(values, &dy, lag, lag);
    let fit = least_squares(&x, y.len(), 2 + lag, &y)?;
    let se = fit.std_error(1);
    if !(se > 0.0) || !se.is_finite() {
        return Err(Error::SingularRegression);
    }
    let statistic = fit.coef[1] / se;
    let critical_values = CriticalValues::for_nobs(y.len());
    Ok(AdfResult {
        statistic,
        lag_order: lag,
        nobs: y.len(),
        critical_values,
        stationary_at_5pct: statistic < critical_values.five_pct,
    })
}

/// One bar of an ACF/PACF plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelogramPoint {
    pub lag: usize,
    pub correlation: f64,
    pub confidence_band: f64,
}

fn autocorrelations(values: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if n <= max_lag {
        return Err(Error::TooShort {
            needed: max_lag + 1,
            got: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if !(c0 > 1e-300) {
        return Err(Error::ConstantSeries);
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                dev.iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect())
}

fn band(n: usize) -> f64 {
    1.96 / (n as f64).sqrt()
}

/// Sample autocorrelations for lags `0..=max_lag` (biased estimator).
pub fn acf(values: &[f64], max_lag: usize) -> Result<Vec<CorrelogramPoint>> {
    let r = autocorrelations(values, max_lag)?;
    let b = band(values.len());
    Ok(r
        .into_iter()
        .enumerate()
        .map(|(lag, correlation)| CorrelogramPoint {
            lag,
            correlation,
            confidence_band: b,
        })
        .collect())
}

/// Partial autocorrelations for lags `0..=max_lag` by Durbin-Levinson.
pub fn pacf(values: &[f64], max_lag: usize) -> Result<Vec<CorrelogramPoint>> {
    let r = autocorrelations(values, max_lag)?;
    let b = band(values.len());
    let mut out = vec![CorrelogramPoint {
        lag: 0,
        correlation: 1.0,
        confidence_band: b,
    }];
    let mut phi: Vec<f64> = Vec::new();
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = r[k] - phi.iter().enumerate().map(|(j, p)| p * r[k - 1 - j]).sum::<f64>();
        if v <= 1e-12 {
            return Err(Error::NumericalBreakdown(format!(
                "prediction error variance vanished at lag {k}"
            )));
        }
        let kappa = num / v;
        let mut next: Vec<f64> = phi
            .iter()
            .enumerate()
            .map(|(j, p)| p - kappa * phi[phi.len() - 1 - j])
            .collect();
        next.push(kappa);
        phi = next;
        v *= 1.0 - kappa * kappa;
        out.push(CorrelogramPoint {
            lag: k,
            correlation: kappa,
            confidence_band: b,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderSuggestion {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub p_candidates: Vec<usize>,
}

impl OrderSuggestion {
    pub fn order(&self) -> Option<ArimaOrder> {
        ArimaOrder::new(self.p, self.d, self.q).ok()
    }
}

/// Number of correlogram lags inspected when reading cutoffs.
fn reading_lags(n: usize) -> usize {
    (n / 4).clamp(1, 20)
}

/// Last lag before the correlogram first falls inside its band.
fn cutoff(points: &[CorrelogramPoint]) -> usize {
    points
        .iter()
        .skip(1)
        .find(|pt| pt.correlation.abs() < pt.confidence_band)
        .map(|pt| pt.lag - 1)
        .unwrap_or(points.len() - 1)
}

/// Candidate AR orders from the PACF. A cutoff is ambiguous when the first
/// insignificant bar is within the outer quarter of the band (reading sits
/// between `p` and `p + 1`) or the last significant bar barely clears it
/// (between `p - 1` and `p`).
fn ar_candidates(points: &[CorrelogramPoint]) -> Vec<usize> {
    let p = cutoff(points);
    let mut cands = vec![p];
    if let Some(first_inside) = points.get(p + 1) {
        let b = first_inside.confidence_band;
        if first_inside.correlation.abs() >= 0.75 * b {
            cands.push(p + 1);
        } else if p >= 1 && points[p].correlation.abs() < 1.25 * b {
            cands.insert(0, p - 1);
        }
    }
    cands.retain(|&c| c <= MAX_P);
    if cands.is_empty() {
        cands.push(MAX_P);
    }
    cands
}

/// Suggests `(p, d, q)`: `d` is the fewest differences passing the 5% ADF
/// test, `q` the ACF cutoff, and `p` the AIC-best of the PACF candidates.
pub fn suggest_order(values: &[f64]) -> Result<OrderSuggestion> {
    if values.len() < 50 {
        return Err(Error::TooShort {
            needed: 50,
            got: values.len(),
        });
    }
    let mut chosen = None;
    for d in 0..=2 {
        let w = difference_n(values, d)?;
        let adf = adf_test(&w, default_max_lag(w.len()))?;
        if adf.stationary_at_5pct {
            chosen = Some((d, w));
            break;
        }
    }
    let (d, w) = chosen.ok_or(Error::NoStationaryTransform)?;

    let lags = reading_lags(w.len());
    let q = cutoff(&acf(&w, lags)?).min(MAX_Q);
    let p_candidates = ar_candidates(&pacf(&w, lags)?);

    let p = if p_candidates.len() == 1 {
        p_candidates[0]
    } else {
        // Compare on a common sample: drop the first `max p` innovations.
        let max_p = *p_candidates.iter().max().expect("non-empty");
        let mut best: Option<(f64, usize)> = None;
        for &cand in &p_candidates {
            let order = ArimaOrder { p: cand, d, q };
            let Ok(fit) = fit_unchecked(values, order) else {
                continue;
            };
            let tail = &fit.residuals[max_p - cand..];
            let n = tail.len() as f64;
            let rss: f64 = tail.iter().map(|e| e * e).sum();
            let k = cand + q + usize::from(d == 0);
            let aic = n * (rss / n).max(f64::MIN_POSITIVE).ln() + 2.0 * k as f64;
            if best.is_none_or(|(b, _)| aic < b - 1e-12) {
                best = Some((aic, cand));
            }
        }
        best.map(|(_, c)| c).unwrap_or(p_candidates[0])
    };
    Ok(OrderSuggestion {
        p,
        d,
        q,
        p_candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = CounterRng::new(seed);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn ar(seed: u64, n: usize, phi: &[f64]) -> Vec<f64> {
        let e = noise(seed, n + 200);
        let mut y = vec![0.0; n + 200];
        for t in phi.len()..y.len() {
            y[t] = e[t] + phi.iter().enumerate().map(|(i, p)| p * y[t - 1 - i]).sum::<f64>();
        }
        y.split_off(200)
    }

    fn walk(seed: u64, n: usize) -> Vec<f64> {
        noise(seed, n)
            .into_iter()
            .scan(0.0, |acc, z| {
                *acc += z;
                Some(*acc)
            })
            .collect()
    }

    #[test]
    fn critical_values_approach_asymptotic() {
        let cv = CriticalValues::for_nobs(1_000_000);
        assert!((cv.five_pct + 2.86154).abs() < 1e-4);
        let small = CriticalValues::for_nobs(100);
        assert!(small.one_pct < small.five_pct && small.five_pct < small.ten_pct);
    }

    #[test]
    fn random_walks_are_rarely_rejected() {
        let kept = (0..20)
            .filter(|&s| !adf_test(&walk(100 + s, 500), 12).unwrap().stationary_at_5pct)
            .count();
        assert!(kept >= 17, "only {kept} of 20 random walks kept the unit root");
    }

    #[test]
    fn white_noise_is_stationary() {
        let rejected = (0..20)
            .filter(|&s| adf_test(&noise(200 + s, 500), 12).unwrap().stationary_at_5pct)
            .count();
        assert!(rejected >= 17, "only {rejected} of 20 noise series rejected");
    }

    #[test]
    fn adf_invariant_to_level_shift() {
        let y = ar(3, 300, &[0.5]);
        let shifted: Vec<f64> = y.iter().map(|v| v + 100.0).collect();
        let a = adf_test(&y, 8).unwrap();
        let b = adf_test(&shifted, 8).unwrap();
        assert_eq!(a.lag_order, b.lag_order);
        assert!((a.statistic - b.statistic).abs() < 1e-8);
        assert_eq!(a.stationary_at_5pct, a.statistic < a.critical_values.five_pct);
    }

    /// Dickey-Fuller t statistic from the normal equations, solved with
    /// nalgebra's LU.
    fn df_statistic_oracle(y: &[f64], lag: usize) -> f64 {
        let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let rows: Vec<usize> = (lag..dy.len()).collect();
        let k = 2 + lag;
        let x = nalgebra::DMatrix::from_fn(rows.len(), k, |r, c| {
            let t = rows[r];
            match c {
                0 => 1.0,
                1 => y[t],
                _ => dy[t - (c - 1)],
            }
        });
        let target = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|&t| dy[t]));
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        let beta = &xtx_inv * x.transpose() * &target;
        let resid = &target - &x * &beta;
        let s2 = resid.norm_squared() / (rows.len() - k) as f64;
        beta[1] / (s2 * xtx_inv[(1, 1)]).sqrt()
    }

    #[test]
    fn adf_statistic_matches_independent_ols() {
        for seed in 0..10 {
            let phi = 0.2 + 0.07 * seed as f64;
            let y = ar(1000 + seed, 250, &[phi]);
            let res = adf_test(&y, 6).unwrap();
            let oracle = df_statistic_oracle(&y, res.lag_order);
            assert!((res.statistic - oracle).abs() < 1e-8, "seed {seed}: {} vs {oracle}", res.statistic);
        }
    }

    #[test]
    fn adf_length_check() {
        assert!(matches!(adf_test(&noise(1, 25), 10), Err(Error::TooShort { needed: 30, .. })));
    }

    #[test]
    fn acf_examples() {
        let pts = acf(&[1.0, 2.0, 3.0, 4.0, 5.0], 1).unwrap();
        assert_eq!(pts[0].correlation, 1.0);
        assert!((pts[1].correlation - 0.4).abs() < 1e-12);
        assert!(matches!(acf(&[2.0; 10], 2), Err(Error::ConstantSeries)));

        let y = noise(17, 2000);
        let bound = 3.0 / (2000f64).sqrt();
        for pt in &acf(&y, 10).unwrap()[1..] {
            assert!(pt.correlation.abs() < bound, "lag {} = {}", pt.lag, pt.correlation);
            assert!((pt.confidence_band - 1.96 / (2000f64).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn pacf_base_case_and_ar_cutoffs() {
        let y = ar(5, 400, &[0.3]);
        let a = acf(&y, 5).unwrap();
        let p = pacf(&y, 5).unwrap();
        assert_eq!(p[0].correlation, 1.0);
        assert!((a[1].correlation - p[1].correlation).abs() < 1e-15);

        let y = ar(6, 5000, &[0.6]);
        let p = pacf(&y, 5).unwrap();
        assert!((p[1].correlation - 0.6).abs() < 0.05);
        for pt in &p[2..] {
            assert!(pt.correlation.abs() < 0.05);
        }

        let y = ar(7, 5000, &[0.5, 0.3]);
        let p = pacf(&y, 6).unwrap();
        assert!(p[1].correlation.abs() > p[1].confidence_band);
        assert!(p[2].correlation.abs() > p[2].confidence_band);
        for pt in &p[3..] {
            assert!(pt.correlation.abs() < pt.confidence_band, "lag {}", pt.lag);
        }
    }

    #[test]
    fn correlations_bounded() {
        for seed in 0..5 {
            let y = walk(seed, 300);
            for pt in acf(&y, 20).unwrap().into_iter().chain(pacf(&y, 20).unwrap()) {
                assert!(pt.correlation.abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn white_noise_suggests_zero_order() {
        let s = suggest_order(&noise(31, 500)).unwrap();
        assert_eq!((s.p, s.d, s.q), (0, 0, 0));
    }

    #[test]
    fn random_walk_needs_one_difference() {
        let y: Vec<f64> = walk(41, 500).iter().map(|v| 50.0 + v).collect();
        let s = suggest_order(&y).unwrap();
        assert_eq!(s.d, 1);
        let w = difference_n(&y, s.d).unwrap();
        assert!(adf_test(&w, default_max_lag(w.len())).unwrap().stationary_at_5pct);
        assert!(s.p_candidates.contains(&s.p));
    }

    #[test]
    fn ambiguous_pacf_reading_widens_candidates() {
        let b = 0.1;
        let pt = |lag, correlation| CorrelogramPoint {
            lag,
            correlation,
            confidence_band: b,
        };
        // lag 1 significant, lag 2 just inside the band: reading between 1 and 2
        let pts = vec![pt(0, 1.0), pt(1, 0.5), pt(2, 0.09), pt(3, 0.01)];
        assert_eq!(ar_candidates(&pts), vec![1, 2]);
        let clear = vec![pt(0, 1.0), pt(1, 0.5), pt(2, 0.01), pt(3, 0.01)];
        assert_eq!(ar_candidates(&clear), vec![1]);
        let marginal = vec![pt(0, 1.0), pt(1, 0.5), pt(2, 0.11), pt(3, 0.01)];
        assert_eq!(ar_candidates(&marginal), vec![1, 2]);
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(suggest_order(&noise(1, 40)), Err(Error::TooShort { .. })));
    }
}
