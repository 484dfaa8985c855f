//! Piecewise-linear trend with changepoints plus Fourier yearly
//! seasonality, fitted by ridge-penalized least squares.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::series::{FeatureFrame, Series, EXOGENOUS};

/// Average month length in days.
const MONTH_DAYS: f64 = 30.4375;
pub const MIN_POINTS: usize = 104;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendParams {
    /// `None` places one changepoint per month of training span.
    pub changepoint_count: Option<usize>,
    pub changepoint_range: f64,
    pub prior_scale: f64,
    pub fourier_order: usize,
    pub season_period: f64,
}

impl Default for TrendParams {
    fn default() -> Self {
        Self {
            changepoint_count: None,
            changepoint_range: 0.8,
            prior_scale: 0.05,
            fourier_order: 10,
            season_period: 365.25,
        }
    }
}

impl TrendParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(self.changepoint_range > 0.0 && self.changepoint_range <= 1.0) {
            return bad("changepoint_range", "must lie in (0, 1]");
        }
        if !(self.prior_scale > 0.0) || !self.prior_scale.is_finite() {
            return bad("prior_scale", "must be positive");
        }
        if self.fourier_order == 0 {
            return bad("fourier_order", "must be at least 1");
        }
        if !(self.season_period > 0.0) {
            return bad("season_period", "must be positive");
        }
        Ok(())
    }

    /// Changepoint day offsets for a training span of `span_days`.
    pub fn changepoints(&self, span_days: f64) -> Vec<f64> {
        let count = self
            .changepoint_count
            .unwrap_or((span_days / MONTH_DAYS).floor() as usize);
        let last = self.changepoint_range * span_days;
        (1..=count).map(|j| last * j as f64 / count as f64).collect()
    }
}

/// Row-major design matrix with its column count.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl Design {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// Time axis shared by fitting and extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Clock {
    origin: NaiveDate,
    span_days: f64,
}

impl Clock {
    fn day(&self, date: NaiveDate) -> f64 {
        (date - self.origin).num_days() as f64
    }
}

fn push_row(out: &mut Vec<f64>, day: f64, clock: &Clock, changepoints: &[f64], params: &TrendParams) {
    let t = day / clock.span_days;
    out.push(1.0);
    out.push(t);
    out.extend(changepoints.iter().map(|cp| (t - cp / clock.span_days).max(0.0)));
    for k in 1..=params.fourier_order {
        let arg = 2.0 * std::f64::consts::PI * k as f64 * day / params.season_period;
        out.push(arg.sin());
        out.push(arg.cos());
    }
}

/// Columns `[1, t, hinge_j..., sin_1, cos_1, ..., sin_K, cos_K]` with time
/// measured from the first timestamp and scaled to `[0, 1]` over the span.
pub fn build_design_matrix(timestamps: &[NaiveDate], params: &TrendParams) -> Result<Design> {
    if timestamps.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: timestamps.len(),
        });
    }
    let clock = Clock {
        origin: timestamps[0],
        span_days: (timestamps[timestamps.len() - 1] - timestamps[0]).num_days() as f64,
    };
    let cps = params.changepoints(clock.span_days);
    let cols = 2 + cps.len() + 2 * params.fourier_order;
    let mut values = Vec::with_capacity(timestamps.len() * cols);
    for d in timestamps {
        push_row(&mut values, clock.day(*d), &clock, &cps, params);
    }
    Ok(Design {
        values,
        rows: timestamps.len(),
        cols,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    /// Zero for a constant driver, whose column is then identically zero.
    pub std: f64,
    pub last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendModel {
    pub base_intercept: f64,
    pub base_slope: f64,
    pub changepoint_times: Vec<f64>,
    pub slope_deltas: Vec<f64>,
    pub seasonal_coeffs: Vec<f64>,
    pub exogenous_coeffs: Vec<f64>,
    pub params: TrendParams,
    clock: Clock,
    /// Targets are divided by this before fitting.
    y_scale: f64,
    exogenous: Vec<Standardizer>,
    last_timestamp: NaiveDate,
    /// Squared residual sum in scaled units.
    pub residual_ss: f64,
}

impl Standardizer {
    fn apply(&self, v: f64) -> f64 {
        if self.std > 0.0 {
            (v - self.mean) / self.std
        } else {
            0.0
        }
    }
}

fn standardize(values: &[f64]) -> Standardizer {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Standardizer {
        mean,
        std: if var > 0.0 { var.sqrt() } else { 0.0 },
        last: values[values.len() - 1],
    }
}

impl TrendModel {
    /// Univariate fit; rows with a missing price are skipped.
    pub fn fit(series: &Series, params: &TrendParams) -> Result<Self> {
        Self::fit_frame(&FeatureFrame::univariate(series.clone()), params, false)
    }

    /// Fits on `frame`; in multivariate mode the four drivers become
    /// standardized, unpenalized regressors.
    pub fn fit_frame(frame: &FeatureFrame, params: &TrendParams, multivariate: bool) -> Result<Self> {
        params.validate()?;
        if multivariate {
            frame.require_exogenous()?;
        }
        let exog_cols: Vec<&[Option<f64>]> = if multivariate {
            EXOGENOUS.iter().map(|n| frame.column(n).expect("checked")).collect()
        } else {
            Vec::new()
        };
        let rows: Vec<usize> = (0..frame.len())
            .filter(|&i| frame.base().values()[i].is_some() && exog_cols.iter().all(|c| c[i].is_some()))
            .collect();
        if rows.len() < MIN_POINTS {
            return Err(Error::TooShort {
                needed: MIN_POINTS,
                got: rows.len(),
            });
        }
        let dates: Vec<NaiveDate> = rows.iter().map(|&i| frame.timestamps()[i]).collect();
        let y: Vec<f64> = rows.iter().map(|&i| frame.base().values()[i].expect("filtered")).collect();
        let exogenous: Vec<Standardizer> = exog_cols
            .iter()
            .map(|c| standardize(&rows.iter().map(|&i| c[i].expect("filtered")).collect::<Vec<_>>()))
            .collect();

        let clock = Clock {
            origin: dates[0],
            span_days: (dates[dates.len() - 1] - dates[0]).num_days() as f64,
        };
        let cps = params.changepoints(clock.span_days);
        let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let y_scale = if y_scale > 0.0 { y_scale } else { 1.0 };
        let base_cols = 2 + cps.len() + 2 * params.fourier_order;
        let k = base_cols + exogenous.len();

        let mut x = Vec::with_capacity(rows.len() * k);
        for (r, &i) in rows.iter().enumerate() {
            push_row(&mut x, clock.day(dates[r]), &clock, &cps, params);
            for (s, c) in exogenous.iter().zip(&exog_cols) {
                x.push(s.apply(c[i].expect("filtered")));
            }
        }
        let ys: Vec<f64> = y.iter().map(|v| v / y_scale).collect();

        let mut xtx = vec![0.0; k * k];
        let mut xty = vec![0.0; k];
        for r in 0..rows.len() {
            let row = &x[r * k..(r + 1) * k];
            for a in 0..k {
                xty[a] += row[a] * ys[r];
                for b in 0..=a {
                    xtx[a * k + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                xtx[b * k + a] = xtx[a * k + b];
            }
        }
        let penalty = 1.0 / (params.prior_scale * params.prior_scale);
        for j in 2..2 + cps.len() {
            xtx[j * k + j] += penalty;
        }
        // a constant driver carries no information; pin its coefficient at 0
        for (j, s) in exogenous.iter().enumerate() {
            if s.std == 0.0 {
                xtx[(base_cols + j) * k + base_cols + j] += 1.0;
            }
        }
        let beta = cholesky_solve(xtx, k, &xty)?;
        let residual_ss = (0..rows.len())
            .map(|r| {
                let fit: f64 = x[r * k..(r + 1) * k].iter().zip(&beta).map(|(a, b)| a * b).sum();
                (ys[r] - fit).powi(2)
            })
            .sum();

        let n_cp = cps.len();
        Ok(Self {
            base_intercept: beta[0],
            base_slope: beta[1],
            slope_deltas: beta[2..2 + n_cp].to_vec(),
            seasonal_coeffs: beta[2 + n_cp..base_cols].to_vec(),
            exogenous_coeffs: beta[base_cols..].to_vec(),
            changepoint_times: cps,
            params: *params,
            clock,
            y_scale,
            exogenous,
            last_timestamp: frame.base().last_timestamp(),
            residual_ss,
        })
    }

    /// All coefficients in design-column order, in units of the scaled target.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = vec![self.base_intercept, self.base_slope];
        c.extend(&self.slope_deltas);
        c.extend(&self.seasonal_coeffs);
        c.extend(&self.exogenous_coeffs);
        c
    }

    pub fn y_scale(&self) -> f64 {
        self.y_scale
    }

    /// Base slope in price units per day.
    pub fn slope_per_day(&self) -> f64 {
        self.base_slope * self.y_scale / self.clock.span_days
    }

    fn predict_day(&self, day: f64, exog: &[f64]) -> f64 {
        let mut row = Vec::new();
        push_row(&mut row, day, &self.clock, &self.changepoint_times, &self.params);
        row.extend(self.exogenous.iter().zip(exog).map(|(s, v)| s.apply(*v)));
        row.iter().zip(self.coefficients()).map(|(a, b)| a * b).sum::<f64>() * self.y_scale
    }

    /// In-sample prediction at `date` with the given raw driver values.
    pub fn predict_at(&self, date: NaiveDate, exogenous: &[f64]) -> Result<f64> {
        if exogenous.len() != self.exogenous.len() {
            return Err(Error::DimensionMismatch {
                expected: self.exogenous.len(),
                got: exogenous.len(),
            });
        }
        Ok(self.predict_day(self.clock.day(date), exogenous))
    }

    /// Extends the trend with its final slope; drivers stay at their last
    /// training values.
    pub fn forecast(&self, horizon: usize) -> Result<Vec<f64>> {
        if horizon == 0 {
            return Err(Error::InvalidHorizon);
        }
        let last_day = self.clock.day(self.last_timestamp);
        let exog: Vec<f64> = self.exogenous.iter().map(|s| s.last).collect();
        Ok((1..=horizon)
            .map(|h| self.predict_day(last_day + 7.0 * h as f64, &exog))
            .collect())
    }
}
