//! Lagged-window supervised features and the recursive multi-step
//! forecaster shared by the row-based regressors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{FeatureFrame, MinMaxScaler, EXOGENOUS, PRICE};

/// A single-output regressor over fixed-width feature rows.
pub trait Regressor {
    fn feature_count(&self) -> usize;
    fn predict(&self, row: &[f64]) -> Result<f64>;
}

/// Columns a model consumes from a frame: price alone, or price plus the
/// four canonical drivers.
pub fn model_columns(multivariate: bool) -> Vec<&'static str> {
    let mut cols = vec![PRICE];
    if multivariate {
        cols.extend(EXOGENOUS);
    }
    cols
}

/// Restricts `frame` to the columns used in the given mode.
pub fn select_columns(frame: &FeatureFrame, multivariate: bool) -> Result<FeatureFrame> {
    if !multivariate {
        return Ok(frame.price_only());
    }
    frame.require_exogenous()?;
    let exogenous = EXOGENOUS
        .iter()
        .map(|name| crate::series::Column {
            name: name.to_string(),
            values: frame.column(name).expect("checked above").to_vec(),
        })
        .collect();
    FeatureFrame::new(frame.base().clone(), exogenous)
}

fn observed_columns(frame: &FeatureFrame, multivariate: bool) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let prices = frame.prices()?;
    let exog = if multivariate {
        frame.require_exogenous()?;
        EXOGENOUS
            .iter()
            .map(|name| frame.observed(name))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok((prices, exog))
}

/// Row `t` holds `price[t-window..t]` followed, in multivariate mode, by the
/// exogenous values at `t - 1`; the target is `price[t]`.
pub fn make_supervised(
    frame: &FeatureFrame,
    window: usize,
    multivariate: bool,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if window == 0 {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: "must be at least 1".into(),
        });
    }
    if frame.len() <= window {
        return Err(Error::TooShort {
            needed: window + 1,
            got: frame.len(),
        });
    }
    let (prices, exog) = observed_columns(frame, multivariate)?;
    let rows = (window..prices.len())
        .map(|t| {
            let mut row = prices[t - window..t].to_vec();
            row.extend(exog.iter().map(|col| col[t - 1]));
            row
        })
        .collect();
    Ok((rows, prices[window..].to_vec()))
}

/// Recursive one-step forecasting: each prediction is appended to the price
/// window for the next step while exogenous inputs stay at their last
/// observed values.
pub fn recursive_forecast(
    frame: &FeatureFrame,
    window: usize,
    multivariate: bool,
    horizon: usize,
    mut step: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidHorizon);
    }
    if frame.len() < window {
        return Err(Error::TooShort {
            needed: window,
            got: frame.len(),
        });
    }
    let (prices, exog) = observed_columns(frame, multivariate)?;
    let mut history = prices[prices.len() - window..].to_vec();
    let last_exog: Vec<f64> = exog.iter().map(|col| col[col.len() - 1]).collect();
    let mut out = Vec::with_capacity(horizon);
    let mut row = Vec::with_capacity(window + last_exog.len());
    for _ in 0..horizon {
        row.clear();
        row.extend_from_slice(&history);
        row.extend_from_slice(&last_exog);
        let next = step(&row)?;
        out.push(next);
        history.remove(0);
        history.push(next);
    }
    Ok(out)
}

/// A regressor trained on minmax-scaled lag windows, with the scaler needed
/// to map frames in and predictions back to price units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Windowed<M> {
    pub regressor: M,
    pub scaler: MinMaxScaler,
    pub window: usize,
    pub multivariate: bool,
}

impl<M: Regressor> Windowed<M> {
    /// Scales `frame`, builds supervised rows and hands them to `fit`.
    pub fn train(
        frame: &FeatureFrame,
        window: usize,
        multivariate: bool,
        fit: impl FnOnce(&[Vec<f64>], &[f64]) -> Result<M>,
    ) -> Result<Self> {
        let frame = select_columns(frame, multivariate)?;
        let scaler = MinMaxScaler::fit_allow_constant(&frame)?;
        let scaled = scaler.transform(&frame)?;
        let (x, y) = make_supervised(&scaled, window, multivariate)?;
        let regressor = fit(&x, &y)?;
        Ok(Self {
            regressor,
            scaler,
            window,
            multivariate,
        })
    }

    /// One-step prediction in price units from an unscaled feature row.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let cols = model_columns(self.multivariate);
        let expected = self.window + cols.len() - 1;
        if row.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: row.len(),
            });
        }
        let mut scaled = Vec::with_capacity(row.len());
        for (i, v) in row.iter().enumerate() {
            let col = if i < self.window { PRICE } else { cols[i - self.window + 1] };
            scaled.push(self.scaler.scale(col, *v)?);
        }
        self.scaler.unscale(PRICE, self.regressor.predict(&scaled)?)
    }

    /// Forecasts `horizon` weeks past the end of `frame`, in price units.
    pub fn forecast(&self, frame: &FeatureFrame, horizon: usize) -> Result<Vec<f64>> {
        let frame = select_columns(frame, self.multivariate)?;
        let scaled = self.scaler.transform(&frame)?;
        let out = recursive_forecast(&scaled, self.window, self.multivariate, horizon, |row| {
            self.regressor.predict(row)
        })?;
        out.into_iter()
            .map(|v| self.scaler.unscale(PRICE, v))
            .collect()
    }
}
