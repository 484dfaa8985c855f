//! Weekly commodity price forecasting.
//!
//! Five model families (ARIMA, support vector regression, a changepoint
//! trend + Fourier seasonality model, gradient boosted trees and a stacked
//! LSTM) share the containers in [`series`]; [`engine`] tunes, trains,
//! evaluates and selects the lowest-MSE model per commodity.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod series;
pub mod stationarity;

pub use error::{Error, Result};
pub use series::{FeatureFrame, MinMaxScaler, Series, SplitSpec};
