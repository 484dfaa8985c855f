//! Preprocessing, tuning, held-out evaluation and model selection across
//! the five model families.

mod artifact;
mod report;

pub use artifact::{fingerprint, load_artifact, save_artifact, ModelArtifact, ARTIFACT_VERSION};
pub use report::{report_csv, report_table, EvaluationReport, ReportEntry, REPORT_HEADER};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{apply_missing_policy, MissingPolicy};
use crate::models::arima::{self, ArimaModel, ArimaOrder};
use crate::models::gbt::{self, GbtModel, GbtParams};
use crate::models::lstm::{LstmModel, LstmParams};
use crate::models::svr::{self, SvrModel, SvrParams};
use crate::models::trend::{TrendModel, TrendParams};
use crate::series::{mse, split, split_indices, FeatureFrame, MinMaxScaler, SplitSpec};
use crate::stationarity::suggest_order;

/// Model families in canonical tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Arima,
    Trend,
    Svr,
    Gbt,
    Lstm,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Arima, Family::Trend, Family::Svr, Family::Gbt, Family::Lstm];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Arima => "arima",
            Family::Trend => "trend",
            Family::Svr => "svr",
            Family::Gbt => "gbt",
            Family::Lstm => "lstm",
        }
    }

    pub fn supports(self, mode: Mode) -> bool {
        self != Family::Arima || mode == Mode::Univariate
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter {
                name: "family",
                reason: format!("unknown family '{s}'"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Univariate,
    Multivariate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Univariate => "univariate",
            Mode::Multivariate => "multivariate",
        }
    }

    pub fn is_multivariate(self) -> bool {
        self == Mode::Multivariate
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "univariate" | "uni" => Ok(Mode::Univariate),
            "multivariate" | "multi" => Ok(Mode::Multivariate),
            other => Err(Error::InvalidParameter {
                name: "mode",
                reason: format!("unknown mode '{other}'"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Hyperparams {
    Arima(ArimaOrder),
    Trend(TrendParams),
    Svr(SvrParams),
    Gbt(GbtParams),
    Lstm(LstmParams),
}

impl Hyperparams {
    pub fn family(&self) -> Family {
        match self {
            Hyperparams::Arima(_) => Family::Arima,
            Hyperparams::Trend(_) => Family::Trend,
            Hyperparams::Svr(_) => Family::Svr,
            Hyperparams::Gbt(_) => Family::Gbt,
            Hyperparams::Lstm(_) => Family::Lstm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub mode: Mode,
    pub hyperparameters: Hyperparams,
}

impl ModelSpec {
    pub fn new(mode: Mode, hyperparameters: Hyperparams) -> Result<Self> {
        let family = hyperparameters.family();
        if !family.supports(mode) {
            return Err(Error::UnsupportedMode {
                family: family.to_string(),
                mode: mode.to_string(),
            });
        }
        Ok(Self {
            family,
            mode,
            hyperparameters,
        })
    }

    /// Default hyperparameters of `family` as configured.
    pub fn default_for(family: Family, mode: Mode, config: &EngineConfig) -> Result<Self> {
        let hp = match family {
            Family::Arima => Hyperparams::Arima(ArimaOrder::new(1, 1, 1)?),
            Family::Trend => Hyperparams::Trend(config.trend),
            Family::Svr => Hyperparams::Svr(config.svr),
            Family::Gbt => Hyperparams::Gbt(config.gbt),
            Family::Lstm => Hyperparams::Lstm(config.lstm),
        };
        Self::new(mode, hp)
    }
}

/// Knobs for one evaluation run. Family defaults are the starting points
/// that the tuning grids vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub policy: MissingPolicy,
    pub split: SplitSpec,
    pub cv_folds: usize,
    pub svr: SvrParams,
    pub trend: TrendParams,
    pub gbt: GbtParams,
    pub lstm: LstmParams,
    /// Run the grid search for each family; off means defaults only.
    pub tune: bool,
    /// The LSTM grid is by far the most expensive and can be skipped alone.
    pub tune_lstm: bool,
    /// Families entered into the competition; defaults to all five.
    #[serde(default = "all_families")]
    pub families: Vec<Family>,
}

fn all_families() -> Vec<Family> {
    Family::ALL.to_vec()
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            policy: MissingPolicy::ForwardFill,
            split: SplitSpec::default(),
            cv_folds: 3,
            svr: SvrParams::default(),
            trend: TrendParams::default(),
            gbt: GbtParams::default(),
            lstm: LstmParams::default(),
            tune: true,
            tune_lstm: true,
            families: all_families(),
        }
    }
}

/// Grid values searched per family.
pub const SVR_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const TREND_PRIOR_GRID: [f64; 5] = [0.05, 0.5, 5.0, 10.0, 30.0];
pub const GBT_LR_GRID: [f64; 3] = [0.05, 0.1, 0.3];
pub const LSTM_DROPOUT_GRID: [f64; 3] = [0.1, 0.2, 0.3];

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "lowercase")]
pub enum TrainedModel {
    Arima(ArimaModel),
    Trend(TrendModel),
    Svr(SvrModel),
    Gbt(GbtModel),
    Lstm(LstmModel),
}

impl TrainedModel {
    pub fn fit(spec: &ModelSpec, frame: &FeatureFrame) -> Result<Self> {
        let multi = spec.mode.is_multivariate();
        Ok(match &spec.hyperparameters {
            Hyperparams::Arima(order) => TrainedModel::Arima(arima::fit(&frame.prices()?, *order)?),
            Hyperparams::Trend(p) => TrainedModel::Trend(TrendModel::fit_frame(frame, p, multi)?),
            Hyperparams::Svr(p) => TrainedModel::Svr(svr::train(frame, p, multi)?),
            Hyperparams::Gbt(p) => TrainedModel::Gbt(gbt::train(frame, p, multi)?),
            Hyperparams::Lstm(p) => TrainedModel::Lstm(LstmModel::train(frame, p, multi)?),
        })
    }

    /// Forecasts `horizon` weeks past the end of `history`, which must be
    /// the frame the model was fitted on (or its tail).
    pub fn forecast(&self, history: &FeatureFrame, horizon: usize) -> Result<Vec<f64>> {
        if horizon == 0 {
            return Err(Error::InvalidHorizon);
        }
        match self {
            TrainedModel::Arima(m) => m.forecast(horizon),
            TrainedModel::Trend(m) => m.forecast(horizon),
            TrainedModel::Svr(m) => m.forecast(history, horizon),
            TrainedModel::Gbt(m) => m.forecast(history, horizon),
            TrainedModel::Lstm(m) => m.forecast_extended(history, horizon),
        }
    }

    /// Rows of history the forecaster reads.
    pub fn context_rows(&self) -> usize {
        match self {
            TrainedModel::Arima(_) | TrainedModel::Trend(_) => 1,
            TrainedModel::Svr(m) => m.window,
            TrainedModel::Gbt(m) => m.window,
            TrainedModel::Lstm(m) => m.params.lookback_window,
        }
    }

    pub fn scaler(&self) -> Option<&MinMaxScaler> {
        match self {
            TrainedModel::Svr(m) => Some(&m.scaler),
            TrainedModel::Gbt(m) => Some(&m.scaler),
            TrainedModel::Lstm(m) => Some(&m.scaler),
            _ => None,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            TrainedModel::Arima(_) => Family::Arima,
            TrainedModel::Trend(_) => Family::Trend,
            TrainedModel::Svr(_) => Family::Svr,
            TrainedModel::Gbt(_) => Family::Gbt,
            TrainedModel::Lstm(_) => Family::Lstm,
        }
    }
}

/// Applies the missing-value policy; the result has no missing price cells.
pub fn preprocess(frame: &FeatureFrame, policy: MissingPolicy) -> Result<FeatureFrame> {
    let out = apply_missing_policy(frame, policy)?;
    debug_assert_eq!(out.base().missing_count(), 0);
    Ok(out)
}

/// Fits on `train` and scores the forecast of `test`'s length against its
/// prices, in price units squared.
fn holdout_mse(spec: &ModelSpec, train: &FeatureFrame, test: &FeatureFrame) -> Result<(f64, TrainedModel)> {
    let model = TrainedModel::fit(spec, train)?;
    let forecast = model.forecast(train, test.len())?;
    Ok((mse(&test.prices()?, &forecast)?, model))
}

/// Mean held-out MSE over expanding-window folds of `frame`.
pub fn cv_mse(spec: &ModelSpec, frame: &FeatureFrame, folds: usize) -> Result<f64> {
    let ranges = split_indices(frame.len(), &SplitSpec::cv(folds))?;
    let mut total = 0.0;
    for (train, test) in &ranges {
        total += holdout_mse(spec, &frame.slice(train.clone())?, &frame.slice(test.clone())?)?.0;
    }
    Ok(total / ranges.len() as f64)
}

/// The grid searched for `family`, in canonical order.
pub fn candidates(family: Family, frame: &FeatureFrame, mode: Mode, config: &EngineConfig) -> Result<Vec<ModelSpec>> {
    let base = ModelSpec::default_for(family, mode, config)?;
    if !config.tune || (family == Family::Lstm && !config.tune_lstm) {
        return Ok(vec![base]);
    }
    let hps: Vec<Hyperparams> = match family {
        Family::Arima => {
            let mut orders = Vec::new();
            if let Ok(s) = frame.prices().and_then(|p| suggest_order(&p)) {
                orders.extend(s.p_candidates.iter().filter_map(|&p| ArimaOrder::new(p, s.d, s.q).ok()));
            }
            for o in [ArimaOrder::new(1, 1, 1)?, ArimaOrder::new(2, 1, 1)?] {
                if !orders.contains(&o) {
                    orders.push(o);
                }
            }
            orders.into_iter().map(Hyperparams::Arima).collect()
        }
        Family::Trend => TREND_PRIOR_GRID
            .iter()
            .map(|&prior_scale| Hyperparams::Trend(TrendParams { prior_scale, ..config.trend }))
            .collect(),
        Family::Svr => SVR_C_GRID
            .iter()
            .map(|&c| Hyperparams::Svr(SvrParams { c, ..config.svr }))
            .collect(),
        Family::Gbt => GBT_LR_GRID
            .iter()
            .map(|&learning_rate| Hyperparams::Gbt(GbtParams { learning_rate, ..config.gbt }))
            .collect(),
        Family::Lstm => LSTM_DROPOUT_GRID
            .iter()
            .map(|&dropout_rate| Hyperparams::Lstm(LstmParams { dropout_rate, ..config.lstm }))
            .collect(),
    };
    hps.into_iter().map(|hp| ModelSpec::new(mode, hp)).collect()
}

/// Picks the candidate with the lowest score; a later candidate must beat
/// the incumbent by more than 1e-12 to replace it.
pub fn pick_lowest(scored: &[(ModelSpec, f64)]) -> Option<ModelSpec> {
    let mut best: Option<(ModelSpec, f64)> = None;
    for (spec, score) in scored {
        if !score.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| *score < b - 1e-12) {
            best = Some((*spec, *score));
        }
    }
    best.map(|(s, _)| s)
}

/// Grid search scored by expanding-window CV on `frame` (the training
/// partition only).
pub fn tune(family: Family, frame: &FeatureFrame, mode: Mode, config: &EngineConfig) -> Result<ModelSpec> {
    let grid = candidates(family, frame, mode, config)?;
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let mut scored = Vec::new();
    for spec in &grid {
        match cv_mse(spec, frame, config.cv_folds) {
            Ok(score) => scored.push((*spec, score)),
            Err(e) => log::debug!("{family} candidate {:?} failed: {e}", spec.hyperparameters),
        }
    }
    pick_lowest(&scored).ok_or(Error::GridExhausted(family.to_string()))
}

/// Result of one train/test evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub artifact: ModelArtifact,
    pub mse: f64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Fits `spec` on the training partition and scores the test partition.
/// With cross-validation the MSE is the fold average and the artifact
/// comes from the last fold.
pub fn train_and_test(spec: &ModelSpec, frame: &FeatureFrame, split_spec: &SplitSpec, commodity: &str) -> Result<Evaluation> {
    let parts = split(frame, split_spec)?;
    let mut total = 0.0;
    let mut last = None;
    for part in &parts {
        let (score, model) = holdout_mse(spec, part.train(), part.test())?;
        total += score;
        last = Some((model, part));
    }
    let (model, part) = last.ok_or(Error::Empty)?;
    let artifact = ModelArtifact::new(commodity, *spec, model, part.train())?;
    Ok(Evaluation {
        artifact,
        mse: total / parts.len() as f64,
        train_rows: part.train().len(),
        test_rows: part.test().len(),
    })
}

/// Argmin by MSE; exact ties go to the earlier family, then mode.
pub fn select_best(entries: &[(ModelSpec, f64)]) -> Result<ModelSpec> {
    entries
        .iter()
        .filter(|(_, m)| !m.is_nan())
        .min_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(a.0.family.cmp(&b.0.family))
                .then(a.0.mode.cmp(&b.0.mode))
        })
        .map(|(s, _)| *s)
        .ok_or(Error::EmptyReport)
}

const SENTINEL_WARNING: &str = "sentinel fill distorts kernel distances";

/// Evaluates one commodity across every family for each mode.
pub fn evaluate_commodity(commodity: &str, raw: &FeatureFrame, modes: &[Mode], config: &EngineConfig) -> EvaluationReport {
    let started_at = chrono::Utc::now();
    let mut report = EvaluationReport::new(commodity, config.split, started_at);
    let frame = match preprocess(raw, config.policy) {
        Ok(f) => f,
        Err(e) => {
            report.warnings.push(format!("preprocessing failed: {e}"));
            report.finish();
            return report;
        }
    };
    let tuning_frame = split(&frame, &config.split)
        .ok()
        .and_then(|parts| parts.into_iter().next())
        .map(|p| p.into_parts().0);
    for &mode in modes {
        for &family in &config.families {
            if !family.supports(mode) {
                continue;
            }
            let mut warnings = Vec::new();
            if family == Family::Svr && config.policy == MissingPolicy::SentinelFill {
                warnings.push(SENTINEL_WARNING.to_string());
            }
            let outcome = (|| {
                let tf = tuning_frame.as_ref().ok_or(Error::TooShort {
                    needed: 10,
                    got: frame.len(),
                })?;
                let spec = tune(family, tf, mode, config)?;
                train_and_test(&spec, &frame, &config.split, commodity)
            })();
            report.entries.push(ReportEntry::from_outcome(family, mode, outcome, warnings));
        }
    }
    report.finish();
    report
}

/// Evaluates every commodity; failures are recorded per cell.
pub fn run_experiment(data: &[(String, FeatureFrame)], modes: &[Mode], config: &EngineConfig) -> Vec<EvaluationReport> {
    data.iter()
        .map(|(name, frame)| {
            log::info!("evaluating {name}");
            evaluate_commodity(name, frame, modes, config)
        })
        .collect()
}

/// Fits the winning spec of `report` on the whole preprocessed frame, for
/// serving.
pub fn fit_winner(report: &EvaluationReport, raw: &FeatureFrame, config: &EngineConfig) -> Result<ModelArtifact> {
    let spec = report.winner.ok_or(Error::EmptyReport)?;
    let frame = preprocess(raw, config.policy)?;
    let model = TrainedModel::fit(&spec, &frame)?;
    ModelArtifact::new(&report.commodity, spec, model, &frame)
}

#[cfg(test)]
mod tests;
