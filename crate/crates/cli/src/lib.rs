//! Operator commands behind the `agriprice` binary.
//!
//! Every command shares the SQLite store under `--data-dir` with the HTTP
//! service, so data ingested here is what `serve` answers from.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use agriprice_core::engine::{
    preprocess, report_csv, report_table, run_experiment, EngineConfig, EvaluationReport, Family, Mode,
};
use agriprice_core::ingest::{generate_synthetic, load_all, write_csv, MissingPolicy, SyntheticSpec};
use agriprice_core::{FeatureFrame, SplitSpec};
use agriprice_service::jobs::train_pair;
use agriprice_service::{data_fingerprint, AppState, ServiceConfig, ServiceError, Store, FORECAST_STEPS};
use chrono::Duration;
use clap::{Parser, Subcommand};
use serde::Serialize;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_MODEL: u8 = 4;

/// Commodities of the published experiments.
pub const BENCHMARK_COMMODITIES: [&str; 3] = ["chicken", "chili", "tomato"];

#[derive(Debug, Parser)]
#[command(name = "agriprice", version, about = "Agricultural commodity price forecasting")]
pub struct Cli {
    /// Directory holding the SQLite store, artifacts and reports.
    #[arg(long, global = true, env = "AGRIPRICE_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,

    /// Seed for synthetic data and for every stochastic model.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Missing-value strategy: sentinel, drop or ffill.
    #[arg(long, global = true, default_value = "ffill", value_parser = parse_policy)]
    pub policy: MissingPolicy,

    /// Share of rows used for training in the holdout split.
    #[arg(long, global = true, default_value_t = 0.9, allow_negative_numbers = true)]
    pub train_fraction: f64,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load price CSV files into the store.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Generate synthetic commodity CSVs.
    Synth {
        /// A preset name or a new commodity (then --mean, --min, --max and
        /// --stddev are required). All presets when omitted.
        #[arg(long)]
        commodity: Option<String>,
        #[arg(long)]
        weeks: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        mean: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        max: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        stddev: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        missing_rate: Option<f64>,
        /// Output directory; defaults to `<data-dir>/synthetic`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also load the generated data into the store.
        #[arg(long)]
        ingest: bool,
    },
    /// Run experiment series 1 (price only) or 2 (with exogenous drivers).
    Benchmark {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        series: u8,
        /// Commodities to evaluate; defaults to chicken, chili and tomato.
        #[arg(long = "commodity")]
        commodities: Vec<String>,
        /// Restrict to these families.
        #[arg(long = "family", value_parser = parse_family)]
        families: Vec<Family>,
        /// Use default hyperparameters instead of the grids.
        #[arg(long)]
        no_tune: bool,
        /// Skip only the LSTM grid.
        #[arg(long)]
        no_tune_lstm: bool,
        /// Report CSV path; defaults to `<data-dir>/reports/series<N>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select and fit the best model for a commodity and mode.
    Train {
        #[arg(long)]
        commodity: String,
        #[arg(long, default_value = "uni", value_parser = parse_mode)]
        mode: Mode,
        #[arg(long = "family", value_parser = parse_family)]
        families: Vec<Family>,
        #[arg(long)]
        no_tune: bool,
    },
    /// Write history and forecast as one plot-ready CSV.
    Forecast {
        #[arg(long)]
        commodity: String,
        #[arg(long, default_value = "uni", value_parser = parse_mode)]
        mode: Mode,
        #[arg(long, default_value_t = 52, value_parser = clap::value_parser!(u16).range(1..=FORECAST_STEPS as i64))]
        horizon: u16,
        /// Families considered if a model must be trained first.
        #[arg(long = "family", value_parser = parse_family)]
        families: Vec<Family>,
        #[arg(long)]
        no_tune: bool,
        /// Output path; defaults to `<data-dir>/forecasts/<commodity>_<mode>_<h>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP API until interrupted.
    Serve {
        #[arg(long, env = "AGRIPRICE_BIND")]
        bind: Option<SocketAddr>,
    },
}

fn parse_policy(s: &str) -> Result<MissingPolicy, String> {
    s.parse().map_err(|e: agriprice_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: agriprice_core::Error| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: agriprice_core::Error| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Model(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Data(_) => "data",
            Self::Model(_) => "model",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Model(_) => EXIT_MODEL,
        }
    }
}

impl From<agriprice_core::Error> for CliError {
    fn from(e: agriprice_core::Error) -> Self {
        use agriprice_core::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidSpec(_)
            | E::InvalidParameter { .. }
            | E::InvalidHorizon
            | E::HorizonTooLarge { .. }
            | E::UnsupportedMode { .. } => Self::Usage(msg),
            E::TooShort { .. }
            | E::UnorderedTimestamps { .. }
            | E::ConstantColumn(_)
            | E::UnknownColumn(_)
            | E::DuplicateColumn(_)
            | E::ColumnLength { .. }
            | E::LengthMismatch { .. }
            | E::Empty
            | E::MissingValues(_)
            | E::AllMissingColumn(_)
            | E::MissingExogenous(_)
            | E::Parse { .. }
            | E::UnknownCommodity(_)
            | E::EmptyFile(_)
            | E::ConstantSeries
            | E::DegenerateSeries(_)
            | E::DegenerateInput(_)
            | E::EmptyData
            | E::Io(_)
            | E::Json(_) => Self::Data(msg),
            _ => Self::Model(msg),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Core(c) => c.into(),
            ServiceError::Config(m) => Self::Usage(m),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

impl Cli {
    fn engine_config(&self) -> CliResult<EngineConfig> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Usage(format!(
                "--train-fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        let mut cfg = EngineConfig {
            policy: self.policy,
            split: SplitSpec::holdout(self.train_fraction),
            ..EngineConfig::default()
        };
        cfg.gbt.seed = self.seed;
        cfg.lstm.seed = self.seed;
        Ok(cfg)
    }

    fn open_store(&self) -> CliResult<Store> {
        fs::create_dir_all(&self.data_dir)?;
        Ok(Store::open(ServiceConfig::new(&self.data_dir).database_path())?)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Ingest { files } => cmd_ingest(&cli, files),
        Command::Synth {
            commodity,
            weeks,
            mean,
            min,
            max,
            stddev,
            missing_rate,
            out_dir,
            ingest,
        } => {
            let overrides = SpecOverrides {
                weeks: *weeks,
                mean: *mean,
                min: *min,
                max: *max,
                stddev: *stddev,
                missing_rate: *missing_rate,
            };
            cmd_synth(&cli, commodity.as_deref(), &overrides, out_dir.as_deref(), *ingest)
        }
        Command::Benchmark {
            series,
            commodities,
            families,
            no_tune,
            no_tune_lstm,
            out,
        } => {
            let mut cfg = cli.engine_config()?;
            apply_selection(&mut cfg, families, *no_tune);
            cfg.tune_lstm &= !*no_tune_lstm;
            cmd_benchmark(&cli, *series, commodities, &cfg, out.as_deref())
        }
        Command::Train {
            commodity,
            mode,
            families,
            no_tune,
        } => {
            let mut cfg = cli.engine_config()?;
            apply_selection(&mut cfg, families, *no_tune);
            cmd_train(&cli, commodity, *mode, &cfg)
        }
        Command::Forecast {
            commodity,
            mode,
            horizon,
            families,
            no_tune,
            out,
        } => {
            let mut cfg = cli.engine_config()?;
            apply_selection(&mut cfg, families, *no_tune);
            let path = cmd_forecast(&cli, commodity, *mode, *horizon as usize, &cfg, out.as_deref())?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Serve { bind } => cmd_serve(&cli, *bind),
    }
}

fn apply_selection(cfg: &mut EngineConfig, families: &[Family], no_tune: bool) {
    if !families.is_empty() {
        cfg.families = families.to_vec();
    }
    cfg.tune = !no_tune;
}

/// Per-commodity summary of an ingested file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub commodity: String,
    pub rows: usize,
    pub missing_prices: usize,
    pub warnings: Vec<String>,
}

impl IngestSummary {
    pub fn missing_pct(&self) -> f64 {
        100.0 * self.missing_prices as f64 / self.rows.max(1) as f64
    }
}

fn summarize(commodity: &str, frame: &FeatureFrame, warnings: Vec<String>) -> IngestSummary {
    IngestSummary {
        commodity: commodity.to_string(),
        rows: frame.len(),
        missing_prices: frame.base().missing_count(),
        warnings,
    }
}

fn store_frame(store: &Store, policy: MissingPolicy, commodity: &str, frame: &FeatureFrame) -> CliResult<()> {
    let fp = data_fingerprint(frame, policy)?;
    Ok(store.put_series(commodity, frame, &fp)?)
}

fn cmd_ingest(cli: &Cli, files: &[PathBuf]) -> CliResult<()> {
    let store = cli.open_store()?;
    let mut loaded = 0;
    let mut last_err = None;
    for file in files {
        match load_all(file) {
            Ok(map) => {
                for (name, ingested) in map {
                    store_frame(&store, cli.policy, &name, &ingested.frame)?;
                    let s = summarize(&name, &ingested.frame, ingested.warnings);
                    println!(
                        "{}: {} rows, {} missing prices ({:.2}%)",
                        s.commodity,
                        s.rows,
                        s.missing_prices,
                        s.missing_pct()
                    );
                    for w in &s.warnings {
                        println!("  warning: {w}");
                    }
                    loaded += 1;
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", file.display());
                last_err = Some(e);
            }
        }
    }
    match (loaded, last_err) {
        (0, Some(e)) => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Debug, Default, Clone)]
pub struct SpecOverrides {
    pub weeks: Option<usize>,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub stddev: Option<f64>,
    pub missing_rate: Option<f64>,
}

/// The spec for `name`: a preset (seeded as the service seeds it) with
/// overrides applied, or a custom commodity described entirely by flags.
pub fn synth_spec(name: &str, seed: u64, o: &SpecOverrides) -> CliResult<SyntheticSpec> {
    let presets = SyntheticSpec::preset_names();
    let mut spec = match presets.iter().position(|p| *p == name) {
        Some(i) => SyntheticSpec::preset(name, seed.wrapping_add(i as u64)).expect("listed preset exists"),
        None => {
            let need = |v: Option<f64>, flag: &str| {
                v.ok_or_else(|| CliError::Usage(format!("'{name}' is not a preset; --{flag} is required")))
            };
            SyntheticSpec {
                commodity: name.to_string(),
                mean: need(o.mean, "mean")?,
                min: need(o.min, "min")?,
                max: need(o.max, "max")?,
                stddev: need(o.stddev, "stddev")?,
                missing_rate: 0.02,
                n_weeks: agriprice_core::ingest::PRESET_WEEKS,
                seed,
            }
        }
    };
    spec.n_weeks = o.weeks.unwrap_or(spec.n_weeks);
    spec.mean = o.mean.unwrap_or(spec.mean);
    spec.min = o.min.unwrap_or(spec.min);
    spec.max = o.max.unwrap_or(spec.max);
    spec.stddev = o.stddev.unwrap_or(spec.stddev);
    spec.missing_rate = o.missing_rate.unwrap_or(spec.missing_rate);
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn file_stem(commodity: &str) -> String {
    commodity.replace(|c: char| !c.is_ascii_alphanumeric() && c != '-', "_")
}

fn cmd_synth(cli: &Cli, commodity: Option<&str>, o: &SpecOverrides, out_dir: Option<&Path>, ingest: bool) -> CliResult<()> {
    let names: Vec<String> = match commodity {
        Some(c) => vec![c.to_string()],
        None => SyntheticSpec::preset_names().into_iter().map(String::from).collect(),
    };
    let specs = names
        .iter()
        .map(|n| synth_spec(n, cli.seed, o))
        .collect::<CliResult<Vec<_>>>()?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cli.data_dir.join("synthetic"));
    fs::create_dir_all(&dir)?;
    let store = if ingest { Some(cli.open_store()?) } else { None };
    for spec in specs {
        let frame = generate_synthetic(&spec)?;
        let path = dir.join(format!("{}.csv", file_stem(&spec.commodity)));
        write_csv(&frame, &spec.commodity, fs::File::create(&path)?)?;
        if let Some(store) = &store {
            store_frame(store, cli.policy, &spec.commodity, &frame)?;
        }
        println!("{}: {} weeks -> {}", spec.commodity, frame.len(), path.display());
    }
    Ok(())
}

/// Named frames and the modes to run them in.
pub type SeriesInputs = (Vec<(String, FeatureFrame)>, Vec<Mode>);

/// Frames and modes for an experiment series.
pub fn series_inputs(series: u8, frames: Vec<(String, FeatureFrame)>) -> CliResult<SeriesInputs> {
    match series {
        1 => Ok((
            frames.into_iter().map(|(n, f)| (n, f.price_only())).collect(),
            vec![Mode::Univariate],
        )),
        2 => {
            for (name, f) in &frames {
                f.require_exogenous()
                    .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
            }
            Ok((frames, vec![Mode::Univariate, Mode::Multivariate]))
        }
        other => Err(CliError::Usage(format!("--series must be 1 or 2, got {other}"))),
    }
}

#[derive(Serialize)]
struct BenchmarkRecord<'a> {
    series: u8,
    seed: u64,
    config: &'a EngineConfig,
    reports: &'a [EvaluationReport],
}

fn cmd_benchmark(cli: &Cli, series: u8, commodities: &[String], cfg: &EngineConfig, out: Option<&Path>) -> CliResult<()> {
    let store = cli.open_store()?;
    let names: Vec<String> = if commodities.is_empty() {
        BENCHMARK_COMMODITIES.iter().map(|s| s.to_string()).collect()
    } else {
        commodities.to_vec()
    };
    let frames = names
        .iter()
        .map(|n| Ok((n.clone(), store.load_frame(n)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let (data, modes) = series_inputs(series, frames)?;
    let reports = run_experiment(&data, &modes, cfg);

    print!("{}", report_table(&reports));
    let csv_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.data_dir.join("reports").join(format!("series{series}.csv")));
    if let Some(parent) = csv_path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&csv_path, report_csv(&reports)?)?;
    let record = BenchmarkRecord {
        series,
        seed: cli.seed,
        config: cfg,
        reports: &reports,
    };
    let json = serde_json::to_string_pretty(&record).map_err(agriprice_core::Error::from)?;
    fs::write(csv_path.with_extension("json"), json)?;
    println!("report: {}", csv_path.display());

    let failed = reports.iter().all(|r| r.winner.is_none());
    if failed && !reports.is_empty() {
        return Err(CliError::Model("every evaluation failed".into()));
    }
    Ok(())
}

fn cmd_train(cli: &Cli, commodity: &str, mode: Mode, cfg: &EngineConfig) -> CliResult<()> {
    let store = cli.open_store()?;
    let (report, row) = train_pair(&store, &ServiceConfig::new(&cli.data_dir).artifact_dir(), cfg, commodity, mode)?;
    print!("{}", report_table(std::slice::from_ref(&report)));
    println!("winner: {} -> {}", row.family, row.path);
    Ok(())
}

/// Forecast values for the pair, training first when no model matches the
/// stored data.
pub fn forecast_values(
    store: &Store,
    data_dir: &Path,
    commodity: &str,
    mode: Mode,
    cfg: &EngineConfig,
) -> CliResult<Vec<f64>> {
    let current = store
        .fingerprint(commodity)?
        .ok_or_else(|| agriprice_core::Error::UnknownCommodity(commodity.to_string()))?;
    if let Some(c) = store.cached_forecast(commodity, mode.as_str())? {
        if c.fingerprint == current {
            return Ok(c.values);
        }
    }
    log::info!("no current model for {commodity} ({}); training", mode.as_str());
    train_pair(store, &ServiceConfig::new(data_dir).artifact_dir(), cfg, commodity, mode)?;
    let c = store
        .cached_forecast(commodity, mode.as_str())?
        .ok_or_else(|| CliError::Model("training produced no forecast".into()))?;
    Ok(c.values)
}

/// Writes `date,price_myr,is_forecast` rows: the preprocessed history
/// flagged 0 followed by `horizon` forecast weeks flagged 1.
pub fn write_plot_csv(path: &Path, history: &FeatureFrame, forecast: &[f64]) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Data(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["date", "price_myr", "is_forecast"]).map_err(io)?;
    let prices = history.prices()?;
    for (d, p) in history.timestamps().iter().zip(&prices) {
        w.write_record([d.format("%Y-%m-%d").to_string(), p.to_string(), "0".into()])
            .map_err(io)?;
    }
    let last = *history.timestamps().last().expect("history is non-empty");
    for (k, p) in forecast.iter().enumerate() {
        let d = last + Duration::weeks(k as i64 + 1);
        w.write_record([d.format("%Y-%m-%d").to_string(), p.to_string(), "1".into()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_forecast(
    cli: &Cli,
    commodity: &str,
    mode: Mode,
    horizon: usize,
    cfg: &EngineConfig,
    out: Option<&Path>,
) -> CliResult<PathBuf> {
    let store = cli.open_store()?;
    let values = forecast_values(&store, &cli.data_dir, commodity, mode, cfg)?;
    let history = preprocess(&store.load_frame(commodity)?, cfg.policy)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| {
        cli.data_dir
            .join("forecasts")
            .join(format!("{}_{}_{horizon}.csv", file_stem(commodity), mode.as_str()))
    });
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_plot_csv(&path, &history, &values[..horizon])?;
    Ok(path)
}

fn cmd_serve(cli: &Cli, bind: Option<SocketAddr>) -> CliResult<()> {
    let mut config = ServiceConfig::from_env()?;
    config.data_dir = cli.data_dir.clone();
    if let Some(b) = bind {
        config.bind = b;
    }
    config.engine = cli.engine_config()?;
    let state = AppState::open(config)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(agriprice_service::serve(state, shutdown_signal()))?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutting down");
}
