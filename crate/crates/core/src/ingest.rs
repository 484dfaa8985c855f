//! Loading weekly price CSVs, missing-value policies and the synthetic
//! data generator.
//!
//! CSV files use the fixed header
//! `date,commodity,price_myr,temperature_c,humidity_pct,precipitation_mm,crude_oil_usd`,
//! one row per commodity-week, `YYYY-MM-DD` dates and empty fields for
//! missing cells.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{splitmix64, CounterRng};
use crate::series::{
    weekly_dates, Column, FeatureFrame, Series, CRUDE_OIL, EXOGENOUS, HUMIDITY, PRECIPITATION,
    PRICE, TEMPERATURE,
};

pub const CSV_HEADER: [&str; 7] = [
    "date",
    "commodity",
    "price_myr",
    "temperature_c",
    "humidity_pct",
    "precipitation_mm",
    "crude_oil_usd",
];

/// Value written into missing cells by [`MissingPolicy::SentinelFill`].
pub const SENTINEL: f64 = -99999.0;

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub date: NaiveDate,
    pub commodity: String,
    pub price_myr: Option<f64>,
    pub temperature_c: Option<f64>,
    pub humidity_pct: Option<f64>,
    pub precipitation_mm: Option<f64>,
    pub crude_oil_usd: Option<f64>,
}

impl RawRecord {
    fn exogenous(&self) -> [Option<f64>; 4] {
        [
            self.temperature_c,
            self.humidity_pct,
            self.precipitation_mm,
            self.crude_oil_usd,
        ]
    }
}

/// A loaded frame plus any non-fatal notes (duplicates dropped, gaps filled).
#[derive(Debug, Clone)]
pub struct Ingested {
    pub frame: FeatureFrame,
    pub warnings: Vec<String>,
}

/// Snaps a date to the Monday of its ISO week.
pub fn week_start(date: NaiveDate) -> NaiveDate {
    date - Duration::days(date.weekday().num_days_from_monday() as i64)
}

fn parse_cell(field: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field.parse().map_err(|e| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("'{field}': {e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("'{field}' is not finite"),
        });
    }
    Ok(Some(v))
}

/// Parses every row of a CSV in the ingest schema. Row numbers in errors are
/// 1-based file lines (the header is line 1).
pub fn read_records<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        row: 1,
        column: "header".into(),
        message: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            row: 1,
            column: "header".into(),
            message: format!("expected '{}'", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: "record".into(),
            message: e.to_string(),
        })?;
        let date = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d").map_err(|e| {
            Error::Parse {
                row,
                column: CSV_HEADER[0].into(),
                message: format!("'{}': {e}", &rec[0]),
            }
        })?;
        let commodity = rec[1].trim().to_string();
        if commodity.is_empty() {
            return Err(Error::Parse {
                row,
                column: CSV_HEADER[1].into(),
                message: "empty commodity".into(),
            });
        }
        let price_myr = parse_cell(&rec[2], row, CSV_HEADER[2])?;
        if matches!(price_myr, Some(p) if p <= 0.0) {
            return Err(Error::Parse {
                row,
                column: CSV_HEADER[2].into(),
                message: "price must be positive".into(),
            });
        }
        out.push(RawRecord {
            date,
            commodity,
            price_myr,
            temperature_c: parse_cell(&rec[3], row, CSV_HEADER[3])?,
            humidity_pct: parse_cell(&rec[4], row, CSV_HEADER[4])?,
            precipitation_mm: parse_cell(&rec[5], row, CSV_HEADER[5])?,
            crude_oil_usd: parse_cell(&rec[6], row, CSV_HEADER[6])?,
        });
    }
    Ok(out)
}

/// Builds a weekly-grid frame from one commodity's records: dates snapped to
/// Mondays, sorted, duplicates dropped (first kept) and gaps filled with
/// missing cells. Exogenous columns without any observed value are omitted.
pub fn frame_from_records(commodity: &str, records: &[RawRecord]) -> Result<Ingested> {
    let mut warnings = Vec::new();
    let mut by_week: BTreeMap<NaiveDate, &RawRecord> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.commodity == commodity) {
        let week = week_start(rec.date);
        match by_week.entry(week) {
            std::collections::btree_map::Entry::Occupied(_) => {
                warnings.push(format!("{commodity}: duplicate row for week {week} dropped"));
            }
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(rec);
            }
        }
    }
    let (first, last) = match (by_week.keys().next(), by_week.keys().next_back()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::UnknownCommodity(commodity.to_string())),
    };
    let weeks = ((last - first).num_days() / 7) as usize + 1;
    if weeks < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: weeks,
        });
    }
    let dates = weekly_dates(first, weeks);
    let gaps = weeks - by_week.len();
    if gaps > 0 {
        warnings.push(format!("{commodity}: {gaps} missing weeks inserted"));
    }
    let prices: Vec<Option<f64>> = dates
        .iter()
        .map(|d| by_week.get(d).and_then(|r| r.price_myr))
        .collect();
    let exogenous = EXOGENOUS
        .iter()
        .enumerate()
        .map(|(j, name)| Column {
            name: name.to_string(),
            values: dates
                .iter()
                .map(|d| by_week.get(d).and_then(|r| r.exogenous()[j]))
                .collect(),
        })
        .filter(|c| c.values.iter().any(Option::is_some))
        .collect();
    let frame = FeatureFrame::new(Series::new(dates, prices)?, exogenous)?;
    Ok(Ingested { frame, warnings })
}

/// One record per frame row; the inverse of [`frame_from_records`] for
/// frames on a weekly grid.
pub fn records_from_frame(frame: &FeatureFrame, commodity: &str) -> Vec<RawRecord> {
    let exo: Vec<Option<&[Option<f64>]>> = EXOGENOUS.iter().map(|n| frame.column(n)).collect();
    let cell = |j: usize, i: usize| exo[j].and_then(|c| c[i]);
    frame
        .timestamps()
        .iter()
        .enumerate()
        .map(|(i, date)| RawRecord {
            date: *date,
            commodity: commodity.to_string(),
            price_myr: frame.base().values()[i],
            temperature_c: cell(0, i),
            humidity_pct: cell(1, i),
            precipitation_mm: cell(2, i),
            crude_oil_usd: cell(3, i),
        })
        .collect()
}

/// Loads one commodity from a CSV file in the ingest schema.
pub fn load_csv(path: impl AsRef<Path>, commodity: &str) -> Result<Ingested> {
    let path = path.as_ref();
    let records = read_records(File::open(path)?)?;
    if records.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let loaded = frame_from_records(commodity, &records)?;
    for w in &loaded.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(loaded)
}

/// Loads every commodity present in a CSV file.
pub fn load_all(path: impl AsRef<Path>) -> Result<BTreeMap<String, Ingested>> {
    let path = path.as_ref();
    let records = read_records(File::open(path)?)?;
    if records.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let mut names: Vec<&str> = records.iter().map(|r| r.commodity.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    names
        .into_iter()
        .map(|name| Ok((name.to_string(), frame_from_records(name, &records)?)))
        .collect()
}

fn fmt_cell(v: Option<f64>) -> String {
    // `Display` for f64 is the shortest representation that parses back to
    // the same bits.
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `frame` in the ingest CSV schema.
pub fn write_csv<W: Write>(frame: &FeatureFrame, commodity: &str, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    let exo: Vec<Option<&[Option<f64>]>> = EXOGENOUS.iter().map(|n| frame.column(n)).collect();
    for (i, date) in frame.timestamps().iter().enumerate() {
        let mut row = vec![
            date.format("%Y-%m-%d").to_string(),
            commodity.to_string(),
            fmt_cell(frame.base().values()[i]),
        ];
        row.extend(exo.iter().map(|c| fmt_cell(c.and_then(|c| c[i]))));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(frame: &FeatureFrame, commodity: &str) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(frame, commodity, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Strategy for missing cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Replace with [`SENTINEL`]. Distorts distance-based models (the RBF
    /// kernel in particular) and is kept only for comparison runs.
    SentinelFill,
    /// Remove every row with any missing cell.
    DropRows,
    /// Carry the previous observation forward; leading gaps take the first
    /// later observation.
    #[default]
    ForwardFill,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentinel" | "sentinel_fill" => Ok(Self::SentinelFill),
            "drop" | "drop_rows" => Ok(Self::DropRows),
            "ffill" | "forward_fill" => Ok(Self::ForwardFill),
            other => Err(Error::InvalidParameter {
                name: "policy",
                reason: format!("unknown policy '{other}'"),
            }),
        }
    }
}

fn forward_fill(name: &str, cells: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let first = cells
        .iter()
        .flatten()
        .next()
        .copied()
        .ok_or_else(|| Error::AllMissingColumn(name.to_string()))?;
    let mut last = first;
    Ok(cells
        .iter()
        .map(|c| {
            if let Some(v) = c {
                last = *v;
            }
            Some(last)
        })
        .collect())
}

pub fn apply_missing_policy(frame: &FeatureFrame, policy: MissingPolicy) -> Result<FeatureFrame> {
    match policy {
        MissingPolicy::SentinelFill => {
            frame.map_columns(|_, cells| Ok(cells.iter().map(|c| Some(c.unwrap_or(SENTINEL))).collect()))
        }
        MissingPolicy::ForwardFill => frame.map_columns(forward_fill),
        MissingPolicy::DropRows => {
            let columns: Vec<&[Option<f64>]> = frame
                .column_names()
                .into_iter()
                .map(|n| frame.column(n).expect("listed column exists"))
                .collect();
            for (name, col) in frame.column_names().iter().zip(&columns) {
                if col.iter().all(Option::is_none) {
                    return Err(Error::AllMissingColumn(name.to_string()));
                }
            }
            frame.filter_rows(|i| columns.iter().all(|c| c[i].is_some()))
        }
    }
}

/// Target statistics for a generated commodity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub commodity: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub stddev: f64,
    pub missing_rate: f64,
    pub n_weeks: usize,
    pub seed: u64,
}

/// First week of generated data (a Monday in December 2008).
pub fn synthetic_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2008, 12, 1).expect("valid date")
}

/// Weeks from December 2008 to March 2020.
pub const PRESET_WEEKS: usize = 588;

const PRESETS: [(&str, f64, f64, f64, f64); 7] = [
    // name, mean, min, max, stddev (MYR/kg)
    ("chicken", 4.84, 3.50, 6.25, 0.52),
    ("chili", 5.92, 2.90, 12.0, 1.55),
    ("tomato", 2.19, 0.50, 6.35, 0.83),
    ("cabbage", 2.45, 1.20, 4.10, 0.48),
    ("cucumber", 1.95, 0.90, 3.40, 0.41),
    ("long bean", 4.10, 2.30, 6.90, 0.78),
    ("shallot", 5.35, 3.10, 8.80, 0.92),
];

impl SyntheticSpec {
    /// Named preset; the first three rows match the published price table.
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        PRESETS
            .iter()
            .find(|p| p.0 == name)
            .map(|&(commodity, mean, min, max, stddev)| Self {
                commodity: commodity.to_string(),
                mean,
                min,
                max,
                stddev,
                missing_rate: 0.02,
                n_weeks: PRESET_WEEKS,
                seed,
            })
    }

    pub fn preset_names() -> Vec<&'static str> {
        PRESETS.iter().map(|p| p.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.commodity.trim().is_empty() {
            return bad("empty commodity name".into());
        }
        if !(self.min < self.mean && self.mean < self.max) {
            return bad(format!(
                "need min < mean < max, got {} / {} / {}",
                self.min, self.mean, self.max
            ));
        }
        if !(self.stddev > 0.0) || !self.stddev.is_finite() {
            return bad(format!("stddev must be positive, got {}", self.stddev));
        }
        if !(0.0..0.1).contains(&self.missing_rate) {
            return bad(format!("missing_rate {} not in [0, 0.1)", self.missing_rate));
        }
        if self.n_weeks < 2 {
            return bad(format!("n_weeks {} < 2", self.n_weeks));
        }
        Ok(())
    }
}

const SEASON_WEEKS: f64 = 52.0;
const AR_PHI: f64 = 0.7;
const SEASON_WEIGHT: f64 = 1.0;
const NOISE_WEIGHT: f64 = 0.5;
const CRUDE_WEIGHT: f64 = 0.3;

fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn name_stream(name: &str) -> u64 {
    name.bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| splitmix64(h ^ b as u64))
}

/// Generates a weekly frame with the requested price statistics.
///
/// Price is a 52-week sinusoid plus AR(1) noise plus a 0.3-weight
/// contribution from a crude-oil random walk (all in standardized units),
/// affinely mapped onto the target mean and standard deviation and clipped
/// into `[min, max]`. Temperature, humidity and precipitation are
/// phase-shifted versions of the same seasonal cycle with noise. Exactly
/// `floor(missing_rate * n_weeks)` price cells are blanked uniformly at
/// random.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<FeatureFrame> {
    spec.validate()?;
    let n = spec.n_weeks;
    let stream = name_stream(&spec.commodity);
    let mut rng = CounterRng::with_stream(spec.seed, stream);
    let tau = std::f64::consts::TAU;
    let phase = rng.next_f64() * tau;
    let season_at = |t: usize, shift: f64| (tau * t as f64 / SEASON_WEEKS + phase + shift).sin();

    let mut noise = Vec::with_capacity(n);
    let mut e = 0.0;
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        e = AR_PHI * e + z;
        noise.push(e);
    }
    standardize(&mut noise);

    let mut crude = Vec::with_capacity(n);
    let mut level = 55.0 + 20.0 * rng.next_f64();
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        level = (level + 1.5 * z).max(15.0);
        crude.push(level);
    }
    let mut crude_z = crude.clone();
    standardize(&mut crude_z);

    let mut raw: Vec<f64> = (0..n)
        .map(|t| {
            SEASON_WEIGHT * std::f64::consts::SQRT_2 * season_at(t, 0.0)
                + NOISE_WEIGHT * noise[t]
                + CRUDE_WEIGHT * crude_z[t]
        })
        .collect();
    standardize(&mut raw);

    // Affine map with a few corrections so the clipped series still hits the
    // target moments.
    let (mut scale, mut shift) = (spec.stddev, spec.mean);
    let mut prices = Vec::new();
    for _ in 0..30 {
        prices = raw
            .iter()
            .map(|z| (shift + scale * z).clamp(spec.min, spec.max))
            .collect();
        let (m, s) = mean_sd(&prices);
        if s > 0.0 {
            scale *= spec.stddev / s;
        }
        shift += spec.mean - m;
    }

    let mut price_cells: Vec<Option<f64>> = prices.into_iter().map(Some).collect();
    let blanks = (spec.missing_rate * n as f64 + 1e-9).floor() as usize;
    for i in rng.sample_indices(n, blanks) {
        price_cells[i] = None;
    }

    let mut normal = |sd: f64| -> f64 { sd * rng.sample::<f64, _>(StandardNormal) };
    let temperature: Vec<Option<f64>> = (0..n)
        .map(|t| Some(27.5 + 1.2 * season_at(t, 1.0) + normal(0.4)))
        .collect();
    let humidity: Vec<Option<f64>> = (0..n)
        .map(|t| Some((80.0 + 6.0 * season_at(t, 2.0) + normal(2.0)).clamp(40.0, 100.0)))
        .collect();
    let precipitation: Vec<Option<f64>> = (0..n)
        .map(|t| Some((220.0 + 120.0 * season_at(t, 0.5) + normal(40.0)).max(0.0)))
        .collect();

    let base = Series::new(weekly_dates(synthetic_start(), n), price_cells)?;
    let col = |name: &str, values: Vec<Option<f64>>| Column {
        name: name.to_string(),
        values,
    };
    FeatureFrame::new(
        base,
        vec![
            col(TEMPERATURE, temperature),
            col(HUMIDITY, humidity),
            col(PRECIPITATION, precipitation),
            col(CRUDE_OIL, crude.into_iter().map(Some).collect()),
        ],
    )
}

/// Observed price values of a frame (missing cells skipped).
pub fn observed_prices(frame: &FeatureFrame) -> Vec<f64> {
    frame
        .column(PRICE)
        .expect("price column")
        .iter()
        .flatten()
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "date,commodity,price_myr,temperature_c,humidity_pct,precipitation_mm,crude_oil_usd\n";

    #[test]
    fn rows_are_sorted_deduplicated_and_gaps_filled() {
        let f = write_tmp(&format!(
            "{HEADER}2020-01-20,chicken,5.0,,,,\n2020-01-06,chicken,4.0,,,,\n\
             2020-01-06,chicken,9.9,,,,\n2020-02-03,chicken,6.0,,,,\n2020-01-06,tomato,2.0,,,,\n"
        ));
        let loaded = load_csv(f.path(), "chicken").unwrap();
        let frame = loaded.frame;
        assert_eq!(frame.len(), 5);
        assert!(frame.base().is_weekly_uniform());
        assert_eq!(
            frame.base().values(),
            &[Some(4.0), None, Some(5.0), None, Some(6.0)]
        );
        assert!(loaded.warnings.iter().any(|w| w.contains("duplicate")));
        assert!(frame.exogenous().is_empty());
    }

    #[test]
    fn dates_snap_to_monday() {
        let sunday = NaiveDate::from_ymd_opt(2020, 1, 12).unwrap();
        assert_eq!(week_start(sunday), NaiveDate::from_ymd_opt(2020, 1, 6).unwrap());
    }

    #[test]
    fn parse_errors_name_row_and_column() {
        let f = write_tmp(&format!("{HEADER}2020-01-06,chicken,4.0,,,,\n2020-01-13,chicken,abc,,,,\n"));
        match load_csv(f.path(), "chicken") {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "price_myr");
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp(HEADER);
        assert!(matches!(load_csv(f.path(), "chicken"), Err(Error::EmptyFile(_))));
        let f = write_tmp(&format!("{HEADER}2020-01-06,chicken,4.0,,,,\n2020-01-13,chicken,4.1,,,,\n"));
        assert!(matches!(load_csv(f.path(), "durian"), Err(Error::UnknownCommodity(_))));
        let f = write_tmp("date,price\n2020-01-06,4.0\n");
        assert!(matches!(load_csv(f.path(), "chicken"), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn serialized_output_reloads_bit_exactly() {
        let spec = SyntheticSpec::preset("chili", 11).unwrap();
        let frame = generate_synthetic(&spec).unwrap();
        let text = to_csv_string(&frame, "chili").unwrap();
        let f = write_tmp(&text);
        let again = load_csv(f.path(), "chili").unwrap().frame;
        assert_eq!(frame, again);
        assert_eq!(to_csv_string(&again, "chili").unwrap(), text);
    }

    fn one_gap_frame(values: Vec<Option<f64>>) -> FeatureFrame {
        let n = values.len();
        FeatureFrame::univariate(Series::new(weekly_dates(synthetic_start(), n), values).unwrap())
    }

    #[test]
    fn missing_policies() {
        let f = one_gap_frame(vec![Some(4.0), None, Some(5.0)]);
        let s = apply_missing_policy(&f, MissingPolicy::SentinelFill).unwrap();
        assert_eq!(s.prices().unwrap(), vec![4.0, -99999.0, 5.0]);
        let d = apply_missing_policy(&f, MissingPolicy::DropRows).unwrap();
        assert_eq!(d.prices().unwrap(), vec![4.0, 5.0]);
        assert_eq!(d.missing_cells(), 0);
        let g = apply_missing_policy(&one_gap_frame(vec![None, Some(3.0)]), MissingPolicy::ForwardFill).unwrap();
        assert_eq!(g.prices().unwrap(), vec![3.0, 3.0]);
        let all = one_gap_frame(vec![None, None]);
        assert!(matches!(
            apply_missing_policy(&all, MissingPolicy::ForwardFill),
            Err(Error::AllMissingColumn(c)) if c == "price"
        ));
        assert!(matches!(
            apply_missing_policy(&all, MissingPolicy::DropRows),
            Err(Error::AllMissingColumn(_))
        ));
        assert_eq!(apply_missing_policy(&all, MissingPolicy::SentinelFill).unwrap().len(), 2);
    }

    fn check_stats(name: &str) {
        let spec = SyntheticSpec::preset(name, 42).unwrap();
        let frame = generate_synthetic(&spec).unwrap();
        assert_eq!(frame.len(), 588);
        let prices = observed_prices(&frame);
        let (mean, sd) = mean_sd(&prices);
        assert!((mean - spec.mean).abs() <= 0.05 * spec.mean, "{name} mean {mean}");
        assert!((sd - spec.stddev).abs() <= 0.15 * spec.stddev, "{name} sd {sd}");
        assert!(prices.iter().all(|p| (spec.min..=spec.max).contains(p)));
    }

    #[test]
    fn synthetic_matches_table_statistics() {
        check_stats("chicken");
        check_stats("chili");
        check_stats("tomato");
    }

    #[test]
    fn synthetic_missing_count_is_exact() {
        let mut spec = SyntheticSpec::preset("chicken", 1).unwrap();
        spec.n_weeks = 500;
        let frame = generate_synthetic(&spec).unwrap();
        assert_eq!(frame.base().missing_count(), 10);
        assert_eq!(frame.missing_cells(), 10);
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        let spec = SyntheticSpec::preset("tomato", 5).unwrap();
        let a = generate_synthetic(&spec).unwrap();
        assert_eq!(a, generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 6, ..spec };
        assert_ne!(a, generate_synthetic(&other).unwrap());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = SyntheticSpec::preset("chicken", 1).unwrap();
        for bad in [
            SyntheticSpec { stddev: 0.0, ..base.clone() },
            SyntheticSpec { mean: 7.0, ..base.clone() },
            SyntheticSpec { missing_rate: 0.2, ..base.clone() },
        ] {
            assert!(matches!(generate_synthetic(&bad), Err(Error::InvalidSpec(_))));
        }
    }
}
