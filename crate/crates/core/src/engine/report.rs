use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{select_best, Evaluation, Family, Mode, ModelArtifact, ModelSpec};
use crate::error::{Error, Result};
use crate::series::SplitSpec;

pub const REPORT_HEADER: &str = "commodity,family,mode,mse,train_rows,test_rows,warnings";

/// One (family, mode) cell of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub family: Family,
    pub mode: Mode,
    pub spec: Option<ModelSpec>,
    pub mse: Option<f64>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    #[serde(skip)]
    pub artifact: Option<ModelArtifact>,
}

impl ReportEntry {
    pub fn from_outcome(family: Family, mode: Mode, outcome: Result<Evaluation>, warnings: Vec<String>) -> Self {
        match outcome {
            Ok(ev) => Self {
                family,
                mode,
                spec: Some(ev.artifact.spec),
                mse: Some(ev.mse),
                train_rows: ev.train_rows,
                test_rows: ev.test_rows,
                warnings,
                error: None,
                artifact: Some(ev.artifact),
            },
            Err(e) => {
                log::warn!("{family}/{mode} failed: {e}");
                Self {
                    family,
                    mode,
                    spec: None,
                    mse: None,
                    train_rows: 0,
                    test_rows: 0,
                    warnings,
                    error: Some(e.to_string()),
                    artifact: None,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub commodity: String,
    pub entries: Vec<ReportEntry>,
    pub winner: Option<ModelSpec>,
    pub split: SplitSpec,
    pub warnings: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl EvaluationReport {
    pub fn new(commodity: &str, split: SplitSpec, started_at: DateTime<Utc>) -> Self {
        Self {
            commodity: commodity.to_string(),
            entries: Vec::new(),
            winner: None,
            split,
            warnings: Vec::new(),
            started_at,
            finished_at: started_at,
        }
    }

    /// Scored cells as `(spec, mse)` pairs.
    pub fn scores(&self) -> Vec<(ModelSpec, f64)> {
        self.entries
            .iter()
            .filter_map(|e| Some((e.spec?, e.mse?)))
            .collect()
    }

    pub fn entry(&self, family: Family, mode: Mode) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.family == family && e.mode == mode)
    }

    /// Sets the winner and the finish time.
    pub fn finish(&mut self) {
        self.winner = select_best(&self.scores()).ok();
        self.finished_at = Utc::now();
    }
}

/// One CSV row per cell under [`REPORT_HEADER`].
pub fn report_csv(reports: &[EvaluationReport]) -> Result<String> {
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER.split(',')).map_err(csv_err)?;
    for r in reports {
        for e in &r.entries {
            let mut notes = e.warnings.clone();
            if let Some(err) = &e.error {
                notes.push(format!("error: {err}"));
            }
            w.write_record([
                r.commodity.clone(),
                e.family.to_string(),
                e.mode.to_string(),
                e.mse.map(|m| m.to_string()).unwrap_or_default(),
                e.train_rows.to_string(),
                e.test_rows.to_string(),
                notes.join("; "),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Commodity-by-family MSE grid for each mode, with the per-commodity
/// winner marked by `*`.
pub fn report_table(reports: &[EvaluationReport]) -> String {
    let mut out = String::new();
    for mode in [Mode::Univariate, Mode::Multivariate] {
        let families: Vec<Family> = Family::ALL
            .into_iter()
            .filter(|f| reports.iter().any(|r| r.entry(*f, mode).is_some()))
            .collect();
        if families.is_empty() {
            continue;
        }
        let _ = writeln!(out, "MSE ({mode}, price units squared)");
        let _ = write!(out, "{:<14}", "commodity");
        for f in &families {
            let _ = write!(out, "{:>12}", f.as_str());
        }
        out.push('\n');
        for r in reports {
            let _ = write!(out, "{:<14}", r.commodity);
            for f in &families {
                let cell = match r.entry(*f, mode) {
                    Some(ReportEntry { mse: Some(m), .. }) => {
                        let star = r.winner.is_some_and(|w| w.family == *f && w.mode == mode);
                        format!("{m:.4}{}", if star { "*" } else { " " })
                    }
                    Some(_) => "failed ".to_string(),
                    None => "- ".to_string(),
                };
                let _ = write!(out, "{cell:>12}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
