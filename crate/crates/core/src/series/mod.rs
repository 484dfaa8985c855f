//! Time-series containers and the transforms shared by every model.

mod metrics;
mod scale;
mod split;
mod transform;

pub use metrics::mse;
pub use scale::{scale_fit_transform, scale_inverse, ColumnRange, MinMaxScaler};
pub use split::{split, split_indices, SplitMode, SplitSpec, TrainTest};
pub use transform::{difference, difference_n, undifference};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the target column inside a [`FeatureFrame`].
pub const PRICE: &str = "price";
pub const TEMPERATURE: &str = "temperature";
pub const HUMIDITY: &str = "humidity";
pub const PRECIPITATION: &str = "precipitation";
pub const CRUDE_OIL: &str = "crude_oil";

/// Exogenous drivers in their canonical order.
pub const EXOGENOUS: [&str; 4] = [TEMPERATURE, HUMIDITY, PRECIPITATION, CRUDE_OIL];

/// Weekly timestamped price sequence. Missing cells are `None`.
///
/// Ingested series hold at least two points; partitions produced by
/// [`split`] may hold a single row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    timestamps: Vec<NaiveDate>,
    values: Vec<Option<f64>>,
}

impl Series {
    pub fn new(timestamps: Vec<NaiveDate>, values: Vec<Option<f64>>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: values.len(),
            });
        }
        if timestamps.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        if let Some(index) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::UnorderedTimestamps { index: index + 1 });
        }
        Ok(Self { timestamps, values })
    }

    /// Fully observed weekly series starting at `start`.
    pub fn weekly(start: NaiveDate, values: &[f64]) -> Result<Self> {
        let timestamps = weekly_dates(start, values.len());
        Self::new(timestamps, values.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Values as plain floats; fails if any cell is missing.
    pub fn observed(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| v.ok_or_else(|| Error::MissingValues(PRICE.into())))
            .collect()
    }

    /// True when consecutive timestamps are exactly seven days apart.
    pub fn is_weekly_uniform(&self) -> bool {
        self.timestamps
            .windows(2)
            .all(|w| w[1] - w[0] == Duration::days(7))
    }

    pub fn last_timestamp(&self) -> NaiveDate {
        *self.timestamps.last().expect("series is non-empty")
    }

    /// Lag-differenced series; timestamps follow the later element of each pair.
    pub fn difference(&self, lag: usize) -> Result<Series> {
        let diffs = difference(&self.observed()?, lag)?;
        Series::new(
            self.timestamps[lag..].to_vec(),
            diffs.into_iter().map(Some).collect(),
        )
    }
}

/// `count` consecutive weekly dates beginning at `start`.
pub fn weekly_dates(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    (0..count)
        .map(|i| start + Duration::weeks(i as i64))
        .collect()
}

/// Named column aligned to a frame's timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

/// Price series joined with exogenous driver columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    base: Series,
    exogenous: Vec<Column>,
}

impl FeatureFrame {
    pub fn new(base: Series, exogenous: Vec<Column>) -> Result<Self> {
        let mut seen = vec![PRICE.to_string()];
        for col in &exogenous {
            if seen.contains(&col.name) {
                return Err(Error::DuplicateColumn(col.name.clone()));
            }
            if col.values.len() != base.len() {
                return Err(Error::ColumnLength {
                    name: col.name.clone(),
                    expected: base.len(),
                    got: col.values.len(),
                });
            }
            seen.push(col.name.clone());
        }
        Ok(Self { base, exogenous })
    }

    pub fn univariate(base: Series) -> Self {
        Self {
            base,
            exogenous: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn base(&self) -> &Series {
        &self.base
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        self.base.timestamps()
    }

    pub fn exogenous(&self) -> &[Column] {
        &self.exogenous
    }

    /// Column names with the price column first.
    pub fn column_names(&self) -> Vec<&str> {
        std::iter::once(PRICE)
            .chain(self.exogenous.iter().map(|c| c.name.as_str()))
            .collect()
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        if name == PRICE {
            Some(self.base.values())
        } else {
            self.exogenous
                .iter()
                .find(|c| c.name == name)
                .map(|c| c.values.as_slice())
        }
    }

    /// Fully observed price values.
    pub fn prices(&self) -> Result<Vec<f64>> {
        self.base.observed()
    }

    /// Fully observed values of `name`.
    pub fn observed(&self, name: &str) -> Result<Vec<f64>> {
        let col = self
            .column(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        col.iter()
            .map(|v| v.ok_or_else(|| Error::MissingValues(name.to_string())))
            .collect()
    }

    /// Total count of missing cells across all columns.
    pub fn missing_cells(&self) -> usize {
        self.base.missing_count()
            + self
                .exogenous
                .iter()
                .map(|c| c.values.iter().filter(|v| v.is_none()).count())
                .sum::<usize>()
    }

    /// The four canonical exogenous columns that are absent from this frame.
    pub fn absent_exogenous(&self) -> Vec<String> {
        EXOGENOUS
            .iter()
            .filter(|name| self.column(name).is_none())
            .map(|s| s.to_string())
            .collect()
    }

    /// Errors with the list of absent canonical drivers, if any.
    pub fn require_exogenous(&self) -> Result<()> {
        let absent = self.absent_exogenous();
        if absent.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingExogenous(absent))
        }
    }

    /// Rows `range` as a new frame.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<FeatureFrame> {
        let base = Series::new(
            self.base.timestamps[range.clone()].to_vec(),
            self.base.values[range.clone()].to_vec(),
        )?;
        let exogenous = self
            .exogenous
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                values: c.values[range.clone()].to_vec(),
            })
            .collect();
        Ok(FeatureFrame { base, exogenous })
    }

    /// Keeps only rows whose index satisfies `keep`.
    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> Result<FeatureFrame> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        let pick = |vals: &[Option<f64>]| idx.iter().map(|&i| vals[i]).collect::<Vec<_>>();
        let base = Series::new(
            idx.iter().map(|&i| self.base.timestamps[i]).collect(),
            pick(&self.base.values),
        )?;
        let exogenous = self
            .exogenous
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                values: pick(&c.values),
            })
            .collect();
        Ok(FeatureFrame { base, exogenous })
    }

    /// Replaces every column's cells through `f(column_name, cells)`.
    pub fn map_columns(
        &self,
        mut f: impl FnMut(&str, &[Option<f64>]) -> Result<Vec<Option<f64>>>,
    ) -> Result<FeatureFrame> {
        let base = Series::new(
            self.base.timestamps.clone(),
            f(PRICE, &self.base.values)?,
        )?;
        let exogenous = self
            .exogenous
            .iter()
            .map(|c| {
                Ok(Column {
                    name: c.name.clone(),
                    values: f(&c.name, &c.values)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureFrame::new(base, exogenous)
    }

    /// Drops every exogenous column.
    pub fn price_only(&self) -> FeatureFrame {
        FeatureFrame::univariate(self.base.clone())
    }
}
