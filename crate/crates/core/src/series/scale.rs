use serde::{Deserialize, Serialize};

use super::FeatureFrame;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    /// Width of the range; a degenerate column maps through a unit span so
    /// scaling reduces to a shift.
    pub fn span(&self) -> f64 {
        if self.max > self.min {
            self.max - self.min
        } else {
            1.0
        }
    }
}

/// Per-column affine map onto `[0, 1]` fitted on observed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    columns: Vec<ColumnRange>,
}

impl MinMaxScaler {
    /// Fits every column of `frame`; missing cells are ignored.
    pub fn fit(frame: &FeatureFrame) -> Result<Self> {
        Self::fit_inner(frame, false)
    }

    /// Like [`MinMaxScaler::fit`], but a constant column is accepted and
    /// scaled to 0.
    pub fn fit_allow_constant(frame: &FeatureFrame) -> Result<Self> {
        Self::fit_inner(frame, true)
    }

    fn fit_inner(frame: &FeatureFrame, allow_constant: bool) -> Result<Self> {
        let columns = frame
            .column_names()
            .into_iter()
            .map(|name| {
                let cells = frame.column(name).expect("listed column exists");
                let (min, max) = cells.iter().flatten().fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), &v| (lo.min(v), hi.max(v)),
                );
                if !min.is_finite() {
                    return Err(Error::AllMissingColumn(name.to_string()));
                }
                if !(max > min) && !allow_constant {
                    return Err(Error::ConstantColumn(name.to_string()));
                }
                Ok(ColumnRange {
                    name: name.to_string(),
                    min,
                    max,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnRange] {
        &self.columns
    }

    pub fn range(&self, name: &str) -> Result<&ColumnRange> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn scale(&self, name: &str, value: f64) -> Result<f64> {
        let r = self.range(name)?;
        Ok((value - r.min) / r.span())
    }

    pub fn unscale(&self, name: &str, value: f64) -> Result<f64> {
        let r = self.range(name)?;
        Ok(value * r.span() + r.min)
    }

    /// Scales every column of `frame`; each must have been fitted.
    pub fn transform(&self, frame: &FeatureFrame) -> Result<FeatureFrame> {
        frame.map_columns(|name, cells| {
            let r = self.range(name)?;
            let span = r.span();
            Ok(cells.iter().map(|v| v.map(|v| (v - r.min) / span)).collect())
        })
    }

    pub fn inverse(&self, frame: &FeatureFrame) -> Result<FeatureFrame> {
        frame.map_columns(|name, cells| {
            let r = self.range(name)?;
            let span = r.span();
            Ok(cells.iter().map(|v| v.map(|v| v * span + r.min)).collect())
        })
    }
}

/// Fits a scaler on `frame` and returns the scaled frame with it.
pub fn scale_fit_transform(frame: &FeatureFrame) -> Result<(FeatureFrame, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(frame)?;
    Ok((scaler.transform(frame)?, scaler))
}

pub fn scale_inverse(scaled: &FeatureFrame, scaler: &MinMaxScaler) -> Result<FeatureFrame> {
    scaler.inverse(scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Column, Series, CRUDE_OIL, PRICE};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 1, 7).unwrap()
    }

    fn frame(values: &[f64]) -> FeatureFrame {
        FeatureFrame::univariate(Series::weekly(start(), values).unwrap())
    }

    #[test]
    fn endpoints_map_to_unit_interval() {
        let (scaled, scaler) = scale_fit_transform(&frame(&[0.0, 5.0, 10.0])).unwrap();
        assert_eq!(scaled.prices().unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(scaler.range(PRICE).unwrap().max, 10.0);
        assert_eq!(scaler.unscale(PRICE, 0.5).unwrap(), 5.0);
    }

    #[test]
    fn constant_column_is_rejected() {
        assert!(matches!(
            scale_fit_transform(&frame(&[4.0, 4.0, 4.0])),
            Err(Error::ConstantColumn(c)) if c == PRICE
        ));
    }

    #[test]
    fn table_one_ranges() {
        // Chicken: min 3.50, max 6.25
        let (scaled, _) = scale_fit_transform(&frame(&[3.50, 4.84, 6.25])).unwrap();
        assert_eq!(scaled.prices().unwrap()[0], 0.0);
        // Chili: min 2.90, max 12
        let (_, scaler) = scale_fit_transform(&frame(&[2.90, 5.92, 12.0])).unwrap();
        assert_eq!(scaler.unscale(PRICE, 1.0).unwrap(), 12.0);
    }

    #[test]
    fn missing_cells_survive_and_unknown_columns_fail() {
        let base = Series::new(
            crate::series::weekly_dates(start(), 3),
            vec![Some(1.0), None, Some(3.0)],
        )
        .unwrap();
        let f = FeatureFrame::univariate(base);
        let (scaled, scaler) = scale_fit_transform(&f).unwrap();
        assert_eq!(scaled.base().values()[1], None);

        let with_oil = FeatureFrame::new(
            f.base().clone(),
            vec![Column {
                name: CRUDE_OIL.into(),
                values: vec![Some(1.0), Some(2.0), Some(3.0)],
            }],
        )
        .unwrap();
        assert!(matches!(scaler.inverse(&with_oil), Err(Error::UnknownColumn(_))));
    }

    proptest! {
        #[test]
        fn round_trip_within_tolerance(
            rows in prop::collection::vec((0.1f64..500.0, -40f64..40.0), 2..50),
        ) {
            let prices: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let oil: Vec<Option<f64>> = rows.iter().map(|r| Some(r.1)).collect();
            prop_assume!(prices.iter().any(|p| *p != prices[0]));
            prop_assume!(oil.iter().any(|p| *p != oil[0]));
            let f = FeatureFrame::new(
                Series::weekly(start(), &prices).unwrap(),
                vec![Column { name: CRUDE_OIL.into(), values: oil }],
            ).unwrap();
            let (scaled, scaler) = scale_fit_transform(&f).unwrap();
            for name in scaled.column_names() {
                for v in scaled.column(name).unwrap().iter().flatten() {
                    prop_assert!((0.0..=1.0).contains(v));
                }
            }
            let back = scale_inverse(&scaled, &scaler).unwrap();
            for name in f.column_names() {
                for (a, b) in f.column(name).unwrap().iter().zip(back.column(name).unwrap()) {
                    let (a, b) = (a.unwrap(), b.unwrap());
                    prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12) + 1e-12);
                }
            }
        }
    }
}
