use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::FeatureFrame;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    Holdout,
    ExpandingWindowCv,
}

/// How a frame is partitioned for held-out evaluation. All partitions are
/// chronological.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_fraction: f64,
    pub folds: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self::holdout(0.9)
    }
}

impl SplitSpec {
    pub fn holdout(train_fraction: f64) -> Self {
        Self {
            mode: SplitMode::Holdout,
            train_fraction,
            folds: 3,
        }
    }

    pub fn cv(folds: usize) -> Self {
        Self {
            mode: SplitMode::ExpandingWindowCv,
            train_fraction: 0.9,
            folds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "train_fraction",
                reason: format!("{} is not in (0, 1)", self.train_fraction),
            });
        }
        if self.mode == SplitMode::ExpandingWindowCv && self.folds < 2 {
            return Err(Error::InvalidParameter {
                name: "folds",
                reason: format!("{} < 2", self.folds),
            });
        }
        Ok(())
    }
}

/// Train rows followed by the test rows that come after them.
#[derive(Debug, Clone)]
pub struct TrainTest {
    train: FeatureFrame,
    test: FeatureFrame,
}

impl TrainTest {
    pub fn train(&self) -> &FeatureFrame {
        &self.train
    }

    pub fn test(&self) -> &FeatureFrame {
        &self.test
    }

    pub fn into_parts(self) -> (FeatureFrame, FeatureFrame) {
        (self.train, self.test)
    }
}

/// Index ranges of each `(train, test)` partition for a series of length `n`.
///
/// Holdout keeps the first `floor(n * train_fraction)` rows for training.
/// Expanding-window CV reserves the second half of the series for `folds`
/// equal test windows of `floor(n / (2 * folds))` rows; fold `k` trains on
/// everything before its window.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Vec<(Range<usize>, Range<usize>)>> {
    spec.validate()?;
    match spec.mode {
        SplitMode::Holdout => {
            if n < 10 {
                return Err(Error::TooShort { needed: 10, got: n });
            }
            let cut = ((n as f64) * spec.train_fraction + 1e-9).floor() as usize;
            let cut = cut.clamp(1, n - 1);
            Ok(vec![(0..cut, cut..n)])
        }
        SplitMode::ExpandingWindowCv => {
            let window = n / (2 * spec.folds);
            if window == 0 {
                return Err(Error::TooShort {
                    needed: 2 * spec.folds,
                    got: n,
                });
            }
            let first = n - spec.folds * window;
            Ok((0..spec.folds)
                .map(|k| {
                    let end = first + k * window;
                    (0..end, end..end + window)
                })
                .collect())
        }
    }
}

pub fn split(frame: &FeatureFrame, spec: &SplitSpec) -> Result<Vec<TrainTest>> {
    split_indices(frame.len(), spec)?
        .into_iter()
        .map(|(train, test)| {
            Ok(TrainTest {
                train: frame.slice(train)?,
                test: frame.slice(test)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Series;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn frame(n: usize) -> FeatureFrame {
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        FeatureFrame::univariate(
            Series::weekly(NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(), &values).unwrap(),
        )
    }

    #[test]
    fn holdout_nine_to_one() {
        let parts = split(&frame(100), &SplitSpec::holdout(0.9)).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].train().len(), 90);
        assert_eq!(parts[0].test().len(), 10);

        let parts = split(&frame(10), &SplitSpec::holdout(0.9)).unwrap();
        assert_eq!((parts[0].train().len(), parts[0].test().len()), (9, 1));

        assert!(matches!(
            split(&frame(9), &SplitSpec::holdout(0.9)),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn expanding_window_schedule() {
        // Enumerated by hand: second half (45 rows) cut into three 15-row windows.
        let idx = split_indices(90, &SplitSpec::cv(3)).unwrap();
        assert_eq!(
            idx,
            vec![(0..45, 45..60), (0..60, 60..75), (0..75, 75..90)]
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(SplitSpec::holdout(1.0).validate().is_err());
        assert!(SplitSpec::holdout(0.0).validate().is_err());
        assert!(SplitSpec::cv(1).validate().is_err());
    }

    proptest! {
        #[test]
        fn never_leaks(n in 12usize..300, folds in 2usize..6, frac in 0.05f64..0.95) {
            let f = frame(n);
            for spec in [SplitSpec::holdout(frac), SplitSpec::cv(folds)] {
                if let Ok(parts) = split(&f, &spec) {
                    for p in parts {
                        let last_train = *p.train().timestamps().last().unwrap();
                        let first_test = p.test().timestamps()[0];
                        prop_assert!(last_train < first_test);
                    }
                }
            }
        }
    }
}
