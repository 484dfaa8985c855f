use crate::error::{Error, Result};

/// `out[i] = values[i + lag] - values[i]`.
pub fn difference(values: &[f64], lag: usize) -> Result<Vec<f64>> {
    if lag == 0 {
        return Err(Error::InvalidParameter {
            name: "lag",
            reason: "must be at least 1".into(),
        });
    }
    if values.len() <= lag {
        return Err(Error::TooShort {
            needed: lag + 1,
            got: values.len(),
        });
    }
    Ok(values
        .iter()
        .zip(&values[lag..])
        .map(|(a, b)| b - a)
        .collect())
}

/// Applies first differencing `order` times.
pub fn difference_n(values: &[f64], order: usize) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    for _ in 0..order {
        out = difference(&out, 1)?;
    }
    Ok(out)
}

/// Integrates lag-differences back to levels, continuing from `anchors`,
/// the last `lag` original values preceding the first difference.
pub fn undifference(diffs: &[f64], anchors: &[f64], lag: usize) -> Result<Vec<f64>> {
    if lag == 0 {
        return Err(Error::InvalidParameter {
            name: "lag",
            reason: "must be at least 1".into(),
        });
    }
    if anchors.len() != lag {
        return Err(Error::AnchorMismatch {
            expected: lag,
            got: anchors.len(),
        });
    }
    let mut levels = anchors.to_vec();
    levels.reserve(diffs.len());
    for (i, d) in diffs.iter().enumerate() {
        let next = levels[i] + d;
        levels.push(next);
    }
    Ok(levels.split_off(lag))
}
