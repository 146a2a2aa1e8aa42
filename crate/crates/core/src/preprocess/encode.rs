//! Column encoders: min-max scaling, one-hot indicators and share buckets.

use ndarray::Array2;

use super::PreprocessError;

/// Cut values separating the three market-share classes:
/// `[0, 0.003)`, `[0.003, 0.015)`, `[0.015, 0.3)`.
pub const DEFAULT_CUTPOINTS: [f64; 4] = [0.0, 0.003, 0.015, 0.3];

/// Observed range of a column.
pub fn column_range(values: &[f64]) -> Option<(f64, f64)> {
    values.iter().fold(None, |acc, &v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// `(x − min) / (max − min)`; min maps to exactly 0 and max to exactly 1.
pub fn min_max_normalize(values: &[f64]) -> Result<Vec<f64>, PreprocessError> {
    match column_range(values) {
        Some((lo, hi)) if lo < hi => Ok(values.iter().map(|&v| scale(v, lo, hi)).collect()),
        _ => Err(PreprocessError::ConstantColumn(
            "min-max normalization needs min < max".into(),
        )),
    }
}

pub(crate) fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    (v - lo) / (hi - lo)
}

/// One indicator column per level, in `levels` order.
pub fn one_hot_encode<S: AsRef<str>>(
    values: &[S],
    levels: &[String],
) -> Result<Array2<f64>, PreprocessError> {
    let mut out = Array2::zeros((values.len(), levels.len()));
    for (i, v) in values.iter().enumerate() {
        let v = v.as_ref();
        let j = levels
            .iter()
            .position(|l| l == v)
            .ok_or_else(|| PreprocessError::UnseenLevel {
                value: v.to_string(),
                levels: levels.to_vec(),
            })?;
        out[[i, j]] = 1.0;
    }
    Ok(out)
}

/// Class (1-based) of `share` under left-closed, right-open intervals
/// between consecutive cutpoints.
pub fn bucket_market_share(share: f64, cutpoints: &[f64]) -> Result<usize, PreprocessError> {
    let (first, last) = match (cutpoints.first(), cutpoints.last()) {
        (Some(f), Some(l)) if cutpoints.len() >= 3 => (*f, *l),
        _ => {
            return Err(PreprocessError::Config(
                "need at least 3 cutpoints for 2 classes".into(),
            ))
        }
    };
    if !(share >= first && share < last) {
        return Err(PreprocessError::ShareOutOfRange {
            share,
            lo: first,
            hi: last,
        });
    }
    Ok(cutpoints[1..]
        .iter()
        .position(|&c| share < c)
        .expect("share < last")
        + 1)
}

pub(crate) fn validate_cutpoints(cutpoints: &[f64]) -> Result<(), PreprocessError> {
    if cutpoints.len() < 3 {
        return Err(PreprocessError::Config("need at least 3 cutpoints".into()));
    }
    if cutpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PreprocessError::Config(format!(
            "cutpoints must be strictly increasing: {cutpoints:?}"
        )));
    }
    Ok(())
}
