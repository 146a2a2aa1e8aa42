//! Multinomial probabilities, deviance, its gradient and the penalized objective.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::{ClassLabels, CoefficientTensor, DesignMatrix, GlmError};

fn check_dims(coef: &CoefficientTensor, design: &DesignMatrix) -> Result<(), GlmError> {
    if coef.p() != design.p() {
        return Err(GlmError::DimensionMismatch(format!(
            "coefficients cover {} features, design has {}",
            coef.p(),
            design.p()
        )));
    }
    Ok(())
}

fn check_labels(
    coef: &CoefficientTensor,
    design: &DesignMatrix,
    labels: &ClassLabels,
) -> Result<(), GlmError> {
    check_dims(coef, design)?;
    if labels.len() != design.n() {
        return Err(GlmError::DimensionMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            design.n()
        )));
    }
    if labels.k() != coef.k() {
        return Err(GlmError::DimensionMismatch(format!(
            "labels have {} classes, coefficients {}",
            labels.k(),
            coef.k()
        )));
    }
    Ok(())
}

/// η = β₀ + Xβ, one row per observation.
pub(crate) fn linear_predictor(coef: &CoefficientTensor, x: &Array2<f64>) -> Array2<f64> {
    let beta = coef.beta();
    let mut eta = x.dot(&beta.slice(ndarray::s![1.., ..]));
    eta += &beta.row(0);
    eta
}

pub(crate) fn log_sum_exp(row: ArrayView1<'_, f64>) -> f64 {
    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !m.is_finite() {
        return m;
    }
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Class probabilities for one observation.
pub fn softmax_probs(
    coef: &CoefficientTensor,
    x: ArrayView1<'_, f64>,
) -> Result<Array1<f64>, GlmError> {
    if x.len() != coef.p() {
        return Err(GlmError::DimensionMismatch(format!(
            "observation has {} features, coefficients {}",
            x.len(),
            coef.p()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GlmError::NonFinite("observation".into()));
    }
    let beta = coef.beta();
    let eta = x.dot(&beta.slice(ndarray::s![1.., ..])) + beta.row(0);
    Ok(softmax(eta.view()))
}

pub(crate) fn softmax(eta: ArrayView1<'_, f64>) -> Array1<f64> {
    let m = eta.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = eta.mapv(|v| (v - m).exp());
    let z = e.sum();
    e / z
}

/// Row-wise class probabilities for a whole design.
pub fn probabilities(
    coef: &CoefficientTensor,
    design: &DesignMatrix,
) -> Result<Array2<f64>, GlmError> {
    check_dims(coef, design)?;
    let mut eta = linear_predictor(coef, design.values());
    for mut row in eta.rows_mut() {
        let p = softmax(row.view());
        row.assign(&p);
    }
    Ok(eta)
}

/// Deviance from a precomputed linear predictor; `y` is 0-based.
pub(crate) fn deviance_from_eta(eta: &Array2<f64>, y: &[usize]) -> f64 {
    eta.axis_iter(Axis(0))
        .zip(y)
        .map(|(row, &c)| -2.0 * (row[c] - log_sum_exp(row)))
        .sum()
}

/// `-2 Σᵢ log P(Y = yᵢ | xᵢ)`.
///
/// Returns `+∞` when some observed label gets a log-probability of `-∞`.
pub fn multinomial_deviance(
    coef: &CoefficientTensor,
    design: &DesignMatrix,
    labels: &ClassLabels,
) -> Result<f64, GlmError> {
    check_labels(coef, design, labels)?;
    let eta = linear_predictor(coef, design.values());
    let mut total = 0.0;
    for (i, (row, &y)) in eta.axis_iter(Axis(0)).zip(labels.values()).enumerate() {
        let logp = row[y - 1] - log_sum_exp(row);
        if !logp.is_finite() {
            log::warn!("observation {i}: fitted probability of observed class {y} is zero");
            return Ok(f64::INFINITY);
        }
        total -= 2.0 * logp;
    }
    Ok(total)
}

/// Gradient of [`multinomial_deviance`]; same shape as the coefficients.
pub fn deviance_gradient(
    coef: &CoefficientTensor,
    design: &DesignMatrix,
    labels: &ClassLabels,
) -> Result<Array2<f64>, GlmError> {
    check_labels(coef, design, labels)?;
    let mut resid = probabilities(coef, design)?;
    for (mut row, &y) in resid.rows_mut().into_iter().zip(labels.values()) {
        row[y - 1] -= 1.0;
    }
    // resid = P - Y
    let mut grad = Array2::zeros((design.p() + 1, coef.k()));
    grad.row_mut(0).assign(&resid.sum_axis(Axis(0)));
    grad.slice_mut(ndarray::s![1.., ..])
        .assign(&design.values().t().dot(&resid));
    grad *= 2.0;
    Ok(grad)
}

/// Σ|β| over penalized entries.
pub fn l1_norm(coef: &CoefficientTensor, penalize_intercept: bool) -> f64 {
    let skip = if penalize_intercept { 0 } else { 1 };
    coef.beta()
        .rows()
        .into_iter()
        .skip(skip)
        .flat_map(|r| r.into_iter())
        .map(|v| v.abs())
        .sum()
}

/// `(1/n)·D + λ·Σ_{j≥1,k} |β_jk|`, intercepts unpenalized.
pub fn penalized_objective(
    coef: &CoefficientTensor,
    design: &DesignMatrix,
    labels: &ClassLabels,
    lambda: f64,
) -> Result<f64, GlmError> {
    penalized_objective_with(coef, design, labels, lambda, false)
}

pub fn penalized_objective_with(
    coef: &CoefficientTensor,
    design: &DesignMatrix,
    labels: &ClassLabels,
    lambda: f64,
    penalize_intercept: bool,
) -> Result<f64, GlmError> {
    if !(lambda >= 0.0) {
        return Err(GlmError::NegativeLambda(lambda));
    }
    let dev = multinomial_deviance(coef, design, labels)?;
    Ok(dev / design.n() as f64 + lambda * l1_norm(coef, penalize_intercept))
}

/// Most probable class per row, ties to the smallest class index.
pub fn predict(coef: &CoefficientTensor, design: &DesignMatrix) -> Result<ClassLabels, GlmError> {
    check_dims(coef, design)?;
    let eta = linear_predictor(coef, design.values());
    let values = eta
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best + 1
        })
        .collect();
    ClassLabels::new(values, coef.k())
}
