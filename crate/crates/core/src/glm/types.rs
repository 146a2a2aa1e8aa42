use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::GlmError;

/// n×p feature matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: Array2<f64>,
    column_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(values: Array2<f64>, column_names: Vec<String>) -> Result<Self, GlmError> {
        if values.ncols() != column_names.len() {
            return Err(GlmError::DimensionMismatch(format!(
                "{} columns but {} names",
                values.ncols(),
                column_names.len()
            )));
        }
        if values.nrows() < 2 {
            return Err(GlmError::InvalidInput(format!(
                "design needs at least 2 rows, got {}",
                values.nrows()
            )));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(GlmError::NonFinite(format!("design[{i}, {j}] = {v}")));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(GlmError::InvalidInput(format!(
                    "duplicate column name {name:?}"
                )));
            }
        }
        Ok(DesignMatrix {
            values,
            column_names,
        })
    }

    /// Columns named `x1..xp`.
    pub fn unnamed(values: Array2<f64>) -> Result<Self, GlmError> {
        let names = (1..=values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(values, names)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Rows at `idx`, in that order. Panics on an out-of-range index.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self, GlmError> {
        Self::new(self.values.select(Axis(0), idx), self.column_names.clone())
    }
}

/// Class labels coded `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabels {
    values: Vec<usize>,
    k: usize,
}

impl ClassLabels {
    pub fn new(values: Vec<usize>, k: usize) -> Result<Self, GlmError> {
        if k < 2 {
            return Err(GlmError::InvalidInput(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v == 0 || v > k) {
            return Err(GlmError::InvalidInput(format!(
                "label {v} at row {i} outside 1..={k}"
            )));
        }
        Ok(ClassLabels { values, k })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Observations per class, index 0 = class 1.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &v in &self.values {
            c[v - 1] += 1;
        }
        c
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        ClassLabels {
            values: idx.iter().map(|&i| self.values[i]).collect(),
            k: self.k,
        }
    }

    pub(crate) fn ensure_all_present(&self) -> Result<(), GlmError> {
        match self.counts().iter().position(|&c| c == 0) {
            Some(missing) => Err(GlmError::InvalidInput(format!(
                "class {} has no observations",
                missing + 1
            ))),
            None => Ok(()),
        }
    }
}

/// Coefficients for `p` features and `k` classes; row 0 holds the intercepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CoefficientTensor {
    beta: Array2<f64>,
}

impl CoefficientTensor {
    pub fn new(beta: Array2<f64>) -> Result<Self, GlmError> {
        if beta.nrows() < 1 || beta.ncols() < 2 {
            return Err(GlmError::DimensionMismatch(format!(
                "coefficient shape {:?} needs >= 1 row and >= 2 classes",
                beta.dim()
            )));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(GlmError::NonFinite("coefficients".into()));
        }
        Ok(CoefficientTensor { beta })
    }

    pub fn zeros(p: usize, k: usize) -> Self {
        CoefficientTensor {
            beta: Array2::zeros((p + 1, k)),
        }
    }

    pub fn p(&self) -> usize {
        self.beta.nrows() - 1
    }

    pub fn k(&self) -> usize {
        self.beta.ncols()
    }

    pub fn beta(&self) -> &Array2<f64> {
        &self.beta
    }

    pub(crate) fn beta_mut(&mut self) -> &mut Array2<f64> {
        &mut self.beta
    }

    pub fn intercepts(&self) -> ArrayView1<'_, f64> {
        self.beta.row(0)
    }

    /// Coefficient of feature `j` (1-based; 0 is the intercept) in class `class` (1-based).
    pub fn get(&self, j: usize, class: usize) -> f64 {
        self.beta[[j, class - 1]]
    }

    /// Per-class coefficients of feature `j` (1-based).
    pub fn feature(&self, j: usize) -> ArrayView1<'_, f64> {
        self.beta.row(j)
    }

    /// Number of nonzero feature coefficients (intercepts excluded).
    pub fn nonzero_count(&self) -> usize {
        self.beta
            .rows()
            .into_iter()
            .skip(1)
            .flat_map(|r| r.into_iter())
            .filter(|v| **v != 0.0)
            .count()
    }

    /// Indices (1-based) of features with at least one nonzero coefficient.
    pub fn active_features(&self) -> Vec<usize> {
        (1..=self.p())
            .filter(|&j| self.beta.row(j).iter().any(|v| *v != 0.0))
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for CoefficientTensor {
    type Error = GlmError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        let k = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != k) {
            return Err(GlmError::DimensionMismatch(
                "ragged coefficient rows".into(),
            ));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let p1 = flat.len().checked_div(k).unwrap_or(0);
        let beta = Array2::from_shape_vec((p1, k), flat)
            .map_err(|e| GlmError::DimensionMismatch(e.to_string()))?;
        CoefficientTensor::new(beta)
    }
}

impl From<CoefficientTensor> for Vec<Vec<f64>> {
    fn from(c: CoefficientTensor) -> Self {
        c.beta.rows().into_iter().map(|r| r.to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda_count: usize,
    pub lambda_min_ratio: f64,
    /// Convergence threshold on the largest absolute coefficient change per outer cycle.
    pub tol: f64,
    pub max_outer_iterations: usize,
    pub penalize_intercept: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda_count: 100,
            lambda_min_ratio: 0.01,
            tol: 1e-7,
            max_outer_iterations: 1000,
            penalize_intercept: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), GlmError> {
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(GlmError::InvalidConfig(format!(
                "lambda_min_ratio must be in (0, 1), got {}",
                self.lambda_min_ratio
            )));
        }
        if !(self.tol > 0.0) {
            return Err(GlmError::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.lambda_count == 0 {
            return Err(GlmError::InvalidConfig("lambda_count must be >= 1".into()));
        }
        if self.max_outer_iterations == 0 {
            return Err(GlmError::InvalidConfig(
                "max_outer_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub lambda: f64,
    pub coefficients: CoefficientTensor,
    pub nonzero_count: usize,
    pub converged: bool,
    pub objective: f64,
    pub iterations: usize,
}

/// Fits along a strictly decreasing λ sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub entries: Vec<PathEntry>,
}

impl PathResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.entries.iter().all(|e| e.converged)
    }
}
