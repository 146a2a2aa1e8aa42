use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{CoefficientTensor, GlmError, PathEntry, SolverConfig};

/// A fit at one λ, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub column_names: Vec<String>,
    pub k: usize,
    pub lambda: f64,
    pub coefficients: CoefficientTensor,
    pub converged: bool,
    pub objective: f64,
    pub iterations: usize,
    pub config: SolverConfig,
}

impl ModelArtifact {
    pub fn from_entry(entry: &PathEntry, column_names: Vec<String>, config: &SolverConfig) -> Self {
        ModelArtifact {
            k: entry.coefficients.k(),
            column_names,
            lambda: entry.lambda,
            coefficients: entry.coefficients.clone(),
            converged: entry.converged,
            objective: entry.objective,
            iterations: entry.iterations,
            config: config.clone(),
        }
    }

    /// Pretty JSON; floats use the shortest text that parses back to the
    /// same `f64`.
    pub fn write_json<W: Write>(&self, out: W) -> Result<(), GlmError> {
        serde_json::to_writer_pretty(out, self).map_err(|e| GlmError::InvalidInput(e.to_string()))
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, GlmError> {
        let m: ModelArtifact =
            serde_json::from_reader(input).map_err(|e| GlmError::InvalidInput(e.to_string()))?;
        if m.coefficients.p() != m.column_names.len() || m.coefficients.k() != m.k {
            return Err(GlmError::DimensionMismatch(format!(
                "model has {} names and k = {} for coefficients {:?}",
                m.column_names.len(),
                m.k,
                m.coefficients.beta().dim()
            )));
        }
        Ok(m)
    }
}
