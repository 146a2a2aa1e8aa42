use std::io::Read;

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::glm::{ClassLabels, DesignMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when every value is identical (or the column is empty).
    pub fn is_constant(&self) -> bool {
        match self {
            ColumnData::Numeric(v) => v.windows(2).all(|w| w[0] == w[1]),
            ColumnData::Categorical(v) => v.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn select(&self, idx: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawColumn {
    pub name: String,
    pub data: ColumnData,
}

/// Column-oriented table before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDataset {
    columns: Vec<RawColumn>,
    n_rows: usize,
}

impl RawDataset {
    pub fn new(columns: Vec<RawColumn>) -> Result<Self, PreprocessError> {
        let n_rows = columns.first().map_or(0, |c| c.data.len());
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if c.data.len() != n_rows {
                return Err(PreprocessError::Config(format!(
                    "column {:?} has {} rows, expected {n_rows}",
                    c.name,
                    c.data.len()
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(PreprocessError::Config(format!(
                    "duplicate column {:?}",
                    c.name
                )));
            }
        }
        Ok(RawDataset { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[RawColumn] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64], PreprocessError> {
        match self.column(name) {
            Some(RawColumn {
                data: ColumnData::Numeric(v),
                ..
            }) => Ok(v),
            Some(_) => Err(PreprocessError::Config(format!(
                "column {name:?} is not numeric"
            ))),
            None => Err(PreprocessError::MissingColumn(name.to_string())),
        }
    }

    /// Copy with column `pos` holding `data` instead.
    pub fn with_column(&self, pos: usize, data: ColumnData) -> RawDataset {
        let mut out = self.clone();
        out.columns[pos].data = data;
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> RawDataset {
        RawDataset {
            columns: self
                .columns
                .iter()
                .map(|c| RawColumn {
                    name: c.name.clone(),
                    data: c.data.select(idx),
                })
                .collect(),
            n_rows: idx.len(),
        }
    }

    /// Reads a header-first delimited table. Columns named in `categorical`
    /// stay text; any other column must be fully numeric or it is read as
    /// categorical. Empty cells are errors.
    pub fn read_csv<R: Read>(
        input: R,
        delimiter: u8,
        categorical: &[String],
    ) -> Result<RawDataset, PreprocessError> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (c, col) in cells.iter_mut().enumerate() {
                let v = rec.get(c).unwrap_or("");
                if v.is_empty() {
                    return Err(PreprocessError::MissingValue {
                        row: row + 2,
                        column: headers[c].clone(),
                    });
                }
                col.push(v.to_string());
            }
        }
        let columns = headers
            .into_iter()
            .zip(cells)
            .map(|(name, raw)| {
                let numeric: Option<Vec<f64>> = if categorical.contains(&name) {
                    None
                } else {
                    raw.iter()
                        .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                        .collect()
                };
                let data = match numeric {
                    Some(v) => ColumnData::Numeric(v),
                    None => ColumnData::Categorical(raw),
                };
                RawColumn { name, data }
            })
            .collect();
        RawDataset::new(columns)
    }
}

/// Column holding the class label in design files.
pub const CLASS_COLUMN: &str = "class";

/// Writes feature columns then the class label.
pub fn write_design_csv<W: std::io::Write>(
    out: W,
    design: &DesignMatrix,
    labels: &ClassLabels,
) -> Result<(), PreprocessError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = design.column_names().iter().map(String::as_str).collect();
    header.push(CLASS_COLUMN);
    w.write_record(&header)?;
    for (row, label) in design.values().rows().into_iter().zip(labels.values()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_design_csv`]; labels lie in `1..=k`.
pub fn read_design_csv<R: Read>(
    input: R,
    k: usize,
) -> Result<(DesignMatrix, ClassLabels), PreprocessError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut names: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if names.pop().as_deref() != Some(CLASS_COLUMN) {
        return Err(PreprocessError::MissingColumn(CLASS_COLUMN.into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |column: &str| {
            PreprocessError::Config(format!("row {}: bad value in column {column:?}", row + 2))
        };
        for (j, name) in names.iter().enumerate() {
            values.push(
                rec.get(j)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| bad(name))?,
            );
        }
        labels.push(
            rec.get(names.len())
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| bad(CLASS_COLUMN))?,
        );
    }
    let x = ndarray::Array2::from_shape_vec((labels.len(), names.len()), values)
        .map_err(|e| PreprocessError::Config(e.to_string()))?;
    Ok((DesignMatrix::new(x, names)?, ClassLabels::new(labels, k)?))
}
