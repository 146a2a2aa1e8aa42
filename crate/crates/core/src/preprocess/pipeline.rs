use indexmap::IndexMap;
use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::dataset::{ColumnData, RawColumn, RawDataset};
use super::encode::{
    bucket_market_share, column_range, one_hot_encode, scale, validate_cutpoints, DEFAULT_CUTPOINTS,
};
use super::stats::{correlation_matrix, variance_inflation_factors};
use super::PreprocessError;
use crate::glm::{ClassLabels, DesignMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    ZeroVariance,
    HighCorrelation,
    HighVif,
    RedundantAggregate,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub feature: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VifMode {
    #[default]
    Enforce,
    ReportOnly,
}

/// New column `name` = mean of the min-max-normalized `sources`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub name: String,
    pub sources: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub manual_drop: Vec<String>,
    /// Columns treated as categorical even when their cells parse as numbers.
    pub categorical: Vec<String>,
    /// Level order per categorical column; sorted observed levels otherwise.
    pub level_orders: IndexMap<String, Vec<String>>,
    pub aggregates: Vec<Aggregate>,
    pub correlation_threshold: f64,
    pub vif_threshold: f64,
    pub vif_mode: VifMode,
    pub cutpoints: Vec<f64>,
    pub target: String,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        PreprocessConfig {
            manual_drop: strings(&["contract_id", "plan_id", "enrollment", "Membership"]),
            categorical: strings(&["brand", "year", "Star_Rating"]),
            level_orders: IndexMap::new(),
            aggregates: Vec::new(),
            correlation_threshold: 0.9,
            vif_threshold: 10.0,
            vif_mode: VifMode::Enforce,
            cutpoints: DEFAULT_CUTPOINTS.to_vec(),
            target: crate::ingest::SHARE_COLUMN.to_string(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        validate_cutpoints(&self.cutpoints)?;
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold <= 1.0) {
            return Err(PreprocessError::Config(format!(
                "correlation_threshold must be in (0, 1], got {}",
                self.correlation_threshold
            )));
        }
        if !(self.vif_threshold >= 1.0) {
            return Err(PreprocessError::Config(format!(
                "vif_threshold must be >= 1, got {}",
                self.vif_threshold
            )));
        }
        if self.target.is_empty() {
            return Err(PreprocessError::Config(
                "target column name is empty".into(),
            ));
        }
        Ok(())
    }
}

/// A VIF value; serialized as a number, or `"inf"` for exact collinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vif(pub f64);

impl Serialize for Vif {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Vif {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(Vif(v)),
            Repr::Text(t) if t == "inf" => Ok(Vif(f64::INFINITY)),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad VIF value {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub columns: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub dropped: Vec<DroppedFeature>,
    /// VIF of every screened numeric column, before any VIF-driven drop.
    pub vif: IndexMap<String, Vif>,
    pub correlation: CorrelationReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    ContinuousMinmax,
    OneHotLevel,
}

/// Per-column recipe fit on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    MinMax {
        column: String,
        min: f64,
        max: f64,
    },
    Aggregate {
        name: String,
        sources: [String; 2],
        source_ranges: [(f64, f64); 2],
        min: f64,
        max: f64,
    },
    OneHot {
        column: String,
        levels: Vec<String>,
    },
}

/// Fitted preprocessing, reusable on rows it was not fit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub target: String,
    pub cutpoints: Vec<f64>,
    pub columns: Vec<ColumnTransform>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub design: DesignMatrix,
    pub labels: ClassLabels,
    pub feature_kinds: IndexMap<String, FeatureKind>,
    pub cutpoints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub encoded: EncodedDataset,
    pub report: PreprocessReport,
    pub transform: Transform,
}

impl Transform {
    pub fn k(&self) -> usize {
        self.cutpoints.len() - 1
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|c| match c {
                ColumnTransform::MinMax { column, .. } => vec![column.clone()],
                ColumnTransform::Aggregate { name, .. } => vec![name.clone()],
                ColumnTransform::OneHot { column, levels } => {
                    levels.iter().map(|l| format!("{column}={l}")).collect()
                }
            })
            .collect()
    }

    /// Encodes `raw`. Continuous values outside the fitted range are clamped
    /// to `[0, 1]`; unseen categorical levels are errors.
    pub fn apply(&self, raw: &RawDataset) -> Result<EncodedDataset, PreprocessError> {
        validate_cutpoints(&self.cutpoints)?;
        let n = raw.n_rows();
        let labels = raw
            .numeric(&self.target)?
            .iter()
            .map(|&s| bucket_market_share(s, &self.cutpoints))
            .collect::<Result<Vec<_>, _>>()?;
        let labels = ClassLabels::new(labels, self.k())?;

        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut kinds = IndexMap::new();
        let unit = |v: f64, lo: f64, hi: f64| scale(v, lo, hi).clamp(0.0, 1.0);
        for ct in &self.columns {
            match ct {
                ColumnTransform::MinMax { column, min, max } => {
                    let v = raw.numeric(column)?;
                    columns.push(v.iter().map(|&x| unit(x, *min, *max)).collect());
                    kinds.insert(column.clone(), FeatureKind::ContinuousMinmax);
                }
                ColumnTransform::Aggregate {
                    name,
                    sources,
                    source_ranges,
                    min,
                    max,
                } => {
                    let a = raw.numeric(&sources[0])?;
                    let b = raw.numeric(&sources[1])?;
                    let (ra, rb) = (source_ranges[0], source_ranges[1]);
                    columns.push(
                        a.iter()
                            .zip(b)
                            .map(|(&x, &y)| {
                                let m = (scale(x, ra.0, ra.1) + scale(y, rb.0, rb.1)) / 2.0;
                                unit(m, *min, *max)
                            })
                            .collect(),
                    );
                    kinds.insert(name.clone(), FeatureKind::ContinuousMinmax);
                }
                ColumnTransform::OneHot { column, levels } => {
                    let values = categorical_values(raw, column)?;
                    let block = one_hot_encode(&values, levels)?;
                    for (j, level) in levels.iter().enumerate() {
                        columns.push(block.column(j).to_vec());
                        kinds.insert(format!("{column}={level}"), FeatureKind::OneHotLevel);
                    }
                }
            }
        }

        let p = columns.len();
        let values = Array2::from_shape_fn((n, p), |(i, j)| columns[j][i]);
        let names: Vec<String> = kinds.keys().cloned().collect();
        if names.len() != p {
            return Err(PreprocessError::Config(
                "encoded feature names collide".into(),
            ));
        }
        Ok(EncodedDataset {
            design: DesignMatrix::new(values, names)?,
            labels,
            feature_kinds: kinds,
            cutpoints: self.cutpoints.clone(),
        })
    }
}

fn categorical_values(raw: &RawDataset, name: &str) -> Result<Vec<String>, PreprocessError> {
    match raw.column(name) {
        Some(RawColumn {
            data: ColumnData::Categorical(v),
            ..
        }) => Ok(v.clone()),
        Some(RawColumn {
            data: ColumnData::Numeric(v),
            ..
        }) => Ok(v.iter().map(|x| x.to_string()).collect()),
        None => Err(PreprocessError::MissingColumn(name.to_string())),
    }
}

/// Sorted distinct values; numerically when every value parses as a number.
fn sorted_levels(values: &[String]) -> Vec<String> {
    let mut levels: Vec<String> = values.to_vec();
    levels.sort();
    levels.dedup();
    let parsed: Option<Vec<f64>> = levels.iter().map(|l| l.parse().ok()).collect();
    if let Some(nums) = parsed {
        let mut pairs: Vec<(f64, String)> = nums.into_iter().zip(levels).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        levels = pairs.into_iter().map(|(_, l)| l).collect();
    }
    levels
}

/// Removes every column whose values are all identical.
pub fn drop_zero_variance(raw: &RawDataset) -> (RawDataset, Vec<DroppedFeature>) {
    let (kept, gone): (Vec<RawColumn>, Vec<RawColumn>) = raw
        .columns()
        .iter()
        .cloned()
        .partition(|c| !c.data.is_constant());
    let dropped = gone
        .into_iter()
        .map(|c| DroppedFeature {
            feature: c.name,
            reason: DropReason::ZeroVariance,
        })
        .collect();
    let kept = RawDataset::new(kept).expect("subset of a valid dataset");
    (kept, dropped)
}

/// Source columns of a merged aggregate and their raw ranges.
type AggregateSources = ([String; 2], [(f64, f64); 2]);

/// Fits the full pipeline on `raw` and encodes it.
pub fn run_preprocess(
    raw: &RawDataset,
    config: &PreprocessConfig,
) -> Result<Preprocessed, PreprocessError> {
    config.validate()?;
    raw.numeric(&config.target)?;
    let n = raw.n_rows();
    if n < 2 {
        return Err(PreprocessError::TooFewRows { rows: n, needed: 2 });
    }
    let mut report = PreprocessReport::default();

    let mut features = Vec::new();
    for c in raw.columns().iter().filter(|c| c.name != config.target) {
        if config.manual_drop.contains(&c.name) {
            report.dropped.push(DroppedFeature {
                feature: c.name.clone(),
                reason: DropReason::Manual,
            });
            continue;
        }
        let data = match &c.data {
            ColumnData::Numeric(v) if config.categorical.contains(&c.name) => {
                ColumnData::Categorical(v.iter().map(|x| x.to_string()).collect())
            }
            d => d.clone(),
        };
        features.push(RawColumn {
            name: c.name.clone(),
            data,
        });
    }
    let (work, zero_variance) = drop_zero_variance(&RawDataset::new(features)?);
    report.dropped.extend(zero_variance);
    let mut work: Vec<RawColumn> = work.columns().to_vec();

    let mut aggregates: IndexMap<String, AggregateSources> = IndexMap::new();
    for agg in &config.aggregates {
        let mut positions = [0usize; 2];
        let mut ranges = [(0.0, 0.0); 2];
        let mut values: Vec<&[f64]> = Vec::new();
        for (s, source) in agg.sources.iter().enumerate() {
            let pos = work
                .iter()
                .position(|c| &c.name == source)
                .ok_or_else(|| PreprocessError::MissingColumn(source.clone()))?;
            let ColumnData::Numeric(v) = &work[pos].data else {
                return Err(PreprocessError::Config(format!(
                    "aggregate source {source:?} is not numeric"
                )));
            };
            ranges[s] = column_range(v).expect("non-empty");
            positions[s] = pos;
            values.push(v);
        }
        let merged: Vec<f64> = values[0]
            .iter()
            .zip(values[1])
            .map(|(&a, &b)| {
                (scale(a, ranges[0].0, ranges[0].1) + scale(b, ranges[1].0, ranges[1].1)) / 2.0
            })
            .collect();
        let at = positions[0].min(positions[1]);
        work[at] = RawColumn {
            name: agg.name.clone(),
            data: ColumnData::Numeric(merged),
        };
        work.remove(positions[0].max(positions[1]));
        for source in &agg.sources {
            report.dropped.push(DroppedFeature {
                feature: source.clone(),
                reason: DropReason::RedundantAggregate,
            });
        }
        aggregates.insert(agg.name.clone(), (agg.sources.clone(), ranges));
    }

    screen_numeric(&mut work, config, &mut report)?;

    let mut columns = Vec::new();
    for c in &work {
        columns.push(match &c.data {
            ColumnData::Categorical(v) => ColumnTransform::OneHot {
                column: c.name.clone(),
                levels: config
                    .level_orders
                    .get(&c.name)
                    .cloned()
                    .unwrap_or_else(|| sorted_levels(v)),
            },
            ColumnData::Numeric(v) => {
                let (min, max) = column_range(v).expect("non-empty");
                match aggregates.get(&c.name) {
                    Some((sources, source_ranges)) => ColumnTransform::Aggregate {
                        name: c.name.clone(),
                        sources: sources.clone(),
                        source_ranges: *source_ranges,
                        min,
                        max,
                    },
                    None => ColumnTransform::MinMax {
                        column: c.name.clone(),
                        min,
                        max,
                    },
                }
            }
        });
    }
    let transform = Transform {
        target: config.target.clone(),
        cutpoints: config.cutpoints.clone(),
        columns,
    };
    let mut fit_raw = raw.clone();
    for c in &config.categorical {
        if let Some(pos) = fit_raw.columns().iter().position(|x| &x.name == c) {
            if let ColumnData::Numeric(v) = &fit_raw.columns()[pos].data {
                let text = v.iter().map(|x| x.to_string()).collect();
                fit_raw = fit_raw.with_column(pos, ColumnData::Categorical(text));
            }
        }
    }
    let encoded = transform.apply(&fit_raw)?;
    Ok(Preprocessed {
        encoded,
        report,
        transform,
    })
}

/// Correlation screening then VIF screening over the numeric columns of `work`.
fn screen_numeric(
    work: &mut Vec<RawColumn>,
    config: &PreprocessConfig,
    report: &mut PreprocessReport,
) -> Result<(), PreprocessError> {
    let numeric: Vec<(String, Vec<f64>)> = work
        .iter()
        .filter_map(|c| match &c.data {
            ColumnData::Numeric(v) => Some((c.name.clone(), v.clone())),
            ColumnData::Categorical(_) => None,
        })
        .collect();
    if numeric.is_empty() {
        return Ok(());
    }
    let n = numeric[0].1.len();
    let matrix = |cols: &[&(String, Vec<f64>)]| {
        Array2::from_shape_fn((n, cols.len()), |(i, j)| cols[j].1[i])
    };

    let all: Vec<&(String, Vec<f64>)> = numeric.iter().collect();
    let r = correlation_matrix(matrix(&all).view())?;
    report.correlation = CorrelationReport {
        columns: numeric.iter().map(|c| c.0.clone()).collect(),
        matrix: r.rows().into_iter().map(|row| row.to_vec()).collect(),
    };

    let mut removed = vec![false; numeric.len()];
    for j in 0..numeric.len() {
        if (0..j).any(|i| !removed[i] && r[[i, j]].abs() >= config.correlation_threshold) {
            removed[j] = true;
            report.dropped.push(DroppedFeature {
                feature: numeric[j].0.clone(),
                reason: DropReason::HighCorrelation,
            });
        }
    }

    let mut kept: Vec<&(String, Vec<f64>)> = numeric
        .iter()
        .zip(&removed)
        .filter(|(_, r)| !**r)
        .map(|(c, _)| c)
        .collect();
    let vif = variance_inflation_factors(matrix(&kept).view())?;
    for (c, v) in kept.iter().zip(&vif) {
        report.vif.insert(c.0.clone(), Vif(*v));
    }
    if config.vif_mode == VifMode::Enforce {
        let mut vif = vif;
        loop {
            let worst = vif
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > config.vif_threshold)
                .fold(None, |acc: Option<(usize, f64)>, (j, &v)| match acc {
                    Some((_, best)) if best >= v => acc,
                    _ => Some((j, v)),
                });
            let Some((j, _)) = worst else { break };
            report.dropped.push(DroppedFeature {
                feature: kept[j].0.clone(),
                reason: DropReason::HighVif,
            });
            kept.remove(j);
            vif = variance_inflation_factors(matrix(&kept).view())?;
        }
    }

    let survivors: Vec<&str> = kept.iter().map(|c| c.0.as_str()).collect();
    work.retain(|c| match c.data {
        ColumnData::Numeric(_) => survivors.contains(&c.name.as_str()),
        ColumnData::Categorical(_) => true,
    });
    Ok(())
}
