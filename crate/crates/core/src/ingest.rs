//! Plan/enrollment records: loading, contract filtering, market share and
//! per-year summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    MissingFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing required column {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("{path}: row {row}, column {column:?}: {message}")]
    Malformed {
        path: String,
        row: usize,
        column: String,
        message: String,
    },
    #[error("no total enrollment for year {0}")]
    MissingYearTotal(i32),
    #[error("total enrollment for year {year} must be positive, got {total}")]
    NonPositiveTotal { year: i32, total: f64 },
    #[error("cagr needs positive values and periods >= 1 (first={first}, last={last}, periods={periods})")]
    InvalidGrowthInput { first: f64, last: f64, periods: u32 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlanType {
    Hmo,
    Ppo,
}

impl FromStr for PlanType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HMO" => Ok(PlanType::Hmo),
            "PPO" => Ok(PlanType::Ppo),
            other => Err(format!("expected HMO or PPO, got {other:?}")),
        }
    }
}

impl fmt::Display for PlanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanType::Hmo => "HMO",
            PlanType::Ppo => "PPO",
        })
    }
}

/// A raw benefit cell: numeric when it parses as a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Number(f64),
    Text(String),
}

impl FieldValue {
    fn parse(raw: &str) -> Self {
        let t = raw.trim();
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => FieldValue::Number(v),
            _ => FieldValue::Text(t.to_string()),
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Number(v) => write!(f, "{v}"),
            FieldValue::Text(s) => f.write_str(s),
        }
    }
}

/// One plan in one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub contract_id: String,
    pub plan_id: u32,
    pub year: i32,
    pub brand: String,
    pub plan_type: PlanType,
    pub enrollment: u64,
    pub benefit_fields: IndexMap<String, FieldValue>,
}

impl PlanRecord {
    pub fn key(&self) -> PlanKey {
        PlanKey {
            contract_id: self.contract_id.clone(),
            plan_id: self.plan_id,
            year: self.year,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlanKey {
    pub contract_id: String,
    pub plan_id: u32,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketShareRecord {
    pub key: PlanKey,
    pub share: f64,
}

/// Maps the fixed record fields to file columns. Every other column is
/// carried through as a benefit field, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSchema {
    pub contract_id: String,
    pub plan_id: String,
    pub year: String,
    pub brand: String,
    pub plan_type: String,
    pub enrollment: String,
    pub delimiter: char,
    /// Inclusive year bounds; rows outside are malformed.
    pub year_range: Option<(i32, i32)>,
}

impl Default for PlanSchema {
    fn default() -> Self {
        PlanSchema {
            contract_id: "contract_id".into(),
            plan_id: "plan_id".into(),
            year: "year".into(),
            brand: "brand".into(),
            plan_type: "plan_type".into(),
            enrollment: "enrollment".into(),
            delimiter: ',',
            year_range: None,
        }
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::MissingFile {
        path: path.to_path_buf(),
        source,
    })
}

fn reader<R: Read>(input: R, delimiter: char) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

pub fn load_plans(path: &Path, schema: &PlanSchema) -> Result<Vec<PlanRecord>, IngestError> {
    read_plans(open(path)?, &path.display().to_string(), schema)
}

/// Parses plan rows from any reader; `origin` names the source in errors.
pub fn read_plans<R: Read>(
    input: R,
    origin: &str,
    schema: &PlanSchema,
) -> Result<Vec<PlanRecord>, IngestError> {
    let mut rdr = reader(input, schema.delimiter);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn {
                path: origin.to_string(),
                column: name.to_string(),
            })
    };
    let fixed = [
        find(&schema.contract_id)?,
        find(&schema.plan_id)?,
        find(&schema.year)?,
        find(&schema.brand)?,
        find(&schema.plan_type)?,
        find(&schema.enrollment)?,
    ];
    let benefit_cols: Vec<usize> = (0..headers.len()).filter(|c| !fixed.contains(c)).collect();

    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        // header is line 1
        let row = idx + 2;
        let rec = rec?;
        let malformed = |col: usize, message: String| IngestError::Malformed {
            path: origin.to_string(),
            row,
            column: headers.get(col).unwrap_or("").to_string(),
            message,
        };
        let cell = |col: usize| rec.get(col).unwrap_or("");
        let parse_int = |col: usize| -> Result<i64, IngestError> {
            let raw = cell(col);
            raw.parse::<i64>()
                .or_else(|_| match raw.parse::<f64>() {
                    Ok(v) if v.fract() == 0.0 && v.is_finite() => Ok(v as i64),
                    _ => Err(()),
                })
                .map_err(|_| malformed(col, format!("expected an integer, got {raw:?}")))
        };

        let contract_id = cell(fixed[0]).to_string();
        if contract_id.is_empty() {
            return Err(malformed(fixed[0], "empty contract id".into()));
        }
        let plan_id = parse_int(fixed[1])?;
        let plan_id = u32::try_from(plan_id)
            .map_err(|_| malformed(fixed[1], format!("plan id {plan_id} out of range")))?;
        let year = parse_int(fixed[2])? as i32;
        if let Some((lo, hi)) = schema.year_range {
            if year < lo || year > hi {
                return Err(malformed(
                    fixed[2],
                    format!("year {year} outside {lo}..={hi}"),
                ));
            }
        }
        let plan_type = cell(fixed[4])
            .parse::<PlanType>()
            .map_err(|m| malformed(fixed[4], m))?;
        let enrollment = parse_int(fixed[5])?;
        let enrollment = u64::try_from(enrollment)
            .map_err(|_| malformed(fixed[5], format!("enrollment {enrollment} is negative")))?;

        let benefit_fields = benefit_cols
            .iter()
            .map(|&c| (headers[c].to_string(), FieldValue::parse(cell(c))))
            .collect();
        out.push(PlanRecord {
            contract_id,
            plan_id,
            year,
            brand: cell(fixed[3]).to_string(),
            plan_type,
            enrollment,
            benefit_fields,
        });
    }
    Ok(out)
}

/// Reads a `year,total_enrollment` file.
pub fn load_year_totals(path: &Path, delimiter: char) -> Result<BTreeMap<i32, f64>, IngestError> {
    let origin = path.display().to_string();
    let mut rdr = reader(open(path)?, delimiter);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn {
                path: origin.clone(),
                column: name.to_string(),
            })
    };
    let (yc, tc) = (col("year")?, col("total_enrollment")?);
    let mut totals = BTreeMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |c: usize| IngestError::Malformed {
            path: origin.clone(),
            row: idx + 2,
            column: headers[c].to_string(),
            message: format!("not a number: {:?}", rec.get(c).unwrap_or("")),
        };
        let year: i32 = rec.get(yc).unwrap_or("").parse().map_err(|_| bad(yc))?;
        let total: f64 = rec.get(tc).unwrap_or("").parse().map_err(|_| bad(tc))?;
        totals.insert(year, total);
    }
    Ok(totals)
}

/// Medicare Advantage contracts ('H' prefix) with plan numbers below 800.
/// The 800 series are employer group plans.
pub fn is_eligible(contract_id: &str, plan_id: u32) -> bool {
    contract_id.starts_with('H') && plan_id < 800
}

pub fn filter_contracts(records: &[PlanRecord]) -> Vec<PlanRecord> {
    records
        .iter()
        .filter(|r| is_eligible(&r.contract_id, r.plan_id))
        .cloned()
        .collect()
}

/// Share of each plan-year in its year's county total.
pub fn compute_market_share(
    records: &[PlanRecord],
    year_totals: &BTreeMap<i32, f64>,
) -> Result<Vec<MarketShareRecord>, IngestError> {
    records
        .iter()
        .map(|r| {
            let total = *year_totals
                .get(&r.year)
                .ok_or(IngestError::MissingYearTotal(r.year))?;
            if !(total > 0.0) {
                return Err(IngestError::NonPositiveTotal {
                    year: r.year,
                    total,
                });
            }
            Ok(MarketShareRecord {
                key: r.key(),
                share: r.enrollment as f64 / total,
            })
        })
        .collect()
}

/// Compound growth rate per period: `(last/first)^(1/periods) − 1`.
pub fn cagr(first: f64, last: f64, periods: u32) -> Result<f64, IngestError> {
    if !(first > 0.0) || !(last > 0.0) || periods == 0 || !first.is_finite() || !last.is_finite() {
        return Err(IngestError::InvalidGrowthInput {
            first,
            last,
            periods,
        });
    }
    Ok((last / first).powf(1.0 / periods as f64) - 1.0)
}

/// Plan and member counts by plan type for one year.
///
/// Both member shares are reported; no single "PPO %" column is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSummary {
    pub year: i32,
    pub hmo_plans: usize,
    pub ppo_plans: usize,
    pub hmo_members: u64,
    pub ppo_members: u64,
}

impl YearSummary {
    pub fn total_members(&self) -> u64 {
        self.hmo_members + self.ppo_members
    }

    pub fn hmo_member_share(&self) -> f64 {
        self.hmo_members as f64 / self.total_members() as f64
    }

    pub fn ppo_member_share(&self) -> f64 {
        self.ppo_members as f64 / self.total_members() as f64
    }
}

pub fn plan_type_summary(records: &[PlanRecord]) -> Vec<YearSummary> {
    let mut by_year: BTreeMap<i32, YearSummary> = BTreeMap::new();
    for r in records {
        let s = by_year.entry(r.year).or_insert_with(|| YearSummary {
            year: r.year,
            hmo_plans: 0,
            ppo_plans: 0,
            hmo_members: 0,
            ppo_members: 0,
        });
        match r.plan_type {
            PlanType::Hmo => {
                s.hmo_plans += 1;
                s.hmo_members += r.enrollment;
            }
            PlanType::Ppo => {
                s.ppo_plans += 1;
                s.ppo_members += r.enrollment;
            }
        }
    }
    by_year.into_values().collect()
}

/// Column name of the market-share response in the canonical dataset.
pub const SHARE_COLUMN: &str = "market_share";
/// Binary plan-type indicator column (HMO = 1, PPO = 0).
pub const PLAN_TYPE_COLUMN: &str = "HMO_PPO";

/// Writes the canonical dataset consumed by preprocessing: identifiers,
/// brand, HMO indicator, enrollment, market share, then benefit columns in
/// first-seen order. Records are written in input order.
pub fn write_dataset<W: Write>(
    out: W,
    records: &[PlanRecord],
    shares: &[MarketShareRecord],
) -> Result<(), IngestError> {
    let mut benefit_names: IndexMap<&str, ()> = IndexMap::new();
    for r in records {
        for name in r.benefit_fields.keys() {
            benefit_names.insert(name.as_str(), ());
        }
    }
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let mut header = vec![
        "contract_id",
        "plan_id",
        "year",
        "brand",
        PLAN_TYPE_COLUMN,
        "enrollment",
        SHARE_COLUMN,
    ];
    header.extend(benefit_names.keys());
    w.write_record(&header)?;
    for (r, s) in records.iter().zip(shares) {
        let mut row = vec![
            r.contract_id.clone(),
            r.plan_id.to_string(),
            r.year.to_string(),
            r.brand.clone(),
            if r.plan_type == PlanType::Hmo {
                "1"
            } else {
                "0"
            }
            .to_string(),
            r.enrollment.to_string(),
            s.share.to_string(),
        ];
        for name in benefit_names.keys() {
            row.push(
                r.benefit_fields
                    .get(*name)
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
