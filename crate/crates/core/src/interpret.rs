//! Odds-ratio tables from fitted coefficients.
//!
//! For classes `a` and `b`, `P(Y = b) / P(Y = a)` changes by a factor of
//! `exp(β_jb − β_ja)` per unit of feature `j` (on the normalized scale).

use std::fmt::Write as _;
use std::io::Write;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glm::CoefficientTensor;

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("class {class} outside 1..={k}")]
    InvalidClass { class: usize, k: usize },
    #[error("base and target class are both {0}")]
    SameClass(usize),
    #[error("{names} feature names for {p} coefficient rows")]
    NameMismatch { names: usize, p: usize },
    #[error("bad group pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    Brand,
    BasicBenefit,
    AncillaryBenefit,
    Other,
}

impl FeatureGroup {
    pub fn title(self) -> &'static str {
        match self {
            FeatureGroup::Brand => "Brand",
            FeatureGroup::BasicBenefit => "Basic Benefits",
            FeatureGroup::AncillaryBenefit => "Ancillary Benefits",
            FeatureGroup::Other => "Other",
        }
    }
}

/// Regex patterns assigning features to groups; first match wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupPatterns {
    pub brand: String,
    pub ancillary: String,
    pub basic: String,
}

impl Default for GroupPatterns {
    fn default() -> Self {
        GroupPatterns {
            brand: "^brand=".into(),
            ancillary: "^d[0-9]+_".into(),
            basic: "^[^=]+$".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureGroups {
    rules: Vec<(FeatureGroup, Regex)>,
}

impl FeatureGroups {
    pub fn new(patterns: &GroupPatterns) -> Result<Self, InterpretError> {
        Ok(FeatureGroups {
            rules: vec![
                (FeatureGroup::Brand, Regex::new(&patterns.brand)?),
                (
                    FeatureGroup::AncillaryBenefit,
                    Regex::new(&patterns.ancillary)?,
                ),
                (FeatureGroup::BasicBenefit, Regex::new(&patterns.basic)?),
            ],
        })
    }

    pub fn classify(&self, feature: &str) -> FeatureGroup {
        match self.rules.iter().find(|(_, re)| re.is_match(feature)) {
            Some((g, _)) => *g,
            None => {
                log::warn!("feature {feature:?} matches no group; listed under Other");
                FeatureGroup::Other
            }
        }
    }
}

impl Default for FeatureGroups {
    fn default() -> Self {
        FeatureGroups::new(&GroupPatterns::default()).expect("default patterns compile")
    }
}

fn check_names(coef: &CoefficientTensor, names: &[String]) -> Result<(), InterpretError> {
    if names.len() != coef.p() {
        return Err(InterpretError::NameMismatch {
            names: names.len(),
            p: coef.p(),
        });
    }
    Ok(())
}

/// `β_j,target − β_j,base` for every feature (intercepts excluded).
pub fn coefficient_differences(
    coef: &CoefficientTensor,
    names: &[String],
    base: usize,
    target: usize,
) -> Result<IndexMap<String, f64>, InterpretError> {
    check_names(coef, names)?;
    let k = coef.k();
    for class in [base, target] {
        if class == 0 || class > k {
            return Err(InterpretError::InvalidClass { class, k });
        }
    }
    if base == target {
        return Err(InterpretError::SameClass(base));
    }
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            (
                name.clone(),
                coef.get(j + 1, target) - coef.get(j + 1, base),
            )
        })
        .collect())
}

pub fn odds_ratios(differences: &IndexMap<String, f64>) -> IndexMap<String, f64> {
    differences
        .iter()
        .map(|(k, d)| (k.clone(), d.exp()))
        .collect()
}

/// One results row; differences and odds ratios are against class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioRow {
    pub feature: String,
    pub group: FeatureGroup,
    /// Coefficient per class, class 1 first.
    pub coeff: Vec<f64>,
    /// `coeff[c] − coeff[0]` for classes 2..=K.
    pub diffs: Vec<f64>,
    /// `exp` of `diffs`.
    pub odds: Vec<f64>,
}

impl OddsRatioRow {
    /// Difference of class `c` (≥ 2) against class 1.
    pub fn diff(&self, c: usize) -> f64 {
        self.diffs[c - 2]
    }

    pub fn odds_ratio(&self, c: usize) -> f64 {
        self.odds[c - 2]
    }
}

/// Rows for features with at least one nonzero coefficient, grouped
/// Brand, Basic Benefits, Ancillary Benefits, Other; feature order within
/// a group.
pub fn build_results_table(
    coef: &CoefficientTensor,
    names: &[String],
    groups: &FeatureGroups,
) -> Result<Vec<OddsRatioRow>, InterpretError> {
    check_names(coef, names)?;
    let mut rows: Vec<OddsRatioRow> = coef
        .active_features()
        .into_iter()
        .map(|j| {
            let coeff = coef.feature(j).to_vec();
            let diffs: Vec<f64> = coeff[1..].iter().map(|c| c - coeff[0]).collect();
            OddsRatioRow {
                feature: names[j - 1].clone(),
                group: groups.classify(&names[j - 1]),
                odds: diffs.iter().map(|d| d.exp()).collect(),
                diffs,
                coeff,
            }
        })
        .collect();
    rows.sort_by_key(|r| r.group);
    Ok(rows)
}

/// Features whose coefficients are zero in every class.
pub fn dropped_features(
    coef: &CoefficientTensor,
    names: &[String],
) -> Result<Vec<String>, InterpretError> {
    check_names(coef, names)?;
    Ok((1..=coef.p())
        .filter(|&j| coef.feature(j).iter().all(|v| *v == 0.0))
        .map(|j| names[j - 1].clone())
        .collect())
}

fn header(k: usize) -> Vec<String> {
    let mut h = vec!["feature".to_string()];
    h.extend((1..=k).map(|c| format!("coeff_{c}")));
    for c in 2..=k {
        h.push(format!("{c}-1"));
        h.push(format!("exp({c}-1)"));
    }
    h
}

/// CSV with columns feature, coeff_1..coeff_K, then `c-1`, `exp(c-1)` per class.
pub fn write_results_csv<W: Write>(
    out: W,
    rows: &[OddsRatioRow],
    k: usize,
) -> Result<(), InterpretError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(k))?;
    for r in rows {
        let mut rec = vec![r.feature.clone()];
        rec.extend(r.coeff.iter().map(|v| v.to_string()));
        for (d, o) in r.diffs.iter().zip(&r.odds) {
            rec.push(d.to_string());
            rec.push(o.to_string());
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Markdown table with group sub-headings, three decimals.
pub fn results_markdown(rows: &[OddsRatioRow], k: usize) -> String {
    let h = header(k);
    let mut s = String::new();
    s.push_str(
        "Odds ratios compare each class with class 1, per unit change of a feature \
         on its normalized [0, 1] scale.\n\n",
    );
    let _ = writeln!(s, "| {} |", h.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(h.len()));
    let mut current = None;
    for r in rows {
        if current != Some(r.group) {
            current = Some(r.group);
            let _ = writeln!(s, "| **{}** |{}", r.group.title(), " |".repeat(h.len() - 1));
        }
        let mut cells = vec![r.feature.replace('|', "\\|")];
        cells.extend(r.coeff.iter().map(|v| format!("{v:.3}")));
        for (d, o) in r.diffs.iter().zip(&r.odds) {
            cells.push(format!("{d:.3}"));
            cells.push(format!("{o:.3}"));
        }
        let _ = writeln!(s, "| {} |", cells.join(" | "));
    }
    s
}

/// A results row as printed with rounded values, three classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintedRow {
    pub feature: String,
    pub coeff: [f64; 3],
    pub diff_2_1: f64,
    pub exp_2_1: f64,
    pub diff_3_1: f64,
    pub exp_3_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub feature: String,
    pub column: String,
    pub printed: f64,
    pub recomputed: f64,
}

/// Absolute tolerance on printed differences (three-decimal rounding).
pub const DIFF_TOLERANCE: f64 = 1e-3;
/// Relative tolerance on printed odds ratios.
pub const ODDS_TOLERANCE: f64 = 5e-3;

/// Recomputes the difference and odds columns of a printed row from its
/// coefficient columns and lists every column outside tolerance.
pub fn audit_printed_row(row: &PrintedRow) -> Vec<Discrepancy> {
    let mut found = Vec::new();
    let checks = [
        (
            "2-1",
            "exp(2-1)",
            row.coeff[1] - row.coeff[0],
            row.diff_2_1,
            row.exp_2_1,
        ),
        (
            "3-1",
            "exp(3-1)",
            row.coeff[2] - row.coeff[0],
            row.diff_3_1,
            row.exp_3_1,
        ),
    ];
    for (dcol, ecol, diff, printed_diff, printed_exp) in checks {
        // slack for binary representation of the decimal inputs
        if (diff - printed_diff).abs() > DIFF_TOLERANCE + 1e-9 {
            found.push(Discrepancy {
                feature: row.feature.clone(),
                column: dcol.into(),
                printed: printed_diff,
                recomputed: diff,
            });
        }
        let odds = diff.exp();
        if (odds - printed_exp).abs() > ODDS_TOLERANCE * printed_exp.abs() {
            found.push(Discrepancy {
                feature: row.feature.clone(),
                column: ecol.into(),
                printed: printed_exp,
                recomputed: odds,
            });
        }
    }
    found
}
