//! Medicare Advantage plan payment: quality bonus on the benchmark, rebate
//! on bids below it, and monthly plan revenue.
//!
//! Money is [`Decimal`] rounded to cents, half-to-even.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PaymentError {
    #[error("unknown star tier {0:?}")]
    UnknownTier(String),
    #[error("invalid payment terms: {0}")]
    Invalid(String),
    #[error("benchmark weights sum to zero")]
    ZeroWeights,
    #[error("row {row}: {message}")]
    Scenario { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StarTier {
    FiveStar,
    FourHalf,
    Four,
    New,
    ThreeHalf,
    ThreeOrLess,
}

impl StarTier {
    pub const ALL: [StarTier; 6] = [
        StarTier::FiveStar,
        StarTier::FourHalf,
        StarTier::Four,
        StarTier::New,
        StarTier::ThreeHalf,
        StarTier::ThreeOrLess,
    ];
}

impl FromStr for StarTier {
    type Err = PaymentError;

    /// Accepts variant names or ratings such as `5`, `4.5`, `4.0`, `new`, `3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let tier = match t.as_str() {
            "fivestar" | "5" | "5.0" => StarTier::FiveStar,
            "fourhalf" | "4.5" => StarTier::FourHalf,
            "four" | "4" | "4.0" => StarTier::Four,
            "new" => StarTier::New,
            "threehalf" | "3.5" => StarTier::ThreeHalf,
            "threeorless" | "3" | "3.0" | "<=3" => StarTier::ThreeOrLess,
            _ => {
                return match t.parse::<f64>() {
                    Ok(v) if (0.0..3.0).contains(&v) => Ok(StarTier::ThreeOrLess),
                    _ => Err(PaymentError::UnknownTier(s.to_string())),
                }
            }
        };
        Ok(tier)
    }
}

impl fmt::Display for StarTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Fractional benchmark bonus: 5% for 4 stars and up, 3.5% for new plans.
pub fn benchmark_adjustment(tier: StarTier) -> Decimal {
    match tier {
        StarTier::FiveStar | StarTier::FourHalf | StarTier::Four => Decimal::new(5, 2),
        StarTier::New => Decimal::new(35, 3),
        StarTier::ThreeHalf | StarTier::ThreeOrLess => Decimal::new(0, 2),
    }
}

/// Share of the benchmark-minus-bid margin returned as rebate.
pub fn rebate_percentage(tier: StarTier) -> Decimal {
    match tier {
        StarTier::FiveStar | StarTier::FourHalf => Decimal::new(70, 2),
        StarTier::Four | StarTier::New | StarTier::ThreeHalf => Decimal::new(65, 2),
        StarTier::ThreeOrLess => Decimal::new(50, 2),
    }
}

/// Cents, half-to-even, always two decimal places.
pub fn money(d: Decimal) -> Decimal {
    let mut r = d.round_dp_with_strategy(2, RoundingStrategy::MidpointNearestEven);
    r.rescale(2);
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentTerms {
    /// County benchmark before the quality bonus, per member-month.
    pub benchmark: Decimal,
    pub bid: Decimal,
    pub risk_score: Decimal,
    /// Replaces the premium derived from bid and benchmark.
    pub premium_override: Option<Decimal>,
    pub tier: StarTier,
}

impl PaymentTerms {
    pub fn new(
        benchmark: Decimal,
        bid: Decimal,
        risk_score: Decimal,
        tier: StarTier,
    ) -> Result<Self, PaymentError> {
        let t = PaymentTerms {
            benchmark,
            bid,
            risk_score,
            premium_override: None,
            tier,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), PaymentError> {
        if self.benchmark <= Decimal::ZERO {
            return Err(PaymentError::Invalid(format!(
                "benchmark {} must be > 0",
                self.benchmark
            )));
        }
        if self.bid <= Decimal::ZERO {
            return Err(PaymentError::Invalid(format!(
                "bid {} must be > 0",
                self.bid
            )));
        }
        if self.risk_score <= Decimal::ZERO {
            return Err(PaymentError::Invalid(format!(
                "risk score {} must be > 0",
                self.risk_score
            )));
        }
        if let Some(p) = self.premium_override {
            if p < Decimal::ZERO {
                return Err(PaymentError::Invalid(format!("premium {p} must be >= 0")));
            }
        }
        Ok(())
    }

    /// `benchmark × (1 + bonus)`, in cents.
    pub fn adjusted_benchmark(&self) -> Decimal {
        money(self.benchmark * (Decimal::ONE + benchmark_adjustment(self.tier)))
    }

    pub fn breakdown(&self) -> PaymentBreakdown {
        breakdown_for(
            self.adjusted_benchmark(),
            self.bid,
            self.risk_score,
            self.tier,
            self.premium_override,
        )
    }
}

/// `(adjusted benchmark − bid) × rebate %` when the bid is below the
/// benchmark, zero otherwise.
pub fn rebate_for(adjusted_benchmark: Decimal, bid: Decimal, tier: StarTier) -> Decimal {
    if bid < adjusted_benchmark {
        money((adjusted_benchmark - bid) * rebate_percentage(tier))
    } else {
        money(Decimal::ZERO)
    }
}

/// Zero below the benchmark, `bid − adjusted benchmark` otherwise.
pub fn derived_premium(adjusted_benchmark: Decimal, bid: Decimal) -> Decimal {
    money((bid - adjusted_benchmark).max(Decimal::ZERO))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentBreakdown {
    /// Lesser of bid and adjusted benchmark.
    pub base_rate: Decimal,
    pub adjustment: Decimal,
    pub rebate_pct: Decimal,
    pub rebate: Decimal,
    pub premium: Decimal,
    /// `base_rate × risk_score + premium + rebate`, rounded once.
    pub revenue: Decimal,
}

impl PaymentBreakdown {
    /// Exact `base_rate × risk_score` part of revenue.
    pub fn base_component(&self, risk_score: Decimal) -> Decimal {
        self.base_rate * risk_score
    }
}

/// Full revenue computation against an already adjusted benchmark.
pub fn breakdown_for(
    adjusted_benchmark: Decimal,
    bid: Decimal,
    risk_score: Decimal,
    tier: StarTier,
    premium_override: Option<Decimal>,
) -> PaymentBreakdown {
    let base_rate = money(bid.min(adjusted_benchmark));
    let rebate = rebate_for(adjusted_benchmark, bid, tier);
    let premium = premium_override
        .map(money)
        .unwrap_or_else(|| derived_premium(adjusted_benchmark, bid));
    let revenue = money(base_rate * risk_score + premium + rebate);
    PaymentBreakdown {
        base_rate,
        adjustment: benchmark_adjustment(tier),
        rebate_pct: rebate_percentage(tier),
        rebate,
        premium,
        revenue,
    }
}

pub fn revenue_for(
    adjusted_benchmark: Decimal,
    bid: Decimal,
    risk_score: Decimal,
    tier: StarTier,
) -> Decimal {
    breakdown_for(adjusted_benchmark, bid, risk_score, tier, None).revenue
}

pub fn rebate(terms: &PaymentTerms) -> Decimal {
    rebate_for(terms.adjusted_benchmark(), terms.bid, terms.tier)
}

pub fn plan_revenue(terms: &PaymentTerms) -> Decimal {
    terms.breakdown().revenue
}

/// `Σ bᵢwᵢ / Σ wᵢ`, in cents.
pub fn weighted_benchmark(counties: &[(Decimal, Decimal)]) -> Result<Decimal, PaymentError> {
    if let Some((_, w)) = counties.iter().find(|(_, w)| *w < Decimal::ZERO) {
        return Err(PaymentError::Invalid(format!("negative weight {w}")));
    }
    let total: Decimal = counties.iter().map(|(_, w)| *w).sum();
    if total.is_zero() {
        return Err(PaymentError::ZeroWeights);
    }
    let weighted: Decimal = counties.iter().map(|(b, w)| b * w).sum();
    Ok(money(weighted / total))
}

#[derive(Debug, Deserialize)]
struct ScenarioRow {
    benchmark: String,
    bid: String,
    risk_score: String,
    star_tier: String,
    #[serde(default)]
    premium_override: Option<String>,
}

fn parse_decimal(v: &str, row: usize, column: &str) -> Result<Decimal, PaymentError> {
    Decimal::from_str(v.trim()).map_err(|e| PaymentError::Scenario {
        row,
        message: format!("{column} {v:?}: {e}"),
    })
}

/// Reads scenarios with columns benchmark, bid, risk_score, star_tier and an
/// optional premium_override.
pub fn read_scenarios<R: Read>(input: R) -> Result<Vec<PaymentTerms>, PaymentError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<ScenarioRow>().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let terms = PaymentTerms {
            benchmark: parse_decimal(&rec.benchmark, row, "benchmark")?,
            bid: parse_decimal(&rec.bid, row, "bid")?,
            risk_score: parse_decimal(&rec.risk_score, row, "risk_score")?,
            premium_override: match rec.premium_override.as_deref().map(str::trim) {
                None | Some("") => None,
                Some(v) => Some(parse_decimal(v, row, "premium_override")?),
            },
            tier: rec
                .star_tier
                .parse()
                .map_err(|e: PaymentError| PaymentError::Scenario {
                    row,
                    message: e.to_string(),
                })?,
        };
        terms.validate().map_err(|e| PaymentError::Scenario {
            row,
            message: e.to_string(),
        })?;
        out.push(terms);
    }
    Ok(out)
}

/// CSV with columns base_rate, adjustment, rebate_pct, rebate, premium, revenue.
pub fn write_results<W: Write>(out: W, results: &[PaymentBreakdown]) -> Result<(), PaymentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "base_rate",
        "adjustment",
        "rebate_pct",
        "rebate",
        "premium",
        "revenue",
    ])?;
    for b in results {
        w.write_record([
            b.base_rate.to_string(),
            b.adjustment.to_string(),
            b.rebate_pct.to_string(),
            b.rebate.to_string(),
            b.premium.to_string(),
            b.revenue.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
