//! Seeded synthetic data: a plan-year table shaped like the county study,
//! and sparse multinomial instances with a known coefficient matrix.

use std::collections::BTreeMap;
use std::io::Write;

use indexmap::IndexMap;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::glm::{probabilities, ClassLabels, CoefficientTensor, DesignMatrix, GlmError};
use crate::ingest::{FieldValue, IngestError, PlanRecord, PlanType};

pub const BRANDS: [&str; 7] = [
    "AARP",
    "Aetna",
    "Amerigroup",
    "BCBS",
    "Clover",
    "Humana",
    "WellCare",
];
pub const STAR_LEVELS: [&str; 5] = ["3.0", "3.5", "4.0", "4.5", "5.0"];
/// (year, HMO plans, PPO plans, county MA members).
pub const YEARS: [(i32, usize, usize, u64); 6] = [
    (2018, 4, 11, 51_831),
    (2019, 8, 16, 58_245),
    (2020, 8, 18, 63_195),
    (2021, 14, 20, 68_925),
    (2022, 16, 19, 72_465),
    (2023, 19, 19, 75_285),
];
/// Class sizes of the eligible plan-years, lowest share class first.
pub const CLASS_SIZES: [usize; 3] = [47, 60, 65];
/// Share ranges drawn for each class, strictly inside the default buckets.
const SHARE_RANGES: [(f64, f64); 3] = [(0.0003, 0.0027), (0.0035, 0.014), (0.016, 0.025)];

/// Plan-year table plus the county totals it was built against.
#[derive(Debug, Clone)]
pub struct PlanFixture {
    /// Eligible plan-years followed by a few rows the contract filter rejects.
    pub records: Vec<PlanRecord>,
    pub year_totals: BTreeMap<i32, f64>,
    /// How many of `records` are 800-series or non-`H` contracts.
    pub excluded: usize,
}

fn binary(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    if rng.random_bool(p) {
        1.0
    } else {
        0.0
    }
}

fn int(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> f64 {
    rng.random_range(lo..=hi) as f64
}

/// Benefit columns for one plan-year, in file order.
fn benefits(rng: &mut ChaCha8Rng) -> IndexMap<String, FieldValue> {
    let doctor = int(rng, 0, 20);
    let occupational = int(rng, 20, 40);
    let mut b: Vec<(&str, f64)> = vec![
        (
            "Premium",
            if rng.random_bool(0.4) {
                0.0
            } else {
                int(rng, 10, 150)
            },
        ),
        (
            "Annual_Deductible",
            [0.0, 0.0, 100.0, 250.0, 500.0][rng.random_range(0..5)],
        ),
        ("Inpatient_days_subject_to_deductible", int(rng, 0, 10)),
        ("In_nw_Inpatient_coverage", int(rng, 60, 365)),
        ("Out_nw_Inpatient_coverage", int(rng, 30, 365)),
        ("In_nw_Inpatient_Unlimited_Days", binary(rng, 0.5)),
        ("Out_nw_Inpatient_Unlimited_Days", binary(rng, 0.4)),
        ("In_nw_Hearing_Exam_copay", 5.0 * int(rng, 0, 10)),
        ("Emergency_Care_copay", int(rng, 75, 120)),
        ("Urgent_Care_Min_copay", int(rng, 0, 65)),
        ("Mental_services_max_copay", int(rng, 0, 40)),
        ("In_nw_Ambulance_copay", int(rng, 150, 300)),
        ("In_nw_Doctor_visit_primary_copay", doctor),
        ("Copay_Plan", doctor + int(rng, 0, 2)),
        ("Rehab_s_occupational_copay", occupational),
        (
            "Rehabilitation_services_physical",
            occupational + int(rng, 0, 2),
        ),
        ("Drug_Coverage", binary(rng, 0.85)),
        ("Tier1_Generic_copay", int(rng, 0, 10)),
        ("In_nw_Max_OOP", 50.0 * int(rng, 60, 151)),
        ("Out_nw_Max_OOP", 50.0 * int(rng, 100, 226)),
        ("Comprehensive_dental", binary(rng, 0.6)),
        ("d1_OTC_Drug_Benefits", binary(rng, 0.8)),
        ("d2_Meals_for_Short_Duration", binary(rng, 0.3)),
        ("d3_Annual_Physical_Exams", binary(rng, 0.5)),
        ("d8_Fitness_Benefit", binary(rng, 0.7)),
        ("d12_In-Home_Safety_Assessment", 1.0),
        ("d20_Nutritional_Dietary_Benefit", binary(rng, 0.3)),
        ("d25_Telemonitoring_Services", 0.0),
        ("d26_Remote_Access_Technologies", binary(rng, 0.4)),
    ];
    let mut out: IndexMap<String, FieldValue> = b
        .drain(..)
        .map(|(k, v)| (k.to_string(), FieldValue::Number(v)))
        .collect();
    let star = STAR_LEVELS[rng.random_range(0..STAR_LEVELS.len())];
    out.insert("Star_Rating".into(), FieldValue::Text(star.into()));
    out
}

fn number(b: &IndexMap<String, FieldValue>, name: &str) -> f64 {
    match b.get(name) {
        Some(FieldValue::Number(v)) => *v,
        _ => 0.0,
    }
}

/// 172 eligible plan-years over 2018-2023 with per-year HMO/PPO counts from
/// [`YEARS`], seven brands, and market shares whose buckets hold exactly
/// [`CLASS_SIZES`] plans. Classes follow a noisy score driven by premium,
/// drug coverage, primary-care copay and brand.
pub fn plan_fixture(seed: u64) -> PlanFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(i32, usize, PlanType, IndexMap<String, FieldValue>)> = Vec::new();
    for &(year, hmo, ppo, _) in &YEARS {
        for i in 0..hmo + ppo {
            let kind = if i < hmo {
                PlanType::Hmo
            } else {
                PlanType::Ppo
            };
            let brand = rng.random_range(0..BRANDS.len());
            rows.push((year, brand, kind, benefits(&mut rng)));
        }
    }

    let brand_effect = [1.2, -0.5, 0.3, 0.0, 0.6, -0.6, 0.0];
    let scores: Vec<f64> = rows
        .iter()
        .map(|(_, brand, kind, b)| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            brand_effect[*brand] - 0.012 * number(b, "Premium") + 1.5 * number(b, "Drug_Coverage")
                - 0.05 * number(b, "In_nw_Doctor_visit_primary_copay")
                - if *kind == PlanType::Hmo { 0.2 } else { 0.0 }
                + 0.6 * noise
        })
        .collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut class = vec![0usize; rows.len()];
    let mut start = 0;
    for (c, &size) in CLASS_SIZES.iter().enumerate() {
        for &i in &order[start..start + size] {
            class[i] = c;
        }
        start += size;
    }

    let totals: BTreeMap<i32, u64> = YEARS.iter().map(|&(y, _, _, t)| (y, t)).collect();
    let mut next_plan: BTreeMap<(usize, i32), u32> = BTreeMap::new();
    let mut records = Vec::with_capacity(rows.len() + 5);
    for (i, (year, brand, kind, mut b)) in rows.into_iter().enumerate() {
        let (lo, hi) = SHARE_RANGES[class[i]];
        let share = rng.random_range(lo..hi);
        let enrollment = (share * totals[&year] as f64).round() as u64;
        b.insert("Membership".into(), FieldValue::Number(enrollment as f64));
        let plan = next_plan.entry((brand, year)).or_insert(1);
        let plan_id = *plan;
        *plan += 1;
        records.push(PlanRecord {
            contract_id: format!("H{}", 2000 + 37 * brand),
            plan_id,
            year,
            brand: BRANDS[brand].to_string(),
            plan_type: kind,
            enrollment,
            benefit_fields: b,
        });
    }

    let rejected = [
        ("H2000", 801, 2020),
        ("H2000", 802, 2021),
        ("H2037", 850, 2023),
        ("R5001", 1, 2019),
        ("R5001", 2, 2022),
    ];
    for (contract, plan_id, year) in rejected {
        let mut b = benefits(&mut rng);
        let enrollment = rng.random_range(20..400);
        b.insert("Membership".into(), FieldValue::Number(enrollment as f64));
        records.push(PlanRecord {
            contract_id: contract.to_string(),
            plan_id,
            year,
            brand: BRANDS[0].to_string(),
            plan_type: PlanType::Ppo,
            enrollment,
            benefit_fields: b,
        });
    }

    PlanFixture {
        records,
        year_totals: totals.into_iter().map(|(y, t)| (y, t as f64)).collect(),
        excluded: rejected.len(),
    }
}

impl PlanFixture {
    /// Writes the plans file in the ingest layout.
    pub fn write_plans<W: Write>(&self, out: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "contract_id".to_string(),
            "plan_id".into(),
            "year".into(),
            "brand".into(),
            "plan_type".into(),
            "enrollment".into(),
        ];
        header.extend(self.records[0].benefit_fields.keys().cloned());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.contract_id.clone(),
                r.plan_id.to_string(),
                r.year.to_string(),
                r.brand.clone(),
                r.plan_type.to_string(),
                r.enrollment.to_string(),
            ];
            row.extend(r.benefit_fields.values().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_totals<W: Write>(&self, out: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["year", "total_enrollment"])?;
        for (year, total) in &self.year_totals {
            w.write_record([year.to_string(), total.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Design, labels and the generating coefficients.
#[derive(Debug, Clone)]
pub struct SparseInstance {
    pub design: DesignMatrix,
    pub labels: ClassLabels,
    pub truth: CoefficientTensor,
    /// 1-based indices of the features with nonzero true coefficients.
    pub active: Vec<usize>,
}

/// Labels drawn from a `k`-class multinomial whose coefficients are zero
/// except on `active` features spread evenly over `1..=p`. Each active
/// feature gets `±magnitude` in one class and `∓magnitude` in another, so
/// every pairwise difference it drives is at least `magnitude`. Features are
/// uniform on `[0, 1]`; intercepts make the classes equally likely at the
/// midpoint of the cube.
pub fn sparse_multinomial(
    seed: u64,
    n: usize,
    p: usize,
    k: usize,
    active: usize,
    magnitude: f64,
) -> Result<SparseInstance, GlmError> {
    if active > p || k < 2 {
        return Err(GlmError::InvalidInput(format!(
            "cannot place {active} active features among {p} with {k} classes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let active_idx: Vec<usize> = (0..active).map(|a| 1 + a * p / active.max(1)).collect();
    let mut beta = Array2::zeros((p + 1, k));
    for (a, &j) in active_idx.iter().enumerate() {
        let up = a % k;
        let down = (a + 1 + a / k) % k;
        let down = if down == up { (up + 1) % k } else { down };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        beta[[j, up]] = sign * magnitude;
        beta[[j, down]] = -sign * magnitude;
    }
    for c in 0..k {
        beta[[0, c]] = -0.5 * beta.column(c).sum();
    }
    let truth = CoefficientTensor::new(beta)?;
    loop {
        let x = Array2::from_shape_fn((n, p), |_| rng.random::<f64>());
        let design = DesignMatrix::unnamed(x)?;
        let probs = probabilities(&truth, &design)?;
        let y: Vec<usize> = probs
            .rows()
            .into_iter()
            .map(|row| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, pr) in row.iter().enumerate() {
                    acc += pr;
                    if u < acc {
                        return c + 1;
                    }
                }
                k
            })
            .collect();
        let labels = ClassLabels::new(y, k)?;
        if labels.counts().iter().all(|&c| c >= 5) {
            return Ok(SparseInstance {
                design,
                labels,
                truth,
                active: active_idx,
            });
        }
    }
}

/// Preprocessing settings for [`plan_fixture`] data: defaults plus the two
/// in/out-of-network merges.
pub fn fixture_preprocess_config() -> crate::preprocess::PreprocessConfig {
    let merge = |name: &str, a: &str, b: &str| crate::preprocess::Aggregate {
        name: name.to_string(),
        sources: [a.to_string(), b.to_string()],
    };
    crate::preprocess::PreprocessConfig {
        aggregates: vec![
            merge(
                "Inpatient_coverage",
                "In_nw_Inpatient_coverage",
                "Out_nw_Inpatient_coverage",
            ),
            merge("Max_OOP", "In_nw_Max_OOP", "Out_nw_Max_OOP"),
        ],
        ..Default::default()
    }
}
