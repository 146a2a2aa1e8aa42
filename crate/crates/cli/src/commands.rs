use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use planshare_core::glm::{
    fit_path_with_lambdas, lambda_grid, lambda_max, ClassLabels, DesignMatrix, GlmError,
    ModelArtifact,
};
use planshare_core::ingest::{
    compute_market_share, filter_contracts, load_plans, load_year_totals, plan_type_summary,
    write_dataset, YearSummary,
};
use planshare_core::interpret::{
    build_results_table, dropped_features, results_markdown, write_results_csv, FeatureGroups,
};
use planshare_core::payment::{read_scenarios, write_results, PaymentBreakdown};
use planshare_core::preprocess::{
    read_design_csv, run_preprocess, write_design_csv, RawDataset, Transform,
};
use planshare_core::select::{
    cv_curve, evaluate, kfold_split, read_cv_report, select_lambda, train_test_split,
    write_cv_report, EvaluationReport, Selection,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::artifacts::*;
use crate::{CliError, RunConfig};

fn open_input(path: &Path, what: &'static str) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|_| CliError::MissingInput {
            path: path.to_path_buf(),
            what,
        })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(w).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    finish(w, path)
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<T, CliError> {
    serde_json::from_reader(open_input(path, what)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn required<'a>(slot: &'a Option<PathBuf>, name: &'static str) -> Result<&'a Path, CliError> {
    slot.as_deref().ok_or(CliError::Unset(name))
}

fn load_design(cfg: &RunConfig, name: &str) -> Result<(DesignMatrix, ClassLabels), CliError> {
    let transform: Transform = read_json(&cfg.artifact(TRANSFORM), "transform (run preprocess)")?;
    let path = cfg.artifact(name);
    let input = open_input(&path, "design matrix (run preprocess)")?;
    Ok(read_design_csv(input, transform.k())?)
}

fn load_model(cfg: &RunConfig) -> Result<ModelArtifact, CliError> {
    let path = cfg.artifact(MODEL);
    Ok(ModelArtifact::read_json(open_input(
        &path,
        "model (run fit)",
    )?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub read: usize,
    pub excluded: usize,
    pub written: usize,
    pub years: Vec<YearSummary>,
    pub dataset: PathBuf,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "read {} plan-years", self.read)?;
        writeln!(
            f,
            "excluded {} (non-H contracts or 800-series plans)",
            self.excluded
        )?;
        for y in &self.years {
            writeln!(
                f,
                "  {}: {} HMO plans ({} members), {} PPO plans ({} members)",
                y.year, y.hmo_plans, y.hmo_members, y.ppo_plans, y.ppo_members
            )?;
        }
        write!(
            f,
            "wrote {} rows to {}",
            self.written,
            self.dataset.display()
        )
    }
}

/// Loads plans and year totals, keeps eligible contracts and writes the
/// canonical dataset with market shares.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary, CliError> {
    let plans_path = required(&cfg.paths.plans, "paths.plans")?;
    let totals_path = required(&cfg.paths.totals, "paths.totals")?;
    let records = load_plans(plans_path, &cfg.ingest)?;
    let totals = load_year_totals(totals_path, cfg.ingest.delimiter)?;
    let kept = filter_contracts(&records);
    let shares = compute_market_share(&kept, &totals)?;
    let dataset = cfg.artifact(DATASET);
    let mut w = create(&dataset)?;
    write_dataset(&mut w, &kept, &shares)?;
    finish(w, &dataset)?;
    Ok(IngestSummary {
        read: records.len(),
        excluded: records.len() - kept.len(),
        written: kept.len(),
        years: plan_type_summary(&kept),
        dataset,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSummary {
    pub observations: usize,
    pub features: usize,
    pub dropped: usize,
    pub train: usize,
    pub test: usize,
}

impl fmt::Display for PreprocessSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} observations and {} features",
            self.observations, self.features
        )?;
        writeln!(f, "dropped {} columns", self.dropped)?;
        write!(f, "split {} train / {} test", self.train, self.test)
    }
}

/// Encodes the dataset, then writes the stratified train/test split of the
/// design, the fitted transform and the screening report.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PreprocessSummary, CliError> {
    let path = cfg.dataset_path();
    let input = open_input(&path, "dataset (run ingest)")?;
    let raw = RawDataset::read_csv(input, b',', &cfg.preprocess.categorical)?;
    let out = run_preprocess(&raw, &cfg.preprocess)?;
    let (design, labels) = (&out.encoded.design, &out.encoded.labels);
    let (train, test) = train_test_split(labels, cfg.split.test_fraction, cfg.split.seed)?;
    for (name, rows) in [(TRAIN_DESIGN, &train), (TEST_DESIGN, &test)] {
        let path = cfg.artifact(name);
        let mut w = create(&path)?;
        write_design_csv(&mut w, &design.select_rows(rows)?, &labels.select(rows))?;
        finish(w, &path)?;
    }
    write_json(&cfg.artifact(TRANSFORM), &out.transform)?;
    write_json(&cfg.artifact(PREPROCESS_REPORT), &out.report)?;
    Ok(PreprocessSummary {
        observations: design.n(),
        features: design.p(),
        dropped: out.report.dropped.len(),
        train: train.len(),
        test: test.len(),
    })
}

/// Contents of the λ selection artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaChoice {
    #[serde(flatten)]
    pub selection: Selection,
    pub mean_deviance: f64,
    pub sd_deviance: f64,
    pub nonzero_count: usize,
    pub k_folds: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl fmt::Display for LambdaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "selected lambda {:.6e} (grid position {}): cv deviance {:.4} ± {:.4}, {} nonzero coefficients",
            self.selection.lambda, self.selection.index, self.mean_deviance, self.sd_deviance, self.nonzero_count
        )
    }
}

/// K-fold CV on the training rows; writes the curve and the chosen λ.
pub fn cmd_cv(cfg: &RunConfig) -> Result<LambdaChoice, CliError> {
    let (design, labels) = load_design(cfg, TRAIN_DESIGN)?;
    let folds = kfold_split(&labels, cfg.cv.k_folds, cfg.cv.seed, cfg.cv.stratified)?;
    let curve = cv_curve(&design, &labels, &cfg.solver, &folds)?;
    let selection = select_lambda(&curve, cfg.cv.rule)?;
    let path = cfg.artifact(CV_REPORT);
    let mut w = create(&path)?;
    write_cv_report(&mut w, &curve)?;
    finish(w, &path)?;
    let point = &curve.points[selection.index];
    let choice = LambdaChoice {
        selection,
        mean_deviance: point.mean_deviance,
        sd_deviance: point.sd_deviance,
        nonzero_count: point.nonzero_count,
        k_folds: cfg.cv.k_folds,
        seed: cfg.cv.seed,
        stratified: cfg.cv.stratified,
    };
    write_json(&cfg.artifact(LAMBDA), &choice)?;
    Ok(choice)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub lambda: f64,
    pub nonzero_count: usize,
    pub converged: bool,
}

impl fmt::Display for FitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fit at lambda {:.6e}: {} nonzero coefficients{}",
            self.lambda,
            self.nonzero_count,
            if self.converged {
                ""
            } else {
                " (not converged)"
            }
        )
    }
}

/// Fits the training rows at `lambda`, or at the λ chosen by `cv`. The path
/// is warm-started down the default grid to the target.
pub fn cmd_fit(cfg: &RunConfig, lambda: Option<f64>) -> Result<FitSummary, CliError> {
    let (design, labels) = load_design(cfg, TRAIN_DESIGN)?;
    let target = match lambda {
        Some(l) => l,
        None => {
            read_json::<LambdaChoice>(
                &cfg.artifact(LAMBDA),
                "lambda choice (run cv or pass --lambda)",
            )?
            .selection
            .lambda
        }
    };
    if !target.is_finite() || target < 0.0 {
        return Err(GlmError::NegativeLambda(target).into());
    }
    let mut grid: Vec<f64> = lambda_grid(lambda_max(&design, &labels)?, &cfg.solver)
        .into_iter()
        .filter(|&l| l > target)
        .collect();
    grid.push(target);
    let path = fit_path_with_lambdas(&design, &labels, &cfg.solver, &grid)?;
    let entry = path.entries.last().expect("grid is never empty");
    let model = ModelArtifact::from_entry(entry, design.column_names().to_vec(), &cfg.solver);
    let out = cfg.artifact(MODEL);
    let mut w = create(&out)?;
    model.write_json(&mut w)?;
    finish(w, &out)?;
    Ok(FitSummary {
        lambda: target,
        nonzero_count: entry.nonzero_count,
        converged: entry.converged,
    })
}

/// Holdout metrics plus the split that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    #[serde(flatten)]
    pub report: EvaluationReport,
    pub n_train: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub lambda: f64,
}

impl fmt::Display for EvaluationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "holdout accuracy {:.4} on {} rows ({} train, seed {})",
            self.report.accuracy, self.report.n_test, self.n_train, self.seed
        )
    }
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluationRecord, CliError> {
    let model = load_model(cfg)?;
    let (design, labels) = load_design(cfg, TEST_DESIGN)?;
    let (train, _) = load_design(cfg, TRAIN_DESIGN)?;
    if design.column_names() != model.column_names.as_slice() {
        return Err(CliError::Config(
            "model columns do not match the test design".into(),
        ));
    }
    let record = EvaluationRecord {
        report: evaluate(&model.coefficients, &design, &labels)?,
        n_train: train.n(),
        test_fraction: cfg.split.test_fraction,
        seed: cfg.split.seed,
        lambda: model.lambda,
    };
    write_json(&cfg.artifact(EVALUATION), &record)?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub rows: usize,
    pub not_significant: usize,
}

impl fmt::Display for ReportSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "odds ratios for {} features; {} features zero in every class",
            self.rows, self.not_significant
        )
    }
}

/// Coefficient, difference and odds-ratio tables for the fitted model.
pub fn cmd_report(cfg: &RunConfig) -> Result<ReportSummary, CliError> {
    let model = load_model(cfg)?;
    let groups = FeatureGroups::new(&cfg.groups)?;
    let rows = build_results_table(&model.coefficients, &model.column_names, &groups)?;
    let zero = dropped_features(&model.coefficients, &model.column_names)?;

    let csv_path = cfg.artifact(ODDS_CSV);
    let mut w = create(&csv_path)?;
    write_results_csv(&mut w, &rows, model.k)?;
    finish(w, &csv_path)?;

    for (name, body) in [
        (ODDS_MD, results_markdown(&rows, model.k)),
        (
            NOT_SIGNIFICANT,
            zero.iter().map(|z| format!("{z}\n")).collect(),
        ),
    ] {
        let path = cfg.artifact(name);
        let mut w = create(&path)?;
        w.write_all(body.as_bytes())
            .map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
        finish(w, &path)?;
    }
    Ok(ReportSummary {
        rows: rows.len(),
        not_significant: zero.len(),
    })
}

pub fn cmd_payment(cfg: &RunConfig) -> Result<Vec<PaymentBreakdown>, CliError> {
    let path = required(&cfg.paths.scenarios, "paths.scenarios")?;
    let terms = read_scenarios(open_input(path, "payment scenarios")?)?;
    let results: Vec<PaymentBreakdown> = terms.iter().map(|t| t.breakdown()).collect();
    let out = cfg.artifact(PAYMENT_RESULTS);
    let mut w = create(&out)?;
    write_results(&mut w, &results)?;
    finish(w, &out)?;
    Ok(results)
}

/// Every stage in order; payment only when scenarios are configured.
/// Each stage's summary goes to `log`.
pub fn run_all<W: Write>(cfg: &RunConfig, mut log: W) -> Result<(), CliError> {
    let mut say = |s: &dyn fmt::Display| {
        writeln!(log, "{s}").map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
    };
    say(&cmd_ingest(cfg)?)?;
    say(&cmd_preprocess(cfg)?)?;
    say(&cmd_cv(cfg)?)?;
    say(&cmd_fit(cfg, None)?)?;
    say(&cmd_evaluate(cfg)?)?;
    say(&cmd_report(cfg)?)?;
    if cfg.paths.scenarios.is_some() {
        let n = cmd_payment(cfg)?.len();
        say(&format!("wrote {n} payment scenarios"))?;
    }
    Ok(())
}

/// Reads back a CV report written by [`cmd_cv`].
pub fn load_cv_report(cfg: &RunConfig) -> Result<planshare_core::select::CvCurve, CliError> {
    let path = cfg.artifact(CV_REPORT);
    Ok(read_cv_report(
        open_input(&path, "cv report (run cv)")?,
        cfg.cv.k_folds,
    )?)
}
