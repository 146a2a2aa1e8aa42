//! Cross-validated choice of λ and holdout evaluation.

use std::io::Write;

use ndarray::{s, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glm::{
    deviance_from_eta, fit_path, fit_path_with_lambdas, predict, ClassLabels, CoefficientTensor,
    DesignMatrix, GlmError, SolverConfig,
};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("class {class} has {size} observations, fewer than {k_folds} folds")]
    ClassTooSmall {
        class: usize,
        size: usize,
        k_folds: usize,
    },
    #[error("invalid fold setup: {0}")]
    InvalidFolds(String),
    #[error("no λ has a converged fold")]
    NoConvergedEntries,
    #[error("empty test set")]
    EmptyTest,
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    #[default]
    Min,
    OneSe,
}

impl std::str::FromStr for SelectionRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" => Ok(SelectionRule::Min),
            "one_se" | "1se" => Ok(SelectionRule::OneSe),
            other => Err(format!("unknown selection rule {other:?} (min, one_se)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k_folds: usize,
    pub seed: u64,
    pub stratified: bool,
    pub rule: SelectionRule,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k_folds: 5,
            seed: 20240501,
            stratified: true,
            rule: SelectionRule::Min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.2,
            seed: 20240501,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    /// Fold (1-based) of every observation.
    pub fold_of: Vec<usize>,
    pub k_folds: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl FoldAssignment {
    /// Held-out rows of fold `f` (1-based), ascending.
    pub fn test_rows(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == f)
            .collect()
    }

    pub fn train_rows(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != f)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k_folds];
        for &f in &self.fold_of {
            s[f - 1] += 1;
        }
        s
    }
}

/// Seeded fold assignment. Stratified splits shuffle each class and deal its
/// members round-robin, continuing the deal across classes so overall fold
/// sizes also differ by at most one.
pub fn kfold_split(
    labels: &ClassLabels,
    k_folds: usize,
    seed: u64,
    stratified: bool,
) -> Result<FoldAssignment, SelectError> {
    let n = labels.len();
    if k_folds < 2 {
        return Err(SelectError::InvalidFolds(format!(
            "k_folds must be >= 2, got {k_folds}"
        )));
    }
    if n < k_folds {
        return Err(SelectError::InvalidFolds(format!(
            "{n} rows for {k_folds} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if stratified {
        let counts = labels.counts();
        if let Some((c, &size)) = counts.iter().enumerate().find(|(_, &s)| s < k_folds) {
            return Err(SelectError::ClassTooSmall {
                class: c + 1,
                size,
                k_folds,
            });
        }
        (1..=labels.k())
            .map(|c| (0..n).filter(|&i| labels.values()[i] == c).collect())
            .collect()
    } else {
        vec![(0..n).collect()]
    };
    let mut fold_of = vec![0; n];
    let mut next = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            fold_of[i] = next % k_folds + 1;
            next += 1;
        }
    }
    Ok(FoldAssignment {
        fold_of,
        k_folds,
        seed,
        stratified,
    })
}

/// Stratified holdout split; returns ascending (train, test) row indices.
/// Each class contributes `round(test_fraction · size)` test rows.
pub fn train_test_split(
    labels: &ClassLabels,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), SelectError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SelectError::InvalidFolds(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 1..=labels.k() {
        let mut members: Vec<usize> = (0..labels.len())
            .filter(|&i| labels.values()[i] == c)
            .collect();
        members.shuffle(&mut rng);
        let take = (test_fraction * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    if test.is_empty() {
        return Err(SelectError::EmptyTest);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    /// Held-out deviance per observation, averaged over converged folds.
    pub mean_deviance: f64,
    /// Sample standard deviation across converged folds.
    pub sd_deviance: f64,
    /// Nonzero penalized coefficients of the full-data fit.
    pub nonzero_count: usize,
    pub converged_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCurve {
    pub points: Vec<CvPoint>,
    pub k_folds: usize,
}

impl CvCurve {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }
}

/// Cross-validated deviance along the λ path of the full data.
pub fn cv_curve(
    design: &DesignMatrix,
    labels: &ClassLabels,
    config: &SolverConfig,
    folds: &FoldAssignment,
) -> Result<CvCurve, SelectError> {
    if folds.fold_of.len() != design.n() || labels.len() != design.n() {
        return Err(SelectError::InvalidFolds(format!(
            "{} fold entries, {} labels, {} rows",
            folds.fold_of.len(),
            labels.len(),
            design.n()
        )));
    }
    let all = canonical_order(design, labels, (0..design.n()).collect());
    let full = fit_path(&design.select_rows(&all)?, &labels.select(&all), config)?;
    let lambdas = full.lambdas();

    let per_fold: Vec<Vec<Option<f64>>> = (1..=folds.k_folds)
        .into_par_iter()
        .map(|f| -> Result<Vec<Option<f64>>, SelectError> {
            let train = canonical_order(design, labels, folds.train_rows(f));
            let test = canonical_order(design, labels, folds.test_rows(f));
            if test.is_empty() {
                return Err(SelectError::InvalidFolds(format!("fold {f} is empty")));
            }
            let path = fit_path_with_lambdas(
                &design.select_rows(&train)?,
                &labels.select(&train),
                config,
                &lambdas,
            )?;
            let held_x = design.values().select(Axis(0), &test);
            let held_y: Vec<usize> = test.iter().map(|&i| labels.values()[i] - 1).collect();
            Ok(path
                .entries
                .iter()
                .map(|e| {
                    e.converged.then(|| {
                        let b = e.coefficients.beta();
                        let eta = held_x.dot(&b.slice(s![1.., ..])) + b.row(0);
                        deviance_from_eta(&eta, &held_y) / test.len() as f64
                    })
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;

    let points = lambdas
        .iter()
        .enumerate()
        .map(|(l, &lambda)| {
            let vals: Vec<f64> = per_fold.iter().filter_map(|f| f[l]).collect();
            if vals.len() < folds.k_folds {
                log::warn!(
                    "λ = {lambda:.6e}: {} of {} folds did not converge",
                    folds.k_folds - vals.len(),
                    folds.k_folds
                );
            }
            let (mean, sd) = mean_sd(&vals);
            CvPoint {
                lambda,
                mean_deviance: mean,
                sd_deviance: sd,
                nonzero_count: full.entries[l].nonzero_count,
                converged_folds: vals.len(),
            }
        })
        .collect();
    Ok(CvCurve {
        points,
        k_folds: folds.k_folds,
    })
}

/// Sorts rows by content (features, then label) so fits and sums do not
/// depend on the order rows arrive in.
fn canonical_order(
    design: &DesignMatrix,
    labels: &ClassLabels,
    mut rows: Vec<usize>,
) -> Vec<usize> {
    let x = design.values();
    rows.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b).iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(labels.values()[a].cmp(&labels.values()[b]))
    });
    rows
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (m, (ss / (v.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Position on the curve's λ grid.
    pub index: usize,
    pub lambda: f64,
    pub rule: SelectionRule,
}

/// Picks λ from the curve. Points without a converged fold are skipped.
/// `Min` breaks ties toward the larger λ; `OneSe` takes the largest λ whose
/// mean is within one sd of the minimum.
pub fn select_lambda(curve: &CvCurve, rule: SelectionRule) -> Result<Selection, SelectError> {
    let usable: Vec<(usize, &CvPoint)> = curve
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.converged_folds > 0 && p.mean_deviance.is_finite())
        .collect();
    let mut best: Option<(usize, &CvPoint)> = None;
    for &(i, p) in &usable {
        let better = match best {
            None => true,
            Some((_, b)) => {
                p.mean_deviance < b.mean_deviance
                    || (p.mean_deviance == b.mean_deviance && p.lambda > b.lambda)
            }
        };
        if better {
            best = Some((i, p));
        }
    }
    let (mut index, bp) = best.ok_or(SelectError::NoConvergedEntries)?;
    if rule == SelectionRule::OneSe {
        let bound = bp.mean_deviance + bp.sd_deviance;
        let (i, _) = usable
            .iter()
            .filter(|(_, p)| p.mean_deviance <= bound)
            .fold(None, |acc: Option<(usize, f64)>, (i, p)| match acc {
                Some((_, l)) if l >= p.lambda => acc,
                _ => Some((*i, p.lambda)),
            })
            .expect("the minimum satisfies its own bound");
        index = i;
    }
    Ok(Selection {
        index,
        lambda: curve.points[index].lambda,
        rule,
    })
}

/// CSV with columns lambda, mean_deviance, sd_deviance, nonzero_count, converged_folds.
pub fn write_cv_report<W: Write>(out: W, curve: &CvCurve) -> Result<(), SelectError> {
    let mut w = csv::Writer::from_writer(out);
    for p in &curve.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cv_report<R: std::io::Read>(input: R, k_folds: usize) -> Result<CvCurve, SelectError> {
    let mut r = csv::Reader::from_reader(input);
    let points = r.deserialize().collect::<Result<Vec<CvPoint>, _>>()?;
    Ok(CvCurve { points, k_folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
}

pub fn evaluate(
    coef: &CoefficientTensor,
    design: &DesignMatrix,
    labels: &ClassLabels,
) -> Result<EvaluationReport, SelectError> {
    if labels.is_empty() {
        return Err(SelectError::EmptyTest);
    }
    if labels.len() != design.n() || labels.k() != coef.k() {
        return Err(GlmError::DimensionMismatch(format!(
            "{} labels over {} classes for {} rows and {} classes",
            labels.len(),
            labels.k(),
            design.n(),
            coef.k()
        ))
        .into());
    }
    let pred = predict(coef, design)?;
    let k = coef.k();
    let mut confusion = vec![vec![0; k]; k];
    for (&t, &p) in labels.values().iter().zip(pred.values()) {
        confusion[t - 1][p - 1] += 1;
    }
    let hits: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(EvaluationReport {
        accuracy: hits as f64 / labels.len() as f64,
        confusion,
        n_test: labels.len(),
    })
}
