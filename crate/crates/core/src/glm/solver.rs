//! Partial-Newton coordinate descent for the L1-penalized multinomial model.
//!
//! Each outer cycle visits the classes in order. For class k the multinomial
//! log-likelihood is replaced by its quadratic approximation in `β_·k` with
//! the other classes held fixed (weights `p(1-p)`, working response
//! `η + (y - p)/w`), and the resulting weighted lasso is solved by cyclic
//! coordinate descent with an active-set loop. The proposed step is then
//! accepted through a backtracking search on the true penalized objective,
//! so the objective never goes up between outer cycles.

use ndarray::{Array1, Array2, Axis};

use super::likelihood::{deviance_from_eta, linear_predictor, log_sum_exp};
use super::{
    ClassLabels, CoefficientTensor, DesignMatrix, GlmError, PathEntry, PathResult, SolverConfig,
};

/// Smallest IRLS weight allowed.
pub const WEIGHT_FLOOR: f64 = 1e-5;

const MAX_INNER_SWEEPS: usize = 100_000;
const MAX_HALVINGS: usize = 50;
const INNER_TOL_START: f64 = 1e-3;

/// `sign(z) · max(|z| − γ, 0)`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// One record per finished outer cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub lambda: f64,
    pub iteration: usize,
    pub objective: f64,
    pub max_change: f64,
}

fn validate_inputs(design: &DesignMatrix, labels: &ClassLabels) -> Result<(), GlmError> {
    if labels.len() != design.n() {
        return Err(GlmError::DimensionMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            design.n()
        )));
    }
    labels.ensure_all_present()
}

fn class_proportions(labels: &ClassLabels) -> Vec<f64> {
    let n = labels.len() as f64;
    labels.counts().iter().map(|&c| c as f64 / n).collect()
}

/// Intercept-only fit: log class proportions, centered; all features zero.
/// With a penalized intercept the null model is all zeros.
pub fn null_model(p: usize, labels: &ClassLabels, penalize_intercept: bool) -> CoefficientTensor {
    let mut coef = CoefficientTensor::zeros(p, labels.k());
    if !penalize_intercept {
        let logs: Vec<f64> = class_proportions(labels).iter().map(|v| v.ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        for (c, l) in logs.iter().enumerate() {
            coef.beta_mut()[[0, c]] = l - mean;
        }
    }
    coef
}

/// Smallest λ at which every penalized coefficient is zero at the optimum.
///
/// Gradient convention matches [`super::penalized_objective`]: the largest
/// `|(2/n) Σᵢ xᵢⱼ (1{yᵢ=k} − p̄ₖ)|`, where `p̄` are the null-model probabilities.
pub fn lambda_max(design: &DesignMatrix, labels: &ClassLabels) -> Result<f64, GlmError> {
    lambda_max_with(design, labels, false)
}

pub fn lambda_max_with(
    design: &DesignMatrix,
    labels: &ClassLabels,
    penalize_intercept: bool,
) -> Result<f64, GlmError> {
    validate_inputs(design, labels)?;
    let n = design.n() as f64;
    let k = labels.k();
    let base: Vec<f64> = if penalize_intercept {
        vec![1.0 / k as f64; k]
    } else {
        class_proportions(labels)
    };
    let mut resid = Array2::from_shape_fn((design.n(), k), |(_, c)| -base[c]);
    for (i, &y) in labels.values().iter().enumerate() {
        resid[[i, y - 1]] += 1.0;
    }
    let score = design.values().t().dot(&resid) * (2.0 / n);
    let mut lmax = score.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if penalize_intercept {
        let intercept = resid.sum_axis(Axis(0)) * (2.0 / n);
        lmax = intercept.iter().fold(lmax, |a, v| a.max(v.abs()));
    }
    if !(lmax > 0.0) || !lmax.is_finite() {
        return Err(GlmError::Degenerate(
            "no feature is correlated with any class indicator".into(),
        ));
    }
    Ok(lmax)
}

/// `count` log-spaced values from `lmax` down to `ratio · lmax`.
pub fn lambda_grid(lmax: f64, config: &SolverConfig) -> Vec<f64> {
    let count = config.lambda_count;
    if count == 1 {
        return vec![lmax];
    }
    let log_ratio = config.lambda_min_ratio.ln();
    (0..count)
        .map(|i| lmax * (log_ratio * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Regularization path on the default log-spaced grid.
pub fn fit_path(
    design: &DesignMatrix,
    labels: &ClassLabels,
    config: &SolverConfig,
) -> Result<PathResult, GlmError> {
    config.validate()?;
    let lmax = lambda_max_with(design, labels, config.penalize_intercept)?;
    fit_path_with_lambdas(design, labels, config, &lambda_grid(lmax, config))
}

/// Regularization path on a caller-supplied strictly decreasing grid.
pub fn fit_path_with_lambdas(
    design: &DesignMatrix,
    labels: &ClassLabels,
    config: &SolverConfig,
    lambdas: &[f64],
) -> Result<PathResult, GlmError> {
    fit_path_traced(design, labels, config, lambdas, |_| {})
}

/// [`fit_path_with_lambdas`] reporting every outer cycle to `trace`.
pub fn fit_path_traced<F>(
    design: &DesignMatrix,
    labels: &ClassLabels,
    config: &SolverConfig,
    lambdas: &[f64],
    mut trace: F,
) -> Result<PathResult, GlmError>
where
    F: FnMut(&TraceEvent),
{
    config.validate()?;
    validate_inputs(design, labels)?;
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(GlmError::NegativeLambda(*bad));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GlmError::InvalidInput(
            "lambda grid must be strictly decreasing".into(),
        ));
    }
    let lmax = lambda_max_with(design, labels, config.penalize_intercept)?;
    let null = null_model(design.p(), labels, config.penalize_intercept);

    let mut solver = Solver::new(design, labels, config);
    solver.set_coefficients(&null);
    let mut entries = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (converged, iterations) = if lambda >= lmax {
            // the null model satisfies the optimality conditions exactly
            solver.set_coefficients(&null);
            (true, 0)
        } else {
            solver.solve(lambda, &mut trace)
        };
        let coefficients = solver.coefficients();
        let objective = solver.objective(lambda);
        if !converged {
            log::warn!("lambda {lambda:.6e}: no convergence after {iterations} outer iterations");
        }
        entries.push(PathEntry {
            lambda,
            nonzero_count: coefficients.nonzero_count(),
            coefficients,
            converged,
            objective,
            iterations,
        });
    }
    Ok(PathResult { entries })
}

/// Fit a single λ from `start` (the null model when `None`).
pub fn fit_lambda(
    design: &DesignMatrix,
    labels: &ClassLabels,
    config: &SolverConfig,
    lambda: f64,
    start: Option<&CoefficientTensor>,
) -> Result<PathEntry, GlmError> {
    config.validate()?;
    validate_inputs(design, labels)?;
    if !(lambda >= 0.0) {
        return Err(GlmError::NegativeLambda(lambda));
    }
    let mut solver = Solver::new(design, labels, config);
    match start {
        Some(c) => {
            if c.p() != design.p() || c.k() != labels.k() {
                return Err(GlmError::DimensionMismatch("warm start shape".into()));
            }
            solver.set_coefficients(c)
        }
        None => solver.set_coefficients(&null_model(design.p(), labels, config.penalize_intercept)),
    }
    let (converged, iterations) = solver.solve(lambda, &mut |_| {});
    let coefficients = solver.coefficients();
    Ok(PathEntry {
        lambda,
        objective: solver.objective(lambda),
        nonzero_count: coefficients.nonzero_count(),
        coefficients,
        converged,
        iterations,
    })
}

struct Solver<'a> {
    design: &'a DesignMatrix,
    /// design transposed, so each feature column is a contiguous row
    xt: Array2<f64>,
    y: Vec<usize>,
    n: usize,
    p: usize,
    k: usize,
    config: &'a SolverConfig,
    beta: Array2<f64>,
    eta: Array2<f64>,
    /// Inner sweeps stop once coordinate changes fall below this.
    inner_tol: f64,
}

impl<'a> Solver<'a> {
    fn new(design: &'a DesignMatrix, labels: &ClassLabels, config: &'a SolverConfig) -> Self {
        let n = design.n();
        let p = design.p();
        let k = labels.k();
        Solver {
            design,
            xt: design.values().t().as_standard_layout().into_owned(),
            y: labels.values().iter().map(|v| v - 1).collect(),
            n,
            p,
            k,
            config,
            beta: Array2::zeros((p + 1, k)),
            eta: Array2::zeros((n, k)),
            inner_tol: config.tol * 0.1,
        }
    }

    fn set_coefficients(&mut self, coef: &CoefficientTensor) {
        self.beta.assign(coef.beta());
        self.eta = linear_predictor(coef, self.design.values());
    }

    fn coefficients(&self) -> CoefficientTensor {
        CoefficientTensor::new(self.beta.clone()).expect("solver keeps coefficients finite")
    }

    fn penalty(&self) -> f64 {
        let skip = if self.config.penalize_intercept { 0 } else { 1 };
        self.beta
            .rows()
            .into_iter()
            .skip(skip)
            .flat_map(|r| r.into_iter())
            .map(|v| v.abs())
            .sum()
    }

    fn objective(&self, lambda: f64) -> f64 {
        deviance_from_eta(&self.eta, &self.y) / self.n as f64 + lambda * self.penalty()
    }

    /// Returns (converged, outer iterations used).
    fn solve<F: FnMut(&TraceEvent)>(&mut self, lambda: f64, trace: &mut F) -> (bool, usize) {
        let mut current = self.objective(lambda);
        self.inner_tol = INNER_TOL_START;
        for iteration in 1..=self.config.max_outer_iterations {
            let before = self.beta.clone();
            for class in 0..self.k {
                current = self.update_class(class, lambda, current);
            }
            if !self.config.penalize_intercept {
                self.center_intercepts();
                current = self.objective(lambda);
            }
            let max_change = self
                .beta
                .iter()
                .zip(before.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            trace(&TraceEvent {
                lambda,
                iteration,
                objective: current,
                max_change,
            });
            if max_change < self.config.tol && self.inner_tol <= self.config.tol * 0.1 {
                return (true, iteration);
            }
            self.inner_tol = (max_change * 0.01).clamp(self.config.tol * 0.1, INNER_TOL_START);
        }
        (false, self.config.max_outer_iterations)
    }

    fn center_intercepts(&mut self) {
        let mean = self.beta.row(0).sum() / self.k as f64;
        if mean != 0.0 {
            self.beta.row_mut(0).mapv_inplace(|v| v - mean);
            self.eta.mapv_inplace(|v| v - mean);
        }
    }

    /// Quadratic-approximation step for one class followed by a backtracking
    /// search on the penalized objective. Returns the new objective value.
    fn update_class(&mut self, class: usize, lambda: f64, current: f64) -> f64 {
        let n = self.n;
        let scale = 2.0 / n as f64;

        let mut weights = Array1::zeros(n);
        let mut resid = Array1::zeros(n);
        for i in 0..n {
            let row = self.eta.row(i);
            let prob = (row[class] - log_sum_exp(row)).exp();
            let w = (prob * (1.0 - prob)).max(WEIGHT_FLOOR);
            let target = if self.y[i] == class { 1.0 } else { 0.0 };
            weights[i] = w;
            resid[i] = (target - prob) / w;
        }

        let start: Array1<f64> = self.beta.column(class).to_owned();
        let proposal = self.weighted_lasso(&weights, resid, start.clone(), lambda, scale);
        let step = &proposal - &start;
        if step.iter().all(|v| *v == 0.0) {
            return current;
        }

        // change in this class's linear predictor for a unit step
        let mut delta_eta = Array1::from_elem(n, step[0]);
        for j in 0..self.p {
            if step[j + 1] != 0.0 {
                delta_eta.scaled_add(step[j + 1], &self.xt.row(j));
            }
        }

        let original_eta = self.eta.column(class).to_owned();
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            self.eta
                .column_mut(class)
                .assign(&(&original_eta + &(&delta_eta * t)));
            self.beta.column_mut(class).assign(&(&start + &(&step * t)));
            let trial = self.objective(lambda);
            if trial <= current {
                return trial;
            }
            t *= 0.5;
        }
        self.eta.column_mut(class).assign(&original_eta);
        self.beta.column_mut(class).assign(&start);
        current
    }

    /// Minimizes `(1/n) Σ wᵢ (rᵢ − Δηᵢ)² + λ‖b‖₁` over the class coefficients
    /// `b` by cyclic coordinate descent; `resid` is the working residual at `b`.
    fn weighted_lasso(
        &self,
        weights: &Array1<f64>,
        mut resid: Array1<f64>,
        mut b: Array1<f64>,
        lambda: f64,
        scale: f64,
    ) -> Array1<f64> {
        let p = self.p;
        let curvature: Vec<f64> = std::iter::once(scale * weights.sum())
            .chain((0..p).map(|j| {
                let col = self.xt.row(j);
                scale * col.iter().zip(weights).map(|(x, w)| w * x * x).sum::<f64>()
            }))
            .collect();
        let intercept_gamma = if self.config.penalize_intercept {
            lambda
        } else {
            0.0
        };
        let inner_tol = self.inner_tol;

        // coordinate 0 is the intercept, coordinate j + 1 is feature j
        let update = |coord: usize, b: &mut Array1<f64>, resid: &mut Array1<f64>| -> f64 {
            let a = curvature[coord];
            if a <= 0.0 {
                let old = b[coord];
                b[coord] = 0.0;
                if old != 0.0 && coord > 0 {
                    resid.scaled_add(old, &self.xt.row(coord - 1));
                }
                return old.abs();
            }
            let old = b[coord];
            let (grad, gamma) = if coord == 0 {
                (
                    resid.iter().zip(weights).map(|(r, w)| w * r).sum::<f64>(),
                    intercept_gamma,
                )
            } else {
                let col = self.xt.row(coord - 1);
                (
                    col.iter()
                        .zip(weights)
                        .zip(resid.iter())
                        .map(|((x, w), r)| w * x * r)
                        .sum::<f64>(),
                    lambda,
                )
            };
            let z = scale * grad + a * old;
            let new = soft_threshold(z, gamma) / a;
            let delta = new - old;
            if delta != 0.0 {
                b[coord] = new;
                if coord == 0 {
                    resid.mapv_inplace(|r| r - delta);
                } else {
                    resid.scaled_add(-delta, &self.xt.row(coord - 1));
                }
            }
            delta.abs()
        };

        let mut sweeps = 0;
        loop {
            let mut max_delta = 0.0f64;
            for coord in 0..=p {
                max_delta = max_delta.max(update(coord, &mut b, &mut resid));
            }
            sweeps += 1;
            if max_delta < inner_tol || sweeps >= MAX_INNER_SWEEPS {
                break;
            }
            let active: Vec<usize> = (0..=p).filter(|&c| c == 0 || b[c] != 0.0).collect();
            loop {
                let mut max_delta = 0.0f64;
                for &coord in &active {
                    max_delta = max_delta.max(update(coord, &mut b, &mut resid));
                }
                sweeps += 1;
                if max_delta < inner_tol || sweeps >= MAX_INNER_SWEEPS {
                    break;
                }
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
        assert_eq!(soft_threshold(-0.2, 0.0), -0.2);
    }

    #[test]
    fn grid_is_log_spaced() {
        let cfg = SolverConfig {
            lambda_count: 3,
            lambda_min_ratio: 0.01,
            ..Default::default()
        };
        let g = lambda_grid(2.0, &cfg);
        assert_eq!(g.len(), 3);
        assert_eq!(g[0], 2.0);
        assert!((g[1] - 0.2).abs() < 1e-12);
        assert!((g[2] - 0.02).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_column_does_not_set_lambda_max() {
        // balanced labels; column 1 is identical within each class pattern
        let x = array![[1.0, 1.0], [1.0, 0.0], [1.0, 1.0], [1.0, 0.0]];
        let design = DesignMatrix::unnamed(x).unwrap();
        let labels = ClassLabels::new(vec![1, 1, 2, 2], 2).unwrap();
        // constant column is orthogonal to centered class indicators
        let lmax = lambda_max(&design, &labels);
        assert!(matches!(lmax, Err(GlmError::Degenerate(_))));

        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 0.0], [1.0, 0.0]];
        let design = DesignMatrix::unnamed(x).unwrap();
        let lmax = lambda_max(&design, &labels).unwrap();
        // only column 2 contributes: (2/4)·|1·0.5 + 1·0.5| = 0.5
        assert!((lmax - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lambda_max_only_grid_returns_class_proportions() {
        let x = array![
            [0.1, 0.3],
            [0.7, 0.2],
            [0.4, 0.9],
            [0.2, 0.5],
            [0.8, 0.1],
            [0.6, 0.6]
        ];
        let design = DesignMatrix::unnamed(x).unwrap();
        let labels = ClassLabels::new(vec![1, 1, 1, 2, 3, 3], 3).unwrap();
        let cfg = SolverConfig {
            lambda_count: 1,
            ..Default::default()
        };
        let path = fit_path(&design, &labels, &cfg).unwrap();
        assert_eq!(path.entries.len(), 1);
        let entry = &path.entries[0];
        assert!(entry.converged);
        assert_eq!(entry.nonzero_count, 0);
        let probs = super::super::softmax_probs(&entry.coefficients, design.row(0)).unwrap();
        for (p, want) in probs.iter().zip([0.5, 1.0 / 6.0, 1.0 / 3.0]) {
            assert!((p - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_missing_class_and_bad_grid() {
        let x = array![[0.1], [0.7], [0.4]];
        let design = DesignMatrix::unnamed(x).unwrap();
        let labels = ClassLabels::new(vec![1, 1, 3], 3).unwrap();
        assert!(fit_path(&design, &labels, &SolverConfig::default()).is_err());
        let labels = ClassLabels::new(vec![1, 2, 1], 2).unwrap();
        assert!(
            fit_path_with_lambdas(&design, &labels, &SolverConfig::default(), &[0.1, 0.2]).is_err()
        );
        let cfg = SolverConfig {
            lambda_min_ratio: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            fit_path(&design, &labels, &cfg),
            Err(GlmError::InvalidConfig(_))
        ));
    }
}
