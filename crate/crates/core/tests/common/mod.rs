#![allow(dead_code)]

use ndarray::Array2;
use planshare_core::glm::{ClassLabels, CoefficientTensor, DesignMatrix};
use planshare_testkit::prox::Problem;
use planshare_testkit::rng::SplitMix64;

/// Random instance with some signal: labels drawn from a multinomial model
/// with random coefficients, resampled until every class is present.
pub fn random_instance(seed: u64, n: usize, p: usize, k: usize) -> (DesignMatrix, ClassLabels) {
    let mut rng = SplitMix64::new(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.uniform());
    let truth: Vec<f64> = (0..(p + 1) * k).map(|_| 1.5 * rng.normal()).collect();
    loop {
        let y: Vec<usize> = (0..n)
            .map(|i| {
                let eta: Vec<f64> = (0..k)
                    .map(|c| {
                        truth[c]
                            + (0..p)
                                .map(|j| truth[(j + 1) * k + c] * x[[i, j]])
                                .sum::<f64>()
                    })
                    .collect();
                let m = eta.iter().cloned().fold(f64::MIN, f64::max);
                let w: Vec<f64> = eta.iter().map(|e| (e - m).exp()).collect();
                let total: f64 = w.iter().sum();
                let mut u = rng.uniform() * total;
                for (c, wc) in w.iter().enumerate() {
                    if u < *wc {
                        return c + 1;
                    }
                    u -= wc;
                }
                k
            })
            .collect();
        let labels = ClassLabels::new(y, k).unwrap();
        if labels.counts().iter().all(|&c| c > 0) {
            return (DesignMatrix::unnamed(x).unwrap(), labels);
        }
    }
}

pub fn to_problem(design: &DesignMatrix, labels: &ClassLabels) -> Problem {
    Problem {
        x: design
            .values()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        y: labels.values().iter().map(|v| v - 1).collect(),
        k: labels.k(),
        penalize_intercept: false,
    }
}

pub fn flatten(coef: &CoefficientTensor) -> Vec<f64> {
    coef.beta().iter().cloned().collect()
}

pub fn unflatten(flat: &[f64], p: usize, k: usize) -> CoefficientTensor {
    CoefficientTensor::new(Array2::from_shape_vec((p + 1, k), flat.to_vec()).unwrap()).unwrap()
}

/// Largest amount by which any subgradient condition misses its tolerance;
/// zero means every condition holds.
pub fn kkt_violation(
    coef: &CoefficientTensor,
    design: &DesignMatrix,
    labels: &ClassLabels,
    lambda: f64,
) -> f64 {
    let g =
        planshare_core::glm::deviance_gradient(coef, design, labels).unwrap() / design.n() as f64;
    let mut worst = 0.0f64;
    for ((j, c), &b) in coef.beta().indexed_iter() {
        let gj = g[[j, c]];
        let v = if j == 0 {
            (gj.abs() - 1e-4 * lambda.max(1.0)).max(0.0)
        } else if b == 0.0 {
            (gj.abs() - lambda * (1.0 + 1e-4)).max(0.0)
        } else {
            ((gj + lambda * b.signum()).abs() - 1e-4 * lambda.max(1.0)).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}
