//! Generic convex minimizer for the L1-penalized multinomial objective.
//!
//! Accelerated proximal gradient (monotone FISTA) with backtracking, run to a
//! tight gradient-mapping tolerance. Slow but simple, and it never touches a
//! coordinate-wise update, so it can referee the coordinate descent solver.
//!
//! Coefficients are a flat `(p + 1) * k` vector, row-major, row 0 = intercepts.

/// One problem instance: rows of `x` (length p each), labels in `0..k`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub k: usize,
    pub penalize_intercept: bool,
}

impl Problem {
    pub fn p(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }

    fn n(&self) -> f64 {
        self.x.len() as f64
    }

    fn linear(&self, beta: &[f64], i: usize) -> Vec<f64> {
        let k = self.k;
        (0..k)
            .map(|c| {
                beta[c]
                    + self.x[i]
                        .iter()
                        .enumerate()
                        .map(|(j, v)| beta[(j + 1) * k + c] * v)
                        .sum::<f64>()
            })
            .collect()
    }

    /// (1/n) * (-2 * log-likelihood).
    pub fn smooth(&self, beta: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.x.len() {
            let eta = self.linear(beta, i);
            let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
            total += -2.0 * (eta[self.y[i]] - lse);
        }
        total / self.n()
    }

    pub fn smooth_gradient(&self, beta: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut g = vec![0.0; beta.len()];
        for i in 0..self.x.len() {
            let eta = self.linear(beta, i);
            let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = eta.iter().map(|e| (e - m).exp()).sum();
            for c in 0..k {
                let prob = (eta[c] - m).exp() / z;
                let resid = prob - if self.y[i] == c { 1.0 } else { 0.0 };
                g[c] += resid;
                for (j, v) in self.x[i].iter().enumerate() {
                    g[(j + 1) * k + c] += resid * v;
                }
            }
        }
        let scale = 2.0 / self.n();
        g.iter_mut().for_each(|v| *v *= scale);
        g
    }

    fn penalized(&self, idx: usize) -> bool {
        self.penalize_intercept || idx >= self.k
    }

    pub fn penalty(&self, beta: &[f64]) -> f64 {
        beta.iter()
            .enumerate()
            .filter(|(i, _)| self.penalized(*i))
            .map(|(_, b)| b.abs())
            .sum()
    }

    pub fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        self.smooth(beta) + lambda * self.penalty(beta)
    }

    fn prox(&self, v: &[f64], step: f64, lambda: f64) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                if self.penalized(i) {
                    let t = step * lambda;
                    x.signum() * (x.abs() - t).max(0.0)
                } else {
                    x
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Minimizes `problem.objective(., lambda)` from zero.
pub fn minimize(problem: &Problem, lambda: f64, max_iter: usize) -> OracleResult {
    let dim = (problem.p() + 1) * problem.k;
    let mut x = vec![0.0; dim];
    let mut fx = problem.objective(&x, lambda);
    let mut yv = x.clone();
    let mut t = 1.0f64;
    let mut lip = 1.0f64;
    let mut iterations = 0;

    for it in 0..max_iter {
        iterations = it + 1;
        let fy = problem.smooth(&yv);
        let gy = problem.smooth_gradient(&yv);
        // backtracking on the quadratic upper bound
        let z = loop {
            let step = 1.0 / lip;
            let v: Vec<f64> = yv.iter().zip(&gy).map(|(a, g)| a - step * g).collect();
            let z = problem.prox(&v, step, lambda);
            let d: Vec<f64> = z.iter().zip(&yv).map(|(a, b)| a - b).collect();
            let bound = fy
                + d.iter().zip(&gy).map(|(a, b)| a * b).sum::<f64>()
                + 0.5 * lip * d.iter().map(|a| a * a).sum::<f64>();
            if problem.smooth(&z) <= bound + 1e-15 * bound.abs().max(1.0) {
                break z;
            }
            lip *= 2.0;
        };
        let fz = problem.objective(&z, lambda);
        let mut t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let x_prev = x.clone();
        // monotone variant: keep the better of z and the previous iterate
        if fz <= fx {
            x = z.clone();
            fx = fz;
        } else {
            // adaptive restart of the momentum sequence
            t = 1.0;
            t_next = 1.0;
        }
        yv = (0..dim)
            .map(|i| {
                x[i] + (t / t_next) * (z[i] - x[i]) + ((t - 1.0) / t_next) * (x[i] - x_prev[i])
            })
            .collect();
        t = t_next;

        let moved = z
            .iter()
            .zip(&x_prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if it > 50 && moved * lip < 1e-10 {
            break;
        }
        lip = (lip * 0.9).max(1e-6);
    }

    OracleResult {
        beta: x,
        objective: fx,
        iterations,
    }
}
