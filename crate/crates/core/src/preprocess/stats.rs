//! Pairwise correlation and variance inflation factors.

use ndarray::{Array2, ArrayView2, Axis};

use super::PreprocessError;

/// Pivots below this (on the unit-diagonal correlation scale) are treated as
/// exactly collinear with the columns already eliminated.
const PIVOT_TOL: f64 = 1e-10;

/// Pearson correlation of every column pair; unit diagonal.
pub fn correlation_matrix(x: ArrayView2<'_, f64>) -> Result<Array2<f64>, PreprocessError> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(PreprocessError::TooFewRows { rows: n, needed: 2 });
    }
    let means = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &means;
    let norms: Vec<f64> = centered
        .axis_iter(Axis(1))
        .map(|c| c.dot(&c).sqrt())
        .collect();
    if let Some(j) = norms.iter().position(|v| !(*v > 0.0)) {
        return Err(PreprocessError::ConstantColumn(format!("column {j}")));
    }
    let mut r = centered.t().dot(&centered);
    for i in 0..p {
        for j in 0..p {
            r[[i, j]] = if i == j {
                1.0
            } else {
                r[[i, j]] / (norms[i] * norms[j])
            };
        }
    }
    // exact symmetry regardless of summation order
    for i in 0..p {
        for j in i + 1..p {
            let v = r[[i, j]].clamp(-1.0, 1.0);
            r[[i, j]] = v;
            r[[j, i]] = v;
        }
    }
    Ok(r)
}

/// `1 / (1 − R²_j)` for every column, where `R²_j` comes from regressing
/// column j on all the others plus an intercept. Exactly collinear columns
/// get `f64::INFINITY`.
///
/// `1 − R²_j` is the Schur complement of column j in the correlation matrix
/// after eliminating the other columns; redundant columns among the others
/// are skipped as their pivots vanish.
pub fn variance_inflation_factors(x: ArrayView2<'_, f64>) -> Result<Vec<f64>, PreprocessError> {
    let (n, p) = x.dim();
    if p == 0 {
        return Ok(Vec::new());
    }
    if n <= p {
        return Err(PreprocessError::IllPosed {
            rows: n,
            columns: p,
        });
    }
    let r = correlation_matrix(x)?;
    Ok((0..p).map(|j| vif_of(&r, j)).collect())
}

fn vif_of(r: &Array2<f64>, target: usize) -> f64 {
    let p = r.nrows();
    let mut a = r.clone();
    let mut done = vec![false; p];
    for k in (0..p).filter(|&k| k != target) {
        let pivot = a[[k, k]];
        done[k] = true;
        if pivot <= PIVOT_TOL {
            continue;
        }
        for i in 0..p {
            if done[i] {
                continue;
            }
            let f = a[[i, k]] / pivot;
            if f == 0.0 {
                continue;
            }
            for l in 0..p {
                if !done[l] {
                    a[[i, l]] -= f * a[[k, l]];
                }
            }
        }
    }
    let residual = a[[target, target]];
    if residual <= PIVOT_TOL {
        f64::INFINITY
    } else {
        1.0 / residual
    }
}
