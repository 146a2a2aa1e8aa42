//! Ordinary least squares through the normal equations.

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot vanishes.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// R² of regressing `y` on `regressors` plus an intercept, via `XᵀX β = Xᵀy`.
pub fn r_squared(y: &[f64], regressors: &[&[f64]]) -> Option<f64> {
    let n = y.len();
    let q = regressors.len() + 1;
    let row = |i: usize| -> Vec<f64> {
        std::iter::once(1.0)
            .chain(regressors.iter().map(|c| c[i]))
            .collect()
    };
    let mut xtx = vec![vec![0.0; q]; q];
    let mut xty = vec![0.0; q];
    for i in 0..n {
        let r = row(i);
        for a in 0..q {
            xty[a] += r[a] * y[i];
            for b in 0..q {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    let beta = solve(xtx, xty)?;
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        let fit: f64 = row(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
        ss_res += (y[i] - fit).powi(2);
        ss_tot += (y[i] - mean).powi(2);
    }
    Some(1.0 - ss_res / ss_tot)
}

/// VIF of every column from one OLS fit per column.
pub fn vif(columns: &[Vec<f64>]) -> Vec<Option<f64>> {
    (0..columns.len())
        .map(|j| {
            let others: Vec<&[f64]> = columns
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, c)| c.as_slice())
                .collect();
            r_squared(&columns[j], &others).map(|r2| 1.0 / (1.0 - r2))
        })
        .collect()
}
