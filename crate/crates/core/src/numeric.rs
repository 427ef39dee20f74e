//! Small dense linear-algebra helpers shared by the regression and
//! curation stages.

use nalgebra::{DMatrix, DVector};

/// Solves `(X^T X + alpha I) b = X^T y`. Cholesky first, SVD least squares
/// as the rank-deficient fallback. `None` when the normal equations are
/// non-finite (overflowing feature columns) or every factorization fails.
pub(crate) fn ridge_solve(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Option<DVector<f64>> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    if xtx.iter().any(|v| !v.is_finite()) || xty.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let p = xtx.nrows();
    let mut lhs = xtx;
    for i in 0..p {
        lhs[(i, i)] += alpha;
    }
    if let Some(chol) = lhs.clone().cholesky() {
        let sol = chol.solve(&xty);
        if sol.iter().all(|v| v.is_finite()) {
            return Some(sol);
        }
    }
    lhs.svd(true, true)
        .solve(&xty, 1e-12)
        .ok()
        .filter(|sol| sol.iter().all(|v| v.is_finite()))
}

/// Pearson correlation; zero when either side is degenerate.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Coefficient of determination of an OLS regression (with intercept) of
/// `y` on the columns of `x`. A failed solve reports a perfect fit, which
/// callers treat as maximal redundancy.
pub(crate) fn ols_r2(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let m = x.nrows();
    let k = x.ncols();
    let mut design = DMatrix::zeros(m, k + 1);
    for i in 0..m {
        design[(i, 0)] = 1.0;
        for j in 0..k {
            design[(i, j + 1)] = x[(i, j)];
        }
    }
    let yv = DVector::from_column_slice(y);
    let Some(beta) = ridge_solve(&design, &yv, 0.0) else {
        return 1.0;
    };
    let pred = design * beta;
    let mean = y.iter().sum::<f64>() / m as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..m {
        ss_res += (y[i] - pred[i]).powi(2);
        ss_tot += (y[i] - mean).powi(2);
    }
    if ss_tot <= 0.0 {
        return 1.0;
    }
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_recovers_exact_solution() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
        let truth = DVector::from_column_slice(&[1.5, -2.0]);
        let y = &x * &truth;
        let b = ridge_solve(&x, &y, 0.0).unwrap();
        assert!((b - truth).amax() < 1e-12);
    }

    #[test]
    fn pearson_of_identical_columns_is_one() {
        let a = [1.0, 2.0, 3.0, 5.0];
        assert!((pearson(&a, &a) - 1.0).abs() < 1e-14);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson(&a, &neg) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn r2_of_perfect_fit() {
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        assert!((ols_r2(&x, &y) - 1.0).abs() < 1e-12);
    }
}
