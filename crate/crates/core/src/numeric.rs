//! Small dense-linear-algebra helpers shared by the estimation kernels.

use nalgebra::{DMatrix, DVector};

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divide by N).
pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Population covariance (divide by N).
pub(crate) fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.len() as f64
}

/// Design matrix from column slices plus a leading intercept column.
pub(crate) fn design_with_intercept(cols: &[&[f64]], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len() + 1);
    for i in 0..n {
        m[(i, 0)] = 1.0;
    }
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            m[(i, j + 1)] = col[i];
        }
    }
    m
}

/// Least-squares residuals of `y` on the design `x` (SVD, rank-tolerant).
pub(crate) fn ols_residuals(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let beta = svd.solve(&yv, 1e-12).expect("svd solve");
    let fitted = x * beta;
    y.iter().zip(fitted.iter()).map(|(yi, fi)| yi - fi).collect()
}

/// Ridge regression with unpenalized intercept: columns of `x` are raw
/// features (no intercept column). Returns (intercept, coefficients).
pub(crate) fn ridge_fit(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> (f64, DVector<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let col_means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
    let y_mean = mean(y);
    let mut xc = x.clone();
    for j in 0..p {
        for i in 0..n {
            xc[(i, j)] -= col_means[j];
        }
    }
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += alpha;
    }
    let rhs = xc.transpose() * yc;
    let beta = gram
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .unwrap_or_else(|| {
            // fall back to SVD when the regularized Gram matrix is still singular
            let svd = xc.clone().svd(true, true);
            svd.solve(&DVector::from_iterator(n, y.iter().map(|v| v - y_mean)), 1e-12)
                .expect("svd solve")
        });
    let intercept = y_mean
        - col_means
            .iter()
            .zip(beta.iter())
            .map(|(m, b)| m * b)
            .sum::<f64>();
    (intercept, beta)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression by iteratively reweighted least squares.
///
/// `x` must already contain the intercept column. Labels are 0/1. A small
/// ridge term keeps the updates defined on separable data; coefficients then
/// grow until the iteration cap and the caller's output clipping takes over.
pub(crate) fn logistic_irls(x: &DMatrix<f64>, y: &[f64], max_iter: usize) -> DVector<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let mut beta = DVector::zeros(p);
    for _ in 0..max_iter {
        let eta = x * &beta;
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let mut xtwx = DMatrix::zeros(p, p);
        let mut xtz = DVector::zeros(p);
        for i in 0..n {
            let w = (mu[i] * (1.0 - mu[i])).max(1e-10);
            let r = y[i] - mu[i];
            let row = x.row(i);
            for a in 0..p {
                xtz[a] += row[a] * r;
                for b in 0..p {
                    xtwx[(a, b)] += row[a] * w * row[b];
                }
            }
        }
        for a in 0..p {
            xtwx[(a, a)] += 1e-8;
        }
        let step = match xtwx.cholesky() {
            Some(ch) => ch.solve(&xtz),
            None => break,
        };
        let delta = step.amax();
        beta += step;
        if delta < 1e-10 {
            break;
        }
    }
    beta
}

/// Predicted probabilities from a fitted logistic model.
pub(crate) fn logistic_predict(x: &DMatrix<f64>, beta: &DVector<f64>) -> Vec<f64> {
    (x * beta).iter().map(|&e| sigmoid(e)).collect()
}
