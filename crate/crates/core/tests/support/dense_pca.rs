//! Dense linear-algebra references for the PCA classifier.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Mean, and eigenpairs of the `1/T` covariance in decreasing eigenvalue
/// order, from an explicit `D × D` eigendecomposition.
pub fn dense_pca(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<(f64, Vec<f64>)>) {
    let t = samples.len();
    let d = samples[0].len();
    let x = DMatrix::from_fn(t, d, |i, k| samples[i][k]);
    let mean: Vec<f64> = (0..d).map(|k| x.column(k).sum() / t as f64).collect();
    let centered = DMatrix::from_fn(t, d, |i, k| x[(i, k)] - mean[k]);
    let cov = centered.transpose() * &centered / t as f64;
    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|l| (eig.eigenvalues[l], eig.eigenvectors.column(l).iter().cloned().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    (mean, pairs)
}

/// `min_c ‖(v − μ) − E c‖²` with `E` the `D × k` matrix whose columns are
/// `basis`, solved as a least-squares problem.
pub fn least_squares_error(v: &[f64], mean: &[f64], basis: &[&[f64]]) -> f64 {
    let d = v.len();
    let b = DVector::from_fn(d, |i, _| v[i] - mean[i]);
    if basis.is_empty() {
        return b.norm_squared();
    }
    let e = DMatrix::from_fn(d, basis.len(), |i, l| basis[l][i]);
    let c = e.clone().svd(true, true).solve(&b, 1e-14).expect("svd solve");
    (b - e * c).norm_squared()
}
