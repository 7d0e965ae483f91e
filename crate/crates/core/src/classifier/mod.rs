//! Affine class models in the scattering domain and penalized model
//! selection.
//!
//! Each class is modelled by its empirical mean plus the span of the leading
//! principal directions. A signal is assigned to the class minimising
//!
//! ```text
//! L(i) = min_{0 ≤ k ≤ K} ‖v − P_{A_{k,i}} v‖² + β k
//! ```
//!
//! where `A_{k,i}` is the mean of class `i` plus its first `k` eigenvectors.

mod crossval;
mod diagnostics;
pub mod pca;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scattering::ScatteringConfig;

pub use crossval::{
    cross_validate, quantile_beta_grid, stratified_split, BetaGrid, CrossValidation, CvOutcome,
    CvRow,
};
pub use diagnostics::{intra_outer_curves, variance_decay, InOutCurves, VarianceRow};
use pca::dot;

/// Default cap on the model dimension `K`.
pub const DEFAULT_MAX_DIM: usize = 200;

/// Mean, leading eigenvectors and eigenvalues of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineClassModel {
    class_id: u32,
    mean: Vec<f64>,
    /// `dim()` eigenvectors, each `mean.len()` long, concatenated.
    basis: Vec<f64>,
    eigvals: Vec<f64>,
    requested_dim: usize,
}

impl AffineClassModel {
    /// Rebuilds a model from stored parts; the basis must be row-major
    /// `eigvals.len() × mean.len()`.
    pub fn from_parts(
        class_id: u32,
        mean: Vec<f64>,
        eigvals: Vec<f64>,
        basis: Vec<f64>,
        requested_dim: usize,
    ) -> Result<Self> {
        if basis.len() != eigvals.len() * mean.len() {
            return Err(Error::InvalidInput(format!(
                "basis of {} values for {} eigenvectors of length {}",
                basis.len(),
                eigvals.len(),
                mean.len()
            )));
        }
        Ok(AffineClassModel {
            class_id,
            mean,
            basis,
            eigvals,
            requested_dim,
        })
    }

    /// A model with no principal directions (`K = 0`).
    pub fn mean_only(class_id: u32, mean: Vec<f64>) -> Self {
        AffineClassModel {
            class_id,
            mean,
            basis: Vec::new(),
            eigvals: Vec::new(),
            requested_dim: 0,
        }
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    pub fn feature_dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of principal directions kept.
    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    /// `K` asked for at fit time; larger than `dim()` when the sample count
    /// or the numerical rank forced a truncation.
    pub fn requested_dim(&self) -> usize {
        self.requested_dim
    }

    pub fn was_truncated(&self) -> bool {
        self.dim() < self.requested_dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn eigvec(&self, l: usize) -> &[f64] {
        let d = self.mean.len();
        &self.basis[l * d..(l + 1) * d]
    }

    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.mean.len() {
            return Err(Error::InvalidInput(format!(
                "feature vector of length {} for a model of dimension {}",
                v.len(),
                self.mean.len()
            )));
        }
        Ok(())
    }

    /// Squared projection errors onto `A_k` for `k = 0..=dim()`.
    ///
    /// `e(0) = ‖v − μ‖²` and `e(k) = e(k−1) − ⟨v − μ, e_k⟩²`, clamped at 0.
    pub fn projection_errors(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut err = dot(&centered, &centered);
        let mut out = Vec::with_capacity(self.dim() + 1);
        out.push(err);
        for l in 0..self.dim() {
            let c = dot(&centered, self.eigvec(l));
            err = (err - c * c).max(0.0);
            out.push(err);
        }
        Ok(out)
    }

    pub fn projection_error(&self, v: &[f64], k: usize) -> Result<f64> {
        if k > self.dim() {
            return Err(Error::InvalidInput(format!(
                "k = {k} exceeds the model dimension {}",
                self.dim()
            )));
        }
        Ok(self.projection_errors(v)?[k])
    }
}

/// Fits the affine model of one class from its training vectors.
///
/// Uses a `1/T` covariance normalization. `max_dim` is capped at `T − 1` and
/// at the numerical rank of the centered data; eigenvectors are signed so
/// that their largest-magnitude entry is positive.
pub fn fit_class_model(class_id: u32, samples: &[&[f64]], max_dim: usize) -> Result<AffineClassModel> {
    let t = samples.len();
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "class {class_id} needs at least 2 training vectors, got {t}"
        )));
    }
    let d = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::InvalidInput(format!(
            "class {class_id}: vectors of length {d} and {}",
            bad.len()
        )));
    }

    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t as f64);
    let centered: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let keep = max_dim.min(t - 1);
    if keep < max_dim {
        log::info!("class {class_id}: K = {max_dim} truncated to T - 1 = {keep}");
    }
    let svd = pca::thin_svd(centered);
    let keep_rank = keep.min(svd.singular_values.len());
    if keep_rank < keep {
        log::warn!(
            "class {class_id}: centered data has rank {}, keeping {keep_rank} directions",
            svd.singular_values.len()
        );
    }

    let mut basis = Vec::with_capacity(keep_rank * d);
    let mut eigvals = Vec::with_capacity(keep_rank);
    for (s, v) in svd.singular_values.iter().zip(svd.right_vectors).take(keep_rank) {
        eigvals.push(s * s / t as f64);
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
            .0;
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        basis.extend(v.iter().map(|x| x * sign));
    }
    Ok(AffineClassModel {
        class_id,
        mean,
        basis,
        eigvals,
        requested_dim: max_dim,
    })
}

/// Result of penalized model selection for one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Class id of the winning model.
    pub class_id: u32,
    /// Position of the winning model in the classifier.
    pub model_index: usize,
    /// Minimizing dimension `k` for every model.
    pub dims: Vec<usize>,
    /// Penalized energy `L(i)` for every model.
    pub scores: Vec<f64>,
}

impl Prediction {
    pub fn selected_dim(&self) -> usize {
        self.dims[self.model_index]
    }
}

/// `min_k e(k) + β k`, with the smallest minimizing `k`.
///
/// The `k = 0` term carries no penalty, so `β = ∞` is allowed.
pub fn penalized_minimum(errors: &[f64], beta: f64) -> (f64, usize) {
    let mut best = (errors[0], 0);
    for (k, &e) in errors.iter().enumerate().skip(1) {
        let l = e + beta * k as f64;
        if l < best.0 {
            best = (l, k);
        }
    }
    best
}

/// Penalized selection over per-model error profiles; ties go to the lowest
/// index.
pub fn select_model(profiles: &[Vec<f64>], beta: f64) -> Result<(usize, Vec<usize>, Vec<f64>)> {
    if profiles.is_empty() {
        return Err(Error::InvalidInput("no class models to choose from".into()));
    }
    let mut dims = Vec::with_capacity(profiles.len());
    let mut scores = Vec::with_capacity(profiles.len());
    for p in profiles {
        let (l, k) = penalized_minimum(p, beta);
        dims.push(k);
        scores.push(l);
    }
    let mut winner = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[winner] {
            winner = i;
        }
    }
    Ok((winner, dims, scores))
}

/// All class models plus the hyperparameters they were selected with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub config: ScatteringConfig,
    pub beta: f64,
    pub max_dim: usize,
    pub models: Vec<AffineClassModel>,
}

impl TrainedClassifier {
    /// Fits one model per distinct label. Classes with a single sample get
    /// a mean-only model.
    pub fn fit(
        config: ScatteringConfig,
        vectors: &[&[f64]],
        labels: &[u32],
        max_dim: usize,
        beta: f64,
    ) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        if !(beta >= 0.0) {
            return Err(Error::Config(format!("beta must be non-negative, got {beta}")));
        }
        let mut classes: Vec<u32> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.is_empty() {
            return Err(Error::InvalidInput("empty training set".into()));
        }
        let models = classes
            .par_iter()
            .map(|&c| {
                let members: Vec<&[f64]> = vectors
                    .iter()
                    .zip(labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(v, _)| *v)
                    .collect();
                if members.len() == 1 {
                    Ok(AffineClassModel::mean_only(c, members[0].to_vec()))
                } else {
                    fit_class_model(c, &members, max_dim)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainedClassifier {
            config,
            beta,
            max_dim,
            models,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.models.first().map_or(0, AffineClassModel::feature_dim)
    }

    pub fn class_ids(&self) -> Vec<u32> {
        self.models.iter().map(|m| m.class_id).collect()
    }

    /// Projection error profiles of `v` against every model.
    pub fn profiles(&self, v: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.models.iter().map(|m| m.projection_errors(v)).collect()
    }

    pub fn classify(&self, v: &[f64]) -> Result<Prediction> {
        self.classify_with_beta(v, self.beta)
    }

    pub fn classify_with_beta(&self, v: &[f64], beta: f64) -> Result<Prediction> {
        if self.models.is_empty() {
            return Err(Error::InvalidInput("classifier has no class models".into()));
        }
        let profiles = self.profiles(v)?;
        let (model_index, dims, scores) = select_model(&profiles, beta)?;
        Ok(Prediction {
            class_id: self.models[model_index].class_id,
            model_index,
            dims,
            scores,
        })
    }

    pub fn classify_batch(&self, vectors: &[&[f64]]) -> Result<Vec<Prediction>> {
        vectors.par_iter().map(|v| self.classify(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    fn refs(rows: &[Vec<f64>]) -> Vec<&[f64]> {
        rows.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn identical_vectors_give_zero_spread() {
        let v = vec![1.0, -2.0, 3.0];
        let m = fit_class_model(0, &[&v, &v], 5).unwrap();
        assert_eq!(m.mean(), v.as_slice());
        assert!(m.eigvals().iter().all(|&e| e == 0.0));
        assert_eq!(m.dim(), 0);
        assert!(m.was_truncated());
    }

    #[test]
    fn line_data_has_rank_one() {
        let mu = [1.0, 0.5, -1.0, 2.0];
        let u = [0.5, 0.5, 0.5, -0.5];
        let rows: Vec<Vec<f64>> = [-2.0, -0.5, 1.0, 3.0]
            .iter()
            .map(|t| mu.iter().zip(&u).map(|(m, x)| m + t * x).collect())
            .collect();
        let m = fit_class_model(3, &refs(&rows), 3).unwrap();
        assert_eq!(m.dim(), 1);
        for (a, b) in m.eigvec(0).iter().zip(&u) {
            assert!((a.abs() - b.abs()).abs() < 1e-8);
        }
        // sign canonicalization: largest-magnitude entry is positive
        let e = m.eigvec(0);
        let piv = e.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        assert!(piv > 0.0);
    }

    #[test]
    fn rejects_bad_training_input() {
        let v = vec![1.0, 2.0];
        assert!(fit_class_model(0, &[&v], 1).is_err());
        let w = vec![1.0];
        assert!(fit_class_model(0, &[&v, &w], 1).is_err());
    }

    #[test]
    fn projection_error_examples() {
        let rows = gaussian_rows(8, 12, 5);
        let m = fit_class_model(0, &refs(&rows), 4).unwrap();
        let at_mean = m.projection_errors(m.mean()).unwrap();
        assert!(at_mean.iter().all(|&e| e == 0.0));
        let v = &rows[2];
        let e0: f64 = v.iter().zip(m.mean()).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!((m.projection_error(v, 0).unwrap() - e0).abs() < 1e-12);
        let prof = m.projection_errors(v).unwrap();
        assert!(prof.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.projection_error(v, 5).is_err());
    }

    #[test]
    fn full_rank_model_reproduces_training_points() {
        let rows = gaussian_rows(6, 15, 9);
        let m = fit_class_model(0, &refs(&rows), 10).unwrap();
        assert_eq!(m.dim(), 5);
        for r in &rows {
            assert!(m.projection_error(r, 5).unwrap() < 1e-8);
        }
    }

    #[test]
    fn hand_built_selection() {
        let profiles = vec![vec![10.0, 1.0], vec![5.0, 4.0]];
        let (winner, dims, scores) = select_model(&profiles, 2.0).unwrap();
        assert_eq!(winner, 0);
        assert_eq!(dims, vec![1, 0]);
        assert_eq!(scores, vec![3.0, 5.0]);
        assert!(select_model(&[], 1.0).is_err());
    }

    #[test]
    fn infinite_penalty_is_nearest_centroid() {
        assert_eq!(penalized_minimum(&[3.0, 1.0, 0.0], f64::INFINITY), (3.0, 0));
        assert_eq!(penalized_minimum(&[3.0, 1.0, 0.5], 0.0), (0.5, 2));
        // ties keep the smaller dimension
        assert_eq!(penalized_minimum(&[2.0, 1.0, 0.0], 1.0), (2.0, 0));
    }

    #[test]
    fn mean_vector_picks_its_class_at_k0() {
        let a = gaussian_rows(10, 6, 1);
        let b: Vec<Vec<f64>> = gaussian_rows(10, 6, 2)
            .into_iter()
            .map(|r| r.into_iter().map(|x| x + 5.0).collect())
            .collect();
        let all: Vec<Vec<f64>> = a.iter().chain(&b).cloned().collect();
        let labels: Vec<u32> = (0..20).map(|i| (i / 10) as u32).collect();
        let clf = TrainedClassifier::fit(ScatteringConfig::default(), &refs(&all), &labels, 3, 0.5).unwrap();
        let p = clf.classify(clf.models[1].mean()).unwrap();
        assert_eq!(p.class_id, 1);
        assert_eq!(p.selected_dim(), 0);
    }

    #[test]
    fn singleton_class_gets_mean_only_model() {
        let rows = gaussian_rows(4, 3, 7);
        let labels = [0, 0, 0, 1];
        let clf = TrainedClassifier::fit(ScatteringConfig::default(), &refs(&rows), &labels, 5, 1.0).unwrap();
        assert_eq!(clf.models[1].dim(), 0);
        assert_eq!(clf.models[0].dim(), 2);
        assert!(clf.classify(&rows[3]).is_ok());
    }

    #[test]
    fn empty_classifier_is_an_error() {
        let clf = TrainedClassifier {
            config: ScatteringConfig::default(),
            beta: 1.0,
            max_dim: 1,
            models: Vec::new(),
        };
        assert!(clf.classify(&[1.0]).is_err());
        assert!(TrainedClassifier::fit(ScatteringConfig::default(), &[], &[], 1, 1.0).is_err());
    }
}
