//! Hold-out selection of the scattering scale `J` and the penalty `β`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TrainedClassifier;
use crate::error::{Error, Result};
use crate::scattering::ScatteringConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum BetaGrid {
    Explicit(Vec<f64>),
    /// `count` log-spaced values between the 1% and 99% quantiles of the
    /// squared first principal coefficients on the training split.
    Quantile { count: usize },
}

impl Default for BetaGrid {
    fn default() -> Self {
        BetaGrid::Quantile { count: 30 }
    }
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub val_fraction: f64,
    pub seed: u64,
    pub max_dim: usize,
    pub beta_grid: BetaGrid,
}

impl Default for CrossValidation {
    fn default() -> Self {
        CrossValidation {
            val_fraction: 0.2,
            seed: 0,
            max_dim: super::DEFAULT_MAX_DIM,
            beta_grid: BetaGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub scales: usize,
    pub beta: f64,
    pub error_rate: f64,
    pub mean_dim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub scales: usize,
    pub beta: f64,
    pub error_rate: f64,
    pub table: Vec<CvRow>,
}

/// Per class, shuffles with `seed` and sends `round(n · val_fraction)`
/// samples to validation. Returns `(train, validation)` index lists, each
/// sorted.
pub fn stratified_split(labels: &[u32], val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction <= 0.5) {
        return Err(Error::Config(format!(
            "validation fraction must lie in (0, 0.5], got {val_fraction}"
        )));
    }
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let n_val = (members.len() as f64 * val_fraction).round() as usize;
        if n_val >= members.len() {
            return Err(Error::InvalidInput(format!(
                "class {c} has {} samples, leaving none for training",
                members.len()
            )));
        }
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Log-spaced penalties spanning the 1%–99% quantiles of
/// `⟨v − μ_i, e_{i,1}⟩²` over the classifier's own training vectors.
pub fn quantile_beta_grid(clf: &TrainedClassifier, vectors: &[&[f64]], labels: &[u32], count: usize) -> Result<Vec<f64>> {
    let mut coeffs: Vec<f64> = vectors
        .iter()
        .zip(labels)
        .filter_map(|(v, l)| {
            let m = clf.models.iter().find(|m| m.class_id() == *l)?;
            if m.dim() == 0 {
                return None;
            }
            let c: f64 = v
                .iter()
                .zip(m.mean())
                .zip(m.eigvec(0))
                .map(|((x, mu), e)| (x - mu) * e)
                .sum();
            Some(c * c)
        })
        .filter(|c| *c > 0.0)
        .collect();
    if coeffs.is_empty() || count == 0 {
        return Err(Error::Numeric(
            "cannot derive a penalty grid: no class has a principal direction".into(),
        ));
    }
    coeffs.sort_by(f64::total_cmp);
    let lo = quantile(&coeffs, 0.01);
    let hi = quantile(&coeffs, 0.99);
    if count == 1 || hi <= lo {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Grid search over `(J, β)` with models fit on the training part only.
///
/// `features_for(J)` returns the feature vectors of every sample for scale
/// `J`, in label order. Ties prefer the smaller `J`, then the larger `β`.
pub fn cross_validate<F>(
    labels: &[u32],
    scale_grid: &[usize],
    mut features_for: F,
    base_config: ScatteringConfig,
    cv: &CrossValidation,
) -> Result<CvOutcome>
where
    F: FnMut(usize) -> Result<Vec<Vec<f64>>>,
{
    if scale_grid.is_empty() {
        return Err(Error::Config("empty J grid".into()));
    }
    if let BetaGrid::Explicit(b) = &cv.beta_grid {
        if b.is_empty() {
            return Err(Error::Config("empty beta grid".into()));
        }
    }
    let (train, val) = stratified_split(labels, cv.val_fraction, cv.seed)?;
    let train_labels: Vec<u32> = train.iter().map(|&i| labels[i]).collect();
    for &l in labels {
        if !train_labels.contains(&l) {
            return Err(Error::InvalidInput(format!("class {l} is absent from the training part")));
        }
    }

    let mut grid_js: Vec<usize> = scale_grid.to_vec();
    grid_js.sort_unstable();
    grid_js.dedup();

    let mut table = Vec::new();
    let mut best: Option<CvRow> = None;
    for &j in &grid_js {
        let features = features_for(j)?;
        if features.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature vectors for {} labels",
                features.len(),
                labels.len()
            )));
        }
        let config = ScatteringConfig {
            gabor: base_config.gabor.with_scales(j),
            ..base_config
        };
        let train_vecs: Vec<&[f64]> = train.iter().map(|&i| features[i].as_slice()).collect();
        let clf = TrainedClassifier::fit(config, &train_vecs, &train_labels, cv.max_dim, 0.0)?;

        let mut betas = match &cv.beta_grid {
            BetaGrid::Explicit(b) => b.clone(),
            BetaGrid::Quantile { count } => quantile_beta_grid(&clf, &train_vecs, &train_labels, *count)?,
        };
        // Larger β first so that strict improvement implements the tie-break.
        betas.sort_by(|a, b| b.total_cmp(a));
        betas.dedup();

        let profiles: Vec<Vec<Vec<f64>>> = val
            .par_iter()
            .map(|&i| clf.profiles(&features[i]))
            .collect::<Result<_>>()?;

        for &beta in &betas {
            let mut wrong = 0usize;
            let mut dim_sum = 0usize;
            for (p, &i) in profiles.iter().zip(&val) {
                let (winner, dims, _) = super::select_model(p, beta)?;
                if clf.models[winner].class_id() != labels[i] {
                    wrong += 1;
                }
                dim_sum += dims[winner];
            }
            let n = val.len().max(1) as f64;
            let row = CvRow {
                scales: j,
                beta,
                error_rate: wrong as f64 / n,
                mean_dim: dim_sum as f64 / n,
            };
            if best.as_ref().is_none_or(|b| row.error_rate < b.error_rate) {
                best = Some(row.clone());
            }
            table.push(row);
        }
    }
    let best = best.expect("non-empty grids");
    Ok(CvOutcome {
        scales: best.scales,
        beta: best.beta,
        error_rate: best.error_rate,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn clusters(per_class: usize, classes: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..classes {
            for _ in 0..per_class {
                rows.push(
                    (0..d)
                        .map(|k| {
                            let center = if k % classes == c { 4.0 } else { 0.0 };
                            center + rng.sample::<f64, _>(StandardNormal)
                        })
                        .collect(),
                );
                labels.push(c as u32);
            }
        }
        (rows, labels)
    }

    #[test]
    fn split_is_stratified_and_reproducible() {
        let labels: Vec<u32> = (0..100).map(|i| (i % 4) as u32).collect();
        let (t1, v1) = stratified_split(&labels, 0.2, 7).unwrap();
        let (t2, v2) = stratified_split(&labels, 0.2, 7).unwrap();
        assert_eq!((t1.clone(), v1.clone()), (t2, v2));
        assert_eq!(v1.len(), 20);
        for c in 0..4 {
            assert_eq!(v1.iter().filter(|&&i| labels[i] == c).count(), 5);
        }
        let mut all: Vec<usize> = t1.iter().chain(&v1).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(stratified_split(&labels, 0.7, 1).is_err());
        assert!(stratified_split(&[0, 0, 1], 0.5, 1).is_err());
    }

    #[test]
    fn singleton_grids_echo() {
        let (rows, labels) = clusters(20, 3, 6, 1);
        let cv = CrossValidation {
            beta_grid: BetaGrid::Explicit(vec![0.25]),
            ..Default::default()
        };
        let out = cross_validate(&labels, &[2], |_| Ok(rows.clone()), ScatteringConfig::default(), &cv).unwrap();
        assert_eq!((out.scales, out.beta), (2, 0.25));
        assert_eq!(out.table.len(), 1);
    }

    #[test]
    fn infinite_beta_selects_centroids() {
        let (rows, labels) = clusters(20, 3, 6, 2);
        let cv = CrossValidation {
            beta_grid: BetaGrid::Explicit(vec![0.0, f64::INFINITY]),
            ..Default::default()
        };
        let out = cross_validate(&labels, &[1], |_| Ok(rows.clone()), ScatteringConfig::default(), &cv).unwrap();
        let inf = out.table.iter().find(|r| r.beta.is_infinite()).unwrap();
        assert_eq!(inf.mean_dim, 0.0);
        let zero = out.table.iter().find(|r| r.beta == 0.0).unwrap();
        assert!(zero.mean_dim > 0.0);
    }

    #[test]
    fn ties_prefer_small_j_then_large_beta() {
        let (rows, labels) = clusters(20, 2, 4, 3);
        let cv = CrossValidation {
            beta_grid: BetaGrid::Explicit(vec![1.0, 2.0]),
            ..Default::default()
        };
        // Well separated clusters: every setting is perfect, so ties decide.
        let out = cross_validate(&labels, &[3, 2], |_| Ok(rows.clone()), ScatteringConfig::default(), &cv).unwrap();
        assert_eq!(out.error_rate, 0.0);
        assert_eq!((out.scales, out.beta), (2, 2.0));
    }

    #[test]
    fn quantile_grid_is_log_spaced() {
        let (rows, labels) = clusters(30, 2, 5, 4);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let clf = TrainedClassifier::fit(ScatteringConfig::default(), &refs, &labels, 4, 0.0).unwrap();
        let grid = quantile_beta_grid(&clf, &refs, &labels, 30).unwrap();
        assert_eq!(grid.len(), 30);
        let r0 = grid[1] / grid[0];
        for w in grid.windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-9);
        }
    }
}
