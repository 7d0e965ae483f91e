//! Statistics used to analyse how well affine models fit scattering data.

use super::AffineClassModel;
use crate::dsp::RealGrid;
use crate::error::{Error, Result};
use crate::scattering::{ScatteringConfig, ScatteringTransform};

/// Relative intra-class and outer-class approximation errors for one class
/// model, indexed by `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct InOutCurves {
    pub class_id: u32,
    pub inner: Vec<f64>,
    pub outer: Vec<f64>,
}

/// `In(i)[k] = E{‖v − P_{A_{k,i}} v‖²} / E{‖v‖²}` over vectors of class `i`,
/// and `Out(i)[k]` the same ratio over vectors of every other class.
pub fn intra_outer_curves(
    model: &AffineClassModel,
    vectors: &[&[f64]],
    labels: &[u32],
    k_max: usize,
) -> Result<InOutCurves> {
    if vectors.len() != labels.len() {
        return Err(Error::InvalidInput("vectors and labels differ in length".into()));
    }
    if k_max > model.dim() {
        return Err(Error::InvalidInput(format!(
            "k_max = {k_max} exceeds the model dimension {}",
            model.dim()
        )));
    }
    let mut num_in = vec![0.0; k_max + 1];
    let mut num_out = vec![0.0; k_max + 1];
    let (mut den_in, mut den_out) = (0.0, 0.0);
    let (mut n_in, mut n_out) = (0usize, 0usize);
    for (v, &l) in vectors.iter().zip(labels) {
        let errs = model.projection_errors(v)?;
        let energy: f64 = v.iter().map(|x| x * x).sum();
        let (num, den, n) = if l == model.class_id() {
            (&mut num_in, &mut den_in, &mut n_in)
        } else {
            (&mut num_out, &mut den_out, &mut n_out)
        };
        for (acc, e) in num.iter_mut().zip(&errs) {
            *acc += e;
        }
        *den += energy;
        *n += 1;
    }
    if n_in == 0 || n_out == 0 {
        return Err(Error::InvalidInput(format!(
            "need vectors both inside and outside class {}",
            model.class_id()
        )));
    }
    let ratio = |num: Vec<f64>, den: f64| -> Vec<f64> {
        num.into_iter()
            .map(|x| if den > 0.0 { x / den } else { 0.0 })
            .collect()
    };
    Ok(InOutCurves {
        class_id: model.class_id(),
        inner: ratio(num_in, den_in),
        outer: ratio(num_out, den_out),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRow {
    pub scales: usize,
    pub variance: f64,
}

/// `σ²(S_J F) = Σ_p E{|S_J(p)F(x) − μ(p)|²}` for each `J`, where the
/// expectation and `μ(p)` are empirical averages over realizations and
/// positions.
pub fn variance_decay(
    samples: &[RealGrid],
    base: ScatteringConfig,
    scale_range: impl IntoIterator<Item = usize>,
) -> Result<Vec<VarianceRow>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("no texture samples".into()))?;
    let (h, w) = first.shape();
    let mut rows = Vec::new();
    for scales in scale_range {
        let config = ScatteringConfig {
            gabor: base.gabor.with_scales(scales),
            ..base
        };
        let transform = ScatteringTransform::new(config, h, w)?;
        let vectors = transform.scatter_batch(samples)?;
        let mut variance = 0.0;
        for e in transform.index().entries() {
            let count = (e.len * vectors.len()) as f64;
            let slices = || vectors.iter().map(|v| &v.data()[e.offset..e.offset + e.len]);
            let mean: f64 = slices().flatten().sum::<f64>() / count;
            variance += slices().flatten().map(|x| (x - mean).powi(2)).sum::<f64>() / count;
        }
        rows.push(VarianceRow { scales, variance });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::fit_class_model;
    use crate::filterbank::GaborParams;

    #[test]
    fn identical_class_has_zero_inner_error() {
        let v = vec![1.0, 2.0, 3.0];
        let other = vec![-1.0, 0.0, 4.0];
        let model = fit_class_model(0, &[&v, &v, &v], 2).unwrap();
        assert_eq!(model.dim(), 0);
        let c = intra_outer_curves(&model, &[&v, &v, &other], &[0, 0, 1], 0).unwrap();
        assert_eq!(c.inner, vec![0.0]);
        assert!(c.outer[0] > 0.0);
    }

    #[test]
    fn k0_is_a_variance_ratio() {
        let a = vec![1.0, 0.0];
        let b = vec![3.0, 0.0];
        let model = fit_class_model(0, &[&a, &b], 1).unwrap();
        let c = intra_outer_curves(&model, &[&a, &b, &[0.0, 5.0]], &[0, 0, 1], 1).unwrap();
        // E‖v − μ‖² = 1, E‖v‖² = 5
        assert!((c.inner[0] - 0.2).abs() < 1e-12);
        assert!(c.inner[1] < 1e-12);
        assert!(c.inner[0] <= 1.0);
        assert!(intra_outer_curves(&model, &[&a], &[0], 1).is_err());
    }

    #[test]
    fn constant_field_has_no_variance() {
        let samples = vec![RealGrid::filled(32, 32, 0.3); 2];
        let base = ScatteringConfig {
            gabor: GaborParams::default(),
            ..Default::default()
        };
        let rows = variance_decay(&samples, base, 1..=3).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert!(r.variance < 1e-20, "{r:?}");
        }
    }
}
