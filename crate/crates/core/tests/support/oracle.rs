//! Reference cascade that never changes grid size.
//!
//! Every intermediate signal lives on the full-resolution grid as a comb: its
//! samples sit on the lattice of its sampling interval `s`, weighted by `s²`,
//! with zeros in between. Convolutions use the finest-resolution filters and
//! results are read off the lattice by direct indexing. This is equivalent
//! to the subsampled cascade but shares none of its spectral folding code.

use scatnet::dsp::{fft2, ifft2, RealGrid};
use scatnet::scattering::enumerate_paths;
use scatnet::{ScatteringConfig, ScatteringTransform};

fn circular_filter(signal: &RealGrid, filter_hat: &RealGrid) -> Vec<(f64, f64)> {
    let mut spec = fft2(signal).unwrap();
    for (z, &h) in spec.data_mut().iter_mut().zip(filter_hat.data()) {
        *z *= h;
    }
    ifft2(&spec).unwrap().data().iter().map(|z| (z.re, z.im)).collect()
}

fn interval(config: &ScatteringConfig, scale: Option<usize>) -> usize {
    scale.map_or(1, |j| 1 << config.resolution_of_scale(j))
}

/// Scattering coefficients in canonical path order.
pub fn lattice_scatter(transform: &ScatteringTransform, f: &RealGrid) -> Vec<f64> {
    let config = *transform.config();
    let bank = transform.bank();
    let (h, w) = f.shape();
    let out_step = 1 << config.output_resolution();
    let paths = enumerate_paths(config.scales(), bank.n_orientations(), config.max_order);

    // Comb signal of every path, computed in canonical order so parents
    // always precede children.
    let mut combs: Vec<RealGrid> = Vec::with_capacity(paths.len());
    for p in &paths {
        let comb = match p.steps().split_last() {
            None => f.clone(),
            Some((last, prefix)) => {
                let parent = paths
                    .iter()
                    .position(|q| q.steps() == prefix)
                    .expect("parent enumerated before child");
                let s = interval(&config, Some(last.scale));
                let y = circular_filter(&combs[parent], bank.psi(last.scale, last.orientation, 0));
                RealGrid::from_fn(h, w, |r, c| {
                    if r % s == 0 && c % s == 0 {
                        let (re, im) = y[r * w + c];
                        (s * s) as f64 * re.hypot(im)
                    } else {
                        0.0
                    }
                })
            }
        };
        combs.push(comb);
    }

    let mut out = Vec::new();
    for comb in &combs {
        let y = circular_filter(comb, bank.phi(0));
        for r in (0..h).step_by(out_step) {
            for c in (0..w).step_by(out_step) {
                out.push(y[r * w + c].0);
            }
        }
    }
    out
}
