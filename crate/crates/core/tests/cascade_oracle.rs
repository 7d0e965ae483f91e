//! The subsampled cascade against the fixed-grid lattice reference.

#[path = "support/oracle.rs"]
mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scatnet::{GaborParams, Oversampling, RealGrid, ScatteringConfig, ScatteringTransform};

fn random_image(n: usize, seed: u64) -> RealGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealGrid::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

fn max_deviation(config: ScatteringConfig, n: usize, seeds: std::ops::Range<u64>) -> f64 {
    let t = ScatteringTransform::new(config, n, n).unwrap();
    seeds
        .map(|s| {
            let f = random_image(n, s);
            let fast = t.scatter(&f).unwrap();
            let slow = oracle::lattice_scatter(&t, &f);
            assert_eq!(fast.data().len(), slow.len());
            fast.data().iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[test]
fn half_oversampling_matches_reference() {
    for scales in [1, 2, 3] {
        let config = ScatteringConfig {
            gabor: GaborParams::default().with_scales(scales),
            ..Default::default()
        };
        let dev = max_deviation(config, 32, 0..3);
        assert!(dev < 1e-9, "J={scales}: {dev}");
    }
}

#[test]
fn critical_sampling_and_third_order_match_reference() {
    let config = ScatteringConfig {
        gabor: GaborParams {
            n_orientations: 3,
            ..GaborParams::default()
        },
        max_order: 3,
        oversampling: Oversampling::Critical,
    };
    let dev = max_deviation(config, 16, 10..12);
    assert!(dev < 1e-9, "{dev}");
}
