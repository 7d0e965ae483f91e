//! Oriented Gabor wavelets and the Gaussian low-pass, built directly in the
//! frequency domain.
//!
//! Wavelet `(j, γ)` has its carrier at `2^-j · ξ` pointing along the angle
//! `π γ / |Γ|` and an envelope dilated by `2^j`. Each atom is Morlet-corrected
//! so that its response vanishes at DC, and the whole wavelet family is scaled
//! by one common gain so that the Littlewood-Paley sum never exceeds one.
//!
//! Coarser copies of every filter (for signals already subsampled by `2^r`)
//! are obtained by folding the full-resolution response, which is the
//! spectrum of the spatial filter sampled every `2^r` pixels.

use std::f64::consts::PI;

use crate::dsp::{fold_spectrum, is_power_of_two, RealGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    /// Carrier frequency of the finest wavelet, radians per pixel.
    pub xi: f64,
    /// Envelope width of the finest wavelet, pixels.
    pub sigma: f64,
    /// Width of the low-pass before dilation by `2^J`, pixels.
    pub sigma_phi: f64,
    pub n_orientations: usize,
    /// Number of wavelet scales `J`; the low-pass averages over `2^J` pixels.
    pub scales: usize,
    /// Envelope anisotropy; 1.0 is isotropic.
    pub slant: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        GaborParams {
            xi: 3.0 * PI / 4.0,
            sigma: 1.0,
            sigma_phi: 2.0 / 3.0,
            n_orientations: 6,
            scales: 3,
            slant: 1.0,
        }
    }
}

impl GaborParams {
    pub fn with_scales(mut self, scales: usize) -> Self {
        self.scales = scales;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi < PI) {
            return Err(Error::Config(format!("xi must lie in (0, pi), got {}", self.xi)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.sigma_phi > 0.0 && self.sigma_phi.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_phi must be positive, got {}",
                self.sigma_phi
            )));
        }
        if !(self.slant > 0.0 && self.slant.is_finite()) {
            return Err(Error::Config(format!("slant must be positive, got {}", self.slant)));
        }
        if self.n_orientations == 0 {
            return Err(Error::Config("need at least one orientation".into()));
        }
        if self.scales == 0 {
            return Err(Error::Config("need at least one scale (J >= 1)".into()));
        }
        Ok(())
    }

    /// Carrier angle of orientation `gamma`, in radians.
    pub fn angle(&self, gamma: usize) -> f64 {
        PI * gamma as f64 / self.n_orientations as f64
    }
}

/// Signed angular frequency of DFT bin `k` on an axis of length `n`, in
/// `[-π, π)`.
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    let signed = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * signed / n as f64
}

/// Analytic response of wavelet `(j, γ)` at `(omega_y, omega_x)` before the
/// family gain is applied.
pub fn gabor_response(p: &GaborParams, j: usize, gamma: usize, omega_y: f64, omega_x: f64) -> f64 {
    let theta = p.angle(gamma);
    let (s, c) = theta.sin_cos();
    let dil = (1u64 << j) as f64;
    let u = dil * (c * omega_x + s * omega_y);
    let v = dil * (-s * omega_x + c * omega_y) / p.slant;
    let s2 = p.sigma * p.sigma;
    let envelope_dc = (-0.5 * s2 * p.xi * p.xi).exp();
    let carrier = (-0.5 * s2 * ((u - p.xi).powi(2) + v * v)).exp();
    let correction = envelope_dc * (-0.5 * s2 * (u * u + v * v)).exp();
    carrier - correction
}

/// Analytic low-pass response at scale `2^scales`; equals 1 at DC.
pub fn lowpass_response(p: &GaborParams, omega_y: f64, omega_x: f64) -> f64 {
    let width = (1u64 << p.scales) as f64 * p.sigma_phi;
    (-0.5 * width * width * (omega_y * omega_y + omega_x * omega_x)).exp()
}

/// Extremes of `|φ̂|² + ½ Σ (|ψ̂(ω)|² + |ψ̂(−ω)|²)` over the frequency grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LittlewoodPaley {
    /// Minimum over non-zero frequencies with `|ω| ≤ π`.
    pub min_sum: f64,
    /// Maximum over every grid frequency.
    pub max_sum: f64,
}

impl LittlewoodPaley {
    /// Frame slack `δ` such that `1 − δ ≤ sum` on the covered band.
    pub fn delta(&self) -> f64 {
        1.0 - self.min_sum
    }
}

#[derive(Debug, Clone)]
pub struct FilterBank {
    params: GaborParams,
    height: usize,
    width: usize,
    wavelet_gain: f64,
    // psi[j][gamma][r], r = 0..=j
    psi: Vec<Vec<Vec<RealGrid>>>,
    // phi[r], r = 0..=scales
    phi: Vec<RealGrid>,
    profile: LittlewoodPaley,
}

impl FilterBank {
    pub fn new(params: GaborParams, height: usize, width: usize) -> Result<Self> {
        params.validate()?;
        if !is_power_of_two(height) || !is_power_of_two(width) {
            return Err(Error::Config(format!(
                "filter bank size {height}x{width} is not a power of two in each axis"
            )));
        }
        if params.scales >= usize::BITS as usize || (1usize << params.scales) > height.min(width) {
            return Err(Error::Config(format!(
                "2^J = 2^{} exceeds the {height}x{width} image",
                params.scales
            )));
        }

        let raw: Vec<Vec<RealGrid>> = (0..params.scales)
            .map(|j| {
                (0..params.n_orientations)
                    .map(|g| {
                        sample_spectrum(height, width, |wy, wx| gabor_response(&params, j, g, wy, wx))
                    })
                    .collect()
            })
            .collect();
        let phi0 = sample_spectrum(height, width, |wy, wx| lowpass_response(&params, wy, wx));

        let wavelet_sum = symmetrized_energy(raw.iter().flatten(), height, width);
        // Largest gain keeping |φ̂|² + gain²·S_ψ ≤ 1 everywhere.
        let mut gain_sq = f64::INFINITY;
        for (&s, &p) in wavelet_sum.data().iter().zip(phi0.data()) {
            if s > 0.0 {
                gain_sq = gain_sq.min((1.0 - p * p).max(0.0) / s);
            }
        }
        if !gain_sq.is_finite() || gain_sq <= 0.0 {
            return Err(Error::Numeric(
                "wavelet family has no energy where the low-pass leaves room".into(),
            ));
        }
        let wavelet_gain = gain_sq.sqrt();

        let psi = raw
            .into_iter()
            .enumerate()
            .map(|(j, per_orientation)| {
                per_orientation
                    .into_iter()
                    .map(|mut full| {
                        full.data_mut().iter_mut().for_each(|v| *v *= wavelet_gain);
                        resolution_pyramid(full, j)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let phi = resolution_pyramid(phi0, params.scales)?;

        let mut bank = FilterBank {
            params,
            height,
            width,
            wavelet_gain,
            psi,
            phi,
            profile: LittlewoodPaley {
                min_sum: 0.0,
                max_sum: 0.0,
            },
        };
        bank.profile = bank.littlewood_paley(true);
        Ok(bank)
    }

    pub fn params(&self) -> &GaborParams {
        &self.params
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn scales(&self) -> usize {
        self.params.scales
    }

    pub fn n_orientations(&self) -> usize {
        self.params.n_orientations
    }

    /// Common factor applied to every raw Gabor atom.
    pub fn wavelet_gain(&self) -> f64 {
        self.wavelet_gain
    }

    /// Wavelet `(j, gamma)` sampled for signals at resolution `r`
    /// (`2^r`-fold subsampled). Panics if `r > j`.
    pub fn psi(&self, j: usize, gamma: usize, resolution: usize) -> &RealGrid {
        &self.psi[j][gamma][resolution]
    }

    /// Low-pass `φ_J` for signals at resolution `r ≤ J`.
    pub fn phi(&self, resolution: usize) -> &RealGrid {
        &self.phi[resolution]
    }

    pub fn profile(&self) -> LittlewoodPaley {
        self.profile
    }

    /// The profile with every wavelet removed: just `|φ̂|²`.
    pub fn lowpass_profile(&self) -> LittlewoodPaley {
        self.littlewood_paley(false)
    }

    /// Full-resolution Littlewood-Paley sum on the frequency grid.
    pub fn littlewood_paley_grid(&self, with_wavelets: bool) -> RealGrid {
        let phi = &self.phi[0];
        let mut sum = phi.map(|v| v * v);
        if with_wavelets {
            let wavelets = self
                .psi
                .iter()
                .flat_map(|per_j| per_j.iter().map(|pyr| &pyr[0]));
            let s = symmetrized_energy(wavelets, self.height, self.width);
            for (a, b) in sum.data_mut().iter_mut().zip(s.data()) {
                *a += b;
            }
        }
        sum
    }

    fn littlewood_paley(&self, with_wavelets: bool) -> LittlewoodPaley {
        let grid = self.littlewood_paley_grid(with_wavelets);
        let mut min_sum = f64::INFINITY;
        let mut max_sum = f64::NEG_INFINITY;
        for r in 0..self.height {
            let wy = bin_frequency(r, self.height);
            for c in 0..self.width {
                let wx = bin_frequency(c, self.width);
                let v = *grid.get(r, c);
                max_sum = max_sum.max(v);
                let radius = (wy * wy + wx * wx).sqrt();
                if (r, c) != (0, 0) && radius <= PI + 1e-12 {
                    min_sum = min_sum.min(v);
                }
            }
        }
        LittlewoodPaley { min_sum, max_sum }
    }
}

/// Frequencies standing for DFT bin `k`: the Nyquist bin is both `−π` and `π`.
fn bin_aliases(k: usize, n: usize) -> ([f64; 2], usize) {
    let w = bin_frequency(k, n);
    if n >= 2 && k == n / 2 {
        ([w, -w], 2)
    } else {
        ([w, w], 1)
    }
}

/// Samples `response` on the DFT grid. Nyquist bins get the mean of the
/// responses at `±π`, so one-sided wavelets keep their energy there.
fn sample_spectrum(height: usize, width: usize, response: impl Fn(f64, f64) -> f64) -> RealGrid {
    RealGrid::from_fn(height, width, |r, c| {
        let (ys, ny) = bin_aliases(r, height);
        let (xs, nx) = bin_aliases(c, width);
        let total: f64 = ys[..ny]
            .iter()
            .flat_map(|&wy| xs[..nx].iter().map(move |&wx| (wy, wx)))
            .map(|(wy, wx)| response(wy, wx))
            .sum();
        total / (ny * nx) as f64
    })
}

/// `½ Σ (|ψ̂(ω)|² + |ψ̂(−ω)|²)` over the given full-resolution responses.
fn symmetrized_energy<'a>(
    filters: impl Iterator<Item = &'a RealGrid>,
    height: usize,
    width: usize,
) -> RealGrid {
    let mut sum = RealGrid::zeros(height, width);
    for f in filters {
        for r in 0..height {
            let nr = (height - r) % height;
            for c in 0..width {
                let nc = (width - c) % width;
                let a = *f.get(r, c);
                let b = *f.get(nr, nc);
                let cell = &mut sum.data_mut()[r * width + c];
                *cell += 0.5 * (a * a + b * b);
            }
        }
    }
    sum
}

fn resolution_pyramid(full: RealGrid, max_resolution: usize) -> Result<Vec<RealGrid>> {
    let mut out = Vec::with_capacity(max_resolution + 1);
    for r in 1..=max_resolution {
        out.push(fold_spectrum(&full, 1 << r)?);
    }
    out.insert(0, full);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_bank(size: usize) -> FilterBank {
        FilterBank::new(GaborParams::default(), size, size).unwrap()
    }

    #[test]
    fn counts_and_dc_constraints() {
        let bank = default_bank(32);
        let mut count = 0;
        for j in 0..3 {
            for g in 0..6 {
                count += 1;
                for r in 0..=j {
                    let f = bank.psi(j, g, r);
                    assert_eq!(f.shape(), (32 >> r, 32 >> r));
                    // Folding adds aliased tails onto DC at coarse resolutions.
                    let tol = if r == 0 { 1e-12 } else { 1e-3 };
                    assert!(f.get(0, 0).abs() < tol, "psi({j},{g},{r}) at DC: {}", f.get(0, 0));
                }
            }
        }
        assert_eq!(count, 18);
        assert_eq!(*bank.phi(0).get(0, 0), 1.0);
        for r in 0..=3 {
            // Critical sampling of the low-pass (r = J) aliases its tails.
            let tol = if r < 3 { 1e-9 } else { 1e-3 };
            assert!((bank.phi(r).get(0, 0) - 1.0).abs() < tol, "phi at r={r}: {}", bank.phi(r).get(0, 0));
        }
    }

    #[test]
    fn dilation_consistency_on_shared_frequencies() {
        let bank = default_bank(64);
        let n = 64;
        for j in 1..3 {
            let m = 1usize << j;
            for g in 0..6 {
                for r in 0..n {
                    for c in 0..n {
                        let (wy, wx) = (bin_frequency(r, n), bin_frequency(c, n));
                        // Only where 2^j ω stays inside [-π, π).
                        if (m as f64 * wy).abs() >= PI || (m as f64 * wx).abs() >= PI {
                            continue;
                        }
                        let coarse = *bank.psi(j, g, 0).get(r, c);
                        let fine = *bank.psi(0, g, 0).get((r * m) % n, (c * m) % n);
                        assert!((coarse - fine).abs() < 1e-6);
                        // Independent check against the analytic atom at 2^j ω.
                        let analytic = bank.wavelet_gain()
                            * gabor_response(bank.params(), 0, g, m as f64 * wy, m as f64 * wx);
                        assert!((coarse - analytic).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn lower_resolutions_are_periodizations() {
        let bank = default_bank(32);
        let full = bank.psi(2, 1, 0);
        for r in 1..=2 {
            let step = 1 << r;
            let coarse = bank.psi(2, 1, r);
            let (h, w) = coarse.shape();
            for a in 0..h {
                for b in 0..w {
                    let mut acc = 0.0;
                    for p in 0..step {
                        for q in 0..step {
                            acc += full.get(a + p * h, b + q * w);
                        }
                    }
                    assert!((acc - coarse.get(a, b)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn upper_frame_bound_is_one() {
        for (scales, size) in [(1, 16), (3, 32), (4, 64)] {
            let bank = FilterBank::new(GaborParams::default().with_scales(scales), size, size).unwrap();
            let lp = bank.profile();
            assert!(lp.max_sum <= 1.0 + 1e-6, "J={scales}: {lp:?}");
            assert!(lp.min_sum > 0.0);
        }
    }

    #[test]
    fn default_parameters_give_finite_slack() {
        let lp = default_bank(32).profile();
        assert!(lp.delta() > 0.0 && lp.delta() < 1.0, "{lp:?}");
    }

    #[test]
    fn lowpass_alone_decays() {
        let bank = default_bank(32);
        let lp = bank.lowpass_profile();
        let phi = bank.phi(0);
        let expected_min = (0..32)
            .flat_map(|r| (0..32).map(move |c| (r, c)))
            .filter(|&(r, c)| {
                let (a, b) = (bin_frequency(r, 32), bin_frequency(c, 32));
                (r, c) != (0, 0) && (a * a + b * b).sqrt() <= PI
            })
            .map(|(r, c)| phi.get(r, c).powi(2))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(lp.min_sum, expected_min);
        assert!(lp.min_sum < 1.0);
        assert!((lp.max_sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_turn_is_an_exact_grid_rotation() {
        // With six orientations, gamma = 3 is the carrier rotated by π/2.
        let bank = default_bank(32);
        let (base, turned) = (bank.psi(0, 0, 0), bank.psi(0, 3, 0));
        for r in 1..32 {
            for c in 1..32 {
                // Rotating ω = (wy, wx) by +π/2 gives (wx, -wy).
                let rr = c;
                let cc = (32 - r) % 32;
                if rr == 16 || cc == 16 {
                    continue;
                }
                assert!((turned.get(rr, cc) - base.get(r, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_consistency_under_interpolation() {
        // Orientation γ equals orientation 0 read at R_γ-rotated frequencies.
        let n = 256;
        let bank = FilterBank::new(GaborParams::default().with_scales(1), n, n).unwrap();
        let base = bank.psi(0, 0, 0);
        let step = 2.0 * PI / n as f64;
        let sample = |wy: f64, wx: f64| {
            let fy = wy / step;
            let fx = wx / step;
            let (y0, x0) = (fy.floor(), fx.floor());
            let (ty, tx) = (fy - y0, fx - x0);
            let at = |y: f64, x: f64| {
                let idx = |v: f64| (v as isize).rem_euclid(n as isize) as usize;
                *base.get(idx(y), idx(x))
            };
            (1.0 - ty) * ((1.0 - tx) * at(y0, x0) + tx * at(y0, x0 + 1.0))
                + ty * ((1.0 - tx) * at(y0 + 1.0, x0) + tx * at(y0 + 1.0, x0 + 1.0))
        };
        for g in 1..6 {
            let (s, c) = bank.params().angle(g).sin_cos();
            let f = bank.psi(0, g, 0);
            for r in 0..n {
                for col in 0..n {
                    // Nyquist bins average ±π and are not a rotation of anything.
                    if r == n / 2 || col == n / 2 {
                        continue;
                    }
                    let (wy, wx) = (bin_frequency(r, n), bin_frequency(col, n));
                    // rotate back onto orientation 0
                    let (ry, rx) = (-s * wx + c * wy, c * wx + s * wy);
                    if ry.abs() > PI - 2.0 * step || rx.abs() > PI - 2.0 * step {
                        continue;
                    }
                    assert!((f.get(r, col) - sample(ry, rx)).abs() < 1e-3);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_configurations() {
        let p = GaborParams::default().with_scales(6);
        assert!(matches!(FilterBank::new(p, 32, 32), Err(Error::Config(_))));
        assert!(FilterBank::new(GaborParams::default(), 24, 32).is_err());
        let mut p = GaborParams::default();
        p.xi = 4.0;
        assert!(p.validate().is_err());
        p = GaborParams::default();
        p.n_orientations = 0;
        assert!(p.validate().is_err());
        assert!(GaborParams::default().with_scales(0).validate().is_err());
    }
}
