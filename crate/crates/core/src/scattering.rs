//! Scattering transform along progressive paths.
//!
//! A path is a sequence of `(scale, orientation)` steps with strictly
//! increasing scales. `S(p)f` is obtained by alternating wavelet convolutions
//! and complex moduli along the path, and the transform outputs the low-pass
//! average `S_J(p)f = S(p)f ⋆ φ_J` of every path up to length `max_order`,
//! interior paths included.
//!
//! Signals are subsampled as they move down the cascade. With oversampling
//! `Δ`, a signal whose last wavelet has scale `2^j` is kept at interval
//! `max(1, Δ 2^j)` and every output is sampled at interval `Δ 2^J`.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::dsp::{fft2, filter_subsample, modulus, RealGrid};
use crate::error::{Error, Result};
use crate::filterbank::{FilterBank, GaborParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathStep {
    pub scale: usize,
    pub orientation: usize,
}

impl PathStep {
    pub fn new(scale: usize, orientation: usize) -> Self {
        PathStep { scale, orientation }
    }
}

/// Progressive path; ordered by length, then lexicographically by step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ScatteringPath {
    steps: Vec<PathStep>,
}

impl ScatteringPath {
    pub fn empty() -> Self {
        ScatteringPath::default()
    }

    /// Rejects non-progressive step sequences.
    pub fn from_steps(steps: Vec<PathStep>) -> Result<Self> {
        if steps.windows(2).any(|w| w[1].scale <= w[0].scale) {
            return Err(Error::InvalidInput(format!(
                "path {steps:?} does not have strictly increasing scales"
            )));
        }
        Ok(ScatteringPath { steps })
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_scale(&self) -> Option<usize> {
        self.steps.last().map(|s| s.scale)
    }

    fn extended(&self, step: PathStep) -> Self {
        let mut steps = Vec::with_capacity(self.steps.len() + 1);
        steps.extend_from_slice(&self.steps);
        steps.push(step);
        ScatteringPath { steps }
    }
}

impl Ord for ScatteringPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.steps
            .len()
            .cmp(&other.steps.len())
            .then_with(|| self.steps.cmp(&other.steps))
    }
}

impl PartialOrd for ScatteringPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ScatteringPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.steps.is_empty() {
            return f.write_str("()");
        }
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "({},{})", s.scale, s.orientation)?;
        }
        Ok(())
    }
}

/// All progressive paths of length at most `max_order`, in canonical order.
///
/// Scales run over `0..scales`; the first step may use any of them.
pub fn enumerate_paths(scales: usize, n_orientations: usize, max_order: usize) -> Vec<ScatteringPath> {
    let mut all = vec![ScatteringPath::empty()];
    let mut layer = vec![ScatteringPath::empty()];
    for _ in 0..max_order {
        let mut next = Vec::new();
        for p in &layer {
            let first = p.last_scale().map_or(0, |j| j + 1);
            for j in first..scales {
                for g in 0..n_orientations {
                    next.push(p.extended(PathStep::new(j, g)));
                }
            }
        }
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

/// Closed-form number of progressive paths of length at most `max_order`:
/// `Σ_m C(J, m) |Γ|^m`.
pub fn path_count(scales: usize, n_orientations: usize, max_order: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for m in 0..=max_order.min(scales) {
        total += binom * n_orientations.pow(m as u32);
        binom = binom * (scales - m) / (m + 1);
    }
    total
}

/// Spatial oversampling factor `Δ` of the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Oversampling {
    /// `Δ = 1`: critical sampling.
    Critical,
    /// `Δ = 1/2`.
    #[default]
    Half,
}

impl Oversampling {
    fn log2(self) -> usize {
        match self {
            Oversampling::Critical => 0,
            Oversampling::Half => 1,
        }
    }

    /// `Δ` as (numerator, denominator).
    pub fn ratio(self) -> (u32, u32) {
        match self {
            Oversampling::Critical => (1, 1),
            Oversampling::Half => (1, 2),
        }
    }

    pub fn from_ratio(num: u32, den: u32) -> Result<Self> {
        match (num, den) {
            (1, 1) => Ok(Oversampling::Critical),
            (1, 2) => Ok(Oversampling::Half),
            _ => Err(Error::Config(format!(
                "oversampling must be 1 or 1/2, got {num}/{den}"
            ))),
        }
    }
}

impl fmt::Display for Oversampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = self.ratio();
        if d == 1 {
            write!(f, "{n}")
        } else {
            write!(f, "{n}/{d}")
        }
    }
}

impl std::str::FromStr for Oversampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "1/1" | "1.0" => Ok(Oversampling::Critical),
            "1/2" | "0.5" => Ok(Oversampling::Half),
            other => Err(Error::Config(format!(
                "oversampling must be 1 or 1/2, got {other:?}"
            ))),
        }
    }
}

/// Everything that determines the feature layout and values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringConfig {
    pub gabor: GaborParams,
    pub max_order: usize,
    pub oversampling: Oversampling,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        ScatteringConfig {
            gabor: GaborParams::default(),
            max_order: 2,
            oversampling: Oversampling::Half,
        }
    }
}

impl ScatteringConfig {
    pub fn scales(&self) -> usize {
        self.gabor.scales
    }

    /// Dyadic resolution level of a signal whose last wavelet has scale `j`.
    pub fn resolution_of_scale(&self, j: usize) -> usize {
        j.saturating_sub(self.oversampling.log2())
    }

    /// Resolution level of the `S_J` outputs.
    pub fn output_resolution(&self) -> usize {
        self.gabor.scales.saturating_sub(self.oversampling.log2())
    }

    /// Human-readable list of the fields that differ.
    pub fn diff(&self, other: &ScatteringConfig) -> Vec<String> {
        let mut out = Vec::new();
        let (a, b) = (&self.gabor, &other.gabor);
        macro_rules! cmp {
            ($name:expr, $x:expr, $y:expr) => {
                if $x != $y {
                    out.push(format!("{}: {} vs {}", $name, $x, $y));
                }
            };
        }
        cmp!("J", a.scales, b.scales);
        cmp!("orientations", a.n_orientations, b.n_orientations);
        cmp!("xi", a.xi, b.xi);
        cmp!("sigma", a.sigma, b.sigma);
        cmp!("sigma_phi", a.sigma_phi, b.sigma_phi);
        cmp!("slant", a.slant, b.slant);
        cmp!("m0", self.max_order, other.max_order);
        cmp!("delta", self.oversampling, other.oversampling);
        out
    }

    pub fn ensure_same(&self, other: &ScatteringConfig) -> Result<()> {
        let d = self.diff(other);
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigMismatch(d.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathEntry {
    pub path: ScatteringPath,
    pub offset: usize,
    pub len: usize,
}

/// Canonical path → slice layout of a scattering vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathIndex {
    entries: Vec<PathEntry>,
    out_height: usize,
    out_width: usize,
}

impl PathIndex {
    pub fn new(paths: Vec<ScatteringPath>, out_height: usize, out_width: usize) -> Self {
        let len = out_height * out_width;
        let entries = paths
            .into_iter()
            .enumerate()
            .map(|(i, path)| PathEntry {
                path,
                offset: i * len,
                len,
            })
            .collect();
        PathIndex {
            entries,
            out_height,
            out_width,
        }
    }

    /// Rebuilds an index from explicit entries, checking that they tile
    /// `0..total` in canonical order.
    pub fn from_entries(entries: Vec<PathEntry>, out_height: usize, out_width: usize) -> Result<Self> {
        let mut cursor = 0;
        for (i, e) in entries.iter().enumerate() {
            if e.offset != cursor || e.len != out_height * out_width {
                return Err(Error::Format {
                    what: "path index",
                    detail: format!("entry {i} ({}) does not continue the layout", e.path),
                });
            }
            if i > 0 && entries[i - 1].path >= e.path {
                return Err(Error::Format {
                    what: "path index",
                    detail: format!("entry {i} ({}) is out of canonical order", e.path),
                });
            }
            cursor += e.len;
        }
        Ok(PathIndex {
            entries,
            out_height,
            out_width,
        })
    }

    pub fn entries(&self) -> &[PathEntry] {
        &self.entries
    }

    pub fn out_shape(&self) -> (usize, usize) {
        (self.out_height, self.out_width)
    }

    pub fn total_len(&self) -> usize {
        self.entries.last().map_or(0, |e| e.offset + e.len)
    }

    pub fn find(&self, path: &ScatteringPath) -> Option<&PathEntry> {
        self.entries
            .binary_search_by(|e| e.path.cmp(path))
            .ok()
            .map(|i| &self.entries[i])
    }
}

/// All `S_J(p)f` samples of one signal, concatenated in canonical path order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringVector {
    config: ScatteringConfig,
    index: Arc<PathIndex>,
    data: Vec<f64>,
}

impl ScatteringVector {
    pub fn new(config: ScatteringConfig, index: Arc<PathIndex>, data: Vec<f64>) -> Result<Self> {
        if data.len() != index.total_len() {
            return Err(Error::InvalidInput(format!(
                "{} samples for a layout of {}",
                data.len(),
                index.total_len()
            )));
        }
        Ok(ScatteringVector {
            config,
            index,
            data,
        })
    }

    pub fn config(&self) -> &ScatteringConfig {
        &self.config
    }

    pub fn index(&self) -> &Arc<PathIndex> {
        &self.index
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, path: &ScatteringPath) -> Option<&[f64]> {
        self.index
            .find(path)
            .map(|e| &self.data[e.offset..e.offset + e.len])
    }

    /// Output sample spacing `Δ 2^J` in pixels.
    pub fn sample_spacing(&self) -> usize {
        1 << self.config.output_resolution()
    }

    /// Area of one output sample; turns sums over samples into integrals.
    pub fn quadrature_weight(&self) -> f64 {
        let s = self.sample_spacing() as f64;
        s * s
    }

    pub fn norm(&self) -> f64 {
        (self.quadrature_weight() * self.data.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// `Σ_{|p|=m} ‖S_J(p)f‖²` for `m = 0..=max_order`.
    pub fn layer_energy(&self) -> Vec<f64> {
        let w = self.quadrature_weight();
        let mut out = vec![0.0; self.config.max_order + 1];
        for e in self.index.entries() {
            let s: f64 = self.data[e.offset..e.offset + e.len].iter().map(|v| v * v).sum();
            out[e.path.len()] += w * s;
        }
        out
    }

    /// `‖S_J f − S_J g‖` with quadrature weighting.
    pub fn distance(&self, other: &ScatteringVector) -> Result<f64> {
        self.config.ensure_same(&other.config)?;
        if self.index != other.index {
            return Err(Error::InvalidInput("scattering layouts differ".into()));
        }
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((self.quadrature_weight() * s).sqrt())
    }
}

pub fn scattering_distance(a: &ScatteringVector, b: &ScatteringVector) -> Result<f64> {
    a.distance(b)
}

/// Output of one wavelet-modulus propagator application.
#[derive(Debug, Clone)]
pub struct Propagated {
    /// `|signal ⋆ ψ_{j,γ}|` for every admissible next step, in canonical order.
    pub children: Vec<(PathStep, RealGrid)>,
    /// `signal ⋆ φ_J`, sampled at the output interval.
    pub lowpass: RealGrid,
}

/// A filter bank plus cascade settings, reusable across any number of
/// images.
#[derive(Debug, Clone)]
pub struct ScatteringTransform {
    config: ScatteringConfig,
    bank: FilterBank,
    index: Arc<PathIndex>,
}

impl ScatteringTransform {
    pub fn new(config: ScatteringConfig, height: usize, width: usize) -> Result<Self> {
        let bank = FilterBank::new(config.gabor, height, width)?;
        Self::from_bank(bank, config.max_order, config.oversampling)
    }

    pub fn from_bank(bank: FilterBank, max_order: usize, oversampling: Oversampling) -> Result<Self> {
        let config = ScatteringConfig {
            gabor: *bank.params(),
            max_order,
            oversampling,
        };
        let (h, w) = bank.shape();
        let r = config.output_resolution();
        let paths = enumerate_paths(config.scales(), config.gabor.n_orientations, max_order);
        let index = Arc::new(PathIndex::new(paths, h >> r, w >> r));
        Ok(ScatteringTransform {
            config,
            bank,
            index,
        })
    }

    pub fn config(&self) -> &ScatteringConfig {
        &self.config
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn index(&self) -> &Arc<PathIndex> {
        &self.index
    }

    pub fn feature_len(&self) -> usize {
        self.index.total_len()
    }

    fn check_resolution(&self, signal: &RealGrid, resolution: usize) -> Result<()> {
        let (h, w) = self.bank.shape();
        if resolution > self.config.scales() || signal.shape() != (h >> resolution, w >> resolution) {
            return Err(Error::InvalidInput(format!(
                "signal of shape {:?} is not at resolution {resolution} of a {h}x{w} bank",
                signal.shape()
            )));
        }
        Ok(())
    }

    /// Applies the wavelet-modulus propagator to a signal sampled at
    /// resolution `resolution` whose path ends at scale `last_scale`.
    pub fn propagate(
        &self,
        signal: &RealGrid,
        resolution: usize,
        last_scale: Option<usize>,
    ) -> Result<Propagated> {
        self.check_resolution(signal, resolution)?;
        let scales = self.config.scales();
        if let Some(j) = last_scale {
            if j >= scales {
                return Err(Error::InvalidInput(format!("scale {j} is not below J = {scales}")));
            }
            if self.config.resolution_of_scale(j) != resolution {
                return Err(Error::InvalidInput(format!(
                    "a path ending at scale {j} lives at resolution {}, not {resolution}",
                    self.config.resolution_of_scale(j)
                )));
            }
        } else if resolution != 0 {
            return Err(Error::InvalidInput("the input signal must be at full resolution".into()));
        }

        let spectrum = fft2(signal)?;
        let first = last_scale.map_or(0, |j| j + 1);
        let mut children = Vec::with_capacity((scales - first.min(scales)) * self.bank.n_orientations());
        for j in first..scales {
            let step = 1 << (self.config.resolution_of_scale(j) - resolution);
            for g in 0..self.bank.n_orientations() {
                let filtered = filter_subsample(&spectrum, self.bank.psi(j, g, resolution), step)?;
                children.push((PathStep::new(j, g), modulus(&filtered)));
            }
        }
        let lowpass = self.lowpass_spectrum(&spectrum, resolution)?;
        Ok(Propagated { children, lowpass })
    }

    fn lowpass_spectrum(
        &self,
        spectrum: &crate::dsp::ComplexGrid,
        resolution: usize,
    ) -> Result<RealGrid> {
        let step = 1 << (self.config.output_resolution() - resolution);
        Ok(filter_subsample(spectrum, self.bank.phi(resolution), step)?.re())
    }

    /// `signal ⋆ φ_J` sampled at the output interval.
    pub fn lowpass(&self, signal: &RealGrid, resolution: usize) -> Result<RealGrid> {
        self.check_resolution(signal, resolution)?;
        self.lowpass_spectrum(&fft2(signal)?, resolution)
    }

    /// Breadth-first cascade over layers `0..=max_order`.
    pub fn scatter(&self, f: &RealGrid) -> Result<ScatteringVector> {
        if f.shape() != self.bank.shape() {
            return Err(Error::InvalidInput(format!(
                "image of shape {:?} does not match the {:?} filter bank",
                f.shape(),
                self.bank.shape()
            )));
        }
        let mut data = Vec::with_capacity(self.feature_len());
        let mut layer: Vec<(Option<usize>, usize, RealGrid)> = vec![(None, 0, f.clone())];
        for order in 0..=self.config.max_order {
            let mut next = Vec::new();
            for (last, resolution, signal) in &layer {
                if order < self.config.max_order {
                    let out = self.propagate(signal, *resolution, *last)?;
                    data.extend_from_slice(out.lowpass.data());
                    for (step, child) in out.children {
                        let r = self.config.resolution_of_scale(step.scale);
                        next.push((Some(step.scale), r, child));
                    }
                } else {
                    data.extend_from_slice(self.lowpass(signal, *resolution)?.data());
                }
            }
            layer = next;
        }
        ScatteringVector::new(self.config, Arc::clone(&self.index), data)
    }

    /// Transforms every image, in parallel, returning results in input order.
    pub fn scatter_batch(&self, images: &[RealGrid]) -> Result<Vec<ScatteringVector>> {
        images.par_iter().map(|f| self.scatter(f)).collect()
    }
}
