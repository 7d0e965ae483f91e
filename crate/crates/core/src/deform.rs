//! Displacement fields and warping, for probing deformation stability.

use crate::dsp::{fft2, RealGrid};
use crate::error::{Error, Result};

/// Per-pixel displacement `τ(x) = (τ_y, τ_x)` in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    height: usize,
    width: usize,
    dy: Vec<f64>,
    dx: Vec<f64>,
}

impl DeformationField {
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        let mut dy = Vec::with_capacity(height * width);
        let mut dx = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                let (a, b) = f(r, c);
                dy.push(a);
                dx.push(b);
            }
        }
        DeformationField {
            height,
            width,
            dy,
            dx,
        }
    }

    pub fn zero(height: usize, width: usize) -> Self {
        Self::from_fn(height, width, |_, _| (0.0, 0.0))
    }

    pub fn translation(height: usize, width: usize, dy: f64, dx: f64) -> Self {
        Self::from_fn(height, width, |_, _| (dy, dx))
    }

    /// `τ(x) = ε (x − c)` about the grid center `c`.
    pub fn dilation(height: usize, width: usize, eps: f64) -> Self {
        let (cy, cx) = (height as f64 / 2.0, width as f64 / 2.0);
        Self::from_fn(height, width, |r, c| (eps * (r as f64 - cy), eps * (c as f64 - cx)))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn at(&self, row: usize, col: usize) -> (f64, f64) {
        let i = row * self.width + col;
        (self.dy[i], self.dx[i])
    }

    /// `|τ|_∞ = sup_x |τ(x)|`.
    pub fn amplitude(&self) -> f64 {
        self.dy
            .iter()
            .zip(&self.dx)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// `|∇τ|_∞`: supremum over pixels of the spectral norm of the Jacobian,
    /// from finite differences (central inside, one-sided on the border).
    pub fn gradient_norm(&self) -> f64 {
        let (h, w) = (self.height, self.width);
        let diff = |field: &[f64], r: usize, c: usize, along_rows: bool| -> f64 {
            let (n, pos) = if along_rows { (h, r) } else { (w, c) };
            if n < 2 {
                return 0.0;
            }
            let idx = |p: usize| if along_rows { p * w + c } else { r * w + p };
            let (lo, hi) = (pos.saturating_sub(1), (pos + 1).min(n - 1));
            (field[idx(hi)] - field[idx(lo)]) / (hi - lo) as f64
        };
        let mut sup = 0.0f64;
        for r in 0..h {
            for c in 0..w {
                let a = diff(&self.dy, r, c, true);
                let b = diff(&self.dy, r, c, false);
                let cc = diff(&self.dx, r, c, true);
                let d = diff(&self.dx, r, c, false);
                sup = sup.max(spectral_norm_2x2(a, b, cc, d));
            }
        }
        sup
    }
}

/// Largest singular value of `[[a, b], [c, d]]`, free of the cancellation
/// in the characteristic-polynomial form.
fn spectral_norm_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    ((a + d).hypot(c - b) + (a - d).hypot(b + c)) / 2.0
}

/// `D_τ f(x) = f(x − τ(x))` by bilinear interpolation with periodic wrap.
pub fn apply_deformation(f: &RealGrid, tau: &DeformationField) -> Result<RealGrid> {
    if f.shape() != tau.shape() {
        return Err(Error::InvalidInput(format!(
            "deformation of shape {:?} applied to image {:?}",
            tau.shape(),
            f.shape()
        )));
    }
    let g = tau.gradient_norm();
    if g >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "deformation gradient norm {g} must be below 1"
        )));
    }
    let (h, w) = f.shape();
    let wrap = |v: isize, n: usize| v.rem_euclid(n as isize) as usize;
    Ok(RealGrid::from_fn(h, w, |r, c| {
        let (ty, tx) = tau.at(r, c);
        let y = r as f64 - ty;
        let x = c as f64 - tx;
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let (y0, x0) = (y0 as isize, x0 as isize);
        let at = |yy: isize, xx: isize| *f.get(wrap(yy, h), wrap(xx, w));
        (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
            + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1))
    }))
}

/// `‖ |f̂| − |ĝ| ‖` normalized by `√(HW)` so that it is comparable with the
/// pixel-domain norm.
pub fn fourier_modulus_distance(f: &RealGrid, g: &RealGrid) -> Result<f64> {
    if f.shape() != g.shape() {
        return Err(Error::InvalidInput("images differ in shape".into()));
    }
    let (a, b) = (fft2(f)?, fft2(g)?);
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x.norm() - y.norm()).powi(2))
        .sum();
    Ok((s / f.len() as f64).sqrt())
}
