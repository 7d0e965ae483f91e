//! Two-dimensional spectral kernels on periodic grids.
//!
//! Everything here assumes circular boundary conditions. Transforms are only
//! defined for power-of-two sides; padding or cropping to such sizes happens
//! when data is ingested, not here.

use std::cell::RefCell;
use std::ops::Mul;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Row-major 2-D array of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

pub type RealGrid = Grid<f64>;
pub type ComplexGrid = Grid<Complex64>;

impl<T> Grid<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "grid {height}x{width} needs {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Grid {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Grid {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Grid {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// Circular shift: output(r, c) = input(r - dr, c - dc).
    pub fn roll(&self, dr: isize, dc: isize) -> Self {
        let (h, w) = (self.height as isize, self.width as isize);
        Grid::from_fn(self.height, self.width, |r, c| {
            let src_r = (r as isize - dr).rem_euclid(h) as usize;
            let src_c = (c as isize - dc).rem_euclid(w) as usize;
            self.get(src_r, src_c).clone()
        })
    }

    /// Keeps every `step`-th sample in both axes, starting at the origin.
    pub fn decimate(&self, step: usize) -> Result<Self> {
        check_step(self.height, self.width, step)?;
        Ok(Grid::from_fn(self.height / step, self.width / step, |r, c| {
            self.get(r * step, c * step).clone()
        }))
    }
}

impl RealGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Grid::filled(height, width, 0.0)
    }

    pub fn to_complex(&self) -> ComplexGrid {
        self.map(|&v| Complex64::new(v, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

impl ComplexGrid {
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn re(&self) -> RealGrid {
        self.map(|v| v.re)
    }
}

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

fn check_power_of_two(height: usize, width: usize) -> Result<()> {
    if !is_power_of_two(height) || !is_power_of_two(width) {
        return Err(Error::InvalidInput(format!(
            "grid {height}x{width}: both sides must be powers of two"
        )));
    }
    Ok(())
}

fn check_step(height: usize, width: usize, step: usize) -> Result<()> {
    if step == 0 || height % step != 0 || width % step != 0 {
        return Err(Error::InvalidInput(format!(
            "step {step} does not divide grid {height}x{width}"
        )));
    }
    Ok(())
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

fn transpose(height: usize, width: usize, src: &[Complex64], dst: &mut [Complex64]) {
    for r in 0..height {
        for c in 0..width {
            dst[c * height + r] = src[r * width + c];
        }
    }
}

fn fft2_in_place(height: usize, width: usize, data: &mut [Complex64], direction: FftDirection) {
    // rustfft processes a buffer holding several consecutive transforms.
    plan(width, direction).process(data);
    let mut cols = vec![Complex64::default(); data.len()];
    transpose(height, width, data, &mut cols);
    plan(height, direction).process(&mut cols);
    transpose(width, height, &cols, data);
}

/// Forward 2-D DFT, unnormalized.
pub fn fft2<T>(g: &Grid<T>) -> Result<ComplexGrid>
where
    T: Copy + Into<Complex64>,
{
    check_power_of_two(g.height, g.width)?;
    let mut out = g.map(|&v| v.into());
    fft2_in_place(g.height, g.width, &mut out.data, FftDirection::Forward);
    Ok(out)
}

/// Inverse 2-D DFT scaled by 1/(H·W), so `ifft2(fft2(g)) == g`.
pub fn ifft2(spectrum: &ComplexGrid) -> Result<ComplexGrid> {
    check_power_of_two(spectrum.height, spectrum.width)?;
    let mut out = spectrum.clone();
    fft2_in_place(out.height, out.width, &mut out.data, FftDirection::Inverse);
    let scale = 1.0 / out.data.len() as f64;
    out.data.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Sums the `step × step` aliases of a spectrum onto the grid of the
/// decimated signal. Folding the DFT of `x` gives `step²` times the DFT of
/// `x` sampled every `step` pixels.
pub fn fold_spectrum<T>(spectrum: &Grid<T>, step: usize) -> Result<Grid<T>>
where
    T: Copy + Default + std::ops::AddAssign,
{
    check_step(spectrum.height, spectrum.width, step)?;
    let (h, w) = (spectrum.height / step, spectrum.width / step);
    let mut out = Grid::filled(h, w, T::default());
    for r in 0..spectrum.height {
        let row_out = (r % h) * w;
        let row_in = r * spectrum.width;
        for c in 0..spectrum.width {
            out.data[row_out + c % w] += spectrum.data[row_in + c];
        }
    }
    Ok(out)
}

/// Multiplies an already transformed signal by `filter_hat` and returns the
/// circular convolution sampled every `step` pixels.
pub fn filter_subsample<F>(
    spectrum: &ComplexGrid,
    filter_hat: &Grid<F>,
    step: usize,
) -> Result<ComplexGrid>
where
    F: Copy,
    Complex64: Mul<F, Output = Complex64>,
{
    if spectrum.shape() != filter_hat.shape() {
        return Err(Error::InvalidInput(format!(
            "filter sampled at {:?} cannot filter a {:?} signal",
            filter_hat.shape(),
            spectrum.shape()
        )));
    }
    check_step(spectrum.height, spectrum.width, step)?;
    let product = Grid {
        height: spectrum.height,
        width: spectrum.width,
        data: spectrum
            .data
            .iter()
            .zip(&filter_hat.data)
            .map(|(&s, &f)| s * f)
            .collect(),
    };
    let mut folded = if step == 1 {
        product
    } else {
        fold_spectrum(&product, step)?
    };
    let area = (step * step) as f64;
    if step > 1 {
        folded.data.iter_mut().for_each(|v| *v /= area);
    }
    ifft2(&folded)
}

/// Circular convolution with a frequency-domain filter, sampled every
/// `step` pixels in both axes.
pub fn convolve_subsample<T, F>(g: &Grid<T>, filter_hat: &Grid<F>, step: usize) -> Result<ComplexGrid>
where
    T: Copy + Into<Complex64>,
    F: Copy,
    Complex64: Mul<F, Output = Complex64>,
{
    check_step(g.height, g.width, step)?;
    filter_subsample(&fft2(g)?, filter_hat, step)
}

/// Pointwise complex magnitude.
pub fn modulus(g: &ComplexGrid) -> RealGrid {
    g.map(|v| v.norm())
}
