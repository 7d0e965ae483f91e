//! Translation-invariant scattering representations of images, and
//! classification with affine class models selected by a penalized
//! projection error.
//!
//! The pipeline is: [`filterbank`] builds oriented Gabor wavelets,
//! [`scattering`] cascades wavelet-modulus operators along progressive paths,
//! and [`classifier`] learns a PCA affine space per class and assigns a signal
//! to the class whose penalized approximation error is smallest. [`data`]
//! covers ingestion and the on-disk formats.

pub mod classifier;
pub mod data;
pub mod deform;
pub mod dsp;
pub mod error;
pub mod filterbank;
pub mod scattering;

pub use classifier::{AffineClassModel, Prediction, TrainedClassifier};
pub use dsp::{ComplexGrid, Grid, RealGrid};
pub use error::{Error, ErrorKind, Result};
pub use filterbank::{FilterBank, GaborParams, LittlewoodPaley};
pub use scattering::{
    Oversampling, PathStep, ScatteringConfig, ScatteringPath, ScatteringTransform,
    ScatteringVector,
};
