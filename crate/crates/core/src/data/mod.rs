//! Dataset ingestion, training-set subsampling and on-disk formats.

mod csv;
mod idx;
mod store;
mod synth;
mod texture;

pub use csv::{hex, CsvTable};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IdxImages};
pub use store::{load_features, load_model, save_features, save_model, FeatureSet};
pub use synth::{synthetic_textures, white_noise_textures, TextureBenchmark, SYNTHETIC_CLASSES};
pub use texture::{load_grayscale, load_texture_dir, save_texture_png, standardize, TEXTURE_CROP};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::dsp::RealGrid;
use crate::error::{Error, Result};

/// SHA-256 digest identifying the inputs an artifact was derived from.
pub type Manifest = [u8; 32];

/// Where a dataset came from: a description of the source, the seed of any
/// random selection applied to it, and a digest of the raw inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub seed: Option<u64>,
    pub manifest: Manifest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Vec<RealGrid>,
    labels: Vec<u32>,
    provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(images: Vec<RealGrid>, labels: Vec<u32>, provenance: Provenance) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(first) = images.first() {
            if let Some(i) = images.iter().position(|g| g.shape() != first.shape()) {
                return Err(Error::InvalidInput(format!(
                    "image {i} has shape {:?}, expected {:?}",
                    images[i].shape(),
                    first.shape()
                )));
            }
        }
        Ok(LabeledDataset {
            images,
            labels,
            provenance,
        })
    }

    pub fn images(&self) -> &[RealGrid] {
        &self.images
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.images.first().map(RealGrid::shape)
    }

    /// Distinct labels in increasing order.
    pub fn classes(&self) -> Vec<u32> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Keeps the samples at `indices`, in the given order.
    pub fn select(&self, indices: &[usize], provenance: Provenance) -> Result<Self> {
        let mut images = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidInput(format!("index {i} out of range")));
            }
            images.push(self.images[i].clone());
            labels.push(self.labels[i]);
        }
        Self::new(images, labels, provenance)
    }

    pub fn into_parts(self) -> (Vec<RealGrid>, Vec<u32>, Provenance) {
        (self.images, self.labels, self.provenance)
    }
}

/// Requested size of a training subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSize {
    /// Split as evenly as possible over the classes; the remainder goes to
    /// the lowest class labels.
    Total(usize),
    PerClass(usize),
}

/// Stratified random subset. Selected samples keep their original relative
/// order, so the result only depends on `(dataset, size, seed)`.
pub fn subsample_train(ds: &LabeledDataset, size: SampleSize, seed: u64) -> Result<LabeledDataset> {
    let classes = ds.classes();
    if classes.is_empty() {
        return Err(Error::InvalidInput("cannot subsample an empty dataset".into()));
    }
    let quotas: Vec<usize> = match size {
        SampleSize::PerClass(n) => vec![n; classes.len()],
        SampleSize::Total(total) => {
            if total > ds.len() {
                return Err(Error::InvalidInput(format!(
                    "requested {total} samples from a dataset of {}",
                    ds.len()
                )));
            }
            let base = total / classes.len();
            let extra = total % classes.len();
            (0..classes.len()).map(|i| base + usize::from(i < extra)).collect()
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for (c, quota) in classes.iter().zip(quotas) {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == *c).collect();
        if quota > members.len() {
            return Err(Error::InvalidInput(format!(
                "class {c} has {} samples, {quota} requested",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..quota]);
    }
    chosen.sort_unstable();

    let mut h = Sha256::new();
    h.update(ds.provenance.manifest);
    h.update(b"subsample");
    h.update(seed.to_le_bytes());
    for &i in &chosen {
        h.update((i as u64).to_le_bytes());
    }
    let provenance = Provenance {
        source: ds.provenance.source.clone(),
        seed: Some(seed),
        manifest: h.finalize().into(),
    };
    ds.select(&chosen, provenance)
}

/// Digest of a set of named byte strings, in the given order.
pub fn manifest_of<'a>(parts: impl IntoIterator<Item = (&'a str, &'a [u8])>) -> Manifest {
    let mut h = Sha256::new();
    for (name, bytes) in parts {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    h.finalize().into()
}
