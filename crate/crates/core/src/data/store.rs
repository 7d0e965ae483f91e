//! Binary feature (`SCT1`) and model (`SCM1`) files.
//!
//! All integers are little-endian `u32` unless noted; both files end with a
//! CRC32 of every preceding byte.
//!
//! `SCT1`:
//! ```text
//! "SCT1" version
//! J |Γ| m0 Δ_num Δ_den
//! xi sigma sigma_phi slant                  (f64)
//! out_h out_w path_count
//! path_count × { n_steps:u8 (scale:u8 orientation:u8)×n_steps offset len }
//! manifest                                  (32 bytes, SHA-256)
//! n_vectors  n_vectors × label
//! n_vectors × feature_len × f32
//! crc32
//! ```
//!
//! `SCM1`:
//! ```text
//! "SCM1" version
//! I D K β:f64
//! J |Γ| m0 Δ_num Δ_den xi sigma sigma_phi slant
//! manifest
//! I × { class_id requested_dim k  mean:D×f64  eigvals:k×f64  eigvecs:k×D×f64 }
//! crc32
//! ```

use std::path::Path;
use std::sync::Arc;

use super::Manifest;
use crate::classifier::{AffineClassModel, TrainedClassifier};
use crate::error::{Error, Result};
use crate::filterbank::GaborParams;
use crate::scattering::{Oversampling, PathEntry, PathIndex, PathStep, ScatteringConfig, ScatteringPath, ScatteringVector};

const FEATURE_MAGIC: &[u8; 4] = b"SCT1";
const MODEL_MAGIC: &[u8; 4] = b"SCM1";
const FORMAT_VERSION: u32 = 1;

/// Feature vectors of a whole dataset, stored as `f32` exactly as on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    config: ScatteringConfig,
    index: Arc<PathIndex>,
    labels: Vec<u32>,
    data: Vec<f32>,
    manifest: Manifest,
}

impl FeatureSet {
    /// Rounds every coefficient to `f32`.
    pub fn from_vectors(vectors: &[ScatteringVector], labels: Vec<u32>, manifest: Manifest) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::InvalidInput("no feature vectors".into()))?;
        if vectors.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        let mut data = Vec::with_capacity(vectors.len() * first.data().len());
        for v in vectors {
            first.config().ensure_same(v.config())?;
            data.extend(v.data().iter().map(|&x| x as f32));
        }
        Ok(FeatureSet {
            config: *first.config(),
            index: Arc::clone(first.index()),
            labels,
            data,
            manifest,
        })
    }

    pub fn config(&self) -> &ScatteringConfig {
        &self.config
    }

    pub fn index(&self) -> &Arc<PathIndex> {
        &self.index
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.index.total_len()
    }

    pub fn raw(&self, i: usize) -> &[f32] {
        let n = self.feature_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.raw(i).iter().map(|&x| f64::from(x)).collect()
    }

    pub fn vectors(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.vector(i)).collect()
    }

    pub fn scattering_vector(&self, i: usize) -> Result<ScatteringVector> {
        ScatteringVector::new(self.config, Arc::clone(&self.index), self.vector(i))
    }

    /// Fails with the list of differing hyperparameters when the features
    /// were not computed with the classifier's configuration.
    pub fn ensure_compatible(&self, clf: &TrainedClassifier) -> Result<()> {
        clf.config.ensure_same(&self.config)?;
        if clf.feature_dim() != self.feature_len() {
            return Err(Error::ConfigMismatch(format!(
                "feature length {} vs model dimension {}",
                self.feature_len(),
                clf.feature_dim()
            )));
        }
        Ok(())
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: usize) -> Result<()> {
        let b = u8::try_from(v).map_err(|_| Error::InvalidInput(format!("{v} does not fit in a byte")))?;
        self.0.push(b);
        Ok(())
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let w = u32::try_from(v).map_err(|_| Error::InvalidInput(format!("{v} does not fit in 32 bits")))?;
        self.0.extend_from_slice(&w.to_le_bytes());
        Ok(())
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn config(&mut self, c: &ScatteringConfig) -> Result<()> {
        let (num, den) = c.oversampling.ratio();
        for v in [c.gabor.scales, c.gabor.n_orientations, c.max_order, num as usize, den as usize] {
            self.u32(v)?;
        }
        for v in [c.gabor.xi, c.gabor.sigma, c.gabor.sigma_phi, c.gabor.slant] {
            self.f64(v);
        }
        Ok(())
    }

    fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.0);
        self.0.extend_from_slice(&crc.to_le_bytes());
        self.0
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    /// Checks magic, version and trailing checksum, and positions the reader
    /// after the version field.
    fn open(bytes: &'a [u8], magic: &[u8; 4], what: &'static str) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Corrupt(format!("{what}: truncated ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != magic {
            return Err(Error::Format {
                what,
                detail: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(&bytes[..4]),
                    String::from_utf8_lossy(magic)
                ),
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Format {
                what,
                detail: format!("unsupported version {version}, expected {FORMAT_VERSION}"),
            });
        }
        if bytes.len() < 12 {
            return Err(Error::Corrupt(format!("{what}: truncated before checksum")));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(Error::Corrupt(format!(
                "{what}: checksum mismatch (stored {stored:08x}, computed {actual:08x}); file is truncated or damaged"
            )));
        }
        Ok(Reader {
            bytes: body,
            pos: 8,
            what,
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Corrupt(format!("{}: unexpected end of data at byte {}", self.what, self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<usize> {
        Ok(self.take(1)?[0] as usize)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Corrupt("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn manifest(&mut self) -> Result<Manifest> {
        Ok(self.take(32)?.try_into().expect("32 bytes"))
    }

    fn config(&mut self) -> Result<ScatteringConfig> {
        let scales = self.u32()?;
        let n_orientations = self.u32()?;
        let max_order = self.u32()?;
        let num = self.u32()? as u32;
        let den = self.u32()? as u32;
        let gabor = GaborParams {
            xi: self.f64()?,
            sigma: self.f64()?,
            sigma_phi: self.f64()?,
            n_orientations,
            scales,
            slant: self.f64()?,
        };
        gabor.validate()?;
        Ok(ScatteringConfig {
            gabor,
            max_order,
            oversampling: Oversampling::from_ratio(num, den)?,
        })
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Corrupt(format!(
                "{}: {} unexpected trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub(crate) fn encode_features(fs: &FeatureSet) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::with_capacity(64 + fs.data.len() * 4));
    w.bytes(FEATURE_MAGIC);
    w.u32(FORMAT_VERSION as usize)?;
    w.config(&fs.config)?;
    let (oh, ow) = fs.index.out_shape();
    w.u32(oh)?;
    w.u32(ow)?;
    w.u32(fs.index.entries().len())?;
    for e in fs.index.entries() {
        w.u8(e.path.len())?;
        for s in e.path.steps() {
            w.u8(s.scale)?;
            w.u8(s.orientation)?;
        }
        w.u32(e.offset)?;
        w.u32(e.len)?;
    }
    w.bytes(&fs.manifest);
    w.u32(fs.labels.len())?;
    for &l in &fs.labels {
        w.u32(l as usize)?;
    }
    for &x in &fs.data {
        w.bytes(&x.to_le_bytes());
    }
    Ok(w.finish())
}

pub(crate) fn decode_features(bytes: &[u8]) -> Result<FeatureSet> {
    let mut r = Reader::open(bytes, FEATURE_MAGIC, "SCT1 features")?;
    let config = r.config()?;
    let oh = r.u32()?;
    let ow = r.u32()?;
    let n_paths = r.u32()?;
    let mut entries = Vec::with_capacity(n_paths.min(1 << 16));
    for _ in 0..n_paths {
        let n = r.u8()?;
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            let scale = r.u8()?;
            let orientation = r.u8()?;
            steps.push(PathStep::new(scale, orientation));
        }
        let path = ScatteringPath::from_steps(steps).map_err(|e| Error::Corrupt(e.to_string()))?;
        let offset = r.u32()?;
        let len = r.u32()?;
        entries.push(PathEntry { path, offset, len });
    }
    let index = PathIndex::from_entries(entries, oh, ow)?;
    let manifest = r.manifest()?;
    let n = r.u32()?;
    let mut labels = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        labels.push(r.u32()? as u32);
    }
    let count = n
        .checked_mul(index.total_len())
        .ok_or_else(|| Error::Corrupt("size overflow".into()))?;
    let raw = r.take(count.checked_mul(4).ok_or_else(|| Error::Corrupt("size overflow".into()))?)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    r.finish()?;
    Ok(FeatureSet {
        config,
        index: Arc::new(index),
        labels,
        data,
        manifest,
    })
}

pub fn save_features(path: &Path, fs: &FeatureSet) -> Result<()> {
    write_file(path, &encode_features(fs)?)
}

pub fn load_features(path: &Path) -> Result<FeatureSet> {
    decode_features(&read_file(path)?)
}

pub(crate) fn encode_model(clf: &TrainedClassifier, manifest: &Manifest) -> Result<Vec<u8>> {
    let d = clf.feature_dim();
    let mut w = Writer(Vec::new());
    w.bytes(MODEL_MAGIC);
    w.u32(FORMAT_VERSION as usize)?;
    w.u32(clf.models.len())?;
    w.u32(d)?;
    w.u32(clf.max_dim)?;
    w.f64(clf.beta);
    w.config(&clf.config)?;
    w.bytes(manifest);
    for m in &clf.models {
        w.u32(m.class_id() as usize)?;
        w.u32(m.requested_dim())?;
        w.u32(m.dim())?;
        for &v in m.mean().iter().chain(m.eigvals()).chain(m.basis()) {
            w.f64(v);
        }
    }
    Ok(w.finish())
}

pub(crate) fn decode_model(bytes: &[u8]) -> Result<(TrainedClassifier, Manifest)> {
    let mut r = Reader::open(bytes, MODEL_MAGIC, "SCM1 model")?;
    let n_classes = r.u32()?;
    let d = r.u32()?;
    let max_dim = r.u32()?;
    let beta = r.f64()?;
    let config = r.config()?;
    let manifest = r.manifest()?;
    let mut models = Vec::with_capacity(n_classes.min(1 << 16));
    for _ in 0..n_classes {
        let class_id = r.u32()? as u32;
        let requested = r.u32()?;
        let k = r.u32()?;
        let mean = r.f64s(d)?;
        let eigvals = r.f64s(k)?;
        let basis = r.f64s(k.checked_mul(d).ok_or_else(|| Error::Corrupt("size overflow".into()))?)?;
        models.push(AffineClassModel::from_parts(class_id, mean, eigvals, basis, requested)?);
    }
    r.finish()?;
    Ok((
        TrainedClassifier {
            config,
            beta,
            max_dim,
            models,
        },
        manifest,
    ))
}

pub fn save_model(path: &Path, clf: &TrainedClassifier, manifest: &Manifest) -> Result<()> {
    write_file(path, &encode_model(clf, manifest)?)
}

pub fn load_model(path: &Path) -> Result<(TrainedClassifier, Manifest)> {
    decode_model(&read_file(path)?)
}
