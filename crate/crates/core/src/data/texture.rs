//! Texture collections stored as one directory of grayscale images per class.

use std::path::{Path, PathBuf};

use super::{LabeledDataset, Provenance};
use crate::dsp::RealGrid;
use crate::error::{Error, Result};
use sha2::{Digest, Sha256};

/// Side of the centered square crop applied to every texture.
pub const TEXTURE_CROP: usize = 128;

/// Rescales to zero mean and unit variance. Fails on constant images.
pub fn standardize(g: &RealGrid) -> Result<RealGrid> {
    let n = g.len() as f64;
    let mean = g.mean();
    let var = g.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 1e-24) {
        return Err(Error::Numeric("image has zero variance; cannot standardize".into()));
    }
    let inv = 1.0 / var.sqrt();
    Ok(g.map(|v| (v - mean) * inv))
}

/// Writes `g` as a 16-bit grayscale PNG, mapping its range onto `0..=65535`.
pub fn save_texture_png(path: &Path, g: &RealGrid) -> Result<()> {
    let (h, w) = g.shape();
    let (lo, hi) = g
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = if hi > lo { 65535.0 / (hi - lo) } else { 0.0 };
    let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_fn(w as u32, h as u32, |x, y| {
        image::Luma([((g.get(y as usize, x as usize) - lo) * scale).round() as u16])
    });
    img.save(path).map_err(|e| Error::Format {
        what: "PNG output",
        detail: format!("{}: {e}", path.display()),
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir.display().to_string(), e))?;
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

fn decode_gray(path: &Path, bytes: &[u8]) -> Result<image::ImageBuffer<image::Luma<u16>, Vec<u16>>> {
    Ok(image::load_from_memory(bytes)
        .map_err(|e| Error::Format {
            what: "texture image",
            detail: format!("{}: {e}", path.display()),
        })?
        .into_luma16())
}

/// Reads a PNG or PGM image as grayscale with values in `[0, 1]`.
pub fn load_grayscale(path: &Path) -> Result<RealGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let img = decode_gray(path, &bytes)?;
    Ok(RealGrid::from_fn(img.height() as usize, img.width() as usize, |r, c| {
        f64::from(img.get_pixel(c as u32, r as u32).0[0]) / 65535.0
    }))
}

fn load_one(path: &Path, crop: usize) -> Result<(RealGrid, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let img = decode_gray(path, &bytes)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < crop || h < crop {
        return Err(Error::InvalidInput(format!(
            "{}: {w}×{h} is smaller than the {crop}×{crop} crop",
            path.display()
        )));
    }
    let (top, left) = ((h - crop) / 2, (w - crop) / 2);
    let g = RealGrid::from_fn(crop, crop, |r, c| {
        f64::from(img.get_pixel((left + c) as u32, (top + r) as u32).0[0]) / 65535.0
    });
    let g = standardize(&g).map_err(|_| Error::InvalidInput(format!("{}: zero variance", path.display())))?;
    Ok((g, bytes))
}

/// Loads `root/<class>/<image>` files. Classes are numbered by sorted
/// directory name and images are read in sorted file-name order; each is
/// center-cropped to [`TEXTURE_CROP`] and standardized.
pub fn load_texture_dir(root: &Path) -> Result<LabeledDataset> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no class directories", root.display())));
    }
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut hasher = Sha256::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let files: Vec<PathBuf> = sorted_entries(dir)?.into_iter().filter(|p| p.is_file()).collect();
        if files.is_empty() {
            return Err(Error::InvalidInput(format!("class directory {} is empty", dir.display())));
        }
        for f in files {
            let (g, bytes) = load_one(&f, TEXTURE_CROP)?;
            let rel = f.strip_prefix(root).unwrap_or(&f).to_string_lossy().into_owned();
            hasher.update((rel.len() as u64).to_le_bytes());
            hasher.update(rel.as_bytes());
            hasher.update(Sha256::digest(&bytes));
            images.push(g);
            labels.push(label as u32);
        }
    }
    let provenance = Provenance {
        source: root.display().to_string(),
        seed: None,
        manifest: hasher.finalize().into(),
    };
    LabeledDataset::new(images, labels, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Luma};

    fn write_png(path: &Path, side: u32, f: impl Fn(u32, u32) -> u8) {
        let img: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(side, side, |x, y| Luma([f(x, y)]));
        img.save(path).unwrap();
    }

    fn moments(g: &RealGrid) -> (f64, f64) {
        let n = g.len() as f64;
        let m = g.data().iter().sum::<f64>() / n;
        let v = g.data().iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        (m, v)
    }

    #[test]
    fn two_classes_of_three() {
        let dir = tempfile::tempdir().unwrap();
        for (ci, class) in ["bark", "wool"].iter().enumerate() {
            let d = dir.path().join(class);
            std::fs::create_dir(&d).unwrap();
            for k in 0..3u32 {
                write_png(&d.join(format!("{k}.png")), 140, |x, y| ((x * (k + 1) + y * (ci as u32 + 2)) % 251) as u8);
            }
        }
        let ds = load_texture_dir(dir.path()).unwrap();
        assert_eq!(ds.labels(), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(ds.image_shape(), Some((TEXTURE_CROP, TEXTURE_CROP)));
        for g in ds.images() {
            let (m, v) = moments(g);
            assert!(m.abs() < 1e-10);
            assert!((v - 1.0).abs() < 1e-10);
        }
        let again = load_texture_dir(dir.path()).unwrap();
        assert_eq!(again.provenance().manifest, ds.provenance().manifest);
    }

    #[test]
    fn constant_image_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("flat");
        std::fs::create_dir(&d).unwrap();
        write_png(&d.join("a.png"), 128, |_, _| 90);
        let err = load_texture_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("zero variance"), "{err}");
    }

    #[test]
    fn empty_class_and_unreadable_image() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("empty")).unwrap();
        assert!(load_texture_dir(dir.path()).is_err());

        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("c");
        std::fs::create_dir(&d).unwrap();
        std::fs::write(d.join("x.png"), b"not an image").unwrap();
        assert!(matches!(load_texture_dir(dir.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn png_round_trip_preserves_standardized_image() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("c");
        std::fs::create_dir(&d).unwrap();
        let g = standardize(&RealGrid::from_fn(128, 128, |r, c| ((r * 13 + c * 7) % 29) as f64)).unwrap();
        save_texture_png(&d.join("a.png"), &g).unwrap();
        let back = load_texture_dir(dir.path()).unwrap();
        let dev = back.images()[0].data().iter().zip(g.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-3, "{dev}");
    }

    #[test]
    fn standardize_moments() {
        let g = RealGrid::from_fn(8, 8, |r, c| (r * r + 3 * c) as f64);
        let (m, v) = moments(&standardize(&g).unwrap());
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        assert!(standardize(&RealGrid::filled(4, 4, 2.0)).is_err());
    }
}
