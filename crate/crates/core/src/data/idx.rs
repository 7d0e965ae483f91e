//! IDX archives: a big-endian `u32` magic (`0x0803` for 3-D unsigned-byte
//! image stacks, `0x0801` for label vectors), one big-endian `u32` per
//! dimension, then the raw bytes.

use std::path::Path;

use super::{manifest_of, LabeledDataset, Provenance};
use crate::dsp::RealGrid;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw image stack as stored in the archive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Corrupt(format!("{what}: truncated header")))
}

fn check_magic(bytes: &[u8], want: u32, what: &'static str) -> Result<()> {
    let magic = read_u32(bytes, 0, what)?;
    if magic != want {
        return Err(Error::Format {
            what,
            detail: format!("bad magic 0x{magic:08x}, expected 0x{want:08x}"),
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    const WHAT: &str = "IDX images";
    check_magic(bytes, IMAGES_MAGIC, WHAT)?;
    let count = read_u32(bytes, 4, WHAT)? as usize;
    let rows = read_u32(bytes, 8, WHAT)? as usize;
    let cols = read_u32(bytes, 12, WHAT)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Corrupt(format!(
            "{WHAT}: truncated, {} of {need} pixel bytes present",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body[..need].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    const WHAT: &str = "IDX labels";
    check_magic(bytes, LABELS_MAGIC, WHAT)?;
    let count = read_u32(bytes, 4, WHAT)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Corrupt(format!(
            "{WHAT}: truncated, {} of {count} labels present",
            body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

/// Side length after padding: the next power of two.
fn padded_side(n: usize) -> usize {
    n.next_power_of_two()
}

/// Loads an image/label archive pair. Pixels are scaled to `[0, 1]` and each
/// image is zero-padded, centered, to power-of-two sides (28 → 32; 16 stays).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let img_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path.display().to_string(), e))?;
    let lbl_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path.display().to_string(), e))?;
    let stack = parse_idx_images(&img_bytes)?;
    let labels = parse_idx_labels(&lbl_bytes)?;
    if stack.count != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} images but {} labels",
            stack.count,
            labels.len()
        )));
    }
    let (h, w) = (padded_side(stack.rows), padded_side(stack.cols));
    let (top, left) = ((h - stack.rows) / 2, (w - stack.cols) / 2);
    let per = stack.rows * stack.cols;
    let images = stack
        .pixels
        .chunks_exact(per.max(1))
        .take(stack.count)
        .map(|px| {
            let mut g = RealGrid::zeros(h, w);
            for r in 0..stack.rows {
                for c in 0..stack.cols {
                    g.set(top + r, left + c, f64::from(px[r * stack.cols + c]) / 255.0);
                }
            }
            g
        })
        .collect();
    let provenance = Provenance {
        source: images_path.display().to_string(),
        seed: None,
        manifest: manifest_of([("images", img_bytes.as_slice()), ("labels", lbl_bytes.as_slice())]),
    };
    LabeledDataset::new(images, labels.into_iter().map(u32::from).collect(), provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorKind;

    fn write_pair(dir: &Path, pixels: &[u8], n: u32, side: u32, labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let mut img = IMAGES_MAGIC.to_be_bytes().to_vec();
        for v in [n, side, side] {
            img.extend_from_slice(&v.to_be_bytes());
        }
        img.extend_from_slice(pixels);
        let mut lbl = LABELS_MAGIC.to_be_bytes().to_vec();
        lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lbl.extend_from_slice(labels);
        let (a, b) = (dir.join("img"), dir.join("lbl"));
        std::fs::write(&a, img).unwrap();
        std::fs::write(&b, lbl).unwrap();
        (a, b)
    }

    #[test]
    fn two_images_padded_and_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..2 * 28 * 28).map(|i| (i % 256) as u8).collect();
        let (a, b) = write_pair(dir.path(), &pixels, 2, 28, &[3, 7]);
        let ds = load_idx(&a, &b).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels(), &[3, 7]);
        assert_eq!(ds.image_shape(), Some((32, 32)));
        let g = &ds.images()[1];
        assert!(g.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(*g.get(0, 0), 0.0);
        assert_eq!(*g.get(2, 2), f64::from(pixels[28 * 28]) / 255.0);
        assert_eq!(*g.get(2 + 27, 2 + 27), f64::from(pixels[2 * 28 * 28 - 1]) / 255.0);
    }

    #[test]
    fn sixteen_stays_sixteen() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = write_pair(dir.path(), &[255; 256], 1, 16, &[0]);
        let ds = load_idx(&a, &b).unwrap();
        assert_eq!(ds.image_shape(), Some((16, 16)));
        assert!(ds.images()[0].data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn wrong_magic_is_named() {
        let mut bytes = 0x0000_0802u32.to_be_bytes().to_vec();
        bytes.extend_from_slice(&[0; 12]);
        let err = parse_idx_images(&bytes).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Data);
        assert!(err.to_string().contains("0x00000802"), "{err}");
    }

    #[test]
    fn truncation_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = write_pair(dir.path(), &[0; 100], 1, 16, &[0]);
        assert!(matches!(load_idx(&a, &b), Err(Error::Corrupt(_))));
        let (a, b) = write_pair(dir.path(), &[0; 256], 1, 16, &[0, 1]);
        assert!(matches!(load_idx(&a, &b), Err(Error::InvalidInput(_))));
        assert!(parse_idx_labels(&[0, 0]).is_err());
    }

    #[test]
    fn missing_file_is_io() {
        let err = load_idx(Path::new("/nonexistent/a"), Path::new("/nonexistent/b")).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Io);
    }
}
