//! IDX containers: big-endian magic `0x0000TTRR` (type, rank), then `rank`
//! big-endian `u32` sizes, then the payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::index;
use wowflow_core::{rng, MetaMeasure, PointCloud};

use super::{DataError, LabeledMixture, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// Row-major images, one after the other, pixels in `[0, 1]`.
    pub pixels: Vec<f64>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn header(bytes: &[u8], magic: u32, rank: usize) -> Result<Vec<usize>> {
    let needed = 4 + 4 * rank;
    if bytes.len() < 4 {
        return Err(DataError::TruncatedFile { needed, found: bytes.len() });
    }
    let found = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if found != magic {
        return Err(DataError::BadMagic { expected: magic, found });
    }
    if bytes.len() < needed {
        return Err(DataError::TruncatedFile { needed, found: bytes.len() });
    }
    Ok((0..rank)
        .map(|k| {
            let o = 4 + 4 * k;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect())
}

pub fn decode_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let dims = header(bytes, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let needed = 16 + count * rows * cols;
    if bytes.len() < needed {
        return Err(DataError::TruncatedFile { needed, found: bytes.len() });
    }
    let pixels = bytes[16..needed].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn decode_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let dims = header(bytes, LABELS_MAGIC, 1)?;
    let needed = 8 + dims[0];
    if bytes.len() < needed {
        return Err(DataError::TruncatedFile { needed, found: bytes.len() });
    }
    Ok(bytes[8..needed].to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// Loads an IDX image/label pair and draws `per_class` images of every label
/// (without replacement, seeded). Clouds are ordered by label value and
/// images are flattened to `rows × cols` vectors.
pub fn load_idx_images(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    per_class: usize,
    seed: u64,
) -> Result<LabeledMixture> {
    let images = decode_idx_images(&read(images_path.as_ref())?)?;
    let labels = decode_idx_labels(&read(labels_path.as_ref())?)?;
    sample_per_class(&images, &labels, per_class, seed)
}

/// Draws `per_class` images of every label from decoded IDX data.
pub fn sample_per_class(images: &IdxImages, labels: &[u8], per_class: usize, seed: u64) -> Result<LabeledMixture> {
    if images.len() != labels.len() {
        return Err(DataError::CountMismatch(format!("{} images but {} labels", images.len(), labels.len())));
    }
    if per_class == 0 {
        return Err(DataError::CountMismatch("per_class must be at least 1".into()));
    }
    let mut by_label: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let d = images.rows * images.cols;
    let mut names = Vec::with_capacity(by_label.len());
    let mut clouds = Vec::with_capacity(by_label.len());
    for (label, members) in &by_label {
        if members.len() < per_class {
            return Err(DataError::CountMismatch(format!(
                "class {label} has {} images, fewer than per_class = {per_class}",
                members.len()
            )));
        }
        let mut rng = rng::substream(seed, u64::from(*label));
        let mut pts = Vec::with_capacity(per_class * d);
        for k in index::sample(&mut rng, members.len(), per_class) {
            let i = members[k];
            pts.extend_from_slice(&images.pixels[i * d..(i + 1) * d]);
        }
        names.push(label.to_string());
        clouds.push(PointCloud::uniform(pts, d)?);
    }
    if clouds.is_empty() {
        return Err(DataError::CountMismatch("no images".into()));
    }
    Ok(LabeledMixture { labels: names, measure: MetaMeasure::uniform(clouds)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images_bytes(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3];
        for v in [count, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    fn labels_bytes(labels: &[u8]) -> Vec<u8> {
        let mut b = vec![0, 0, 8, 1];
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn two_tiny_images() {
        let imgs = decode_idx_images(&images_bytes(2, 2, 2, &[0, 255, 51, 102, 1, 2, 3, 4])).unwrap();
        assert_eq!((imgs.rows, imgs.cols, imgs.len()), (2, 2, 2));
        let labels = decode_idx_labels(&labels_bytes(&[0, 1])).unwrap();
        let m = sample_per_class(&imgs, &labels, 1, 0).unwrap();
        assert_eq!(m.labels, ["0", "1"]);
        assert_eq!(m.measure.num_clouds(), 2);
        assert_eq!(m.measure.dim(), 4);
        assert_eq!(m.measure.cloud(0).points(), &[0.0, 1.0, 51.0 / 255.0, 102.0 / 255.0]);
        assert_eq!(m.measure.cloud(1).points(), &[1.0 / 255.0, 2.0 / 255.0, 3.0 / 255.0, 4.0 / 255.0]);
    }

    #[test]
    fn wrong_magic() {
        let mut b = images_bytes(1, 1, 1, &[0]);
        b[3] = 1;
        assert!(matches!(decode_idx_images(&b), Err(DataError::BadMagic { expected: 0x803, found: 0x801 })));
        assert!(matches!(decode_idx_labels(&images_bytes(1, 1, 1, &[0])), Err(DataError::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload() {
        let b = images_bytes(2, 2, 2, &[1, 2, 3]);
        assert!(matches!(decode_idx_images(&b), Err(DataError::TruncatedFile { needed: 24, found: 19 })));
        assert!(matches!(decode_idx_images(&b[..10]), Err(DataError::TruncatedFile { .. })));
        assert!(matches!(decode_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 5, 1]), Err(DataError::TruncatedFile { .. })));
    }

    #[test]
    fn count_checks() {
        let imgs = decode_idx_images(&images_bytes(3, 1, 1, &[1, 2, 3])).unwrap();
        let err = sample_per_class(&imgs, &[0, 1], 1, 0).unwrap_err();
        assert!(matches!(err, DataError::CountMismatch(_)));
        let err = sample_per_class(&imgs, &[0, 0, 7], 2, 0).unwrap_err();
        match err {
            DataError::CountMismatch(msg) => assert!(msg.contains("class 7"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sampling_is_seeded_and_without_replacement() {
        let pixels: Vec<u8> = (0..20).collect();
        let imgs = decode_idx_images(&images_bytes(20, 1, 1, &pixels)).unwrap();
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let a = sample_per_class(&imgs, &labels, 6, 3).unwrap();
        assert_eq!(a, sample_per_class(&imgs, &labels, 6, 3).unwrap());
        for (c, cloud) in a.measure.clouds().iter().enumerate() {
            let mut v: Vec<u32> = cloud.points().iter().map(|x| (x * 255.0).round() as u32).collect();
            assert!(v.iter().all(|p| p % 2 == c as u32));
            v.sort();
            v.dedup();
            assert_eq!(v.len(), 6);
        }
    }
}
