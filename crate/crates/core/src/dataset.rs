//! IDX loaders for MNIST and Fashion-MNIST.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const NUM_CLASSES: usize = 10;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Environment variable consulted when no data directory is configured.
pub const DATA_DIR_ENV: &str = "DDR_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetName {
    Mnist,
    FashionMnist,
}

impl DatasetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::FashionMnist => "fashion_mnist",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion_mnist" | "fashion-mnist" | "fashion" => Ok(DatasetName::FashionMnist),
            other => Err(Error::Parameter(format!(
                "unknown dataset '{other}' (expected mnist or fashion_mnist)"
            ))),
        }
    }
}

/// Train/test images (normalized to [0, 1]) with their labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: DatasetName,
    pub train_images: Matrix,
    pub train_labels: Vec<u8>,
    pub test_images: Matrix,
    pub test_labels: Vec<u8>,
}

impl Dataset {
    /// Loads `<data_dir>/<name>/` with the standard IDX file names.
    pub fn load(data_dir: &Path, name: DatasetName) -> Result<Self> {
        let dir = data_dir.join(name.as_str());
        let need = |file: &str| -> Result<PathBuf> {
            let p = dir.join(file);
            if p.is_file() {
                Ok(p)
            } else {
                Err(Error::io(
                    &p,
                    std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "dataset file missing; run scripts/fetch_data.py <data-dir> \
                         or point --data-dir / DDR_DATA_DIR at the IDX files",
                    ),
                ))
            }
        };
        let train_images = normalize(&load_idx_images(&need(TRAIN_IMAGES)?)?);
        let train_labels = load_idx_labels(&need(TRAIN_LABELS)?)?;
        let test_images = normalize(&load_idx_images(&need(TEST_IMAGES)?)?);
        let test_labels = load_idx_labels(&need(TEST_LABELS)?)?;
        Dataset::new(name, train_images, train_labels, test_images, test_labels)
    }

    pub fn new(
        name: DatasetName,
        train_images: Matrix,
        train_labels: Vec<u8>,
        test_images: Matrix,
        test_labels: Vec<u8>,
    ) -> Result<Self> {
        for (split, images, labels) in [
            ("train", &train_images, &train_labels),
            ("test", &test_images, &test_labels),
        ] {
            if images.rows() != labels.len() {
                return Err(Error::Data(format!(
                    "{split} split has {} images but {} labels",
                    images.rows(),
                    labels.len()
                )));
            }
        }
        if train_images.cols() != test_images.cols() {
            return Err(Error::shape(
                "dataset splits",
                train_images.shape(),
                test_images.shape(),
            ));
        }
        Ok(Dataset {
            name,
            train_images,
            train_labels,
            test_images,
            test_labels,
        })
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Length {
            expected: offset + 4,
            actual: bytes.len(),
        })
}

/// Decodes an IDX3 image file already in memory.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Matrix> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::BadMagic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let width = rows * cols;
    let expected = 16 + count * width;
    if bytes.len() != expected {
        return Err(Error::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let data = bytes[16..].iter().map(|&b| f64::from(b)).collect();
    Matrix::new(count, width, data)
}

/// Decodes an IDX1 label file already in memory.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::BadMagic {
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(Error::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let labels = bytes[8..].to_vec();
    if let Some((i, &l)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l as usize >= NUM_CLASSES)
    {
        return Err(Error::Data(format!("label {l} at index {i} is outside 0..=9")));
    }
    Ok(labels)
}

/// Raw pixel values in [0, 255], one flattened image per row.
pub fn load_idx_images(path: &Path) -> Result<Matrix> {
    parse_idx_images(&read_file(path)?)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&read_file(path)?)
}

/// Scales raw byte intensities to [0, 1].
pub fn normalize(raw: &Matrix) -> Matrix {
    raw.map(|v| v / 255.0)
}

/// Encodes images as IDX3. Entries are rounded and clamped to bytes.
pub fn encode_idx_images(images: &Matrix, rows: usize, cols: usize) -> Result<Vec<u8>> {
    if rows * cols != images.cols() {
        return Err(Error::shape(
            "encode_idx_images",
            images.shape(),
            (rows, cols),
        ));
    }
    let mut out = Vec::with_capacity(16 + images.as_slice().len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.rows() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend(images.as_slice().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v
    }

    #[test]
    fn decodes_minimal_image_file() {
        let mut bytes = header(IMAGE_MAGIC, &[1, 2, 2]);
        bytes.extend_from_slice(&[0, 255, 0, 255]);
        let m = parse_idx_images(&bytes).unwrap();
        assert_eq!(m.shape(), (1, 4));
        assert_eq!(m.as_slice(), &[0.0, 255.0, 0.0, 255.0]);
    }

    #[test]
    fn image_loader_rejects_label_magic() {
        let mut bytes = header(LABEL_MAGIC, &[1, 2, 2]);
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        let err = parse_idx_images(&bytes).unwrap_err();
        assert!(matches!(err, Error::BadMagic { expected: IMAGE_MAGIC, .. }));
        assert!(err.to_string().contains("0x00000803"));
    }

    #[test]
    fn truncated_image_payload_reports_lengths() {
        let mut bytes = header(IMAGE_MAGIC, &[2, 2, 2]);
        bytes.extend_from_slice(&[1, 2, 3]);
        match parse_idx_images(&bytes) {
            Err(Error::Length { expected, actual }) => {
                assert_eq!(expected, 24);
                assert_eq!(actual, 19);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decodes_labels() {
        let mut bytes = header(LABEL_MAGIC, &[3]);
        bytes.extend_from_slice(&[7, 2, 1]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![7, 2, 1]);
    }

    #[test]
    fn empty_label_file_is_length_error() {
        assert!(matches!(parse_idx_labels(&[]), Err(Error::Length { .. })));
    }

    #[test]
    fn label_magic_mismatch_and_range() {
        let mut bytes = header(IMAGE_MAGIC, &[1]);
        bytes.push(1);
        assert!(matches!(parse_idx_labels(&bytes), Err(Error::BadMagic { .. })));

        let mut bytes = header(LABEL_MAGIC, &[2]);
        bytes.extend_from_slice(&[3, 10]);
        assert!(matches!(parse_idx_labels(&bytes), Err(Error::Data(_))));
    }

    #[test]
    fn normalize_examples() {
        let m = Matrix::from_rows(&[[0.0, 255.0]]).unwrap();
        assert_eq!(normalize(&m).as_slice(), &[0.0, 1.0]);
        let m = Matrix::from_rows(&[[127.5]]).unwrap();
        assert_eq!(normalize(&m).as_slice(), &[0.5]);
        let z = Matrix::zeros(3, 4);
        assert_eq!(normalize(&z), z);
    }

    #[test]
    fn dataset_rejects_mismatched_labels() {
        let err = Dataset::new(
            DatasetName::Mnist,
            Matrix::zeros(2, 4),
            vec![0],
            Matrix::zeros(1, 4),
            vec![0],
        );
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn missing_files_mention_fetch_script() {
        let dir = tempfile::tempdir().unwrap();
        let err = Dataset::load(dir.path(), DatasetName::Mnist).unwrap_err();
        assert!(err.to_string().contains("fetch_data.py"));
    }

    #[test]
    fn files_on_disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let images = Matrix::from_rows(&[[0.0, 10.0, 20.0, 255.0], [5.0, 6.0, 7.0, 8.0]]).unwrap();
        let img_path = dir.path().join("imgs");
        let lbl_path = dir.path().join("lbls");
        std::fs::write(&img_path, encode_idx_images(&images, 2, 2).unwrap()).unwrap();
        std::fs::write(&lbl_path, encode_idx_labels(&[4, 9])).unwrap();
        assert_eq!(load_idx_images(&img_path).unwrap(), images);
        assert_eq!(load_idx_labels(&lbl_path).unwrap(), vec![4, 9]);
    }

    proptest! {
        #[test]
        fn idx_round_trip(count in 0usize..5, rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
            let mut state = seed;
            let data: Vec<f64> = (0..count * rows * cols)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    f64::from((state >> 56) as u8)
                })
                .collect();
            let m = Matrix::new(count, rows * cols, data).unwrap();
            let decoded = parse_idx_images(&encode_idx_images(&m, rows, cols).unwrap()).unwrap();
            prop_assert_eq!(decoded.shape(), (count, rows * cols));
            prop_assert_eq!(decoded, m);
        }

        #[test]
        fn normalize_is_monotone(a in 0u8..=255, b in 0u8..=255) {
            let m = Matrix::from_rows(&[[f64::from(a), f64::from(b)]]).unwrap();
            let n = normalize(&m);
            prop_assert_eq!(a < b, n.get(0, 0) < n.get(0, 1));
            prop_assert!(n.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
