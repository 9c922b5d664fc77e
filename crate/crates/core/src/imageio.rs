//! Loading labeled grayscale image datasets.
//!
//! Two on-disk layouts are supported: the classic IDX pair (big-endian
//! headers, one byte per pixel) and a directory tree with one subdirectory
//! per class holding binary PGM (P5) files. Intensities are always
//! normalized to `[0, 1]` by `b / 255`; anything that is not 8-bit
//! grayscale is rejected rather than rescaled.

use std::fs;
use std::path::{Path, PathBuf};

use crate::rng::sample_indices;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum ImageIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("{path}: expected {expected} bytes, got {actual}")]
    Length {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{dir}: class directory contains no images")]
    EmptyClass { dir: PathBuf },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
}

/// A grayscale image with intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self, ImageIoError> {
        if height == 0 || width == 0 {
            return Err(ImageIoError::InvalidImage(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(ImageIoError::InvalidImage(format!(
                "expected {} pixels for {height}x{width}, got {}",
                height * width,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ImageIoError::InvalidImage(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(GrayImage {
            height,
            width,
            pixels,
        })
    }

    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self, ImageIoError> {
        let pixels = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        GrayImage::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Intensity at row `i`, column `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.width + j]
    }
}

/// A set of images with class labels in `[0, class_count)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    images: Vec<GrayImage>,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledImageSet {
    pub fn new(
        images: Vec<GrayImage>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self, ImageIoError> {
        if images.len() != labels.len() {
            return Err(ImageIoError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(ImageIoError::InvalidArgument(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(LabeledImageSet {
            images,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[GrayImage] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Draws `n` items uniformly without replacement, preserving the
    /// original order of the chosen items. Same `(n, seed)` on the same set
    /// always yields the same subset; see [`crate::rng::sample_indices`]
    /// for the exact selection rule.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<LabeledImageSet, ImageIoError> {
        if n > self.len() {
            return Err(ImageIoError::InvalidArgument(format!(
                "cannot subsample {n} items from a set of {}",
                self.len()
            )));
        }
        let chosen = sample_indices(self.len(), n, seed);
        Ok(LabeledImageSet {
            images: chosen.iter().map(|&i| self.images[i].clone()).collect(),
            labels: chosen.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        })
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, ImageIoError> {
    fs::read(path).map_err(|source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Loads an IDX image/label file pair (the MNIST layout: big-endian 32-bit
/// header fields, one byte per pixel / label).
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<LabeledImageSet, ImageIoError> {
    let image_bytes = read_file(image_path)?;
    if image_bytes.len() < 16 {
        return Err(ImageIoError::Length {
            path: image_path.to_path_buf(),
            expected: 16,
            actual: image_bytes.len(),
        });
    }
    let magic = read_be_u32(&image_bytes, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(ImageIoError::BadMagic {
            path: image_path.to_path_buf(),
            found: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let count = read_be_u32(&image_bytes, 4) as usize;
    let rows = read_be_u32(&image_bytes, 8) as usize;
    let cols = read_be_u32(&image_bytes, 12) as usize;
    if rows == 0 || cols == 0 {
        return Err(ImageIoError::Format {
            path: image_path.to_path_buf(),
            detail: format!("zero image dimensions {rows}x{cols}"),
        });
    }
    let expected = 16 + count * rows * cols;
    if image_bytes.len() != expected {
        return Err(ImageIoError::Length {
            path: image_path.to_path_buf(),
            expected,
            actual: image_bytes.len(),
        });
    }

    let label_bytes = read_file(label_path)?;
    if label_bytes.len() < 8 {
        return Err(ImageIoError::Length {
            path: label_path.to_path_buf(),
            expected: 8,
            actual: label_bytes.len(),
        });
    }
    let magic = read_be_u32(&label_bytes, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(ImageIoError::BadMagic {
            path: label_path.to_path_buf(),
            found: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let label_count = read_be_u32(&label_bytes, 4) as usize;
    let expected = 8 + label_count;
    if label_bytes.len() != expected {
        return Err(ImageIoError::Length {
            path: label_path.to_path_buf(),
            expected,
            actual: label_bytes.len(),
        });
    }
    if count != label_count {
        return Err(ImageIoError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let mut images = Vec::with_capacity(count);
    for idx in 0..count {
        let start = 16 + idx * rows * cols;
        images.push(GrayImage::from_bytes(
            rows,
            cols,
            &image_bytes[start..start + rows * cols],
        )?);
    }
    let labels: Vec<usize> = label_bytes[8..].iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().max().map_or(0, |&m| m + 1);
    LabeledImageSet::new(images, labels, class_count)
}

/// Loads a directory tree with one subdirectory per class, each holding
/// binary PGM (P5, maxval 255) files. Class indices follow lexicographic
/// subdirectory order; files within a class are read in lexicographic
/// order so loading is stable.
pub fn load_image_dir(root: &Path) -> Result<LabeledImageSet, ImageIoError> {
    let mut class_dirs: Vec<PathBuf> = Vec::new();
    let entries = fs::read_dir(root).map_err(|source| ImageIoError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| ImageIoError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        if entry.path().is_dir() {
            class_dirs.push(entry.path());
        }
    }
    if class_dirs.is_empty() {
        return Err(ImageIoError::InvalidArgument(format!(
            "{}: no class subdirectories",
            root.display()
        )));
    }
    class_dirs.sort();

    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (class, dir) in class_dirs.iter().enumerate() {
        let mut files: Vec<PathBuf> = Vec::new();
        let entries = fs::read_dir(dir).map_err(|source| ImageIoError::Io {
            path: dir.clone(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| ImageIoError::Io {
                path: dir.clone(),
                source,
            })?;
            if entry.path().is_file() {
                files.push(entry.path());
            }
        }
        if files.is_empty() {
            return Err(ImageIoError::EmptyClass { dir: dir.clone() });
        }
        files.sort();
        for file in files {
            let bytes = read_file(&file)?;
            images.push(parse_pgm(&bytes, &file)?);
            labels.push(class);
        }
    }
    let class_count = class_dirs.len();
    LabeledImageSet::new(images, labels, class_count)
}

/// Loads a single binary PGM (P5, maxval 255) file.
pub fn load_pgm(path: &Path) -> Result<GrayImage, ImageIoError> {
    parse_pgm(&read_file(path)?, path)
}

/// Parses a binary PGM (P5). Only maxval 255 is accepted.
fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage, ImageIoError> {
    let format_err = |detail: String| ImageIoError::Format {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(format_err("not a binary PGM (P5) file".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3]; // width, height, maxval
    for field in fields.iter_mut() {
        // skip whitespace and '#' comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err("malformed PGM header".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text
            .parse()
            .map_err(|_| format_err(format!("bad header field {text:?}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format_err(format!("maxval {maxval} unsupported, only 255")));
    }
    if width == 0 || height == 0 {
        return Err(format_err(format!("zero dimensions {width}x{height}")));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(format_err("missing separator before pixel data".into()));
    }
    pos += 1;
    let expected = pos + width * height;
    if bytes.len() != expected {
        return Err(ImageIoError::Length {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    GrayImage::from_bytes(height, width, &bytes[pos..])
}
