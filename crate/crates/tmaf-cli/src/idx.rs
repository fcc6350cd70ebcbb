//! IDX file support for the digit-classification experiment: big-endian
//! headers, raw byte payloads, optional gzip compression detected by
//! content rather than file extension.

use crate::error::RunError;
use flate2::read::GzDecoder;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use tmaf_core::data::MnistSet;

/// Magic number of an IDX file holding a 3-d tensor of unsigned bytes.
pub const IMAGE_MAGIC: u32 = 2051;
/// Magic number of an IDX file holding a 1-d tensor of unsigned bytes.
pub const LABEL_MAGIC: u32 = 2049;

/// Problems with IDX files. Each failure mode gets its own variant so
/// callers and tests can tell them apart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdxError {
    /// The file could not be read or decompressed.
    Io { path: PathBuf, detail: String },
    /// The leading magic number is not the expected one.
    BadMagic { expected: u32, got: u32 },
    /// The file ends before the header or payload is complete.
    Truncated { needed: usize, got: usize },
    /// The file is longer than the header says it should be.
    TrailingBytes { extra: usize },
    /// Image and label files disagree on the number of samples.
    CountMismatch { images: usize, labels: usize },
    /// The images are not the 28x28 layout the classifier expects.
    BadImageSize { rows: u32, cols: u32 },
}

impl fmt::Display for IdxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdxError::Io { path, detail } => {
                write!(f, "cannot read {}: {detail}", path.display())
            }
            IdxError::BadMagic { expected, got } => {
                write!(f, "bad magic number: expected {expected}, got {got}")
            }
            IdxError::Truncated { needed, got } => {
                write!(f, "truncated file: needed {needed} bytes, got {got}")
            }
            IdxError::TrailingBytes { extra } => {
                write!(f, "{extra} trailing bytes after payload")
            }
            IdxError::CountMismatch { images, labels } => {
                write!(f, "count mismatch: {images} images but {labels} labels")
            }
            IdxError::BadImageSize { rows, cols } => {
                write!(f, "expected 28x28 images, got {rows}x{cols}")
            }
        }
    }
}

impl std::error::Error for IdxError {}

/// Reads a file, transparently gunzipping if the content starts with the
/// gzip magic bytes.
fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io_err = |e: std::io::Error| IdxError::Io {
        path: path.to_path_buf(),
        detail: e.to_string(),
    };
    let raw = fs::read(path).map_err(io_err)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(io_err)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, IdxError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(IdxError::Truncated {
            needed: end,
            got: bytes.len(),
        });
    }
    let mut buf = [0u8; 4];
    buf.copy_from_slice(&bytes[offset..end]);
    Ok(u32::from_be_bytes(buf))
}

/// Decoded image file: `count` images of `rows * cols` pixels each, row
/// major, one byte per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: u32,
    pub cols: u32,
    pub pixels: Vec<u8>,
}

/// Parses an image file (magic 2051): count, rows, cols, then the pixels.
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(IdxError::BadMagic {
            expected: IMAGE_MAGIC,
            got: magic,
        });
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)?;
    let cols = read_u32(bytes, 12)?;
    let needed = 16 + count * rows as usize * cols as usize;
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            needed,
            got: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(IdxError::TrailingBytes {
            extra: bytes.len() - needed,
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

/// Parses a label file (magic 2049): count, then one byte per label.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(IdxError::BadMagic {
            expected: LABEL_MAGIC,
            got: magic,
        });
    }
    let count = read_u32(bytes, 4)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            needed,
            got: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(IdxError::TrailingBytes {
            extra: bytes.len() - needed,
        });
    }
    Ok(bytes[8..].to_vec())
}

/// Encodes images in IDX layout. Panics if the pixel count does not fill a
/// whole number of `rows * cols` images; this is a programming error in the
/// caller, not a data error.
pub fn encode_idx_images(rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let per_image = rows as usize * cols as usize;
    assert!(per_image > 0 && pixels.len().is_multiple_of(per_image));
    let count = (pixels.len() / per_image) as u32;
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&count.to_be_bytes());
    out.extend_from_slice(&rows.to_be_bytes());
    out.extend_from_slice(&cols.to_be_bytes());
    out.extend_from_slice(pixels);
    out
}

/// Encodes labels in IDX layout.
pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Loads an image/label file pair into a ready-to-train set: pixels scaled
/// to [0, 1], digits shifted to 1-based class labels.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<MnistSet, RunError> {
    let images = parse_idx_images(&read_maybe_gzip(images_path)?)?;
    let labels = parse_idx_labels(&read_maybe_gzip(labels_path)?)?;
    if images.rows * images.cols != MnistSet::IMAGE_DIM as u32 {
        return Err(IdxError::BadImageSize {
            rows: images.rows,
            cols: images.cols,
        }
        .into());
    }
    if images.count != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        }
        .into());
    }
    Ok(MnistSet::from_raw(&images.pixels, &labels)?)
}
