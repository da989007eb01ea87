//! IDX image and label files, as used by the MNIST distribution.

use std::fs;
use std::path::Path;

use tripath_core::data::ImageDataset;
use tripath_core::Matrix;

use crate::error::{CliError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Decoded image file: one flattened row-major image per matrix row,
/// pixels scaled into [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    pub images: Matrix,
    pub width: usize,
    pub height: usize,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn header(bytes: &[u8], magic: u32, fields: usize) -> Result<Vec<usize>, String> {
    let len = 4 * (fields + 1);
    if bytes.len() < len {
        return Err(format!("header needs {len} bytes, file has {}", bytes.len()));
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(format!("bad magic 0x{found:08x}, expected 0x{magic:08x}"));
    }
    Ok((1..=fields).map(|i| be_u32(bytes, 4 * i) as usize).collect())
}

fn payload(bytes: &[u8], offset: usize, expected: usize) -> Result<&[u8], String> {
    let actual = bytes.len() - offset;
    if actual != expected {
        let what = if actual < expected { "truncated" } else { "oversized" };
        return Err(format!("{what} payload: expected {expected} bytes, found {actual}"));
    }
    Ok(&bytes[offset..])
}

pub fn decode_images(bytes: &[u8]) -> Result<IdxImages, String> {
    let dims = header(bytes, IMAGE_MAGIC, 3)?;
    let (count, height, width) = (dims[0], dims[1], dims[2]);
    let pixels = payload(bytes, 16, count * height * width)?;
    let data = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let images = Matrix::new(count, width * height, data).map_err(|e| e.to_string())?;
    Ok(IdxImages { images, width, height })
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<usize>, String> {
    let count = header(bytes, LABEL_MAGIC, 1)?[0];
    Ok(payload(bytes, 8, count)?.iter().map(|&b| usize::from(b)).collect())
}

/// Quantizes with `round(p · 255)`; pixels must lie in [0, 1].
pub fn encode_images(images: &Matrix, width: usize, height: usize) -> Result<Vec<u8>, String> {
    if images.cols() != width * height {
        return Err(format!("{} columns cannot hold {width}x{height} images", images.cols()));
    }
    let mut out = Vec::with_capacity(16 + images.as_slice().len());
    for v in [IMAGE_MAGIC, images.rows() as u32, height as u32, width as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for (i, &p) in images.as_slice().iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("pixel {i} is {p}, outside [0, 1]"));
        }
        out.push((p * 255.0).round() as u8);
    }
    Ok(out)
}

pub fn encode_labels(labels: &[usize]) -> Result<Vec<u8>, String> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for (i, &l) in labels.iter().enumerate() {
        let byte = u8::try_from(l).map_err(|_| format!("label {i} is {l}, above 255"))?;
        out.push(byte);
    }
    Ok(out)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    decode_images(&read(path)?).map_err(|m| CliError::format(path, m))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    decode_labels(&read(path)?).map_err(|m| CliError::format(path, m))
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &Matrix, width: usize, height: usize) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_images(images, width, height).map_err(|m| CliError::format(path, m))?;
    write(path, &bytes)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_labels(labels).map_err(|m| CliError::format(path, m))?;
    write(path, &bytes)
}

/// Reads an image file and its label file into a dataset.
pub fn load_dataset(images: impl AsRef<Path>, labels: impl AsRef<Path>, num_classes: usize) -> Result<ImageDataset> {
    let img = read_idx_images(&images)?;
    let lab = read_idx_labels(&labels)?;
    if lab.len() != img.images.rows() {
        return Err(CliError::format(
            labels.as_ref(),
            format!("{} labels for {} images", lab.len(), img.images.rows()),
        ));
    }
    Ok(ImageDataset::new(img.images, lab, img.width, img.height, num_classes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGE_MAGIC, count, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    #[test]
    fn decodes_two_tiny_images() {
        let bytes = image_file(2, 2, 2, &[0, 255, 0, 255, 255, 0, 255, 0]);
        let d = decode_images(&bytes).unwrap();
        assert_eq!((d.width, d.height), (2, 2));
        assert_eq!(
            d.images,
            Matrix::from_rows(&[&[0.0, 1.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 0.0]]).unwrap()
        );
    }

    #[test]
    fn decodes_labels() {
        let mut b = LABEL_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&3u32.to_be_bytes());
        b.extend_from_slice(&[5, 0, 4]);
        assert_eq!(decode_labels(&b).unwrap(), vec![5, 0, 4]);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let mut bytes = image_file(1, 2, 2, &[1, 2, 3, 4]);
        let err = decode_labels(&bytes).unwrap_err();
        assert!(err.contains("0x00000803"), "{err}");
        bytes.pop();
        let err = decode_images(&bytes).unwrap_err();
        assert!(err.contains("expected 4") && err.contains("found 3"), "{err}");
        assert!(decode_images(&bytes[..10]).is_err());
    }

    #[test]
    fn encoding_is_the_inverse_of_decoding() {
        let bytes = image_file(
            3,
            2,
            3,
            &[0, 1, 2, 127, 128, 255, 9, 8, 7, 6, 5, 4, 200, 201, 202, 203, 204, 205],
        );
        let d = decode_images(&bytes).unwrap();
        assert_eq!(encode_images(&d.images, d.width, d.height).unwrap(), bytes);
        assert_eq!(encode_labels(&[5, 0, 4]).unwrap()[8..], [5, 0, 4]);
        assert!(encode_labels(&[256]).is_err());
        assert!(encode_images(&Matrix::filled(1, 4, 1.5), 2, 2).is_err());
    }

    #[test]
    fn empty_file_has_header_only() {
        let bytes = encode_images(&Matrix::zeros(0, 4), 2, 2).unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode_images(&bytes).unwrap().images.rows(), 0);
    }
}
