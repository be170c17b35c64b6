//! Big-endian IDX containers as distributed with MNIST.

use std::path::Path;

use ndarray::Array2;

use super::{Dataset, IMAGE_SIDE, INPUT_WIDTH};
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| parse_err(bytes.len(), "file truncated inside header"))
}

fn parse_images(bytes: &[u8]) -> Result<Array2<f32>> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(parse_err(
            0,
            format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(parse_err(
            8,
            format!("images are {rows}x{cols}, expected {IMAGE_SIDE}x{IMAGE_SIDE}"),
        ));
    }
    let body = &bytes[16..];
    let need = n * INPUT_WIDTH;
    if body.len() < need {
        return Err(parse_err(
            bytes.len(),
            format!("file truncated: {n} images need {need} pixel bytes, found {}", body.len()),
        ));
    }
    if body.len() > need {
        return Err(parse_err(16 + need, "trailing bytes after the last image"));
    }
    let pixels = body.iter().map(|&b| b as f32 / 255.0).collect();
    Ok(Array2::from_shape_vec((n, INPUT_WIDTH), pixels).expect("length checked"))
}

fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(parse_err(
            0,
            format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let n = read_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(parse_err(
            bytes.len(),
            format!("file truncated: {n} labels declared, {} present", body.len()),
        ));
    }
    if body.len() > n {
        return Err(parse_err(8 + n, "trailing bytes after the last label"));
    }
    if let Some(pos) = body.iter().position(|&l| l > 9) {
        return Err(parse_err(8 + pos, format!("label {} out of range", body[pos])));
    }
    Ok(body.to_vec())
}

/// Parses an image file and its label file. Pixel bytes are scaled by 1/255.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let inputs = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if inputs.nrows() != labels.len() {
        return Err(parse_err(
            4,
            format!(
                "image file holds {} samples but label file holds {}",
                inputs.nrows(),
                labels.len()
            ),
        ));
    }
    Dataset::new(inputs, labels)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
    let images = read(images_path.as_ref())?;
    let labels = read(labels_path.as_ref())?;
    parse_idx(&images, &labels)
}

/// Inverse of the image half of [`parse_idx`]; pixels are rounded to the
/// nearest byte.
pub fn encode_idx_images(data: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + data.len() * INPUT_WIDTH);
    for v in [IMAGES_MAGIC, data.len() as u32, IMAGE_SIDE as u32, IMAGE_SIDE as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(
        data.inputs()
            .iter()
            .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn encode_idx_labels(data: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + data.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    out.extend_from_slice(data.labels());
    out
}
