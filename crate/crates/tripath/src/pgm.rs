//! Binary PGM montages for looking at batches of images.

use std::fs;
use std::path::Path;

use tripath_core::Matrix;

use crate::error::{CliError, Result};

/// Tiles `images` left to right, top to bottom, `grid_cols` per row, with
/// 1-pixel black separators. Returns the P5 file bytes.
pub fn montage(images: &Matrix, width: usize, height: usize, grid_cols: usize) -> Result<Vec<u8>, String> {
    let n = images.rows();
    if n == 0 {
        return Err("montage of zero images".into());
    }
    if grid_cols == 0 {
        return Err("grid_cols must be positive".into());
    }
    if images.cols() != width * height {
        return Err(format!("{} columns cannot hold {width}x{height} images", images.cols()));
    }
    let cols = grid_cols.min(n);
    let rows = n.div_ceil(cols);
    let out_w = cols * width + cols - 1;
    let out_h = rows * height + rows - 1;
    let mut pixels = vec![0u8; out_w * out_h];
    for i in 0..n {
        let (gy, gx) = (i / cols, i % cols);
        let img = images.row(i);
        for y in 0..height {
            for x in 0..width {
                let p = img[y * width + x].clamp(0.0, 1.0);
                pixels[(gy * (height + 1) + y) * out_w + gx * (width + 1) + x] = (p * 255.0).round() as u8;
            }
        }
    }
    let mut out = format!("P5\n{out_w} {out_h}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

pub fn write_pgm_montage(
    path: impl AsRef<Path>,
    images: &Matrix,
    width: usize,
    height: usize,
    grid_cols: usize,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = montage(images, width, height, grid_cols).map_err(|m| CliError::format(path, m))?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
