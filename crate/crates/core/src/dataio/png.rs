//! 8-bit false-colour previews. Not part of the bit-exact contract.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use super::colormap::TURBO;
use crate::error::{Error, Result};

/// Maps `values` to colour with `0 ↦ TURBO[0]` and `scale ↦ TURBO[255]`.
/// Non-finite and negative entries (no-return pixels) are drawn black.
pub fn colorize(values: &[f32], height: usize, width: usize, scale: f32) -> Result<ImageBuffer<Rgb<u8>, Vec<u8>>> {
    if values.len() != height * width {
        return Err(Error::invalid(format!(
            "{} values do not fill a {height}x{width} preview",
            values.len()
        )));
    }
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let img = ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
        let v = values[y as usize * width + x as usize];
        if !v.is_finite() || v < 0.0 {
            return Rgb([0, 0, 0]);
        }
        let idx = ((v / scale).clamp(0.0, 1.0) * 255.0).round() as usize;
        Rgb(TURBO[idx])
    });
    Ok(img)
}

pub fn write_png(path: &Path, values: &[f32], height: usize, width: usize, scale: f32) -> Result<()> {
    let img = colorize(values, height, width, scale)?;
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::invalid(format!("png encoding failed: {e}")))?;
    super::atomic_write(path, &bytes)
}
