use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary mask on an image grid, stored as sorted row-major pixel indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    pixels: Vec<u32>,
}

impl Mask {
    /// Builds a mask from pixel indices in any order; duplicates collapse.
    pub fn from_indices(height: usize, width: usize, mut pixels: Vec<u32>) -> Result<Self> {
        pixels.sort_unstable();
        pixels.dedup();
        if let Some(&last) = pixels.last() {
            if last as usize >= height * width {
                return Err(Error::invalid(format!(
                    "pixel index {last} outside a {height}x{width} mask"
                )));
            }
        }
        Ok(Mask { height, width, pixels })
    }

    pub fn from_bools(height: usize, width: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::invalid(format!(
                "{} values do not fill a {height}x{width} mask",
                bits.len()
            )));
        }
        let pixels = bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u32).collect();
        Ok(Mask { height, width, pixels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.pixels.binary_search(&((row * self.width + col) as u32)).is_ok()
    }

    pub fn intersection(&self, other: &Mask) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.pixels, &other.pixels);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn to_rle(&self) -> Rle {
        let mut counts = Vec::new();
        let mut cursor = 0u32;
        let mut k = 0;
        while k < self.pixels.len() {
            let start = self.pixels[k];
            let mut end = start + 1;
            k += 1;
            while k < self.pixels.len() && self.pixels[k] == end {
                end += 1;
                k += 1;
            }
            counts.push(start - cursor);
            counts.push(end - start);
            cursor = end;
        }
        let total = (self.height * self.width) as u32;
        if cursor < total {
            counts.push(total - cursor);
        }
        Rle {
            size: [self.height, self.width],
            counts,
        }
    }

    pub fn from_rle(rle: &Rle) -> Result<Self> {
        let [height, width] = rle.size;
        let total = (height * width) as u64;
        let mut pixels = Vec::new();
        let mut cursor = 0u64;
        for (i, &run) in rle.counts.iter().enumerate() {
            let end = cursor + run as u64;
            if end > total {
                return Err(Error::invalid(format!(
                    "RLE runs overflow a {height}x{width} mask at run {i}"
                )));
            }
            if i % 2 == 1 {
                pixels.extend(cursor as u32..end as u32);
            }
            cursor = end;
        }
        if cursor != total {
            return Err(Error::invalid(format!(
                "RLE runs cover {cursor} of {total} pixels"
            )));
        }
        Ok(Mask { height, width, pixels })
    }
}

/// Row-major run-length encoding: alternating 0-run and 1-run lengths,
/// starting with a (possibly empty) 0-run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    pub size: [usize; 2],
    pub counts: Vec<u32>,
}

/// Intersection over union of two masks on the same grid.
pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    if a.height != b.height || a.width != b.width {
        return Err(Error::invalid(format!(
            "mask grids differ: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    let inter = a.intersection(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}
