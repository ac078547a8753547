//! Point cloud ⇄ spherical image conversion with a min-range z-buffer.

use crate::error::{Error, Result};
use crate::geometry::{cart_to_spherical, pixel_center, project, unproject, LabeledPointCloud, SensorIntrinsics};

/// Range value of pixels without a return.
pub const NO_RETURN: f32 = -1.0;

/// Channels of one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelSample {
    pub range: f32,
    pub intensity: f32,
    pub semantic: u16,
    pub instance: u32,
}

impl PixelSample {
    pub const EMPTY: PixelSample = PixelSample {
        range: NO_RETURN,
        intensity: 0.0,
        semantic: 0,
        instance: 0,
    };

    pub fn is_valid(&self) -> bool {
        self.range > 0.0
    }
}

/// Pixel-aligned range, intensity, semantic and instance rasters.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalImage {
    intrinsics: SensorIntrinsics,
    range: Vec<f32>,
    intensity: Vec<f32>,
    semantic: Vec<u16>,
    instance: Vec<u32>,
}

impl SphericalImage {
    /// All pixels set to no-return.
    pub fn empty(k: &SensorIntrinsics) -> Self {
        let n = k.pixel_count();
        SphericalImage {
            intrinsics: *k,
            range: vec![NO_RETURN; n],
            intensity: vec![0.0; n],
            semantic: vec![0; n],
            instance: vec![0; n],
        }
    }

    pub fn from_channels(
        k: &SensorIntrinsics,
        range: Vec<f32>,
        intensity: Vec<f32>,
        semantic: Vec<u16>,
        instance: Vec<u32>,
    ) -> Result<Self> {
        let n = k.pixel_count();
        for (name, len) in [
            ("range", range.len()),
            ("intensity", intensity.len()),
            ("semantic", semantic.len()),
            ("instance", instance.len()),
        ] {
            if len != n {
                return Err(Error::invalid(format!(
                    "{name} channel has {len} pixels, intrinsics need {}x{} = {n}",
                    k.height(),
                    k.width()
                )));
            }
        }
        if let Some(i) = range
            .iter()
            .position(|&r| r != NO_RETURN && !(r > 0.0 && r as f64 <= k.max_range()))
        {
            return Err(Error::invalid(format!(
                "pixel {i} has range {} outside (0, {}] and is not the no-return sentinel",
                range[i],
                k.max_range()
            )));
        }
        Ok(SphericalImage {
            intrinsics: *k,
            range,
            intensity,
            semantic,
            instance,
        })
    }

    pub fn intrinsics(&self) -> &SensorIntrinsics {
        &self.intrinsics
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height()
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width()
    }

    pub fn range(&self) -> &[f32] {
        &self.range
    }

    pub fn intensity(&self) -> &[f32] {
        &self.intensity
    }

    pub fn semantic(&self) -> &[u16] {
        &self.semantic
    }

    pub fn instance(&self) -> &[u32] {
        &self.instance
    }

    pub fn get(&self, row: usize, col: usize) -> PixelSample {
        let i = row * self.width() + col;
        PixelSample {
            range: self.range[i],
            intensity: self.intensity[i],
            semantic: self.semantic[i],
            instance: self.instance[i],
        }
    }

    pub fn set(&mut self, row: usize, col: usize, s: PixelSample) {
        let i = row * self.width() + col;
        self.range[i] = s.range;
        self.intensity[i] = s.intensity;
        self.semantic[i] = s.semantic;
        self.instance[i] = s.instance;
    }

    pub fn valid_count(&self) -> usize {
        self.range.iter().filter(|&&r| r > 0.0).count()
    }

    /// Builds a new image on intrinsics `k` whose pixel `(row, col)` copies
    /// the source pixel `(rows[row], cols[col])`. All channels move together.
    pub(crate) fn gather(&self, k: &SensorIntrinsics, rows: &[usize], cols: &[usize]) -> SphericalImage {
        debug_assert_eq!(rows.len(), k.height());
        debug_assert_eq!(cols.len(), k.width());
        let mut out = SphericalImage::empty(k);
        for (r, &sr) in rows.iter().enumerate() {
            for (c, &sc) in cols.iter().enumerate() {
                out.set(r, c, self.get(sr, sc));
            }
        }
        out
    }
}

/// Rasterization output and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Rasterized {
    pub image: SphericalImage,
    /// Points landing outside the image.
    pub off_frame: usize,
    /// Points beyond the sensor's maximum range.
    pub out_of_range: usize,
}

impl Rasterized {
    /// Total number of points that did not reach any pixel.
    pub fn dropped(&self) -> usize {
        self.off_frame + self.out_of_range
    }
}

/// Projects every point through `K` and floors to a pixel. Per pixel the
/// point with the smallest range wins all channels; equal ranges keep the
/// lowest input index.
pub fn rasterize(pc: &LabeledPointCloud, k: &SensorIntrinsics) -> Result<Rasterized> {
    if pc.is_empty() {
        return Err(Error::invalid("cannot rasterize an empty point cloud"));
    }
    let n = k.pixel_count();
    let mut winner = vec![usize::MAX; n];
    let mut best = vec![f64::INFINITY; n];
    let (mut off_frame, mut out_of_range) = (0, 0);

    for (i, p) in pc.positions().iter().enumerate() {
        let a = cart_to_spherical(p)?;
        if a.r > k.max_range() {
            out_of_range += 1;
            continue;
        }
        let Some((row, col)) = k.pixel_of(project(&a, k)) else {
            off_frame += 1;
            continue;
        };
        let idx = row * k.width() + col;
        if a.r < best[idx] {
            best[idx] = a.r;
            winner[idx] = i;
        }
    }

    let mut image = SphericalImage::empty(k);
    for (idx, &w) in winner.iter().enumerate() {
        if w == usize::MAX {
            continue;
        }
        image.range[idx] = best[idx] as f32;
        image.intensity[idx] = pc.intensity()[w];
        image.semantic[idx] = pc.semantic()[w];
        image.instance[idx] = pc.instance()[w] as u32;
    }
    Ok(Rasterized {
        image,
        off_frame,
        out_of_range,
    })
}

/// One point per valid pixel, unprojected through the pixel centre.
pub fn derasterize(img: &SphericalImage) -> Result<LabeledPointCloud> {
    let cloud = derasterize_lossy(img)?;
    if cloud.is_empty() {
        return Err(Error::invalid("image has no valid pixels"));
    }
    Ok(cloud)
}

/// Like [`derasterize`] but an image without returns yields an empty cloud.
pub fn derasterize_lossy(img: &SphericalImage) -> Result<LabeledPointCloud> {
    let k = img.intrinsics();
    let mut positions = Vec::new();
    let mut intensity = Vec::new();
    let mut semantic = Vec::new();
    let mut instance = Vec::new();
    for row in 0..img.height() {
        for col in 0..img.width() {
            let s = img.get(row, col);
            if !s.is_valid() {
                continue;
            }
            let inst = u16::try_from(s.instance).map_err(|_| {
                Error::invalid(format!("instance id {} at ({row}, {col}) exceeds 16 bits", s.instance))
            })?;
            positions.push(unproject(pixel_center(row, col), s.range as f64, k)?);
            intensity.push(s.intensity);
            semantic.push(s.semantic);
            instance.push(inst);
        }
    }
    LabeledPointCloud::new(positions, intensity, semantic, instance)
}
