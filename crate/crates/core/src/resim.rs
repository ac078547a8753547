//! Re-simulation of narrower / coarser sensors from a high-resolution
//! spherical image by vertical center-crop followed by nearest-neighbour
//! resize, plus enumeration of target sensor grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intrinsics_from_fov, SensorIntrinsics};
use crate::raster::{PixelSample, SphericalImage};

/// Slack when comparing a requested FoV against whole rows.
const ROW_TOL: f64 = 1e-6;
const REL_TOL: f64 = 1e-9;

/// Intrinsics after cropping `k` to `target_vfov`, and the first kept row.
pub fn crop_intrinsics(k: &SensorIntrinsics, target_vfov: f64) -> Result<(SensorIntrinsics, usize)> {
    let source = k.v_fov();
    if !(target_vfov > 0.0) {
        return Err(Error::invalid(format!("target vertical FoV must be positive, got {target_vfov}")));
    }
    if target_vfov > source * (1.0 + REL_TOL) {
        return Err(Error::invalid(format!(
            "cannot crop to {:.6}° from a {:.6}° sensor: only equal or smaller FoVs can be simulated",
            target_vfov.to_degrees(),
            source.to_degrees()
        )));
    }
    let rows_f = target_vfov / k.delta_theta().abs();
    let rows = rows_f.round();
    if (rows_f - rows).abs() > ROW_TOL || rows < 1.0 {
        return Err(Error::invalid(format!(
            "{:.6}° covers {rows_f:.6} rows of {:.6}° each; a whole row count is required",
            target_vfov.to_degrees(),
            k.delta_theta().abs().to_degrees()
        )));
    }
    let rows = rows as usize;
    let start_f = k.c_theta() - rows as f64 / 2.0;
    let start = start_f.round();
    if (start_f - start).abs() > ROW_TOL || start < 0.0 || start as usize + rows > k.height() {
        return Err(Error::invalid(format!(
            "{rows} rows centred on c_theta = {} do not fit on whole rows of a {}-row image",
            k.c_theta(),
            k.height()
        )));
    }
    Ok((k.with_rows(rows, rows as f64 / 2.0), start as usize))
}

/// Keeps the rows spanning `target_vfov` symmetric about the principal row.
/// The elevation step is unchanged.
pub fn center_crop_vfov(img: &SphericalImage, target_vfov: f64) -> Result<SphericalImage> {
    let (k, start) = crop_intrinsics(img.intrinsics(), target_vfov)?;
    let rows: Vec<usize> = (start..start + k.height()).collect();
    let cols: Vec<usize> = (0..k.width()).collect();
    Ok(img.gather(&k, &rows, &cols))
}

/// Source index sampled by target index `j` when `source` samples are
/// reduced to `target`: `⌊(j + ½)·source/target⌋`.
#[inline]
pub fn nearest_source_index(j: usize, source: usize, target: usize) -> usize {
    ((2 * j + 1) * source) / (2 * target)
}

pub fn resize_intrinsics(k: &SensorIntrinsics, target_h: usize, target_w: usize) -> Result<SensorIntrinsics> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::invalid("target dimensions must be positive"));
    }
    if target_h > k.height() || target_w > k.width() {
        return Err(Error::invalid(format!(
            "cannot resize {}x{} up to {target_h}x{target_w}: only equal or lower resolutions can be simulated",
            k.height(),
            k.width()
        )));
    }
    let dt = k.delta_theta() * (k.height() as f64 / target_h as f64);
    let dp = k.delta_phi() * (k.width() as f64 / target_w as f64);
    Ok(k.with_grid(target_h, target_w, dt, dp))
}

/// Nearest-neighbour downsampling preserving the field of view.
pub fn resize(img: &SphericalImage, target_h: usize, target_w: usize) -> Result<SphericalImage> {
    let k = resize_intrinsics(img.intrinsics(), target_h, target_w)?;
    let rows: Vec<usize> = (0..target_h).map(|j| nearest_source_index(j, img.height(), target_h)).collect();
    let cols: Vec<usize> = (0..target_w).map(|i| nearest_source_index(i, img.width(), target_w)).collect();
    Ok(img.gather(&k, &rows, &cols))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Center-crop to the target's vertical FoV, then resize to its
/// dimensions. The output carries `target` exactly.
pub fn derive_sensor(img: &SphericalImage, target: &SensorIntrinsics) -> Result<SphericalImage> {
    let src = img.intrinsics();
    if !close(src.h_fov(), target.h_fov()) {
        return Err(Error::invalid(format!(
            "target horizontal FoV {:.6}° differs from source {:.6}°; only the vertical FoV can be cropped",
            target.h_fov().to_degrees(),
            src.h_fov().to_degrees()
        )));
    }
    if src.delta_phi().signum() != target.delta_phi().signum()
        || src.delta_theta().signum() != target.delta_theta().signum()
    {
        return Err(Error::invalid("target intrinsics use a different axis orientation than the source"));
    }
    let cropped = center_crop_vfov(img, target.v_fov())?;
    let derived = resize(&cropped, target.height(), target.width())?;
    let k = derived.intrinsics();
    let consistent = close(k.delta_phi(), target.delta_phi())
        && close(k.delta_theta(), target.delta_theta())
        && close(k.c_phi(), target.c_phi())
        && close(k.c_theta(), target.c_theta());
    if !consistent {
        return Err(Error::invalid(format!(
            "crop/resize yields intrinsics {k:?}, which do not match the requested target {target:?}"
        )));
    }
    let mut out = SphericalImage::empty(target);
    for row in 0..out.height() {
        for col in 0..out.width() {
            let s = derived.get(row, col);
            if s.is_valid() && s.range as f64 <= target.max_range() {
                out.set(row, col, s);
            } else {
                out.set(row, col, PixelSample::EMPTY);
            }
        }
    }
    Ok(out)
}

/// Target sensors as the Cartesian product of the listed azimuth counts,
/// layer counts and vertical FoVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorGridSpec {
    pub widths: Vec<usize>,
    pub heights: Vec<usize>,
    #[serde(rename = "v_fov_deg", with = "degrees")]
    pub v_fovs: Vec<f64>,
}

mod degrees {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|r| super::round_deg(*r)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<f64>::deserialize(d)?.into_iter().map(f64::to_radians).collect())
    }
}

fn round_deg(rad: f64) -> f64 {
    (rad.to_degrees() * 1e6).round() / 1e6
}

impl SensorGridSpec {
    /// Azimuth counts {512, 1024, 2048}, layers {32, 64, 128} and vertical
    /// FoVs {22.5°, 45°, 90°}.
    pub fn standard() -> Self {
        SensorGridSpec {
            widths: vec![512, 1024, 2048],
            heights: vec![32, 64, 128],
            v_fovs: [22.5f64, 45.0, 90.0].iter().map(|d| d.to_radians()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.widths.len() * self.heights.len() * self.v_fovs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A named target sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTarget {
    pub name: String,
    pub intrinsics: SensorIntrinsics,
}

/// Directory-safe name `v{fov_deg}_h{h}_w{w}`.
pub fn target_name(k: &SensorIntrinsics) -> String {
    format!("v{}_h{}_w{}", round_deg(k.v_fov()), k.height(), k.width())
}

/// Enumerates targets in v_fov-major, then height, then width order. The
/// horizontal FoV and maximum range are taken from `source`.
pub fn enumerate_grid(spec: &SensorGridSpec, source: &SensorIntrinsics) -> Result<Vec<GridTarget>> {
    if spec.is_empty() {
        return Err(Error::invalid("sensor grid lists must be nonempty"));
    }
    let mut out = Vec::with_capacity(spec.len());
    for &fv in &spec.v_fovs {
        let (cropped, _) = crop_intrinsics(source, fv)?;
        for &h in &spec.heights {
            for &w in &spec.widths {
                if h > cropped.height() || w > source.width() {
                    return Err(Error::invalid(format!(
                        "target {h}x{w} at {:.6}° exceeds the {}x{} source rows available for that FoV",
                        fv.to_degrees(),
                        cropped.height(),
                        source.width()
                    )));
                }
                let k = intrinsics_from_fov(source.h_fov(), fv, w, h, source.max_range())?;
                let k = k.with_sign_flip(
                    k.delta_phi().signum() != source.delta_phi().signum(),
                    k.delta_theta().signum() != source.delta_theta().signum(),
                );
                out.push(GridTarget {
                    name: target_name(&k),
                    intrinsics: k,
                });
            }
        }
    }
    Ok(out)
}

/// Draws `count` grid indices uniformly with replacement from a seeded
/// generator; used for randomized augmentation instead of the full grid.
pub fn sample_targets(n_targets: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if n_targets == 0 {
        return Err(Error::invalid("cannot sample from an empty grid"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| rng.gen_range(0..n_targets)).collect())
}
