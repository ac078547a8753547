//! Frame directories.
//!
//! ```text
//! <frame>/
//!   cloud.bin  labels.bin
//!   channels/range.npy intensity.npy semantic.npy instance.npy deflection.npy
//!   channels/deflection_l1.npy … deflection_l5.npy   (when h, w divide by 32)
//!   masks.jsonl                                      (ground-truth instances)
//!   preview/range.png deflection.png                 (optional)
//!   meta.json
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{cloud, deflection_array, npy, read_channel, write_channel, ChannelKind};
use crate::deflection::{build_pyramid, deflection_image, ProjectionModel, PYRAMID_LEVELS, PYRAMID_STRIDE};
use crate::error::{Error, Result};
use crate::eval::records::MaskRecord;
use crate::eval::Detection;
use crate::geometry::{LabeledPointCloud, SensorIntrinsics};
use crate::raster::{derasterize_lossy, SphericalImage};

pub const FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const CLOUD_FILE: &str = "cloud.bin";
pub const LABELS_FILE: &str = "labels.bin";
pub const MASKS_FILE: &str = "masks.jsonl";
pub const CHANNEL_DIR: &str = "channels";
pub const PREVIEW_DIR: &str = "preview";

/// Which artifacts accompany the NPY channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// NPY channels only.
    #[default]
    Npy,
    /// PNG previews; frame channels are still written as NPY.
    Png,
    Both,
}

impl OutputFormat {
    pub fn wants_npy(self) -> bool {
        matches!(self, OutputFormat::Npy | OutputFormat::Both)
    }

    pub fn wants_png(self) -> bool {
        matches!(self, OutputFormat::Png | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameOptions {
    pub format: OutputFormat,
    pub model: ProjectionModel,
}

/// `meta.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub format_version: u32,
    pub frame: String,
    pub shape: [usize; 2],
    pub intrinsics: SensorIntrinsics,
    pub model: ProjectionModel,
    pub channels: Vec<String>,
    pub pyramid_levels: usize,
    pub n_points: usize,
    pub valid_pixels: usize,
    pub n_instances: usize,
}

pub fn channel_path(frame_dir: &Path, name: &str) -> PathBuf {
    frame_dir.join(CHANNEL_DIR).join(format!("{name}.npy"))
}

pub fn pyramid_level_name(level: usize) -> String {
    if level == 0 {
        "deflection".to_string()
    } else {
        format!("deflection_l{level}")
    }
}

fn pyramid_capable(k: &SensorIntrinsics) -> bool {
    k.height().is_multiple_of(PYRAMID_STRIDE) && k.width().is_multiple_of(PYRAMID_STRIDE)
}

/// Writes a complete frame directory. When `cloud` is `None` the point
/// binaries are derived from the image's valid pixels.
pub fn write_frame(
    frame_dir: &Path,
    key: &str,
    img: &SphericalImage,
    cloud: Option<&LabeledPointCloud>,
    masks: &[Detection],
    opts: FrameOptions,
) -> Result<FrameMeta> {
    let k = img.intrinsics();
    let derived;
    let pc = match cloud {
        Some(pc) => pc,
        None => {
            derived = derasterize_lossy(img)?;
            &derived
        }
    };
    cloud::write_cloud(&frame_dir.join(CLOUD_FILE), &frame_dir.join(LABELS_FILE), pc)?;

    let mut channels = Vec::new();
    for kind in ChannelKind::ALL {
        if let Some(arr) = kind.extract(img) {
            write_channel(&channel_path(frame_dir, kind.name()), kind, &arr)?;
            channels.push(kind.name().to_string());
        }
    }

    let levels = if pyramid_capable(k) {
        build_pyramid(k, opts.model)?.levels().to_vec()
    } else {
        vec![deflection_image(k, opts.model)]
    };
    for (i, level) in levels.iter().enumerate() {
        let name = pyramid_level_name(i);
        write_channel(&channel_path(frame_dir, &name), ChannelKind::Deflection, &deflection_array(level))?;
        channels.push(name);
    }

    let mut jsonl = String::new();
    for d in masks {
        jsonl.push_str(&serde_json::to_string(&MaskRecord::from_detection(key, d)).expect("record serializes"));
        jsonl.push('\n');
    }
    super::atomic_write(&frame_dir.join(MASKS_FILE), jsonl.as_bytes())?;

    if opts.format.wants_png() {
        let preview = frame_dir.join(PREVIEW_DIR);
        super::png::write_png(
            &preview.join("range.png"),
            img.range(),
            img.height(),
            img.width(),
            k.max_range() as f32,
        )?;
        let d = &levels[0];
        super::png::write_png(&preview.join("deflection.png"), &d.to_f32(), d.height(), d.width(), d.max() as f32)?;
    }

    let meta = FrameMeta {
        format_version: FORMAT_VERSION,
        frame: key.to_string(),
        shape: [img.height(), img.width()],
        intrinsics: *k,
        model: opts.model,
        channels,
        pyramid_levels: levels.len(),
        n_points: pc.len(),
        valid_pixels: img.valid_count(),
        n_instances: masks.len(),
    };
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
    super::atomic_write(&frame_dir.join(META_FILE), text.as_bytes())?;
    Ok(meta)
}

pub fn read_meta(frame_dir: &Path) -> Result<FrameMeta> {
    let path = frame_dir.join(META_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: FrameMeta =
        serde_json::from_str(&text).map_err(|e| Error::format(&path, None, e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &path,
            None,
            format!("format_version {} is not {FORMAT_VERSION}", meta.format_version),
        ));
    }
    Ok(meta)
}

fn expect_shape(path: &Path, arr: &npy::NpyArray, h: usize, w: usize) -> Result<()> {
    if (arr.height, arr.width) != (h, w) {
        return Err(Error::format(
            path,
            None,
            format!("shape: ({}, {}) does not match the frame's ({h}, {w})", arr.height, arr.width),
        ));
    }
    Ok(())
}

/// Loads the four data channels back into an image.
pub fn read_frame_image(frame_dir: &Path) -> Result<(FrameMeta, SphericalImage)> {
    let meta = read_meta(frame_dir)?;
    let k = meta.intrinsics;
    let load = |kind: ChannelKind| -> Result<npy::NpyArray> {
        let path = channel_path(frame_dir, kind.name());
        let arr = read_channel(&path, kind)?;
        expect_shape(&path, &arr, k.height(), k.width())?;
        Ok(arr)
    };
    let take = |arr: npy::NpyArray| arr.data;
    let range = match take(load(ChannelKind::Range)?) {
        npy::NpyData::F32(v) => v,
        _ => unreachable!("dtype checked"),
    };
    let intensity = match take(load(ChannelKind::Intensity)?) {
        npy::NpyData::F32(v) => v,
        _ => unreachable!("dtype checked"),
    };
    let semantic = match take(load(ChannelKind::Semantic)?) {
        npy::NpyData::U16(v) => v,
        _ => unreachable!("dtype checked"),
    };
    let instance = match take(load(ChannelKind::Instance)?) {
        npy::NpyData::U32(v) => v,
        _ => unreachable!("dtype checked"),
    };
    let img = SphericalImage::from_channels(&k, range, intensity, semantic, instance)
        .map_err(|e| Error::format(channel_path(frame_dir, "range"), None, e.to_string()))?;
    Ok((meta, img))
}

/// Ground-truth masks stored alongside a frame.
pub fn read_frame_masks(frame_dir: &Path) -> Result<crate::eval::DetectionSet> {
    crate::eval::records::read_jsonl(&frame_dir.join(MASKS_FILE))
}

/// Checks every file of a frame against `meta.json` and returns the list
/// of problems found (empty when the frame is consistent).
pub fn validate_frame(frame_dir: &Path) -> Vec<String> {
    let mut problems = Vec::new();
    let meta = match read_meta(frame_dir) {
        Ok(m) => m,
        Err(e) => return vec![e.to_string()],
    };
    let k = meta.intrinsics;
    if meta.shape != [k.height(), k.width()] {
        problems.push(format!("{}: shape {:?} disagrees with intrinsics", frame_dir.display(), meta.shape));
    }
    for name in &meta.channels {
        let path = channel_path(frame_dir, name);
        let (kind, level) = match name.strip_prefix("deflection_l") {
            Some(l) => (ChannelKind::Deflection, l.parse::<usize>().unwrap_or(usize::MAX)),
            None => match ChannelKind::from_name(name) {
                Some(kind) => (kind, 0),
                None => {
                    problems.push(format!("{}: unknown channel {name}", frame_dir.display()));
                    continue;
                }
            },
        };
        if level >= PYRAMID_LEVELS {
            problems.push(format!("{}: bad pyramid level in {name}", frame_dir.display()));
            continue;
        }
        match npy::read_npy_header(&path) {
            Err(e) => problems.push(e.to_string()),
            Ok(hdr) => {
                let want = [k.height() >> level, k.width() >> level];
                if hdr.fortran_order {
                    problems.push(format!("{}: fortran_order: True is not supported", path.display()));
                }
                if hdr.descr != kind.descr() {
                    problems.push(format!("{}: descr '{}' should be '{}'", path.display(), hdr.descr, kind.descr()));
                }
                if hdr.shape != want {
                    problems.push(format!(
                        "{}: shape {:?} should be {:?} (level {level})",
                        path.display(),
                        hdr.shape,
                        want
                    ));
                }
            }
        }
    }
    if let Err(e) = cloud::read_cloud(&frame_dir.join(CLOUD_FILE), &frame_dir.join(LABELS_FILE)).and_then(|pc| {
        if pc.len() == meta.n_points {
            Ok(())
        } else {
            Err(Error::format(
                frame_dir.join(CLOUD_FILE),
                None,
                format!("{} points, meta.json says {}", pc.len(), meta.n_points),
            ))
        }
    }) {
        problems.push(e.to_string());
    }
    match read_frame_masks(frame_dir) {
        Err(e) => problems.push(e.to_string()),
        Ok(set) => {
            for (frame, dets) in set.frames() {
                if frame != meta.frame {
                    problems.push(format!("{}: mask record for foreign frame {frame}", frame_dir.display()));
                }
                if dets.iter().any(|d| (d.mask.height(), d.mask.width()) != (k.height(), k.width())) {
                    problems.push(format!("{}: mask grid differs from the frame", frame_dir.display()));
                }
            }
        }
    }
    problems
}
