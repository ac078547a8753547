//! Analytic ray casting of parametric scenes into labelled scans.

pub mod intersect;
mod scene;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;

pub use scene::{
    Primitive, SceneDescription, SensorPose, Shape, CLASS_NAMES, GROUND, PEDESTRIAN, TWO_WHEELER, VEHICLE,
};

use crate::dataio::frame::{write_frame, FrameOptions};
use crate::dataio::manifest::{frame_name, sequence_id, SequenceRecord};
use crate::error::{Error, Result};
use crate::eval::{Detection, Mask};
use crate::geometry::{beam_direction, pixel_center, SensorIntrinsics};
use crate::raster::{PixelSample, SphericalImage};

/// Nearest intersection along one beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub range: f64,
    pub semantic: u16,
    pub instance: u16,
    /// Index into the scene's primitive list.
    pub primitive: usize,
}

fn intersect(shape: &Shape, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    match shape {
        Shape::Sphere { center, radius } => intersect::ray_sphere(origin, dir, center, *radius),
        Shape::Aabb { min, max } => intersect::ray_aabb(origin, dir, min, max),
        Shape::GroundPlane { z0 } => intersect::ray_plane_z(origin, dir, *z0),
    }
}

/// Casts a world-frame ray against already-positioned shapes. Equal
/// distances keep the earlier primitive.
pub fn cast_ray(
    shapes: &[Shape],
    primitives: &[Primitive],
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    max_range: f64,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, shape) in shapes.iter().enumerate() {
        if let Some(t) = intersect(shape, origin, dir) {
            if t <= max_range && best.is_none_or(|b| t < b.range) {
                best = Some(Hit {
                    range: t,
                    semantic: primitives[i].semantic,
                    instance: primitives[i].instance,
                    primitive: i,
                });
            }
        }
    }
    best
}

/// Shapes of every primitive at a frame's timestamp.
pub fn shapes_at(scene: &SceneDescription, frame_index: usize) -> Vec<Shape> {
    let t = frame_index as f64 / scene.frame_rate;
    scene.primitives.iter().map(|p| p.at_time(t)).collect()
}

/// World-frame unit beam through the centre of pixel `(row, col)`.
pub fn world_beam(scene: &SceneDescription, k: &SensorIntrinsics, row: usize, col: usize) -> Vector3<f64> {
    let local = beam_direction(pixel_center(row, col), k);
    if scene.sensor_pose.rotation_rpy == Vector3::zeros() {
        local
    } else {
        scene.sensor_pose.rotation() * local
    }
}

/// Renders one frame: per pixel centre, the nearest hit within range fills
/// range, labels and intensity `1 − r/max_range`.
pub fn ray_cast(scene: &SceneDescription, frame_index: usize, k: &SensorIntrinsics) -> Result<SphericalImage> {
    if frame_index >= scene.n_frames {
        return Err(Error::invalid(format!(
            "frame {frame_index} requested from a {}-frame scene",
            scene.n_frames
        )));
    }
    if k.is_pinhole() {
        return Err(Error::invalid("ray casting needs spherical intrinsics"));
    }
    let shapes = shapes_at(scene, frame_index);
    let origin = scene.sensor_pose.translation;
    let max_range = k.max_range();
    let rows: Vec<Vec<PixelSample>> = (0..k.height())
        .into_par_iter()
        .map(|row| {
            (0..k.width())
                .map(|col| {
                    let dir = world_beam(scene, k, row, col);
                    match cast_ray(&shapes, &scene.primitives, &origin, &dir, max_range) {
                        Some(hit) => PixelSample {
                            range: hit.range as f32,
                            intensity: (1.0 - hit.range / max_range) as f32,
                            semantic: hit.semantic,
                            instance: hit.instance as u32,
                        },
                        None => PixelSample::EMPTY,
                    }
                })
                .collect()
        })
        .collect();
    let mut img = SphericalImage::empty(k);
    for (row, samples) in rows.into_iter().enumerate() {
        for (col, s) in samples.into_iter().enumerate() {
            if s.is_valid() {
                img.set(row, col, s);
            }
        }
    }
    Ok(img)
}

/// One ground-truth mask per nonzero instance id, in ascending id order.
pub fn gt_masks(img: &SphericalImage) -> Vec<Detection> {
    let mut by_instance: BTreeMap<u32, (u16, Vec<u32>)> = BTreeMap::new();
    for (i, (&inst, &sem)) in img.instance().iter().zip(img.semantic()).enumerate() {
        if inst != 0 {
            by_instance.entry(inst).or_insert_with(|| (sem, Vec::new())).1.push(i as u32);
        }
    }
    by_instance
        .into_values()
        .map(|(class, pixels)| Detection {
            mask: Mask::from_indices(img.height(), img.width(), pixels).expect("indices come from the image"),
            class,
            score: 1.0,
        })
        .collect()
}

/// Renders and writes all frames of a scene to `root/seq_<index>/frame_<k>`.
pub fn generate_sequence(
    scene: &SceneDescription,
    k: &SensorIntrinsics,
    root: &Path,
    seq_index: usize,
    opts: FrameOptions,
) -> Result<SequenceRecord> {
    scene.validate()?;
    let id = sequence_id(seq_index);
    let mut frames = Vec::with_capacity(scene.n_frames);
    for f in 0..scene.n_frames {
        let rel = format!("{id}/{}", frame_name(f));
        let img = ray_cast(scene, f, k)?;
        let masks = gt_masks(&img);
        write_frame(&root.join(&rel), &rel, &img, None, &masks, opts)?;
        log::debug!("wrote {rel}: {} returns, {} instances", img.valid_count(), masks.len());
        frames.push(rel);
    }
    Ok(SequenceRecord {
        id,
        n_frames: scene.n_frames,
        intrinsics: *k,
        model: opts.model,
        frames,
        derived_sensors: Vec::new(),
        seed: scene.seed,
        scene_hash: scene.scene_hash(),
    })
}
