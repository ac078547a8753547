//! KITTI-style point binaries.
//!
//! `cloud.bin` holds little-endian `f32` quadruples `(x, y, z, intensity)`;
//! `labels.bin` holds one little-endian `u32` per point with the semantic
//! class in the low 16 bits and the instance id in the high 16 bits.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::LabeledPointCloud;

pub const POINT_BYTES: usize = 16;
pub const LABEL_BYTES: usize = 4;

#[inline]
pub fn pack_label(semantic: u16, instance: u16) -> u32 {
    (instance as u32) << 16 | semantic as u32
}

#[inline]
pub fn unpack_label(word: u32) -> (u16, u16) {
    ((word & 0xffff) as u16, (word >> 16) as u16)
}

/// Coordinates are narrowed to `f32`.
pub fn encode_cloud(pc: &LabeledPointCloud) -> (Vec<u8>, Vec<u8>) {
    let mut points = Vec::with_capacity(pc.len() * POINT_BYTES);
    let mut labels = Vec::with_capacity(pc.len() * LABEL_BYTES);
    for p in pc.iter() {
        for c in [p.position.x as f32, p.position.y as f32, p.position.z as f32, p.intensity] {
            points.extend_from_slice(&c.to_le_bytes());
        }
        labels.extend_from_slice(&pack_label(p.semantic, p.instance).to_le_bytes());
    }
    (points, labels)
}

pub fn decode_cloud(points: &[u8], labels: &[u8], points_path: &Path, labels_path: &Path) -> Result<LabeledPointCloud> {
    if !points.len().is_multiple_of(POINT_BYTES) {
        return Err(Error::format(
            points_path,
            Some((points.len() - points.len() % POINT_BYTES) as u64),
            format!("{} bytes is not a whole number of {POINT_BYTES}-byte points", points.len()),
        ));
    }
    let n = points.len() / POINT_BYTES;
    if labels.len() != n * LABEL_BYTES {
        return Err(Error::format(
            labels_path,
            Some(labels.len().min(n * LABEL_BYTES) as u64),
            format!("expected {} bytes of labels for {n} points, found {}", n * LABEL_BYTES, labels.len()),
        ));
    }
    let f = |b: &[u8]| f32::from_le_bytes(b.try_into().unwrap());
    let mut positions = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    let mut semantic = Vec::with_capacity(n);
    let mut instance = Vec::with_capacity(n);
    for (i, (p, l)) in points.chunks_exact(POINT_BYTES).zip(labels.chunks_exact(LABEL_BYTES)).enumerate() {
        let pos = Vector3::new(f(&p[0..4]) as f64, f(&p[4..8]) as f64, f(&p[8..12]) as f64);
        if pos.norm_squared() == 0.0 || !pos.iter().all(|c| c.is_finite()) {
            return Err(Error::format(
                points_path,
                Some((i * POINT_BYTES) as u64),
                format!("point {i} is at the origin or not finite"),
            ));
        }
        positions.push(pos);
        intensity.push(f(&p[12..16]));
        let (s, inst) = unpack_label(u32::from_le_bytes(l.try_into().unwrap()));
        semantic.push(s);
        instance.push(inst);
    }
    LabeledPointCloud::new(positions, intensity, semantic, instance)
}

pub fn write_cloud(points_path: &Path, labels_path: &Path, pc: &LabeledPointCloud) -> Result<()> {
    let (points, labels) = encode_cloud(pc);
    super::atomic_write(points_path, &points)?;
    super::atomic_write(labels_path, &labels)
}

pub fn read_cloud(points_path: &Path, labels_path: &Path) -> Result<LabeledPointCloud> {
    let points = std::fs::read(points_path).map_err(|e| Error::io(points_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    decode_cloud(&points, &labels, points_path, labels_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LabeledPoint;
    use proptest::prelude::*;

    #[test]
    fn single_point_layout() {
        let pc = LabeledPointCloud::from_points([LabeledPoint {
            position: Vector3::new(1.0, 2.0, 3.0),
            intensity: 0.5,
            semantic: 2,
            instance: 7,
        }])
        .unwrap();
        let (points, labels) = encode_cloud(&pc);
        assert_eq!(points.len(), 16);
        assert_eq!(&points[0..4], &1.0f32.to_le_bytes());
        assert_eq!(&points[12..16], &0.5f32.to_le_bytes());
        assert_eq!(labels, 0x0007_0002u32.to_le_bytes());
        assert_eq!(unpack_label(0x0007_0002), (2, 7));
    }

    #[test]
    fn size_mismatches_are_format_errors() {
        let (a, b) = (Path::new("cloud.bin"), Path::new("labels.bin"));
        assert!(matches!(decode_cloud(&[0u8; 15], &[], a, b), Err(Error::Format { .. })));
        let mut pts = Vec::new();
        for c in [1.0f32, 0.0, 0.0, 0.0] {
            pts.extend_from_slice(&c.to_le_bytes());
        }
        let err = decode_cloud(&pts, &[0u8; 8], a, b).unwrap_err();
        assert!(matches!(err, Error::Format { ref path, .. } if path == b));
        assert!(decode_cloud(&pts, &[0u8; 4], a, b).is_ok());
    }

    proptest! {
        #[test]
        fn f32_clouds_round_trip(points in proptest::collection::vec(
            (0.1f32..100.0, -100f32..100.0, -100f32..100.0, 0f32..1.0, any::<u16>(), any::<u16>()), 1..64)) {
            let pc = LabeledPointCloud::from_points(points.iter().map(|&(x, y, z, i, s, n)| LabeledPoint {
                position: Vector3::new(x as f64, y as f64, z as f64),
                intensity: i,
                semantic: s,
                instance: n,
            })).unwrap();
            let (a, b) = encode_cloud(&pc);
            let back = decode_cloud(&a, &b, Path::new("a"), Path::new("b")).unwrap();
            prop_assert_eq!(back, pc);
        }
    }
}
