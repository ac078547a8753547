//! Dataset manifest (`manifest.json`).
//!
//! Frame paths are relative to the dataset root. Wall-clock information is
//! confined to the optional `metadata` block, which [`DatasetManifest::content_hash`]
//! ignores.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::frame::{validate_frame, META_FILE};
use crate::deflection::ProjectionModel;
use crate::error::{Error, Result};
use crate::geometry::SensorIntrinsics;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub sequences: Vec<SequenceRecord>,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<ManifestMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    pub n_frames: usize,
    pub intrinsics: SensorIntrinsics,
    #[serde(default)]
    pub model: ProjectionModel,
    pub frames: Vec<String>,
    #[serde(default)]
    pub derived_sensors: Vec<DerivedSensor>,
    pub seed: u64,
    pub scene_hash: String,
}

/// A re-simulated sensor and the frames produced for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedSensor {
    pub name: String,
    pub intrinsics: SensorIntrinsics,
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Record of a seeded uniform draw over grid targets, one draw per
/// `(sequence id, target name)` entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingRecord {
    pub method: String,
    pub seed: u64,
    pub draws: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestMetadata {
    pub created_unix: u64,
    pub generator: String,
}

impl DatasetManifest {
    pub fn new(sequences: Vec<SequenceRecord>, split: Split) -> Self {
        DatasetManifest {
            format_version: MANIFEST_VERSION,
            sequences,
            split,
            sampling: None,
            metadata: None,
        }
    }

    pub fn sequence(&self, id: &str) -> Option<&SequenceRecord> {
        self.sequences.iter().find(|s| s.id == id)
    }

    pub fn sequence_mut(&mut self, id: &str) -> Option<&mut SequenceRecord> {
        self.sequences.iter_mut().find(|s| s.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    /// SHA-256 over the manifest with `metadata` removed.
    pub fn content_hash(&self) -> String {
        let mut bare = self.clone();
        bare.metadata = None;
        hex::encode(Sha256::digest(bare.to_json().as_bytes()))
    }

    /// Every frame path referenced, source frames first.
    pub fn frame_paths(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for s in &self.sequences {
            out.extend(s.frames.iter().map(String::as_str));
            for d in &s.derived_sensors {
                out.extend(d.frames.iter().map(String::as_str));
            }
        }
        out
    }

    /// Internal consistency checks that need no file access.
    pub fn validate_structure(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.format_version != MANIFEST_VERSION {
            problems.push(format!("format_version {} is not {MANIFEST_VERSION}", self.format_version));
        }
        let mut ids = BTreeSet::new();
        for s in &self.sequences {
            if !ids.insert(s.id.as_str()) {
                problems.push(format!("duplicate sequence id {}", s.id));
            }
            if s.frames.len() != s.n_frames {
                problems.push(format!("{}: n_frames {} but {} frames listed", s.id, s.n_frames, s.frames.len()));
            }
            let mut names = BTreeSet::new();
            for d in &s.derived_sensors {
                if !names.insert(d.name.as_str()) {
                    problems.push(format!("{}: duplicate derived sensor {}", s.id, d.name));
                }
                if d.frames.len() != s.n_frames {
                    problems.push(format!(
                        "{}/{}: {} frames for a {}-frame sequence",
                        s.id,
                        d.name,
                        d.frames.len(),
                        s.n_frames
                    ));
                }
            }
        }
        let train: BTreeSet<_> = self.split.train.iter().map(String::as_str).collect();
        for id in self.split.train.iter().chain(&self.split.test) {
            if !ids.contains(id.as_str()) {
                problems.push(format!("split references unknown sequence {id}"));
            }
        }
        for id in &self.split.test {
            if train.contains(id.as_str()) {
                problems.push(format!("sequence {id} is in both train and test"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Structure checks plus existence and header validation of every
    /// referenced frame under `root`.
    pub fn validate_files(&self, root: &Path) -> Result<()> {
        let mut problems = match self.validate_structure() {
            Ok(()) => Vec::new(),
            Err(Error::Validation(p)) => p,
            Err(e) => return Err(e),
        };
        for rel in self.frame_paths() {
            let dir = root.join(rel);
            if !dir.join(META_FILE).is_file() {
                problems.push(format!("missing frame {}", dir.display()));
                continue;
            }
            problems.extend(validate_frame(&dir));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

pub fn sequence_id(index: usize) -> String {
    format!("seq_{index:03}")
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:04}")
}

pub fn write_manifest(path: &Path, m: &DatasetManifest) -> Result<()> {
    super::atomic_write(path, m.to_json().as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| {
        Error::format(path, None, format!("line {} column {}: {e}", e.line(), e.column()))
    })?;
    if m.format_version != MANIFEST_VERSION {
        return Err(Error::format(
            path,
            None,
            format!("format_version {} is not {MANIFEST_VERSION}", m.format_version),
        ));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::intrinsics_from_fov;

    fn seq(i: usize, n_frames: usize, derived: usize) -> SequenceRecord {
        let k = intrinsics_from_fov(std::f64::consts::TAU, std::f64::consts::PI, 2048, 1024, 120.0).unwrap();
        let id = sequence_id(i);
        let frames: Vec<String> = (0..n_frames).map(|f| format!("{id}/{}", frame_name(f))).collect();
        SequenceRecord {
            derived_sensors: (0..derived)
                .map(|d| DerivedSensor {
                    name: format!("t{d}"),
                    intrinsics: k,
                    frames: (0..n_frames).map(|f| format!("{id}/t{d}/{}", frame_name(f))).collect(),
                })
                .collect(),
            id,
            n_frames,
            intrinsics: k,
            model: ProjectionModel::Spherical,
            frames,
            seed: 7,
            scene_hash: "00".into(),
        }
    }

    fn split(n: usize, n_test: usize) -> Split {
        Split {
            train: (0..n - n_test).map(sequence_id).collect(),
            test: (n - n_test..n).map(sequence_id).collect(),
        }
    }

    #[test]
    fn desk_scale_manifest_validates_and_round_trips() {
        let m = DatasetManifest::new((0..4).map(|i| seq(i, 2, 0)).collect(), split(4, 1));
        m.validate_structure().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        write_manifest(&path, &m).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), m);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.find("\"format_version\"").unwrap() < text.find("\"sequences\"").unwrap());
    }

    #[test]
    fn full_scale_manifest() {
        let m = DatasetManifest::new((0..24).map(|i| seq(i, 1, 27)).collect(), split(24, 9));
        m.validate_structure().unwrap();
        assert_eq!((m.split.train.len(), m.split.test.len()), (15, 9));
        assert_eq!(m.frame_paths().len(), 24 * 28);
    }

    #[test]
    fn dangling_frame_is_listed() {
        let m = DatasetManifest::new(vec![seq(0, 1, 0)], split(1, 0));
        let dir = tempfile::tempdir().unwrap();
        match m.validate_files(dir.path()) {
            Err(Error::Validation(p)) => {
                assert_eq!(p.len(), 1);
                assert!(p[0].contains("seq_000/frame_0000"), "{p:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        let mut m = DatasetManifest::new(vec![seq(0, 2, 1), seq(0, 2, 0)], split(1, 0));
        m.sequences[0].derived_sensors[0].frames.pop();
        m.split.test.push("seq_000".into());
        m.split.test.push("seq_404".into());
        let Err(Error::Validation(p)) = m.validate_structure() else { panic!() };
        assert_eq!(p.len(), 4, "{p:?}");
    }

    #[test]
    fn version_mismatch_on_read_and_hash_ignores_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let mut m = DatasetManifest::new(vec![], Split::default());
        let h = m.content_hash();
        m.metadata = Some(ManifestMetadata { created_unix: 1, generator: "x".into() });
        assert_eq!(m.content_hash(), h);
        m.format_version = 2;
        std::fs::write(&path, m.to_json()).unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::Format { .. })));
    }
}
