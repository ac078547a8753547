//! Dataset-level orchestration: synthesize sequences, re-simulate derived
//! sensors over a grid, and gather ground truth for evaluation.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::frame::{read_frame_image, read_frame_masks, write_frame, FrameOptions, OutputFormat};
use crate::dataio::manifest::{
    frame_name, read_manifest, write_manifest, DatasetManifest, DerivedSensor, SamplingRecord, Split, MANIFEST_FILE,
};
use crate::error::{Error, Result};
use crate::eval::DetectionSet;
use crate::resim::{derive_sensor, sample_targets, GridTarget};
use crate::synth::{generate_sequence, gt_masks, SceneDescription};
use crate::geometry::SensorIntrinsics;

/// Default number of held-out sequences: 9 of every 24, at least one when
/// more than one sequence exists.
pub fn default_test_count(n_sequences: usize) -> usize {
    if n_sequences > 1 {
        (n_sequences * 9 / 24).max(1)
    } else {
        0
    }
}

/// Renders one sequence per scene under `root` and writes the manifest. The
/// last `n_test` sequences form the test split.
pub fn synthesize(
    scenes: &[SceneDescription],
    k: &SensorIntrinsics,
    root: &Path,
    n_test: usize,
    opts: FrameOptions,
) -> Result<DatasetManifest> {
    if n_test > scenes.len() {
        return Err(Error::invalid(format!(
            "{n_test} test sequences requested from {} sequences",
            scenes.len()
        )));
    }
    let records = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| generate_sequence(scene, k, root, i, opts))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let split = Split {
        train: ids[..ids.len() - n_test].to_vec(),
        test: ids[ids.len() - n_test..].to_vec(),
    };
    let manifest = DatasetManifest::new(records, split);
    manifest.validate_structure()?;
    write_manifest(&root.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Which sequences an operation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSelection {
    Train,
    #[default]
    Test,
    All,
}

impl SplitSelection {
    pub fn ids(self, m: &DatasetManifest) -> Vec<String> {
        match self {
            SplitSelection::Train => m.split.train.clone(),
            SplitSelection::Test => m.split.test.clone(),
            SplitSelection::All => m.sequences.iter().map(|s| s.id.clone()).collect(),
        }
    }
}

/// Grid coverage for [`resimulate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetChoice {
    /// Every grid target for every sequence.
    Full,
    /// `count` seeded uniform draws per sequence (with replacement).
    Sample { count: usize, seed: u64 },
}

/// Derives every selected sequence's frames for the chosen targets. Frames
/// land in `<seq>/<target>/frame_<k>`; the manifest at `root` is updated.
pub fn resimulate(
    root: &Path,
    targets: &[GridTarget],
    selection: SplitSelection,
    choice: TargetChoice,
    format: OutputFormat,
) -> Result<DatasetManifest> {
    let manifest_path = root.join(MANIFEST_FILE);
    let mut manifest = read_manifest(&manifest_path)?;
    let ids = selection.ids(&manifest);
    let mut sampling = None;
    let per_sequence: Vec<Vec<usize>> = match choice {
        TargetChoice::Full => vec![(0..targets.len()).collect(); ids.len()],
        TargetChoice::Sample { count, seed } => {
            let draws = sample_targets(targets.len(), count * ids.len(), seed)?;
            let chunks: Vec<Vec<usize>> = if count == 0 {
                vec![Vec::new(); ids.len()]
            } else {
                draws.chunks(count).map(<[usize]>::to_vec).collect()
            };
            sampling = Some(SamplingRecord {
                method: "uniform".into(),
                seed,
                draws: ids
                    .iter()
                    .zip(&chunks)
                    .flat_map(|(id, c)| c.iter().map(move |&t| (id.clone(), targets[t].name.clone())))
                    .collect(),
            });
            chunks
        }
    };

    for (id, chosen) in ids.iter().zip(per_sequence) {
        let unique: Vec<&GridTarget> = chosen.into_iter().collect::<BTreeSet<_>>().into_iter().map(|t| &targets[t]).collect();
        let seq = manifest
            .sequence(id)
            .ok_or_else(|| Error::invalid(format!("unknown sequence {id}")))?
            .clone();
        let mut derived: Vec<DerivedSensor> = unique
            .iter()
            .map(|t| DerivedSensor { name: t.name.clone(), intrinsics: t.intrinsics, frames: Vec::new() })
            .collect();
        for (f, src_rel) in seq.frames.iter().enumerate() {
            let (meta, img) = read_frame_image(&root.join(src_rel))?;
            let opts = FrameOptions { format, model: meta.model };
            let rels = unique
                .par_iter()
                .map(|t| {
                    let out = derive_sensor(&img, &t.intrinsics)?;
                    let rel = format!("{id}/{}/{}", t.name, frame_name(f));
                    write_frame(&root.join(&rel), &rel, &out, None, &gt_masks(&out), opts)?;
                    Ok(rel)
                })
                .collect::<Result<Vec<_>>>()?;
            for (d, rel) in derived.iter_mut().zip(rels) {
                d.frames.push(rel);
            }
            log::info!("{src_rel}: derived {} sensors", unique.len());
        }
        let slot = manifest.sequence_mut(id).expect("sequence exists");
        for d in derived {
            match slot.derived_sensors.iter_mut().find(|e| e.name == d.name) {
                Some(existing) => *existing = d,
                None => slot.derived_sensors.push(d),
            }
        }
    }
    if sampling.is_some() {
        manifest.sampling = sampling;
    }
    manifest.validate_structure()?;
    write_manifest(&manifest_path, &manifest)?;
    Ok(manifest)
}

/// Frames evaluated for a sequence: its derived-sensor frames when any
/// exist, otherwise its source frames.
pub fn evaluation_frames(m: &DatasetManifest, selection: SplitSelection) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for id in selection.ids(m) {
        let seq = m.sequence(&id).ok_or_else(|| Error::invalid(format!("unknown sequence {id}")))?;
        if seq.derived_sensors.is_empty() {
            out.extend(seq.frames.iter().cloned());
        } else {
            for d in &seq.derived_sensors {
                out.extend(d.frames.iter().cloned());
            }
        }
    }
    Ok(out)
}

/// Ground-truth masks of the evaluation frames. Frames without instances
/// are still present (as empty entries).
pub fn collect_masks(root: &Path, selection: SplitSelection) -> Result<DetectionSet> {
    let m = read_manifest(&root.join(MANIFEST_FILE))?;
    let frames = evaluation_frames(&m, selection)?;
    let mut set = DetectionSet::new();
    for rel in frames {
        let masks = read_frame_masks(&root.join(&rel))?;
        set.touch(rel.clone());
        for (frame, dets) in masks.frames() {
            if frame != rel {
                return Err(Error::format(
                    root.join(&rel),
                    None,
                    format!("masks.jsonl names frame {frame}"),
                ));
            }
            for d in dets {
                set.push(rel.clone(), d.clone())?;
            }
        }
    }
    Ok(set)
}
