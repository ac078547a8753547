//! COCO-style mean average recall over instance masks.
//!
//! Recall is computed per class and IoU threshold over all frames, averaged
//! over thresholds (AR) and then over the classes that have ground truth
//! (mAR). No area-range stratification is applied.

mod mask;
pub mod records;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mask::{mask_iou, Mask, Rle};

/// A scored instance mask. Ground truth uses score 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub mask: Mask,
    pub class: u16,
    pub score: f64,
}

/// Detections keyed by frame identifier.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    frames: BTreeMap<String, Vec<Detection>>,
}

impl DetectionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a detection, keeping insertion order within the frame.
    pub fn push(&mut self, frame: impl Into<String>, det: Detection) -> Result<()> {
        if det.mask.is_empty() {
            return Err(Error::invalid("detection masks must be nonempty"));
        }
        if !(0.0..=1.0).contains(&det.score) {
            return Err(Error::invalid(format!("score {} outside [0, 1]", det.score)));
        }
        let list = self.frames.entry(frame.into()).or_default();
        if let Some(first) = list.first() {
            if (first.mask.height(), first.mask.width()) != (det.mask.height(), det.mask.width()) {
                return Err(Error::invalid("all masks of a frame must share the image grid"));
            }
        }
        list.push(det);
        Ok(())
    }

    /// Ensures a frame is present even if it has no detections.
    pub fn touch(&mut self, frame: impl Into<String>) {
        self.frames.entry(frame.into()).or_default();
    }

    pub fn frame(&self, frame: &str) -> &[Detection] {
        self.frames.get(frame).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn frames(&self) -> impl Iterator<Item = (&str, &[Detection])> {
        self.frames.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Subset of frames accepted by `keep`.
    pub fn filter_frames(&self, mut keep: impl FnMut(&str) -> bool) -> DetectionSet {
        DetectionSet {
            frames: self
                .frames
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// IoU thresholds and detection cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallParams {
    pub thresholds: Vec<f64>,
    pub max_det: usize,
}

impl Default for RecallParams {
    /// Thresholds 0.50, 0.55, …, 0.95 (exact decimals) and 100 detections.
    fn default() -> Self {
        RecallParams {
            thresholds: (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect(),
            max_det: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecall {
    pub class: u16,
    pub n_gt: usize,
    /// Detections considered after per-frame truncation.
    pub n_det: usize,
    /// Matched ground truth per threshold.
    pub matches: Vec<usize>,
    /// Recall per threshold.
    pub recall: Vec<f64>,
    /// Mean of `recall`.
    pub ar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArReport {
    pub thresholds: Vec<f64>,
    pub max_det: usize,
    pub classes: Vec<ClassRecall>,
    /// Mean recall over classes at each threshold.
    pub recall_by_threshold: Vec<f64>,
    pub mar: f64,
    pub n_gt: usize,
    pub n_det: usize,
}

/// Greedy per-frame matching for one class and threshold. `ious[d][g]`
/// holds IoU of detection `d` (already score-sorted) with GT `g`.
fn greedy_matches(ious: &[Vec<f64>], n_gt: usize, threshold: f64) -> usize {
    let mut taken = vec![false; n_gt];
    let mut matched = 0;
    for row in ious {
        let mut best: Option<usize> = None;
        for (g, &iou) in row.iter().enumerate() {
            if taken[g] {
                continue;
            }
            if best.is_none_or(|b| iou > row[b]) {
                best = Some(g);
            }
        }
        if let Some(g) = best {
            if row[g] >= threshold {
                taken[g] = true;
                matched += 1;
            }
        }
    }
    matched
}

pub fn average_recall(gt: &DetectionSet, pred: &DetectionSet, params: &RecallParams) -> Result<ArReport> {
    if params.thresholds.is_empty() {
        return Err(Error::invalid("at least one IoU threshold is required"));
    }
    if params.thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("IoU thresholds must be sorted ascending"));
    }
    if params.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::invalid("IoU thresholds must lie in [0, 1]"));
    }
    if params.max_det == 0 {
        return Err(Error::invalid("max_det must be positive"));
    }

    let classes: BTreeSet<u16> = gt.frames().flat_map(|(_, d)| d.iter().map(|x| x.class)).collect();
    if classes.is_empty() {
        return Err(Error::UndefinedMetric("ground truth contains no instances".into()));
    }
    let frames: BTreeSet<&str> = gt.frames().map(|(f, _)| f).collect();
    let nt = params.thresholds.len();

    let mut report_classes = Vec::with_capacity(classes.len());
    for &class in &classes {
        let mut matches = vec![0usize; nt];
        let (mut n_gt, mut n_det) = (0, 0);
        for &frame in &frames {
            let gts: Vec<&Detection> = gt.frame(frame).iter().filter(|d| d.class == class).collect();
            let mut dts: Vec<&Detection> = pred.frame(frame).iter().filter(|d| d.class == class).collect();
            // Stable sort keeps insertion order among equal scores.
            dts.sort_by(|a, b| b.score.total_cmp(&a.score));
            dts.truncate(params.max_det);
            n_gt += gts.len();
            n_det += dts.len();
            if gts.is_empty() || dts.is_empty() {
                continue;
            }
            let ious = dts
                .iter()
                .map(|d| gts.iter().map(|g| mask_iou(&d.mask, &g.mask)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            for (t, &thr) in params.thresholds.iter().enumerate() {
                matches[t] += greedy_matches(&ious, gts.len(), thr);
            }
        }
        let recall: Vec<f64> = matches.iter().map(|&m| m as f64 / n_gt as f64).collect();
        let ar = recall.iter().sum::<f64>() / nt as f64;
        report_classes.push(ClassRecall {
            class,
            n_gt,
            n_det,
            matches,
            recall,
            ar,
        });
    }

    let nc = report_classes.len() as f64;
    let recall_by_threshold = (0..nt)
        .map(|t| report_classes.iter().map(|c| c.recall[t]).sum::<f64>() / nc)
        .collect();
    let mar = report_classes.iter().map(|c| c.ar).sum::<f64>() / nc;
    Ok(ArReport {
        thresholds: params.thresholds.clone(),
        max_det: params.max_det,
        n_gt: report_classes.iter().map(|c| c.n_gt).sum(),
        n_det: pred.len(),
        classes: report_classes,
        recall_by_threshold,
        mar,
    })
}

/// Subset of a frame key: everything before the final path component, so
/// `seq_000/v45_h64_w1024/frame_0003` belongs to `seq_000/v45_h64_w1024`.
pub fn subset_key(frame: &str) -> &str {
    frame.rsplit_once('/').map_or("", |(head, _)| head)
}

/// mAR of one subset; `mar` is `None` when the subset has no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRecall {
    pub subset: String,
    pub n_frames: usize,
    pub n_gt: usize,
    pub n_det: usize,
    pub mar: Option<f64>,
}

/// Evaluates every subset of the ground-truth frames independently.
pub fn recall_by_subset(gt: &DetectionSet, pred: &DetectionSet, params: &RecallParams) -> Result<Vec<SubsetRecall>> {
    let subsets: BTreeSet<&str> = gt.frames().map(|(f, _)| subset_key(f)).collect();
    let mut out = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let g = gt.filter_frames(|f| subset_key(f) == subset);
        let p = pred.filter_frames(|f| g.frames.contains_key(f));
        let (n_gt, n_det, mar) = match average_recall(&g, &p, params) {
            Ok(r) => (r.n_gt, r.n_det, Some(r.mar)),
            Err(Error::UndefinedMetric(_)) => (0, p.len(), None),
            Err(e) => return Err(e),
        };
        out.push(SubsetRecall {
            subset: subset.to_string(),
            n_frames: g.frames.len(),
            n_gt,
            n_det,
            mar,
        });
    }
    Ok(out)
}
