use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use deflekt::dataio::atomic_write;
use deflekt::dataio::manifest::MANIFEST_FILE;
use deflekt::dataset::{collect_masks, SplitSelection};
use deflekt::eval::{average_recall, records, recall_by_subset, DetectionSet, RecallParams};
use serde_json::json;

use crate::EvalArgs;

fn load_set(path: &Path, split: SplitSelection, what: &str) -> Result<DetectionSet> {
    if path.join(MANIFEST_FILE).is_file() {
        Ok(collect_masks(path, split)?)
    } else if path.is_file() {
        Ok(records::read_jsonl(path)?)
    } else {
        Err(deflekt::Error::InvalidArgument(format!(
            "{what} {} is neither a dataset nor a JSONL file",
            path.display()
        ))
        .into())
    }
}

pub fn run(a: EvalArgs) -> Result<()> {
    let split: SplitSelection = a.split.into();
    let gt = load_set(&a.gt, split, "ground truth")?;
    let all_pred = load_set(&a.pred, split, "predictions")?;
    let pred = all_pred.filter_frames(|f| gt.frames().any(|(g, _)| g == f));
    let dropped = all_pred.len() - pred.len();
    if dropped > 0 {
        log::warn!("ignoring {dropped} predictions on frames without ground truth");
    }
    let params = RecallParams { max_det: a.max_det, ..RecallParams::default() };
    let report = average_recall(&gt, &pred, &params)?;
    let subsets = recall_by_subset(&gt, &pred, &params)?;

    let mut csv = String::from("subset,n_frames,n_gt,n_det,mar,status\n");
    for s in &subsets {
        let (mar, status) = match s.mar {
            Some(m) => (m.to_string(), "ok"),
            None => (String::new(), "undefined"),
        };
        writeln!(csv, "{},{},{},{},{},{}", s.subset, s.n_frames, s.n_gt, s.n_det, mar, status).unwrap();
    }
    let body = json!({
        "mar": report.mar,
        "n_frames": gt.frames().count(),
        "ignored_predictions": dropped,
        "overall": report,
        "subsets": subsets,
    });
    atomic_write(&a.out.join("report.json"), (serde_json::to_string_pretty(&body)? + "\n").as_bytes())?;
    atomic_write(&a.out.join("subsets.csv"), csv.as_bytes())?;
    super::emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(&json!({
            "mar": report.mar,
            "subsets": subsets.len(),
            "undefined_subsets": subsets.iter().filter(|s| s.mar.is_none()).count(),
            "report": a.out.join("report.json"),
        }))?
    ));
    Ok(())
}
