mod eval;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use deflekt::dataio::config::SensorConfig;
use deflekt::dataio::frame::{self, FrameOptions, OutputFormat};
use deflekt::dataio::manifest::{self, ManifestMetadata, MANIFEST_FILE};
use deflekt::dataio::{self as io, npy, ChannelKind};
use deflekt::dataset::{self, TargetChoice};
use deflekt::deflection::{build_pyramid, deflection_image, DeflectionImage, ProjectionModel};
use deflekt::geometry::SensorIntrinsics;
use deflekt::raster::rasterize;
use deflekt::resim::{enumerate_grid, SensorGridSpec};
use deflekt::synth::{gt_masks, SceneDescription};
use deflekt::Error;
use serde_json::json;

use crate::{Command, DeflectArgs, GridArgs, ProjectArgs, ResimArgs, SynthArgs, ValidateArgs};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Project(a) => project(a),
        Command::Deflect(a) => deflect(a, false),
        Command::Pyramid(a) => deflect(a, true),
        Command::Resim(a) => resim(a),
        Command::Grid(a) => grid(a),
        Command::Eval(a) => eval::run(a),
        Command::Validate(a) => validate(a),
    }
}

/// Exit status for a failure: 2 configuration, 3 format/validation,
/// 4 undefined metric, 1 anything else.
pub fn classify(e: &anyhow::Error) -> (&'static str, u8) {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::InvalidArgument(_)) => ("invalid-argument", 2),
        Some(Error::Format { .. }) => ("format", 3),
        Some(Error::Validation(_)) => ("validation", 3),
        Some(Error::UndefinedMetric(_)) => ("undefined-metric", 4),
        Some(Error::Io { .. }) => ("io", 1),
        None => ("other", 1),
    }
}

pub fn report_failure(kind: &str, message: &str, code: u8) -> ExitCode {
    let body = json!({ "error": { "kind": kind, "message": message }, "exit_code": code });
    eprintln!("{body}");
    ExitCode::from(code)
}

pub fn report_error(e: &anyhow::Error) -> ExitCode {
    let (kind, code) = classify(e);
    let mut body = json!({ "error": { "kind": kind, "message": format!("{e:#}") }, "exit_code": code });
    if let Some(Error::Validation(problems)) = e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        body["error"]["problems"] = json!(problems);
    }
    eprintln!("{body}");
    ExitCode::from(code)
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidArgument(msg.into()).into()
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config_error(format!("{what} {} does not exist", path.display())))
    }
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(config_error(format!("{what} {} is not a directory", path.display())))
    }
}

fn load_sensor(path: Option<&Path>) -> Result<(SensorIntrinsics, ProjectionModel)> {
    let cfg = match path {
        Some(p) => {
            require_file(p, "sensor config")?;
            SensorConfig::load(p)?
        }
        None => SensorConfig::full_dome(),
    };
    Ok((cfg.intrinsics()?, cfg.model))
}

fn load_grid(path: Option<&Path>) -> Result<SensorGridSpec> {
    match path {
        Some(p) => {
            require_file(p, "grid config")?;
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| config_error(format!("grid config {}: {e}", p.display())))
        }
        None => Ok(SensorGridSpec::standard()),
    }
}

/// Writes to stdout, treating a closed pipe as success.
pub fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn print_json(v: &serde_json::Value) {
    emit(&(serde_json::to_string_pretty(v).expect("json value serializes") + "\n"));
}

fn synth(a: SynthArgs) -> Result<()> {
    let (k, model) = load_sensor(a.sensor.sensor.as_deref())?;
    let scenes: Vec<SceneDescription> = if a.scene.is_empty() {
        if a.sequences == 0 || a.frames == 0 {
            return Err(config_error("--sequences and --frames must be positive"));
        }
        (0..a.sequences)
            .map(|i| SceneDescription::random(a.seed.wrapping_add(i as u64), a.frames))
            .collect()
    } else {
        a.scene
            .iter()
            .map(|p| {
                require_file(p, "scene config")?;
                Ok(SceneDescription::load(p)?)
            })
            .collect::<Result<_>>()?
    };
    let n_test = a.test_sequences.unwrap_or_else(|| dataset::default_test_count(scenes.len()));
    let opts = FrameOptions { format: a.format.into(), model };
    let mut m = dataset::synthesize(&scenes, &k, &a.out, n_test, opts)?;
    if !a.no_metadata {
        m.metadata = Some(ManifestMetadata {
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            generator: format!("deflekt {}", env!("CARGO_PKG_VERSION")),
        });
        manifest::write_manifest(&a.out.join(MANIFEST_FILE), &m)?;
    }
    print_json(&json!({
        "dataset": a.out,
        "sequences": m.sequences.len(),
        "frames": m.sequences.iter().map(|s| s.n_frames).sum::<usize>(),
        "train": m.split.train,
        "test": m.split.test,
    }));
    Ok(())
}

fn project(a: ProjectArgs) -> Result<()> {
    require_file(&a.input, "point cloud")?;
    let labels = a.labels.clone().unwrap_or_else(|| a.input.with_file_name(frame::LABELS_FILE));
    require_file(&labels, "label file")?;
    let (k, model) = load_sensor(a.sensor.sensor.as_deref())?;
    let pc = io::read_cloud(&a.input, &labels)?;
    let r = rasterize(&pc, &k)?;
    let key = a.key.clone().unwrap_or_else(|| {
        a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "frame".into())
    });
    let masks = gt_masks(&r.image);
    let meta = frame::write_frame(&a.out, &key, &r.image, Some(&pc), &masks, FrameOptions { format: a.format.into(), model })?;
    print_json(&json!({
        "frame": a.out,
        "points": pc.len(),
        "valid_pixels": meta.valid_pixels,
        "off_frame": r.off_frame,
        "out_of_range": r.out_of_range,
        "instances": masks.len(),
    }));
    Ok(())
}

fn write_deflection(out: &Path, name: &str, d: &DeflectionImage, format: OutputFormat) -> Result<PathBuf> {
    let path = out.join(format!("{name}.npy"));
    if format.wants_npy() {
        io::write_channel(&path, ChannelKind::Deflection, &io::deflection_array(d))?;
    }
    if format.wants_png() {
        io::png::write_png(&out.join(format!("{name}.png")), &d.to_f32(), d.height(), d.width(), d.max() as f32)?;
    }
    Ok(path)
}

fn deflect(a: DeflectArgs, pyramid: bool) -> Result<()> {
    let (k, model) = load_sensor(a.sensor.sensor.as_deref())?;
    let model = a.model.map(Into::into).unwrap_or(model);
    let format: OutputFormat = a.format.into();
    let levels = if pyramid { build_pyramid(&k, model)?.levels().to_vec() } else { vec![deflection_image(&k, model)] };
    let mut files = Vec::new();
    for (i, d) in levels.iter().enumerate() {
        write_deflection(&a.out, &frame::pyramid_level_name(i), d, format)?;
        files.push(json!({
            "level": i,
            "name": frame::pyramid_level_name(i),
            "shape": [d.height(), d.width()],
            "argmin": d.argmin(),
            "max_rad": d.max(),
        }));
    }
    let sensor = serde_json::to_string_pretty(&SensorConfig::from_intrinsics(&k))? + "\n";
    io::atomic_write(&a.out.join("sensor.json"), sensor.as_bytes())?;
    print_json(&json!({ "out": a.out, "model": model, "levels": files }));
    Ok(())
}

fn resim(a: ResimArgs) -> Result<()> {
    require_dir(&a.input, "dataset")?;
    require_file(&a.input.join(MANIFEST_FILE), "manifest")?;
    let spec = load_grid(a.grid.as_deref())?;
    let m = manifest::read_manifest(&a.input.join(MANIFEST_FILE))?;
    let ids = dataset::SplitSelection::from(a.split).ids(&m);
    let Some(first) = ids.first() else {
        return Err(config_error("the selected split has no sequences"));
    };
    let source = m.sequence(first).expect("split ids exist").intrinsics;
    if let Some(odd) = ids.iter().find(|id| m.sequence(id).map(|s| s.intrinsics) != Some(source)) {
        return Err(config_error(format!("sequence {odd} uses a different source sensor than {first}")));
    }
    let targets = enumerate_grid(&spec, &source)?;
    let choice = match a.sample {
        Some(count) => TargetChoice::Sample { count, seed: a.seed },
        None => TargetChoice::Full,
    };
    let m = dataset::resimulate(&a.input, &targets, a.split.into(), choice, a.format.into())?;
    let derived: usize = ids
        .iter()
        .filter_map(|id| m.sequence(id))
        .map(|s| s.derived_sensors.len())
        .sum();
    print_json(&json!({
        "dataset": a.input,
        "targets": targets.iter().map(|t| &t.name).collect::<Vec<_>>(),
        "sequences": ids,
        "derived_sensors": derived,
    }));
    Ok(())
}

fn grid(a: GridArgs) -> Result<()> {
    let spec = load_grid(a.grid.as_deref())?;
    let (source, _) = load_sensor(a.sensor.sensor.as_deref())?;
    let targets = enumerate_grid(&spec, &source)?;
    let text = serde_json::to_string_pretty(&targets)? + "\n";
    match a.out {
        Some(p) => io::atomic_write(&p, text.as_bytes())?,
        None => emit(&text),
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let p = &a.input;
    if p.is_file() && p.extension().is_some_and(|e| e == "npy") {
        let arr = npy::read_npy(p)?;
        print_json(&json!({ "ok": true, "kind": "npy", "descr": arr.data.descr(), "shape": [arr.height, arr.width] }));
    } else if p.join(MANIFEST_FILE).is_file() {
        let m = manifest::read_manifest(&p.join(MANIFEST_FILE))?;
        m.validate_files(p)?;
        print_json(&json!({
            "ok": true,
            "kind": "dataset",
            "sequences": m.sequences.len(),
            "frames": m.frame_paths().len(),
            "content_hash": m.content_hash(),
        }));
    } else if p.join(frame::META_FILE).is_file() {
        let problems = frame::validate_frame(p);
        if !problems.is_empty() {
            return Err(Error::Validation(problems).into());
        }
        print_json(&json!({ "ok": true, "kind": "frame" }));
    } else {
        return Err(config_error(format!(
            "{} is neither a dataset, a frame directory nor an .npy file",
            p.display()
        )));
    }
    Ok(())
}
