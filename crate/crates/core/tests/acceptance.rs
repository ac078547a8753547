//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails. Tolerances and runtime budgets are the
//! constants below.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use deflekt::dataio::cloud::{decode_cloud, encode_cloud, pack_label};
use deflekt::dataio::frame::{FrameOptions, OutputFormat};
use deflekt::dataio::manifest::{DatasetManifest, MANIFEST_FILE};
use deflekt::dataio::npy::{self, NpyArray, NpyData};
use deflekt::dataio::atomic_write;
use deflekt::dataset::{self, SplitSelection, TargetChoice};
use deflekt::deflection::{deflection_at, deflection_image, normed_distance, ProjectionModel};
use deflekt::eval::{average_recall, recall_by_subset, subset_key, Detection, DetectionSet, Mask, RecallParams};
use deflekt::geometry::{
    cart_to_spherical, intrinsics_from_fov, pixel_center, project, unproject, LabeledPointCloud, Pixel,
    SensorIntrinsics,
};
use deflekt::raster::rasterize;
use deflekt::resim::{crop_intrinsics, derive_sensor, enumerate_grid, nearest_source_index, SensorGridSpec};
use deflekt::synth::{ray_cast, SceneDescription};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ANGLE_TOL: f64 = 1e-9;
const ROUND_TRIP_REL_TOL: f64 = 1e-6;
const RESIM_RANGE_TOL_M: f64 = 1e-6;
const COINCIDENT_BEAM_TOL: f64 = 1e-9;
const COINCIDENT_FRACTION: f64 = 0.99;
const AR_TOL: f64 = 1e-12;
const MATCHER_TOL: f64 = 1e-12;

const ORACLE_PIXELS: usize = 10_000;
const ROUND_TRIP_POINTS: usize = 10_000;
const ZBUFFER_CLOUDS: usize = 100;
const ZBUFFER_MAX_POINTS: usize = 10_000;
const RESIM_SCENES: u64 = 5;
const MATCHER_CASES: usize = 1_000;

const BUDGET_ORACLE: Duration = Duration::from_secs(5);
const BUDGET_ROUND_TRIP: Duration = Duration::from_secs(1);
const BUDGET_ZBUFFER: Duration = Duration::from_secs(30);
const BUDGET_RESIM: Duration = Duration::from_secs(120);
const BUDGET_MAR: Duration = Duration::from_secs(10);

struct Verdict {
    ok: bool,
    detail: String,
}

impl Verdict {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Verdict { ok, detail: detail.into() }
    }
}

fn full_dome() -> SensorIntrinsics {
    intrinsics_from_fov(TAU, PI, 2048, 1024, 120.0).unwrap()
}

// ---------------------------------------------------------------------------
// Deflection oracle

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn random_pixel(rng: &mut ChaCha8Rng, k: &SensorIntrinsics) -> Pixel {
    Pixel { u: rng.gen_range(0.0..k.width() as f64), v: rng.gen_range(0.0..k.height() as f64) }
}

fn spherical_oracle(rng: &mut ChaCha8Rng, k: &SensorIntrinsics) -> (f64, usize) {
    let axis = Vector3::x();
    let (mut worst, mut within) = (0.0f64, 0);
    for _ in 0..ORACLE_PIXELS {
        let px = random_pixel(rng, k);
        let phi = (px.u - k.c_phi()) * k.delta_phi();
        let theta = (px.v - k.c_theta()) * k.delta_theta();
        let ray = Vector3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin());
        let err = (deflection_at(px, k, ProjectionModel::Spherical) - angle_between(&axis, &ray)).abs();
        worst = worst.max(err);
        within += usize::from(err <= ANGLE_TOL);
    }
    (worst, within)
}

fn camera_oracle(rng: &mut ChaCha8Rng, k: &SensorIntrinsics) -> (f64, usize) {
    let axis = Vector3::z();
    let (mut worst, mut within) = (0.0f64, 0);
    for _ in 0..ORACLE_PIXELS {
        let px = random_pixel(rng, k);
        let x = (px.u - k.c_phi()) * k.delta_phi();
        let y = (px.v - k.c_theta()) * k.delta_theta();
        let alpha = deflection_at(px, k, ProjectionModel::Camera);
        let angle_err = (alpha - angle_between(&axis, &Vector3::new(x, y, 1.0))).abs();
        let d = x.hypot(y);
        let tan_err = (normed_distance(alpha).unwrap() - d).abs() / d.max(1.0);
        let err = angle_err.max(tan_err);
        worst = worst.max(err);
        within += usize::from(err <= ANGLE_TOL);
    }
    (worst, within)
}

fn deflection_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = [
        ("360x180 2048x1024", full_dome(), false),
        ("360x90 512x64", intrinsics_from_fov(TAU, PI / 2.0, 512, 64, 120.0).unwrap(), false),
        ("pinhole 640x480 f=500", SensorIntrinsics::pinhole(640, 480, 500.0, 500.0, 320.0, 240.0, 120.0).unwrap(), true),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, k, camera) in cases {
        let (worst, within) = if camera { camera_oracle(&mut rng, &k) } else { spherical_oracle(&mut rng, &k) };
        ok &= within == ORACLE_PIXELS;
        parts.push(format!("{label}: max err {worst:.3e} rad, {within}/{ORACLE_PIXELS} within {ANGLE_TOL:e}"));
    }
    Verdict::new(ok, parts.join("; "))
}

// ---------------------------------------------------------------------------
// Round trip

fn round_trip() -> Verdict {
    let k = full_dome();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..ROUND_TRIP_POINTS {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(-PI..PI);
        let r: f64 = rng.gen_range(0.5..k.max_range());
        let s = (1.0 - z * z).sqrt();
        let p = Vector3::new(s * phi.cos(), s * phi.sin(), z) * r;
        let px = project(&cart_to_spherical(&p).unwrap(), &k);
        let back = unproject(px, r, &k).unwrap();
        worst = worst.max((back - p).norm() / p.norm());
    }
    Verdict::new(worst < ROUND_TRIP_REL_TOL, format!("max relative error {worst:.3e} over {ROUND_TRIP_POINTS} points"))
}

// ---------------------------------------------------------------------------
// Z-buffer

fn random_cloud(rng: &mut ChaCha8Rng) -> LabeledPointCloud {
    let n = rng.gen_range(1..=ZBUFFER_MAX_POINTS);
    let (mut pos, mut inten, mut sem, mut inst) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let p = if i > 0 && rng.gen_bool(0.15) {
            pos[rng.gen_range(0..i)]
        } else {
            let phi: f64 = rng.gen_range(-PI..PI);
            let theta: f64 = rng.gen_range(-0.35..0.35);
            let r: f64 = if rng.gen_bool(0.3) { rng.gen_range(1..20) as f64 } else { rng.gen_range(0.5..100.0) };
            Vector3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin()) * r
        };
        pos.push(p);
        inten.push(rng.gen::<f32>());
        sem.push(rng.gen_range(0..5));
        inst.push(rng.gen_range(0..50));
    }
    LabeledPointCloud::new(pos, inten, sem, inst).unwrap()
}

/// Sorts every returning point by (pixel, range, index) and keeps the first
/// entry of each pixel.
fn min_scan_oracle(pc: &LabeledPointCloud, k: &SensorIntrinsics) -> BTreeMap<usize, (f32, f32, u16, u32)> {
    let (w, h) = (k.width() as f64, k.height() as f64);
    let mut entries = Vec::new();
    for (i, p) in pc.positions().iter().enumerate() {
        let r = p.norm();
        if r > k.max_range() {
            continue;
        }
        let phi = p.y.atan2(p.x);
        let phi = if phi <= -PI { PI } else { phi };
        let theta = (p.z / r).asin();
        let u = (k.c_phi() + phi / k.delta_phi()).rem_euclid(w);
        let u = if u >= w { 0.0 } else { u };
        let v = k.c_theta() + theta / k.delta_theta();
        if !(0.0..h).contains(&v) {
            continue;
        }
        let pixel = v.floor() as usize * k.width() + u.floor() as usize;
        entries.push((pixel, r, i));
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = BTreeMap::new();
    for (pixel, r, i) in entries {
        out.entry(pixel).or_insert((r as f32, pc.intensity()[i], pc.semantic()[i], pc.instance()[i] as u32));
    }
    out
}

fn zbuffer() -> Verdict {
    let k = intrinsics_from_fov(TAU, 30f64.to_radians(), 512, 32, 80.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatched = Vec::new();
    let mut points = 0;
    for c in 0..ZBUFFER_CLOUDS {
        let pc = random_cloud(&mut rng);
        points += pc.len();
        let img = rasterize(&pc, &k).unwrap().image;
        let oracle = min_scan_oracle(&pc, &k);
        let agrees = (0..k.pixel_count()).all(|idx| {
            let got = (img.range()[idx], img.intensity()[idx], img.semantic()[idx], img.instance()[idx]);
            match oracle.get(&idx) {
                Some(&want) => got.0.to_bits() == want.0.to_bits() && got.1.to_bits() == want.1.to_bits() && got.2 == want.2 && got.3 == want.3,
                None => got.0 == -1.0,
            }
        });
        if !agrees {
            mismatched.push(c);
        }
    }
    Verdict::new(
        mismatched.is_empty(),
        format!("{}/{ZBUFFER_CLOUDS} clouds ({points} points) identical to the min-scan oracle; mismatches {mismatched:?}", ZBUFFER_CLOUDS - mismatched.len()),
    )
}

// ---------------------------------------------------------------------------
// Re-simulation against direct ray casting

fn resim_vs_direct() -> Verdict {
    let src_k = full_dome();
    let targets = enumerate_grid(&SensorGridSpec::standard(), &src_k).unwrap();
    let (mut pixels, mut coincident, mut agreeing, mut worst) = (0usize, 0usize, 0usize, 0.0f64);
    let mut per_target: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for seed in 0..RESIM_SCENES {
        let scene = SceneDescription::random(seed, 1);
        let src = ray_cast(&scene, 0, &src_k).unwrap();
        for t in &targets {
            let tk = &t.intrinsics;
            let derived = derive_sensor(&src, tk).unwrap();
            let direct = ray_cast(&scene, 0, tk).unwrap();
            let (crop_k, start) = crop_intrinsics(&src_k, tk.v_fov()).unwrap();
            let entry = per_target.entry(t.name.clone()).or_default();
            for row in 0..tk.height() {
                let src_row = start + nearest_source_index(row, crop_k.height(), tk.height());
                for col in 0..tk.width() {
                    let src_col = nearest_source_index(col, src_k.width(), tk.width());
                    let tp = pixel_center(row, col);
                    let sp = pixel_center(src_row, src_col);
                    let a = tk.back_project(tp.u, tp.v);
                    let b = src_k.back_project(sp.u, sp.v);
                    pixels += 1;
                    entry.1 += 1;
                    if (a[0] - b[0]).abs() > COINCIDENT_BEAM_TOL || (a[1] - b[1]).abs() > COINCIDENT_BEAM_TOL {
                        continue;
                    }
                    coincident += 1;
                    entry.0 += 1;
                    let (x, y) = (derived.get(row, col).range, direct.get(row, col).range);
                    let diff = if x < 0.0 || y < 0.0 { if x == y { 0.0 } else { f64::INFINITY } } else { (x as f64 - y as f64).abs() };
                    worst = worst.max(diff);
                    agreeing += usize::from(diff <= RESIM_RANGE_TOL_M);
                }
            }
        }
    }
    let fraction = coincident as f64 / pixels as f64;
    let full: Vec<&String> = per_target.iter().filter(|(_, (c, n))| c == n).map(|(k, _)| k).collect();
    let partial = per_target.values().filter(|(c, n)| *c > 0 && c < n).count();
    Verdict::new(
        fraction >= COINCIDENT_FRACTION && agreeing == coincident,
        format!(
            "{RESIM_SCENES} scenes x {} targets: coincident beams {coincident}/{pixels} ({:.4}%, need {:.0}%); \
             {agreeing}/{coincident} coincident beams within {RESIM_RANGE_TOL_M:e} m (max diff {worst:.3e} m); \
             fully coincident targets {full:?}, partially coincident {partial}",
            targets.len(),
            100.0 * fraction,
            100.0 * COINCIDENT_FRACTION
        ),
    )
}

// ---------------------------------------------------------------------------
// Grid and subset combinatorics

fn combinatorics() -> Verdict {
    let grid = enumerate_grid(&SensorGridSpec::standard(), &full_dome()).unwrap();
    let names: BTreeSet<&str> = grid.iter().map(|t| t.name.as_str()).collect();

    let dir = tempfile::tempdir().unwrap();
    let k = intrinsics_from_fov(TAU, PI / 2.0, 2048, 512, 120.0).unwrap();
    let scenes: Vec<_> = (0..9).map(|s| SceneDescription::random(100 + s, 1)).collect();
    dataset::synthesize(&scenes, &k, dir.path(), 9, FrameOptions::default()).unwrap();
    let targets = enumerate_grid(&SensorGridSpec::standard(), &k).unwrap();
    dataset::resimulate(dir.path(), &targets, SplitSelection::Test, TargetChoice::Full, OutputFormat::Npy).unwrap();
    let gt = dataset::collect_masks(dir.path(), SplitSelection::Test).unwrap();
    let subsets: BTreeSet<&str> = gt.frames().map(|(f, _)| subset_key(f)).collect();
    let scored = recall_by_subset(&gt, &gt, &RecallParams::default()).unwrap();
    Verdict::new(
        grid.len() == 27 && names.len() == 27 && subsets.len() == 243 && scored.len() == 243,
        format!(
            "grid {} configs ({} distinct names); 9 test sequences give {} subsets, {} scored",
            grid.len(),
            names.len(),
            subsets.len(),
            scored.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// Crop / deflection commutation

fn crop_commutation() -> Verdict {
    let k = full_dome();
    let (crop_k, start) = crop_intrinsics(&k, PI / 2.0).unwrap();
    let mut differing = 0;
    for model in [ProjectionModel::Spherical, ProjectionModel::Camera] {
        let whole = deflection_image(&k, model);
        let cropped = deflection_image(&crop_k, model);
        for row in 0..crop_k.height() {
            differing += cropped
                .row(row)
                .iter()
                .zip(whole.row(start + row))
                .filter(|(a, b)| a.to_bits() != b.to_bits())
                .count();
        }
    }
    Verdict::new(
        differing == 0 && crop_k.height() == 512 && start == 256,
        format!("rows {start}..{} of 1024, {differing} differing values across both models", start + crop_k.height()),
    )
}

// ---------------------------------------------------------------------------
// Mean average recall

fn mask_from(bits: &[bool], h: usize, w: usize) -> Mask {
    Mask::from_bools(h, w, bits).unwrap()
}

fn det(bits: &[bool], class: u16, score: f64) -> Detection {
    Detection { mask: mask_from(bits, 5, 5), class, score }
}

fn iou_bits(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    inter as f64 / union as f64
}

type Case = Vec<(Vec<bool>, u16, f64)>;

fn reference_mar(gt: &Case, pred: &Case, thresholds: &[f64]) -> Option<f64> {
    let classes: BTreeSet<u16> = gt.iter().map(|g| g.1).collect();
    if classes.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &c in &classes {
        let gts: Vec<&Vec<bool>> = gt.iter().filter(|g| g.1 == c).map(|g| &g.0).collect();
        let mut dts: Vec<&(Vec<bool>, u16, f64)> = pred.iter().filter(|d| d.1 == c).collect();
        dts.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
        let mut ar = 0.0;
        for &t in thresholds {
            let mut used = vec![false; gts.len()];
            let mut hits = 0;
            for d in &dts {
                let candidate = (0..gts.len())
                    .filter(|&g| !used[g])
                    .map(|g| (g, iou_bits(&d.0, gts[g])))
                    .fold(None::<(usize, f64)>, |acc, x| match acc {
                        Some(a) if a.1 >= x.1 => Some(a),
                        _ => Some(x),
                    });
                if let Some((g, iou)) = candidate {
                    if iou >= t {
                        used[g] = true;
                        hits += 1;
                    }
                }
            }
            ar += hits as f64 / gts.len() as f64;
        }
        total += ar / thresholds.len() as f64;
    }
    Some(total / classes.len() as f64)
}

fn random_case(rng: &mut ChaCha8Rng, n: usize) -> Case {
    (0..n)
        .map(|_| {
            let mut bits: Vec<bool> = (0..25).map(|_| rng.gen_bool(0.4)).collect();
            bits[rng.gen_range(0..25)] = true;
            (bits, rng.gen_range(1..=2), [0.3, 0.6, 0.9][rng.gen_range(0..3)])
        })
        .collect()
}

fn to_set(case: &Case) -> DetectionSet {
    let mut s = DetectionSet::new();
    s.touch("f");
    for (bits, class, score) in case {
        s.push("f", det(bits, *class, *score)).unwrap();
    }
    s
}

fn mean_average_recall() -> Verdict {
    let params = RecallParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut gt = DetectionSet::new();
    for f in 0..20 {
        for (bits, class, _) in random_case(&mut rng, 4) {
            gt.push(format!("f{f}"), det(&bits, class, 1.0)).unwrap();
        }
    }
    let perfect = average_recall(&gt, &gt, &params).unwrap().mar;

    let gt_bits: Vec<bool> = (0..25).map(|i| i < 5).collect();
    let pred_bits: Vec<bool> = (0..25).map(|i| i < 3).collect();
    let single = average_recall(
        &to_set(&vec![(gt_bits, 1, 1.0)]),
        &to_set(&vec![(pred_bits, 1, 0.8)]),
        &params,
    )
    .unwrap()
    .mar;

    let mut disagreements = 0;
    let mut defined = 0;
    for _ in 0..MATCHER_CASES {
        let n_gt = rng.gen_range(0..=5);
        let n_pred = rng.gen_range(0..=5);
        let (g, p) = (random_case(&mut rng, n_gt), random_case(&mut rng, n_pred));
        let want = reference_mar(&g, &p, &params.thresholds);
        let got = average_recall(&to_set(&g), &to_set(&p), &params).ok().map(|r| r.mar);
        defined += usize::from(want.is_some());
        let same = match (want, got) {
            (Some(a), Some(b)) => (a - b).abs() <= MATCHER_TOL,
            (None, None) => true,
            _ => false,
        };
        disagreements += usize::from(!same);
    }
    Verdict::new(
        perfect == 1.0 && (single - 0.3).abs() <= AR_TOL && disagreements == 0,
        format!(
            "pred=GT mAR {perfect}; IoU 0.6 single instance AR {single:.15}; \
             reference matcher disagreements {disagreements}/{MATCHER_CASES} ({defined} with ground truth)"
        ),
    )
}

// ---------------------------------------------------------------------------
// Golden fixtures

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}

fn expected_channels() -> Vec<(&'static str, NpyData)> {
    let idx = 0..32u32;
    vec![
        ("range.npy", NpyData::F32(idx.clone().map(|i| if i % 5 == 0 { -1.0 } else { 0.25 * i as f32 + 0.5 }).collect())),
        ("intensity.npy", NpyData::F32(idx.clone().map(|i| i as f32 / 32.0).collect())),
        ("semantic.npy", NpyData::U16(idx.clone().map(|i| (i % 5) as u16).collect())),
        ("instance.npy", NpyData::U32(idx.clone().map(|i| (i % 3) * 1000 + i / 8).collect())),
        ("deflection.npy", NpyData::F32(idx.map(|i| i as f32 * 0.125).collect())),
    ]
}

fn golden_fixtures() -> Verdict {
    let mut failures = Vec::new();
    for (name, data) in expected_channels() {
        let bytes = fixture(name);
        let decoded = npy::decode(&bytes, Path::new(name)).unwrap();
        let expected = NpyArray::new(4, 8, data).unwrap();
        if decoded != expected {
            failures.push(format!("{name}: decoded values differ"));
        }
        if npy::encode(&decoded) != bytes || npy::encode(&expected) != bytes {
            failures.push(format!("{name}: re-encoding is not byte-identical"));
        }
    }
    let (points, labels) = (fixture("cloud.bin"), fixture("labels.bin"));
    let pc = decode_cloud(&points, &labels, Path::new("cloud.bin"), Path::new("labels.bin")).unwrap();
    let xyz = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [-3.0, 0.0, 0.5], [10.25, -4.5, 1.75], [0.1f32, 0.2, 0.3]];
    let want_labels = [(1u16, 7u16), (2, 0), (3, 65535), (4, 3), (0, 1)];
    for (i, p) in pc.iter().enumerate() {
        let want = Vector3::new(xyz[i][0] as f64, xyz[i][1] as f64, xyz[i][2] as f64);
        if p.position != want || p.intensity != i as f32 * 0.25 || (p.semantic, p.instance) != want_labels[i] {
            failures.push(format!("cloud point {i} decoded as {p:?}"));
        }
    }
    if pack_label(3, 65535) != 0xFFFF_0003 {
        failures.push("label packing".into());
    }
    let (p2, l2) = encode_cloud(&pc);
    if p2 != points || l2 != labels {
        failures.push("cloud.bin/labels.bin re-encoding is not byte-identical".into());
    }
    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() { "5 NPY channels, cloud.bin and labels.bin round-trip bit-exactly".to_string() } else { failures.join("; ") },
    )
}

// ---------------------------------------------------------------------------
// Determinism

fn pipeline(root: &Path, seed: u64, threads: usize) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let k = intrinsics_from_fov(TAU, PI, 512, 256, 80.0).unwrap();
        let scenes: Vec<_> = (0..3).map(|i| SceneDescription::random(seed + i, 2)).collect();
        dataset::synthesize(&scenes, &k, root, 1, FrameOptions { format: OutputFormat::Both, ..FrameOptions::default() }).unwrap();
        let spec = SensorGridSpec { widths: vec![128, 256], heights: vec![32, 64], v_fovs: vec![PI / 2.0, PI] };
        let targets = enumerate_grid(&spec, &k).unwrap();
        dataset::resimulate(root, &targets, SplitSelection::Test, TargetChoice::Full, OutputFormat::Npy).unwrap();
        dataset::resimulate(root, &targets, SplitSelection::Train, TargetChoice::Sample { count: 3, seed }, OutputFormat::Npy).unwrap();
        let gt = dataset::collect_masks(root, SplitSelection::Test).unwrap();
        let subsets = recall_by_subset(&gt, &gt, &RecallParams::default()).unwrap();
        let report = average_recall(&gt, &gt, &RecallParams::default()).unwrap();
        let body = serde_json::json!({ "overall": report, "subsets": subsets });
        atomic_write(&root.join("eval/report.json"), serde_json::to_string_pretty(&body).unwrap().as_bytes()).unwrap();
    });
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    let mut m: DatasetManifest = serde_json::from_slice(&out[MANIFEST_FILE]).unwrap();
    m.metadata = None;
    out.insert(MANIFEST_FILE.into(), m.to_json().into_bytes());
    out
}

fn determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path(), 11, 1);
    pipeline(b.path(), 11, 4);
    let (ta, tb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = ta.keys().chain(tb.keys()).filter(|k| ta.get(*k) != tb.get(*k)).collect();
    let bytes: usize = ta.values().map(Vec::len).sum();
    Verdict::new(
        differing.is_empty() && !ta.is_empty(),
        format!("{} files, {bytes} bytes per run; differing paths {differing:?}", ta.len()),
    )
}

// ---------------------------------------------------------------------------

type Criterion = (&'static str, Option<Duration>, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("deflection oracle", Some(BUDGET_ORACLE), deflection_oracle),
        ("projection round trip", Some(BUDGET_ROUND_TRIP), round_trip),
        ("z-buffer brute-force equivalence", Some(BUDGET_ZBUFFER), zbuffer),
        ("resim vs direct ray casting", Some(BUDGET_RESIM), resim_vs_direct),
        ("grid and subset combinatorics", None, combinatorics),
        ("crop/deflection commutation", None, crop_commutation),
        ("mAR evaluator", Some(BUDGET_MAR), mean_average_recall),
        ("format golden fixtures", None, golden_fixtures),
        ("pipeline determinism", None, determinism),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let ok = v.ok && in_time;
        failed += usize::from(!ok);
        let budget_note = match budget {
            Some(b) => format!("{:.2}s of {:.0}s", elapsed.as_secs_f64(), b.as_secs_f64()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        println!("{} {name}: {} [{budget_note}]", if ok { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
