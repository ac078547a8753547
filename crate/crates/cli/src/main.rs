mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deflekt::dataio::frame::OutputFormat;
use deflekt::dataset::SplitSelection;
use deflekt::deflection::ProjectionModel;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(name = "deflekt", version, about = "LiDAR range images, deflection maps and sensor re-simulation")]
struct Cli {
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ray-cast synthetic sequences into a new dataset.
    Synth(SynthArgs),
    /// Rasterize a point cloud into a frame directory.
    Project(ProjectArgs),
    /// Write the deflection image of a sensor.
    Deflect(DeflectArgs),
    /// Write the six-level deflection pyramid of a sensor.
    Pyramid(DeflectArgs),
    /// Derive lower-resolution sensors for a dataset over a sensor grid.
    Resim(ResimArgs),
    /// Enumerate a sensor grid as JSON.
    Grid(GridArgs),
    /// Score instance-mask predictions with mean average recall.
    Eval(EvalArgs),
    /// Check a dataset, frame directory or NPY file.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Npy,
    Png,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Npy => OutputFormat::Npy,
            FormatArg::Png => OutputFormat::Png,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

impl From<SplitArg> for SplitSelection {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitSelection::Train,
            SplitArg::Test => SplitSelection::Test,
            SplitArg::All => SplitSelection::All,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Spherical,
    Camera,
}

impl From<ModelArg> for ProjectionModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Spherical => ProjectionModel::Spherical,
            ModelArg::Camera => ProjectionModel::Camera,
        }
    }
}

#[derive(Args, Debug)]
struct SensorArg {
    /// Sensor config JSON; defaults to the 2048×1024 full-dome sensor.
    #[arg(long)]
    sensor: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    sensor: SensorArg,
    /// Scene config JSON, one sequence per file (repeatable). Random scenes
    /// are generated when omitted.
    #[arg(long)]
    scene: Vec<PathBuf>,
    /// Number of random sequences.
    #[arg(long, default_value_t = 4)]
    sequences: usize,
    /// Frames per random sequence.
    #[arg(long, default_value_t = 2)]
    frames: usize,
    /// Held-out sequences (default: 9 of every 24, at least 1).
    #[arg(long)]
    test_sequences: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "npy")]
    format: FormatArg,
    /// Omit the timestamp block from the manifest.
    #[arg(long)]
    no_metadata: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// `cloud.bin` with (x, y, z, intensity) float quadruples.
    #[arg(long)]
    input: PathBuf,
    /// Matching `labels.bin`; defaults to `labels.bin` beside the input.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    sensor: SensorArg,
    /// Frame key recorded in meta.json and masks.jsonl.
    #[arg(long)]
    key: Option<String>,
    #[arg(long, value_enum, default_value = "npy")]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DeflectArgs {
    #[command(flatten)]
    sensor: SensorArg,
    /// Overrides the model implied by the sensor config.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, value_enum, default_value = "npy")]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ResimArgs {
    /// Dataset root containing manifest.json. Derived frames are added in place.
    #[arg(long)]
    input: PathBuf,
    /// Grid JSON with `widths`, `heights`, `v_fov_deg`; defaults to the
    /// 3×3×3 grid of 512/1024/2048 widths, 32/64/128 layers and
    /// 22.5°/45°/90° vertical FoV.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    split: SplitArg,
    /// Draw this many targets per sequence uniformly instead of the full grid.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "npy")]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Source sensor the grid is derived from.
    #[command(flatten)]
    sensor: SensorArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Dataset root (ground truth from its masks.jsonl files) or a JSONL file.
    #[arg(long)]
    gt: PathBuf,
    /// Predictions JSONL, or a dataset root whose masks are used as predictions.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, default_value_t = 100)]
    max_det: usize,
    /// Directory receiving report.json and subsets.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Dataset root, frame directory or `.npy` file.
    #[arg(long)]
    input: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEFLEKT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return commands::report_failure("invalid-argument", e.to_string().trim(), 2);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return commands::report_failure("invalid-argument", "--jobs must be at least 1", 2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => commands::report_error(&e),
    }
}
