//! `sfmchange`: synthetic scenes, registration, change detection and
//! evaluation from the command line.
//!
//! Exit status is 0 on success, 2 for usage and configuration errors
//! (including missing input files) and 1 for failures while running. Errors
//! are reported on stderr as a single line
//! `error: kind=<kind> msg=<message>`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sfmchange::optim::Mode;

#[derive(Debug, Parser)]
#[command(name = "sfmchange", version, about = "Change detection between two SfM traversals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene pair with ground truth.
    Synth(SynthArgs),
    /// Estimate the warp aligning the source cloud to the reference.
    Register(RegisterArgs),
    /// Label appeared and disappeared points of two aligned traversals.
    Detect(DetectArgs),
    /// Per-point precision and recall against ground-truth labels.
    Eval3d(Eval3dArgs),
    /// Render changed points into one binary mask per camera frame.
    Project(ProjectArgs),
    /// mIOU between two directories of masks.
    Eval2d(Eval2dArgs),
    /// register, then detect, then eval3d when ground truth is available.
    Pipeline(PipelineArgs),
}

/// Config file and the overrides shared by commands that run the optimizer
/// or the detector.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Flat `key = value` config file; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: sfmchange::Error| e.to_string())
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Recipe name: default (same as acceptance), acceptance, drift or small.
    #[arg(long, default_value = "default")]
    recipe: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct RegisterArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    src: PathBuf,
    /// Reference trajectory; with --traj-src, enables the overlap crop.
    #[arg(long, requires = "traj_src")]
    traj_ref: Option<PathBuf>,
    #[arg(long, requires = "traj_ref")]
    traj_src: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out_params: PathBuf,
    /// Loss trace CSV, one row per step.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Source cloud after applying the estimated warp.
    #[arg(long)]
    out_warped: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    traj_ref: PathBuf,
    #[arg(long)]
    traj_src: PathBuf,
    /// Warp applied to the source cloud and camera centers first; without
    /// it the source is taken as already aligned.
    #[arg(long)]
    params: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Eval3dArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Scene name recorded in the metrics.
    #[arg(long, default_value = "scene")]
    scene: String,
    /// Metrics JSON.
    #[arg(long)]
    out: PathBuf,
    /// Metrics as flat CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// Change file; only changed points are drawn.
    #[arg(long)]
    changes: PathBuf,
    #[arg(long)]
    traj: PathBuf,
    /// Image size, projection range and disc radius come from here.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct Eval2dArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    truth_dir: PathBuf,
    #[arg(long, default_value = "scene")]
    scene: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Directory laid out like `synth` output; individual flags override
    /// its files.
    #[arg(long)]
    scene_dir: Option<PathBuf>,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    src: Option<PathBuf>,
    #[arg(long)]
    traj_ref: Option<PathBuf>,
    #[arg(long)]
    traj_src: Option<PathBuf>,
    /// Ground-truth change file; defaults to truth.ply in --scene-dir when
    /// present.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "scene")]
    scene: String,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            return commands::report(&commands::CliError::Usage(first.to_string()));
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => commands::report(&e),
    }
}
