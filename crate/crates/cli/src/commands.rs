use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use sfmchange::change::{detect_changes, CameraTrajectory, ChangeLabel, ChangeMap};
use sfmchange::eval::{eval_3d, miou, pair_iou, project_changes, EvalResult, Mask};
use sfmchange::io::{
    encode_changes, encode_cloud, encode_params, encode_pgm, encode_trace, encode_trajectory, read_changes, read_cloud,
    read_mask, read_params, read_trajectory, write_atomic,
};
use sfmchange::synth::{generate_scene, Recipe};
use sfmchange::{apply_warp, register, run_pipeline, Error, PipelineConfig};

use crate::{
    Command, ConfigArgs, DetectArgs, Eval2dArgs, Eval3dArgs, PipelineArgs, ProjectArgs, RegisterArgs, SynthArgs,
};

/// File names inside a scene directory written by `synth`.
const REF: &str = "ref.ply";
const SRC: &str = "src.ply";
const TRAJ_REF: &str = "traj_ref.csv";
const TRAJ_SRC: &str = "traj_src.csv";
const TRUTH: &str = "truth.ply";
const GT_WARP: &str = "gt_warp.json";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// Invalid configuration values; reported like usage errors.
    Config(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Config(m),
            e => CliError::Run(e),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn report(e: &CliError) -> ExitCode {
    let (kind, msg, code) = match e {
        CliError::Usage(m) => ("usage", m.clone(), 2),
        CliError::Config(m) => ("config", m.clone(), 2),
        CliError::Run(e) => (e.kind(), e.to_string(), 1),
    };
    let msg = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error: kind={kind} msg={msg}");
    ExitCode::from(code)
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Register(a) => register_cmd(a),
        Command::Detect(a) => detect(a),
        Command::Eval3d(a) => eval3d(a),
        Command::Project(a) => project(a),
        Command::Eval2d(a) => eval2d(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file {} does not exist", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input directory {} does not exist", path.display())))
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| {
        CliError::Run(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut config = match &args.config {
        Some(path) => {
            require_file(path)?;
            PipelineConfig::load(path)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

/// Write all outputs once everything has been computed, so a failure never
/// leaves a partial set behind.
fn write_all(outputs: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    for (path, bytes) in outputs {
        write_atomic(path, bytes)?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let recipe = Recipe::by_name(&a.recipe).map_err(|e| CliError::Usage(e.to_string()))?;
    let scene = generate_scene(&recipe, a.seed)?;
    create_dir(&a.out_dir)?;
    let d = &a.out_dir;
    write_all(&[
        (d.join(REF), encode_cloud(&scene.reference)),
        (d.join(SRC), encode_cloud(&scene.source)),
        (d.join(TRAJ_REF), encode_trajectory(&scene.traj_ref).into_bytes()),
        (d.join(TRAJ_SRC), encode_trajectory(&scene.traj_src).into_bytes()),
        (d.join(TRUTH), encode_changes(&scene.truth)),
        (d.join(GT_WARP), encode_params(&scene.gt_warp)?.into_bytes()),
    ])?;
    println!(
        "ref_points={} src_points={} appeared={} disappeared={}",
        scene.reference.len(),
        scene.source.len(),
        scene.truth.count(ChangeLabel::Appeared),
        scene.truth.count(ChangeLabel::Disappeared)
    );
    Ok(())
}

fn register_cmd(a: RegisterArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    for p in [Some(&a.reference), Some(&a.src), a.traj_ref.as_ref(), a.traj_src.as_ref()].into_iter().flatten() {
        require_file(p)?;
    }
    let reference = read_cloud(&a.reference)?;
    let source = read_cloud(&a.src)?;
    let trajs = match (&a.traj_ref, &a.traj_src) {
        (Some(r), Some(s)) => Some((read_trajectory(r)?, read_trajectory(s)?)),
        _ => None,
    };
    let report = register(&reference, &source, trajs.as_ref().map(|(r, s)| (r, s)), &config)?;
    let mut outputs = vec![(a.out_params.clone(), encode_params(&report.params)?.into_bytes())];
    if let Some(t) = &a.trace {
        outputs.push((t.clone(), encode_trace(&report.trace).into_bytes()));
    }
    if let Some(w) = &a.out_warped {
        outputs.push((w.clone(), encode_cloud(&sfmchange::warp_cloud(&source, &report.params)?)));
    }
    write_all(&outputs)?;
    println!(
        "mode={} steps={} initial_loss={} final_loss={}",
        report.mode, report.steps, report.trace[0].total, report.final_loss.total
    );
    Ok(())
}

fn detect(a: DetectArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    for p in [Some(&a.reference), Some(&a.src), Some(&a.traj_ref), Some(&a.traj_src), a.params.as_ref()].into_iter().flatten() {
        require_file(p)?;
    }
    let reference = read_cloud(&a.reference)?;
    let mut source = read_cloud(&a.src)?;
    let traj_ref = read_trajectory(&a.traj_ref)?;
    let mut traj_src = read_trajectory(&a.traj_src)?;
    if let Some(p) = &a.params {
        (source, traj_src) = apply_warp(&source, &traj_src, &read_params(p)?)?;
    }
    let changes = detect_changes(&reference, &source, &traj_ref, &traj_src, &config.change())?;
    write_all(&[(a.out.clone(), encode_changes(&changes))])?;
    print_counts(&changes);
    Ok(())
}

fn print_counts(changes: &ChangeMap<f64>) {
    println!(
        "appeared={} disappeared={}",
        changes.count(ChangeLabel::Appeared),
        changes.count(ChangeLabel::Disappeared)
    );
}

fn metrics_outputs(result: &EvalResult, json: PathBuf, csv: Option<PathBuf>) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let mut out = vec![(json, result.to_json()?.into_bytes())];
    if let Some(c) = csv {
        out.push((c, result.to_csv().into_bytes()));
    }
    Ok(out)
}

fn eval3d(a: Eval3dArgs) -> Result<()> {
    require_file(&a.pred)?;
    require_file(&a.truth)?;
    let e = eval_3d(&read_changes(&a.pred)?, &read_changes(&a.truth)?)?;
    let result = EvalResult {
        scene: a.scene,
        eval_3d: Some(e),
        pair_iou: Vec::new(),
        miou: None,
    };
    write_all(&metrics_outputs(&result, a.out, a.csv)?)?;
    print!("{}", result.to_csv());
    Ok(())
}

fn mask_name(frame_id: u64) -> String {
    format!("frame_{frame_id:06}.pgm")
}

fn project(a: ProjectArgs) -> Result<()> {
    let config = load_config(&ConfigArgs {
        config: a.config,
        mode: None,
        steps: None,
        seed: None,
    })?;
    require_file(&a.changes)?;
    require_file(&a.traj)?;
    let changes = read_changes(&a.changes)?;
    let traj: CameraTrajectory = read_trajectory(&a.traj)?;
    let outputs: Vec<_> = traj
        .frames()
        .iter()
        .map(|f| {
            let m = project_changes(
                &changes,
                f,
                config.image_width,
                config.image_height,
                config.radius_px,
                config.proj_range,
            );
            (a.out_dir.join(mask_name(f.id)), encode_pgm(&m))
        })
        .collect();
    create_dir(&a.out_dir)?;
    write_all(&outputs)?;
    println!("masks={}", outputs.len());
    Ok(())
}

fn pgm_names(dir: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| {
        CliError::Run(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| {
            CliError::Run(Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })
        })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".pgm") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn eval2d(a: Eval2dArgs) -> Result<()> {
    require_dir(&a.pred_dir)?;
    require_dir(&a.truth_dir)?;
    let names = pgm_names(&a.pred_dir)?;
    if names != pgm_names(&a.truth_dir)? {
        return Err(CliError::Run(Error::Eval(
            "prediction and truth directories hold different mask files".into(),
        )));
    }
    let load = |dir: &Path| -> Result<Vec<Mask>> {
        names.iter().map(|n| read_mask(&dir.join(n)).map_err(CliError::from)).collect()
    };
    let pred = load(&a.pred_dir)?;
    let truth = load(&a.truth_dir)?;
    let pairs = pred
        .iter()
        .zip(&truth)
        .map(|(p, t)| pair_iou(p, t))
        .collect::<sfmchange::Result<Vec<f64>>>()?;
    let result = EvalResult {
        scene: a.scene,
        eval_3d: None,
        pair_iou: pairs,
        miou: Some(miou(&pred, &truth)?),
    };
    write_all(&metrics_outputs(&result, a.out, a.csv)?)?;
    print!("{}", result.to_csv());
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let input = |flag: &Option<PathBuf>, name: &str, what: &str| -> Result<PathBuf> {
        match (flag, &a.scene_dir) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(d)) => Ok(d.join(name)),
            (None, None) => Err(CliError::Usage(format!("--{what} or --scene-dir is required"))),
        }
    };
    let ref_path = input(&a.reference, REF, "ref")?;
    let src_path = input(&a.src, SRC, "src")?;
    let traj_ref_path = input(&a.traj_ref, TRAJ_REF, "traj-ref")?;
    let traj_src_path = input(&a.traj_src, TRAJ_SRC, "traj-src")?;
    let truth_path = match (&a.truth, &a.scene_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) if d.join(TRUTH).is_file() => Some(d.join(TRUTH)),
        _ => None,
    };
    for p in [&ref_path, &src_path, &traj_ref_path, &traj_src_path].into_iter().chain(truth_path.as_ref()) {
        require_file(p)?;
    }
    let reference = read_cloud(&ref_path)?;
    let source = read_cloud(&src_path)?;
    let traj_ref = read_trajectory(&traj_ref_path)?;
    let traj_src = read_trajectory(&traj_src_path)?;
    let truth = truth_path.map(|p| read_changes(&p)).transpose()?;

    let out = run_pipeline(&reference, &source, &traj_ref, &traj_src, &config)?;
    let d = &a.out_dir;
    let mut outputs = vec![
        (d.join("config.txt"), config.to_text().into_bytes()),
        (d.join("params.json"), encode_params(&out.registration.params)?.into_bytes()),
        (d.join("trace.csv"), encode_trace(&out.registration.trace).into_bytes()),
        (d.join("src_warped.ply"), encode_cloud(&out.src_warped)),
        (d.join("traj_src_warped.csv"), encode_trajectory(&out.traj_src_warped).into_bytes()),
        (d.join("changes.ply"), encode_changes(&out.changes)),
    ];
    let mut summary = None;
    if let Some(truth) = &truth {
        let result = EvalResult {
            scene: a.scene.clone(),
            eval_3d: Some(eval_3d(&out.changes, truth)?),
            pair_iou: Vec::new(),
            miou: None,
        };
        outputs.extend(metrics_outputs(&result, d.join("metrics.json"), Some(d.join("metrics.csv")))?);
        summary = Some(result.to_csv());
    }
    create_dir(d)?;
    write_all(&outputs)?;
    println!(
        "mode={} steps={} final_loss={}",
        out.registration.mode, out.registration.steps, out.registration.final_loss.total
    );
    print_counts(&out.changes);
    if let Some(s) = summary {
        print!("{s}");
    }
    Ok(())
}
