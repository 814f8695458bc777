//! Acceptance runner. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs with `harness = false`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfmchange::change::Origin;
use sfmchange::eval::{brute_force_nn, eval_3d, EvalResult};
use sfmchange::io::{
    encode_changes, encode_cloud, encode_params, encode_trace, encode_trajectory, read_cloud, read_trajectory,
    write_cloud, write_trajectory,
};
use sfmchange::optim::{Mode, OptimizationReport};
use sfmchange::synth::{generate_scene, Recipe, SyntheticScene};
use sfmchange::{
    chamfer_sq, loss_gradient, register, run_pipeline, warp_cloud, Metric, PipelineConfig, SpatialIndex,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut checked, mut excluded) = (0.0f64, 0, 0);
    for seed in 0..50 {
        let inst = common::random_instance(seed);
        let (r, s) = inst.clouds();
        let g = loss_gradient(&r, &s, &inst.params(), inst.lambda_reg, inst.delta_reg).unwrap();
        let report = common::fd_check(&inst, &g, 1e-5, 1e-4);
        worst = worst.max(report.max_rel_error);
        checked += report.checked;
        excluded += report.excluded;
    }
    let t = start.elapsed();
    Outcome::new(
        worst <= 1e-4 && t < Duration::from_secs(60),
        format!("50 instances, max rel error {worst:.2e}, {checked} params checked, {excluded} near a switch, {}", secs(t)),
    )
}

fn nearest_neighbors() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..20 {
        let xyz: Vec<[f64; 3]> = (0..5000)
            .map(|_| [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(0.0..20.0)])
            .collect();
        let cloud = sfmchange::PointCloud::from_xyz(&xyz);
        let index = SpatialIndex::build(&cloud, Metric::Xyz).unwrap();
        for _ in 0..1000 {
            let q = [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-5.0..25.0)];
            let p = common::to_point(&q);
            let got = index.nearest(&p);
            let oracle = brute_force_nn(&p, &cloud, Metric::Xyz).unwrap();
            let (i, d) = common::nearest(&q, &xyz);
            if got.id != oracle.id || got.dist_sq != oracle.dist_sq || got.index != i || got.dist_sq != d {
                mismatches += 1;
            }
        }
    }
    let t = start.elapsed();
    Outcome::new(
        mismatches == 0 && t < Duration::from_secs(60),
        format!("20 clouds x 5000 points x 1000 queries, {mismatches} mismatches, {}", secs(t)),
    )
}

struct Fit {
    report: OptimizationReport<f64>,
    ratio: f64,
    time: Duration,
}

fn fit(scene: &SyntheticScene, mode: Mode, steps: usize, seed: u64) -> Fit {
    let config = PipelineConfig { mode, steps, seed, ..Default::default() };
    let start = Instant::now();
    let report = register(&scene.reference, &scene.source, None, &config).unwrap();
    let time = start.elapsed();
    let before = chamfer_sq(&scene.reference, &scene.source, config.delta_reg).unwrap();
    let after = chamfer_sq(&scene.reference, &warp_cloud(&scene.source, &report.params).unwrap(), config.delta_reg).unwrap();
    Fit { report, ratio: after / before, time }
}

fn warp_recovery(direct: &Fit, network: &Fit, points: usize) -> Outcome {
    let limit = Duration::from_secs(600);
    let pass = direct.ratio <= 0.1 && network.ratio <= 0.1 && direct.time < limit && network.time < limit && points <= 20_000;
    Outcome::new(
        pass,
        format!(
            "seed 0, {points} points: direct 5000 steps ratio {:.3} in {}, network 2500 steps ratio {:.3} in {}",
            direct.ratio,
            secs(direct.time),
            network.ratio,
            secs(network.time)
        ),
    )
}

/// Lowest total loss the network reaches within its budget against the
/// direct optimizer's loss after its full budget.
fn network_vs_direct(direct: &Fit, network: &Fit) -> (bool, f64, f64) {
    let best = network.report.trace.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
    (best <= direct.report.final_loss.total, best, direct.report.final_loss.total)
}

fn convergence(seed0: (bool, f64, f64), recipe: &Recipe) -> Outcome {
    let mut rows = vec![seed0];
    for seed in 1..5 {
        let scene = generate_scene(recipe, seed).unwrap();
        let direct = fit(&scene, Mode::Direct, 5000, seed);
        let network = fit(&scene, Mode::Network, 2500, seed);
        rows.push(network_vs_direct(&direct, &network));
    }
    let wins = rows.iter().filter(|r| r.0).count();
    let detail = rows
        .iter()
        .enumerate()
        .map(|(s, r)| format!("seed {s}: {:.5} vs {:.5}", r.1, r.2))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(wins >= 3, format!("network best within 2500 <= direct at 5000 in {wins}/5 ({detail})"))
}

fn end_to_end() -> Outcome {
    let scene = generate_scene(&Recipe::acceptance(), 0).unwrap();
    // Through files, the way real clouds would arrive.
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    write_cloud(&scene.reference, &p("ref.ply")).unwrap();
    write_cloud(&scene.source, &p("src.ply")).unwrap();
    write_trajectory(&scene.traj_ref, &p("traj_ref.csv")).unwrap();
    write_trajectory(&scene.traj_src, &p("traj_src.csv")).unwrap();
    let reference = read_cloud(&p("ref.ply")).unwrap();
    let source = read_cloud(&p("src.ply")).unwrap();
    let traj_ref = read_trajectory(&p("traj_ref.csv")).unwrap();
    let traj_src = read_trajectory(&p("traj_src.csv")).unwrap();

    let start = Instant::now();
    let out = run_pipeline(&reference, &source, &traj_ref, &traj_src, &PipelineConfig::default()).unwrap();
    let t = start.elapsed();
    let e = eval_3d(&out.changes, &scene.truth).unwrap();
    let outside = out
        .changes
        .changed()
        .filter(|c| match c.origin {
            Origin::Src => !traj_ref.sees(&c.position),
            Origin::Ref => !out.traj_src_warped.sees(&c.position),
        })
        .count();
    let scores = [e.appeared.precision, e.appeared.recall, e.disappeared.precision, e.disappeared.recall];
    Outcome::new(
        scores.iter().all(|s| *s >= 0.9) && outside == 0 && t < Duration::from_secs(300),
        format!(
            "appeared P {:.3} R {:.3}, disappeared P {:.3} R {:.3}, {outside} changed points outside the other traversal, {}",
            scores[0],
            scores[1],
            scores[2],
            scores[3],
            secs(t)
        ),
    )
}

fn constants() -> Outcome {
    let c = PipelineConfig::default();
    let got = (c.k_anchors, c.delta_reg, c.lambda_reg, c.tau_ss, c.delta_cd, c.k_mean, c.tau_cd);
    Outcome::new(
        got == (36, 10.0, 0.01, 7, 10.0, 7, 2.0),
        format!(
            "K={} delta_reg={} lambda_reg={} tau_ss={} delta_cd={} k={} tau_cd={}",
            got.0, got.1, got.2, got.3, got.4, got.5, got.6
        ),
    )
}

fn metric_fixtures() -> Outcome {
    let checks = common::fixtures::checks();
    let bad: Vec<_> = checks.iter().filter(|(_, g, e)| (g - e).abs() > 1e-12).map(|c| c.0.clone()).collect();
    Outcome::new(bad.is_empty(), format!("{} hand-counted values, mismatched: {bad:?}", checks.len()))
}

/// Every output the `pipeline` command writes, as bytes.
fn pipeline_bytes(mode: Mode) -> Vec<Vec<u8>> {
    let scene = generate_scene(&Recipe::small(), 4).unwrap();
    let config = PipelineConfig { mode, steps: 200, seed: 4, ..Default::default() };
    let out = run_pipeline(&scene.reference, &scene.source, &scene.traj_ref, &scene.traj_src, &config).unwrap();
    let metrics = EvalResult {
        scene: "small".into(),
        eval_3d: Some(eval_3d(&out.changes, &scene.truth).unwrap()),
        pair_iou: Vec::new(),
        miou: None,
    };
    vec![
        encode_cloud(&scene.reference),
        encode_cloud(&scene.source),
        encode_changes(&scene.truth),
        encode_trajectory(&scene.traj_src).into_bytes(),
        encode_params(&out.registration.params).unwrap().into_bytes(),
        encode_trace(&out.registration.trace).into_bytes(),
        encode_cloud(&out.src_warped),
        encode_trajectory(&out.traj_src_warped).into_bytes(),
        encode_changes(&out.changes),
        metrics.to_json().unwrap().into_bytes(),
        metrics.to_csv().into_bytes(),
    ]
}

fn determinism() -> Outcome {
    let same = [Mode::Direct, Mode::Network].iter().all(|m| pipeline_bytes(*m) == pipeline_bytes(*m));
    Outcome::new(
        same,
        "scene, params, trace, warped cloud, changes and metrics byte-identical across two runs in both modes \
         (this platform only; the second platform is not available here)",
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: u32, name: &str, o: Outcome| {
        println!("{} {n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    };
    report(1, "gradient correctness", gradients());
    report(2, "nearest-neighbor oracle", nearest_neighbors());

    let recipe = Recipe::drift();
    let scene = generate_scene(&recipe, 0).unwrap();
    let direct = fit(&scene, Mode::Direct, 5000, 0);
    let network = fit(&scene, Mode::Network, 2500, 0);
    report(3, "warp recovery", warp_recovery(&direct, &network, scene.reference.len().max(scene.source.len())));
    report(4, "network vs direct convergence", convergence(network_vs_direct(&direct, &network), &recipe));

    report(5, "end-to-end change detection", end_to_end());
    report(6, "default constants", constants());
    report(7, "metric conventions", metric_fixtures());
    println!(
        "N/A 8 published benchmark scores: need the original imagery and annotations; \
         criterion 5 reads its inputs through the documented file formats"
    );
    report(9, "determinism", determinism());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
