use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfmchange")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The single stderr line of a failed command, checked for the
/// `error: kind=<kind> msg=<message>` shape.
fn error_kind(out: &Output) -> String {
    let err = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    let rest = lines[0].strip_prefix("error: kind=").unwrap_or_else(|| panic!("{err}"));
    let (kind, msg) = rest.split_once(" msg=").unwrap_or_else(|| panic!("{err}"));
    assert!(!msg.is_empty());
    kind.to_string()
}

fn small_scene(dir: &Path) -> PathBuf {
    let scene = dir.join("scene");
    ok(&["synth", "--recipe", "small", "--seed", "3", "--out-dir", s(&scene)]);
    scene
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--recipe", "small", "--seed", "7", "--out-dir", s(&a)]);
    ok(&["synth", "--recipe", "small", "--seed", "7", "--out-dir", s(&b)]);
    let (fa, fb) = (read_dir_bytes(&a), read_dir_bytes(&b));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["gt_warp.json", "ref.ply", "src.ply", "traj_ref.csv", "traj_src.csv", "truth.ply"]);
    assert_eq!(fa, fb);
}

#[test]
fn register_writes_one_trace_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene(dir.path());
    let (params, trace) = (dir.path().join("p.json"), dir.path().join("t.csv"));
    ok(&[
        "register", "--ref", s(&scene.join("ref.ply")), "--src", s(&scene.join("src.ply")),
        "--mode", "direct", "--steps", "100", "--out-params", s(&params), "--trace", s(&trace),
    ]);
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,chamfer,regularizer,total"));
    assert_eq!(lines.count(), 100);
    assert!(fs::read_to_string(&params).unwrap().contains("\"sigmas\""));
}

#[test]
fn commands_chain_and_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene(dir.path());
    let f = |n: &str| s(&scene.join(n)).to_string();
    let mut runs = Vec::new();
    for run_id in ["1", "2"] {
        let d = dir.path().join(run_id);
        let p = |n: &str| s(&d.join(n)).to_string();
        fs::create_dir(&d).unwrap();
        ok(&[
            "register", "--ref", &f("ref.ply"), "--src", &f("src.ply"), "--traj-ref", &f("traj_ref.csv"),
            "--traj-src", &f("traj_src.csv"), "--mode", "network", "--steps", "30", "--seed", "5",
            "--out-params", &p("p.json"), "--trace", &p("t.csv"), "--out-warped", &p("w.ply"),
        ]);
        ok(&[
            "detect", "--ref", &f("ref.ply"), "--src", &f("src.ply"), "--traj-ref", &f("traj_ref.csv"),
            "--traj-src", &f("traj_src.csv"), "--params", &p("p.json"), "--out", &p("changes.ply"),
        ]);
        ok(&["eval3d", "--pred", &p("changes.ply"), "--truth", &f("truth.ply"), "--out", &p("m.json"), "--csv", &p("m.csv")]);
        ok(&["project", "--changes", &p("changes.ply"), "--traj", &f("traj_ref.csv"), "--out-dir", &p("pred")]);
        ok(&["project", "--changes", &f("truth.ply"), "--traj", &f("traj_ref.csv"), "--out-dir", &p("truth")]);
        ok(&["eval2d", "--pred-dir", &p("pred"), "--truth-dir", &p("truth"), "--out", &p("m2.json")]);
        runs.push(d);
    }
    for name in ["p.json", "t.csv", "w.ply", "changes.ply", "m.json", "m.csv", "m2.json"] {
        assert_eq!(fs::read(runs[0].join(name)).unwrap(), fs::read(runs[1].join(name)).unwrap(), "{name}");
    }
    assert_eq!(read_dir_bytes(&runs[0].join("pred")), read_dir_bytes(&runs[1].join("pred")));
    let csv = fs::read_to_string(runs[0].join("m.csv")).unwrap();
    assert!(csv.starts_with("scene,direction,precision,recall,f1,iou\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn pipeline_writes_the_full_output_set() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene(dir.path());
    let out = dir.path().join("out");
    ok(&["pipeline", "--scene-dir", s(&scene), "--steps", "200", "--out-dir", s(&out)]);
    let names: Vec<String> = read_dir_bytes(&out).into_iter().map(|f| f.0).collect();
    assert_eq!(
        names,
        ["changes.ply", "config.txt", "metrics.csv", "metrics.json", "params.json", "src_warped.ply", "trace.csv", "traj_src_warped.csv"]
    );
    let config = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("steps = 200"));
    assert!(fs::read_to_string(out.join("metrics.json")).unwrap().contains("\"appeared\""));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene(dir.path());
    let p = dir.path().join("p.json");
    let missing = run(&["register", "--ref", "/nonexistent.ply", "--src", s(&scene.join("src.ply")), "--out-params", s(&p)]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(error_kind(&missing), "usage");

    let flag = run(&["register", "--bogus"]);
    assert_eq!(flag.status.code(), Some(2));
    assert_eq!(error_kind(&flag), "usage");

    let ref_ply = scene.join("ref.ply");
    let src_ply = scene.join("src.ply");
    let zero = run(&["register", "--ref", s(&ref_ply), "--src", s(&src_ply), "--steps", "0", "--out-params", s(&p)]);
    assert_eq!(zero.status.code(), Some(2));
    assert_eq!(error_kind(&zero), "config");

    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "k_anchors = 36\nwarp_strength = 3\n").unwrap();
    let bad = run(&["register", "--ref", s(&ref_ply), "--src", s(&src_ply), "--config", s(&cfg), "--out-params", s(&p)]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(error_kind(&bad), "config");

    assert!(!p.exists());
    assert!(run(&["--help"]).status.success());
}

#[test]
fn runtime_errors_exit_1_without_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene(dir.path());
    let bytes = fs::read(scene.join("src.ply")).unwrap();
    let cut = dir.path().join("cut.ply");
    fs::write(&cut, &bytes[..bytes.len() - 5]).unwrap();
    let out = dir.path().join("out");
    let r = run(&[
        "pipeline", "--scene-dir", s(&scene), "--src", s(&cut), "--steps", "10", "--out-dir", s(&out),
    ]);
    assert_eq!(r.status.code(), Some(1));
    let kind = error_kind(&r);
    assert_eq!(kind, "parse");
    assert!(String::from_utf8_lossy(&r.stderr).contains("at byte "));
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());
}
