use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graspwrench::cli::commands::{BoundaryFile, OracleReport, SynthFile, SynthSummary};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graspwrench"))
}

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demos").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_value(text: &str, column: &str) -> String {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == column).unwrap();
    row[i].to_string()
}

#[test]
fn exact_estimate_sits_on_oracle_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b.json");
    run_ok(&[
        "estimate",
        "--config",
        s(&demo("fc5.json")),
        "--delta-deg",
        "0",
        "--K",
        "100000",
        "--out",
        s(&b),
    ]);
    let out = run_ok(&["oracle", "--input", s(&b)]);
    let r: OracleReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.evaluated, 1000);
    assert_eq!(r.covered, r.evaluated);
    assert!((0.995..=1.01).contains(&r.mean_q), "mean q {}", r.mean_q);
}

#[test]
fn metrics_reproduces_epsilon_from_boundary_file() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b.json");
    run_ok(&["estimate", "--config", s(&demo("fc5.json")), "--K", "20000", "--out", s(&b)]);
    let file = BoundaryFile::read(&b).unwrap();
    assert!(file.eps > 0.0);
    let out = run_ok(&["metrics", "--input", s(&b)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let eps: f64 = csv_value(&text, "eps").parse().unwrap();
    assert!((eps - file.eps).abs() <= 1e-12, "{eps} vs {}", file.eps);
    assert!(text.starts_with(&format!("# schema=graspwrench/1 command=metrics config_hash={}", file.meta.config_hash)));
    assert_eq!(csv_value(&text, "fc"), "true");
}

#[test]
fn task_sector_estimate_reports_eps_t() {
    let out = run_ok(&["estimate", "--config", s(&demo("lift_task_sector.json")), "--K", "50000"]);
    let file: BoundaryFile = serde_json::from_slice(&out.stdout).unwrap();
    // Three contacts below the equator hold the load without force closure.
    assert_eq!(file.eps, 0.0);
    assert!(file.eps_t.unwrap() > 0.0);
    assert_eq!(file.u.len(), 50_000);
}

#[test]
fn synth_demo_succeeds_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["synth", "--config", s(&demo("lift_sphere.json")), "--out", s(dir.path())]);
    let text = std::fs::read_to_string(dir.path().join("lift-sphere_seed0.json")).unwrap();
    let f: SynthFile = serde_json::from_str(&text).unwrap();
    assert!(f.result.eps_t > 0.0);
    assert!(f.result.verdict.success);
    assert_eq!(f.meta.seed, 0);
    let ply = std::fs::read_to_string(dir.path().join("lift-sphere_seed0.ply")).unwrap();
    assert!(ply.contains(&format!("config_hash={}", f.meta.config_hash)));
    let summary: SynthSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.successes, 1);
}

#[test]
fn synth_batch_uses_consecutive_seeds() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "synth",
        "--config",
        s(&demo("push_box.json")),
        "--seed",
        "5",
        "--batch",
        "3",
        "--out",
        s(dir.path()),
    ]);
    let summary: SynthSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = summary.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![5, 6, 7]);
    for r in &summary.runs {
        assert!(dir.path().join(&r.file).exists());
    }
}

#[test]
fn custom_obj_mesh_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let (v, t) = graspwrench::mesh::primitives::icosphere(0.04, 2);
    let mesh = graspwrench::mesh::TriMesh::new(v, t).unwrap();
    std::fs::write(dir.path().join("ball.obj"), mesh.to_obj()).unwrap();
    let cfg = dir.path().join("task.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 2, "mu": 0.5, "mesh": "ball.obj", "rig": "tripod3",
            "tws": {"w_t": [0, 0, 1, 0, 0, 0], "gamma_deg": 15},
            "init": {"translation": [0, 0, 0.075]},
            "optimizer": {"iterations": 30}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&["synth", "--config", s(&cfg), "--out", s(&out_dir)]);
    let f: SynthFile =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("tripod3_seed2.json")).unwrap()).unwrap();
    assert_eq!(f.mesh, "ball.obj");
    assert!(f.result.iterations <= 30);
}

#[test]
fn tableii_rle_grows_with_delta() {
    let out = run_ok(&[
        "bench",
        "--suite",
        "tableII",
        "--meshes",
        "sphere",
        "--per",
        "1",
        "--rle-points",
        "100",
        "--sp-probes",
        "200",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let rle = |delta: &str| -> f64 {
        rows.iter()
            .find(|r| &r[0] == "mean" && &r[5] == delta && &r[6] == "100000")
            .unwrap()[8]
            .parse()
            .unwrap()
    };
    let series: Vec<f64> = ["0.0", "15.0", "30.0", "45.0"].iter().map(|d| rle(d)).collect();
    assert!(series.windows(2).all(|w| w[0] < w[1]), "{series:?}");
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "3", "3"] {
        let o = dir.path().join(format!("w{workers}-{}", outputs.len()));
        let e = bin()
            .env("GWS_WORKERS", workers)
            .args(["estimate", "--config", s(&demo("fc5.json")), "--K", "5000"])
            .output()
            .unwrap();
        let m = bin()
            .env("GWS_WORKERS", workers)
            .args(["metrics", "--config", s(&demo("fc5.json")), "--K", "5000"])
            .output()
            .unwrap();
        let st = bin()
            .env("GWS_WORKERS", workers)
            .args(["synth", "--config", s(&demo("screw_knob.json")), "--batch", "2", "--out", s(&o)])
            .output()
            .unwrap();
        assert!(e.status.success() && m.status.success() && st.status.success());
        let synth = std::fs::read(o.join("screw-knob-proxy_seed1.json")).unwrap();
        let ply = std::fs::read(o.join("screw-knob-proxy_seed0.ply")).unwrap();
        outputs.push((e.stdout, m.stdout, synth, ply));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn invalid_input_exits_with_two() {
    let out = run(&["estimate", "--config", s(&demo("fc5.json")), "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mu": 0.5, "tws": {"w_t": [0, 0, 1, 0, 0, 0], "gamma_deg": "wide"}}"#).unwrap();
    let out = run(&["estimate", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tws.gamma_deg"));

    std::fs::write(&bad, r#"{"mu": 0.5, "tws": {"w_t": [0, 0, 0, 0, 0, 0], "gamma_deg": 15}, "contacts": []}"#).unwrap();
    assert_eq!(run(&["estimate", "--config", s(&bad)]).status.code(), Some(2));

    let out = bin()
        .env("GWS_WORKERS", "zero")
        .args(["gradcheck", "--trials", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["oracle"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "--config", "/definitely/missing.json"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("narrow.json");
    std::fs::write(
        &cfg,
        r#"{"mu": 0.5, "estimator": {"K": 10},
            "tws": {"w_t": [0, 0, 1, 0, 0, 0], "gamma_deg": 1},
            "contacts": [{"p": [1, 0, 0], "n": [-1, 0, 0]}, {"p": [-1, 0, 0], "n": [1, 0, 0]}]}"#,
    )
    .unwrap();
    assert_eq!(run(&["estimate", "--config", s(&cfg)]).status.code(), Some(3));

    let strict = dir.path().join("strict.json");
    std::fs::write(&strict, r#"{"trials": 20, "tolerance": 1e-30, "required": 1.0}"#).unwrap();
    let out = run(&["gradcheck", "--config", s(&strict)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"pass\": false"));
}

#[test]
fn gradcheck_passes_and_records_seed() {
    let out = run_ok(&["gradcheck", "--trials", "100", "--seed", "9"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["meta"]["seed"], 9);
    assert!(v["max_rel_error"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn overrides_change_provenance_hash() {
    let a = run_ok(&["estimate", "--config", s(&demo("fc5.json")), "--K", "100"]);
    let b = run_ok(&["estimate", "--config", s(&demo("fc5.json")), "--K", "101"]);
    let fa: BoundaryFile = serde_json::from_slice(&a.stdout).unwrap();
    let fb: BoundaryFile = serde_json::from_slice(&b.stdout).unwrap();
    assert_ne!(fa.meta.config_hash, fb.meta.config_hash);
    assert_eq!(fa.meta.seed, 7);
    assert_eq!(fb.u.len(), 101);
}
