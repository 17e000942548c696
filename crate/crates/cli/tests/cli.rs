use std::path::Path;
use std::process::{Command, Output};

use ifx_cli::config::ExperimentConfig;
use ifx_cli::run::{default_radii, execute};

fn ifx(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifx"))
        .args(args)
        .current_dir(cwd)
        .env_remove("IFX_CACHE_DIR")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SPECTRUM: &str = "[model]\nname = \"ssh_wall\"\nparams = { m_left = 0.5, m_right = 2.0 }\n\n[task.essential_spectrum]\ngrid_points = 256\n";

#[test]
fn malformed_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.toml", "[model\nname = 1"),
        ("unknown_key.toml", "[model]\nname = \"ssh_wall\"\ncolour = 3\n\n[task.essential_spectrum]\n"),
        ("unknown_task.json", r#"{"model": {"name": "ssh_wall"}, "task": {"band_structure": {}}}"#),
        ("task_key.json", r#"{"model": {"name": "ssh_wall"}, "task": {"index": {"half_width": 20, "L": 3}}}"#),
        ("model.json", r#"{"model": {"name": "graphene"}, "task": {"essential_spectrum": {}}}"#),
        ("param.json", r#"{"model": {"name": "ssh_wall", "params": {"m_left": 1.0}}, "task": {"essential_spectrum": {}}}"#),
        ("horizon.json", r#"{"model": {"name": "ssh_wall"}, "task": {"non_propagation": {"half_width": 50, "target": "left", "support": [2, 2.8]}}}"#),
        ("class.json", r#"{"model": {"name": "ssh_wall"}, "task": {"non_propagation": {"half_width": 50, "target": "left", "support": [2, 2.8], "steps": 5}}}"#),
    ];
    for (name, body) in cases {
        let p = write(dir.path(), name, body);
        let out = ifx(&["--out", dir.path().join("o").to_str().unwrap(), "run", &p], dir.path());
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let diag: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(diag["error"], "config", "{name}");
    }
    assert_eq!(ifx(&["run", "/nonexistent.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(ifx(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    // support overlapping the left bulk band
    let p = write(
        dir.path(),
        "bad.toml",
        "[model]\nname = \"ssh_wall\"\n\n[task.non_propagation]\nhalf_width = 60\ntarget = \"left\"\nsupport = [0.6, 1.4]\nt_max = 5.0\n",
    );
    let out = ifx(&["--out", "o", "run", &p], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let diag: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"], "numerical");
    assert!(diag["message"].as_str().unwrap().contains("hypothesis"));
}

#[test]
fn validate_and_list() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "ok.toml", SPECTRUM);
    let out = ifx(&["validate", &p], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], true);
    assert!(!dir.path().join("results").exists());

    let out = ifx(&["list-models"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["ssh_wall", "ssh_bulk", "split_step_walk_wall", "laplacian", "cartesian_2d_wall", "radial_2d", "cone_2d", "vo_1d"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn json_and_toml_configs_hash_alike() {
    let json = r#"{"model": {"name": "ssh_wall", "params": {"m_left": 0.5, "m_right": 2.0}},
                   "task": {"essential_spectrum": {"grid_points": 256}}}"#;
    let a = ExperimentConfig::parse(SPECTRUM, "toml").unwrap();
    let b = ExperimentConfig::parse(json, "").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.hash(), b.hash());
    let mut c = a.clone();
    c.output = Some(ifx_cli::config::OutputSpec { dir: "elsewhere".into() });
    assert_eq!(c.hash(), a.hash());
}

#[test]
fn spectrum_run_writes_hull_and_hash() {
    let cfg = ExperimentConfig::parse(SPECTRUM, "toml").unwrap();
    let out = execute(&cfg).unwrap();
    let hull = out.artifacts.iter().find(|a| a.name == "hull.csv").unwrap();
    let mut lines = hull.body.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_sha256={}", cfg.hash()));
    assert_eq!(lines.next().unwrap(), "lower,upper");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows, [(-3.0, -0.5), (0.5, 3.0)]);
    let json = out.artifacts.iter().find(|a| a.name == "essential_spectrum.json").unwrap();
    let v: serde_json::Value = serde_json::from_str(&json.body).unwrap();
    assert_eq!(v["config_hash"], cfg.hash());
    assert_eq!(v["certificates"]["flags"]["chiral"], true);
    assert!(out.artifacts.iter().any(|a| a.name == "bands.csv"));
}

#[test]
fn index_grid_table() {
    let cfg = ExperimentConfig::parse(
        "[model]\nname = \"ssh_wall\"\n\n[task.index]\nhalf_width = 30\nmass_grid = [0.25, 0.5, 2.0, 4.0]\nflow_steps = 9\n",
        "toml",
    )
    .unwrap();
    let out = execute(&cfg).unwrap();
    assert!(out.passed);
    let json = out.artifacts.iter().find(|a| a.name == "index.json").unwrap();
    let v: serde_json::Value = serde_json::from_str(&json.body).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    for r in rows {
        let (a, b) = (r["masses"][0].as_f64().unwrap(), r["masses"][1].as_f64().unwrap());
        let expect = (a < 1.0) as i64 - (b < 1.0) as i64;
        assert_eq!(r["index"], expect);
        assert_eq!(r["report"]["identity_residual"], 0);
        assert_eq!(r["flow"]["flow"], expect);
        assert_eq!(r["windings"]["left"], (a < 1.0) as i64);
    }
}

#[test]
fn perturbation_requires_self_adjoint_model() {
    let cfg = ExperimentConfig::parse(
        r#"{"model": {"name": "split_step_walk_wall", "perturbation": {"seed": 1}}, "task": {"essential_spectrum": {}}}"#,
        "json",
    )
    .unwrap();
    assert_eq!(execute(&cfg).unwrap_err().exit_code(), 2);
}

#[test]
fn cache_directory_reuses_results() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "s.toml", SPECTRUM);
    let cache = dir.path().join("cache");
    let run = |out: &str| {
        Command::new(env!("CARGO_BIN_EXE_ifx"))
            .args(["--out", out, "run", &p])
            .current_dir(dir.path())
            .env("IFX_CACHE_DIR", &cache)
            .output()
            .unwrap()
    };
    assert!(run("a").status.success());
    let hash = ExperimentConfig::parse(SPECTRUM, "toml").unwrap().hash();
    assert!(cache.join(&hash).join("MANIFEST").exists());
    assert!(run("b").status.success());
    for name in ["hull.csv", "essential_spectrum.json", "spectrum_points.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(name)).unwrap(),
            std::fs::read(dir.path().join("b").join(name)).unwrap()
        );
    }
}

#[test]
fn radii_defaults() {
    assert_eq!(default_radii(400), [0, 5, 10, 20, 40, 80, 160]);
    assert_eq!(default_radii(30), [0, 5, 10]);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        ifx_cli::run::build_model(&cfg).unwrap();
        n += 1;
    }
    assert!(n >= 5);
}
