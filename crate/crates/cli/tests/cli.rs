//! End-to-end tests of the `relucert` binary: exit-code contract, report
//! determinism modulo timing fields, and the export/oracle subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("relucert_cli_{tag}_{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn relucert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relucert"))
        .args(args)
        .env_remove("RELUCERT_MIP_BUDGET_MS")
        .output()
        .expect("binary runs")
}

fn write_query(dir: &Path, name: &str, threshold: Option<f64>) -> PathBuf {
    let property = match threshold {
        Some(t) => format!(r#", "property": {{"kind": "max_leq", "threshold": {t}}}"#),
        None => String::new(),
    };
    let text = format!(
        r#"{{
  "domain": {{"box": {{"lower": [-1, -1, -1], "upper": [1, 1, 1]}}}},
  "objective": {{"coeffs": [1.0], "constant": 0.0}}{property}
}}"#
    );
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = scratch_dir("exit");
    let net = fixture("fc_3331.json");
    let q65 = write_query(&dir, "q65.json", Some(6.5));

    // deepmip proves max <= 6.5 (bound 6.0): exit 0.
    let out = relucert(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q65.to_str().unwrap(),
        "--mode",
        "deepmip",
        "--alpha",
        "zero",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // symbolic alone reaches 6.6 > 6.5: exit 1.
    let out = relucert(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q65.to_str().unwrap(),
        "--mode",
        "symbolic",
        "--alpha",
        "zero",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // missing file: exit 2.
    let out = relucert(&[
        "verify",
        "--network",
        "/nonexistent.json",
        "--query",
        q65.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // malformed network: exit 2 with a message.
    let bad = dir.join("bad.json");
    fs::write(&bad, "{\"input_dim\": 0, \"layers\": []}").unwrap();
    let out = relucert(&[
        "verify",
        "--network",
        bad.to_str().unwrap(),
        "--query",
        q65.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn cascade_decides_at_the_right_stage() {
    let dir = scratch_dir("cascade");
    let net = fixture("fc_3331.json");
    let q = write_query(&dir, "q.json", Some(6.5));
    let out = relucert(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--mode",
        "cascade",
        "--alpha",
        "zero",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "holds");
    assert_eq!(report["decided_by"], "deepmip");

    let q7 = write_query(&dir, "q7.json", Some(7.0));
    let out = relucert(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q7.to_str().unwrap(),
        "--mode",
        "cascade",
        "--alpha",
        "zero",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["decided_by"], "symbolic");
}

#[test]
fn reports_are_deterministic_modulo_timings() {
    let dir = scratch_dir("determinism");
    let net = fixture("fc_3331.json");
    let q = write_query(&dir, "q.json", Some(5.0));
    let run = |path: &Path| {
        let out = relucert(&[
            "verify",
            "--network",
            net.to_str().unwrap(),
            "--query",
            q.to_str().unwrap(),
            "--mode",
            "cascade",
            "--alpha",
            "zero",
            "--seed",
            "17",
            "--compare",
            "--report",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(1)); // true max 6 > 5: unknown
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timings_ms");
        v
    };
    let a = run(&dir.join("a.json"));
    let b = run(&dir.join("b.json"));
    assert_eq!(a, b);
    // The unknown verdict on a falsifiable threshold carries a witness.
    assert!(a["witness"]["objective"].as_f64().unwrap() > 5.0);
}

#[test]
fn compare_emits_all_four_modes() {
    let dir = scratch_dir("compare");
    let net = fixture("fc_3331.json");
    let q = write_query(&dir, "q.json", None);
    let out = relucert(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--compare",
        "--alpha",
        "zero",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bounds = report["objective_bounds"].as_array().unwrap();
    assert_eq!(bounds.len(), 4);
    let upper: Vec<f64> = bounds
        .iter()
        .map(|b| b["upper"].as_f64().unwrap())
        .collect();
    assert!((upper[0] - 9.0).abs() < 1e-6, "interval upper {}", upper[0]);
    assert!((upper[1] - 6.6).abs() < 1e-6, "symbolic upper {}", upper[1]);
    assert!((upper[3] - 6.0).abs() < 1e-6, "deepmip upper {}", upper[3]);
    // Tightening across the cascade is monotone.
    assert!(upper.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn verbose_flag_and_box_concretization() {
    let dir = scratch_dir("flags");
    let net = fixture("fc_3331.json");
    let q = write_query(&dir, "q.json", None);

    // --verbose attaches per-layer bounds to the report.
    let out = relucert(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--mode",
        "interval",
        "--verbose",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pre_upper = report["layer_bounds"]["pre_upper"].as_array().unwrap();
    assert_eq!(pre_upper.len(), 4); // input plus three layers

    // Box-only concretization skips the intermediate one-deep solves, so the
    // running example certifies 6.2 instead of 6.0.
    let out = relucert(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--mode",
        "deepmip",
        "--alpha",
        "zero",
        "--concretize",
        "box",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let upper = report["objective_bounds"][0]["upper"].as_f64().unwrap();
    assert!(
        (upper - 6.2).abs() < 1e-6,
        "box-concretized deepmip upper {upper}"
    );
}

#[test]
fn export_mip_writes_parseable_file() {
    let dir = scratch_dir("export");
    let net = fixture("fc_3331.json");
    let q = write_query(&dir, "q.json", Some(6.5));
    let out_path = dir.join("layer2.lp");
    let out = relucert(&[
        "export-mip",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--layer",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&out_path).unwrap();
    let parsed = relucert_core::mip::parse_lp_text(&text).unwrap();
    assert_eq!(parsed.binaries.len(), 3);
    assert_eq!(parsed.constraints.len(), 12);

    // No ReLU is relaxed at the output layer, so there is no layer-3 term.
    let out = relucert(&[
        "export-mip",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--layer",
        "3",
        "--out",
        dir.join("nope.lp").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hidden_oracle_subcommand_reports_exact_range() {
    let dir = scratch_dir("oracle");
    let net = fixture("fc_3331.json");
    let q = write_query(&dir, "q.json", None);
    let out = relucert(&[
        "oracle",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--samples",
        "5000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["exact"]["max"].as_f64().unwrap() - 6.0).abs() < 1e-8);
    assert!(v["exact"]["min"].as_f64().unwrap().abs() < 1e-8);
    assert!(v["sampled"]["max"].as_f64().unwrap() <= 6.0 + 1e-9);
}

#[test]
fn env_var_sets_default_budget() {
    let dir = scratch_dir("env");
    let net = fixture("fc_3331.json");
    let q = write_query(&dir, "q.json", Some(6.5));
    let out = Command::new(env!("CARGO_BIN_EXE_relucert"))
        .args([
            "verify",
            "--network",
            net.to_str().unwrap(),
            "--query",
            q.to_str().unwrap(),
            "--mode",
            "deepmip",
            "--alpha",
            "zero",
        ])
        .env("RELUCERT_MIP_BUDGET_MS", "750")
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["mip_budget_ms"], 750);

    // The flag wins over the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_relucert"))
        .args([
            "verify",
            "--network",
            net.to_str().unwrap(),
            "--query",
            q.to_str().unwrap(),
            "--mode",
            "deepmip",
            "--alpha",
            "zero",
            "--mip-budget-ms",
            "900",
        ])
        .env("RELUCERT_MIP_BUDGET_MS", "750")
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["mip_budget_ms"], 900);
}

#[test]
fn alpha_file_policy_matches_fixed_zero() {
    let dir = scratch_dir("alpha");
    let net = fixture("fc_3331.json");
    let q = write_query(&dir, "q.json", None);
    let alpha_path = dir.join("alpha.json");
    fs::write(
        &alpha_path,
        r#"{"1": [0.0, 0.0, 0.0], "2": [0.0, 0.0, 0.0], "3": [0.0]}"#,
    )
    .unwrap();

    let with_file = relucert(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--mode",
        "symbolic",
        "--alpha",
        &format!("file:{}", alpha_path.display()),
    ]);
    assert_eq!(with_file.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&with_file.stdout).unwrap();
    assert_eq!(report["config"]["alpha"], "explicit");
    let upper = report["objective_bounds"][0]["upper"].as_f64().unwrap();
    assert!((upper - 6.6).abs() < 1e-6);

    // Out-of-range values are a configuration error.
    fs::write(&alpha_path, r#"{"1": [0.0, 2.0, 0.0]}"#).unwrap();
    let bad = relucert(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--mode",
        "symbolic",
        "--alpha",
        &format!("file:{}", alpha_path.display()),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn suite_smoke_test_small_epsilon() {
    let net = fixture("toy_net.json");
    let data = fixture("toy_data.json");
    let out = relucert(&[
        "suite",
        "--network",
        net.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--epsilon",
        "0.01",
        "--mode",
        "interval",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let summary = &report["summaries"][0];
    assert_eq!(summary["mode"], "interval");
    assert_eq!(summary["solved"], summary["attempted"]);
}
