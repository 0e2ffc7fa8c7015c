use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_MARKET: &str = r#"
n_subnets = 24
n_days = 150
noise_std = 0.02
halving_day = 75
seed = 9
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subnet-factors"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_ok(args: &[&str]) {
    let o = cli(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
}

fn write_market(dir: &Path) -> String {
    let p = dir.join("market.toml");
    fs::write(&p, SMALL_MARKET).unwrap();
    p.display().to_string()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cli(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(cli(&["stats", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = cli(&["--out", &out, "ingest"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no data source"));
}

#[test]
fn missing_upstream_artifact_names_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = cli(&["--out", &out, "stats"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run `factors` first"), "{}", stderr(&o));
}

#[test]
fn locked_run_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(".lock"), "1\n").unwrap();
    let out = dir.path().display().to_string();
    let o = cli(&["--out", &out, "synth"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("locked"));
}

#[test]
fn synthetic_report_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let market = write_market(dir.path());
    let out = dir.path().join("run").display().to_string();
    run_ok(&["--out", &out, "synth", &market]);
    run_ok(&["--out", &out, "report"]);
    let root = dir.path().join("run");
    let index: serde_json::Value = serde_json::from_slice(&fs::read(root.join("report/index.json")).unwrap()).unwrap();
    assert_eq!(index["failed"], serde_json::json!({}), "{index}");
    for (_, path) in index["tables"].as_object().unwrap() {
        assert!(root.join(path.as_str().unwrap()).is_file(), "{path}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(root.join("manifest.json")).unwrap()).unwrap();
    for cmd in [
        "synth",
        "build-panel",
        "factors",
        "stats",
        "fm",
        "grs",
        "halving",
        "slippage",
        "report",
    ] {
        assert!(
            manifest["commands"][cmd]["outputs"]
                .as_object()
                .is_some_and(|o| !o.is_empty()),
            "{cmd}"
        );
    }
    let grs = fs::read_to_string(root.join("grs/grs.csv")).unwrap();
    // two leg spreads are factors, and with a fixed cross-section each sort's
    // size-weighted legs sum to the market: six directions drop out
    assert!(grs.lines().nth(1).unwrap().ends_with(",12,6,3"), "{grs}");
    let halving = fs::read_to_string(root.join("halving/halving.csv")).unwrap();
    assert!(halving.contains("2025-04-30"), "{halving}");
    assert!(!root.join(".lock").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let market = write_market(dir.path());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name).display().to_string();
        run_ok(&["--out", &out, "ingest", "--synth", &market]);
        run_ok(&["--out", &out, "build-panel"]);
        run_ok(&["--out", &out, "factors"]);
        run_ok(&["--out", &out, "stats"]);
        outputs.push((
            fs::read(dir.path().join(name).join("factors/factors.csv")).unwrap(),
            fs::read(dir.path().join(name).join("stats/summary.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn snapshot_ingest_matches_synthetic_source() {
    let dir = tempfile::tempdir().unwrap();
    let market = write_market(dir.path());
    let a = dir.path().join("a").display().to_string();
    run_ok(&["--out", &a, "synth", &market]);
    let snap = dir.path().join("a/synth/snapshot.csv").display().to_string();
    let fx = dir.path().join("a/synth/fx.csv").display().to_string();
    let b = dir.path().join("b").display().to_string();
    run_ok(&["--out", &b, "ingest", "--snapshot", &snap, "--fx", &fx]);
    assert_eq!(
        fs::read(dir.path().join("a/synth/snapshot.csv")).unwrap(),
        fs::read(dir.path().join("b/ingest/snapshot.csv")).unwrap()
    );
    for out in [&a, &b] {
        run_ok(&["--out", out, "build-panel"]);
        run_ok(&["--out", out, "factors"]);
    }
    assert_eq!(
        fs::read(dir.path().join("a/factors/factors.csv")).unwrap(),
        fs::read(dir.path().join("b/factors/factors.csv")).unwrap()
    );
}

#[test]
fn empty_panel_reports_no_eligible_observations() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("startup.csv");
    let mut text = String::from(
        "date,netuid,price_tao,mcap_tao,tau_reserve,alpha_reserve,alpha_staked,emission_rao_per_day,startup_mode\n",
    );
    for d in 1..=9 {
        for n in 1..=4 {
            text.push_str(&format!("2025-03-0{d},{n},,,,,,0,true\n"));
        }
    }
    fs::write(&snap, text).unwrap();
    let out = dir.path().join("run").display().to_string();
    run_ok(&["--out", &out, "ingest", "--snapshot", &snap.display().to_string()]);
    run_ok(&["--out", &out, "build-panel"]);
    run_ok(&["--out", &out, "factors"]);
    let o = cli(&["--out", &out, "stats"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no eligible observations"), "{}", stderr(&o));
}
