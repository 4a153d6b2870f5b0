use std::process::{Command, Output};

use uan_relay::scenario::{parse_csv, ScenarioConfig, COMPARE_COLUMNS, SIMULATE_COLUMNS};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uan-relay")).args(args).output().unwrap()
}

#[test]
fn optimize_writes_band_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bands.csv");
    let o = cli(&["--n", "16", "--trials", "2000", "--scheme", "approx", "--out", out.to_str().unwrap(), "optimize"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let first = text.lines().next().unwrap();
    let cfg = ScenarioConfig { n: 16, trials: 2000, scheme: uan_relay::scenario::Scheme::Approx, ..Default::default() };
    assert_eq!(first, format!("# config_hash={}, seed=1", cfg.hash()));
    let table = parse_csv(&out).unwrap();
    assert_eq!(table.rows.len(), 16);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(report["scheme"], "approx");
    assert!(report["d_sr"].as_f64().unwrap() > 0.0);
}

#[test]
fn optimize_to_stdout() {
    let o = cli(&["--n", "4", "--trials", "500", "optimize"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("# config_hash="));
    assert_eq!(stdout.lines().count(), 2 + 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("d_sr"));
}

#[test]
fn compare_and_simulate_have_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cmp = dir.path().join("cmp.csv");
    let o = cli(&[
        "--n",
        "8",
        "--trials",
        "1000",
        "--out",
        cmp.to_str().unwrap(),
        "compare",
        "--ratios",
        "1:1,4:1",
        "--rates",
        "median,500",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = parse_csv(&cmp).unwrap();
    assert_eq!(t.columns, COMPARE_COLUMNS);
    assert_eq!(t.rows.len(), 4);

    let sim = dir.path().join("sim.csv");
    let o = cli(&[
        "--n",
        "8",
        "--trials",
        "500",
        "--out",
        sim.to_str().unwrap(),
        "simulate",
        "--budgets-db",
        "80,90",
        "--n-ref",
        "16",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = parse_csv(&sim).unwrap();
    assert_eq!(t.columns, SIMULATE_COLUMNS);
    assert_eq!(t.rows.len(), 2);
}

#[test]
fn sweep_d_covers_the_relay_range() {
    let o = cli(&["--n", "8", "--trials", "500", "sweep-d", "--points", "5"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let d: Vec<f64> = stdout.lines().skip(2).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(d.len(), 5);
    assert!(d.windows(2).all(|w| w[1] > w[0]));
    assert!(d[0] > 0.0 && d[4] < 10.0);
}

#[test]
fn verify_hessian_exit_code_reflects_verdicts() {
    // small interior sample passes
    let o = cli(&["verify-hessian", "--points", "20"]);
    let stderr = String::from_utf8_lossy(&o.stderr).to_string();
    let failed = !stderr.contains(" 0 fail, 0 inconclusive");
    assert_eq!(o.status.code(), Some(if failed { 1 } else { 0 }), "{stderr}");
    // the default seed's full sweep contains non-passing points
    let o = cli(&["verify-hessian"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"n": 8, "no_such_key": 1}"#).unwrap();
    let o = cli(&["--config", cfg.to_str().unwrap(), "optimize"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    std::fs::write(&cfg, r#"{"gain_ratio": [0.0, 1.0]}"#).unwrap();
    assert_eq!(cli(&["--config", cfg.to_str().unwrap(), "optimize"]).status.code(), Some(2));

    assert_eq!(cli(&["--n", "0", "optimize"]).status.code(), Some(2));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 4, "gain_ratio": [4.0, 1.0], "trials": 300}"#).unwrap();
    let o = cli(&["--config", cfg.to_str().unwrap(), "--seed", "9", "optimize"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().next().unwrap().ends_with("seed=9"));
    assert_eq!(stdout.lines().count(), 2 + 4);
}

#[test]
fn full_profile_uses_full_band_count() {
    let o = cli(&["--full", "--trials", "200", "--scheme", "upa-fixed", "optimize"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2 + uan_relay::scenario::FULL_SCALE_BANDS);
}
