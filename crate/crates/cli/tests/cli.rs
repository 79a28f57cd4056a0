use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const REFERENCE: [&str; 6] = ["--wtd", "dexp:3.63,32.57,0.586", "--eps", "0.258", "--jumps", "exp:1.0"];

fn dctrw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dctrw")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dctrw(dir, args);
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(out.status.success(), "dctrw {args:?} failed: {stderr}");
    stderr
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn simulate(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["simulate"];
    args.extend(REFERENCE);
    args.extend(["-o", out]);
    args.extend(extra);
    ok(dir, &args);
}

/// Rows of a numeric CSV written by the tool, without comments and header.
fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn meta<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix("# ").and_then(|r| r.strip_prefix(key)).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} metadata"))
}

fn event_count(ticks: &str) -> usize {
    // one reference tick per session carries no jump
    let sessions = ticks.lines().filter(|l| l.starts_with("# session")).count();
    ticks.lines().filter(|l| !l.starts_with('#') && *l != "time,price").count() - sessions
}

#[test]
fn simulate_event_count_matches_horizon_over_mean_wait() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "t.csv", &["--horizon", "1e6", "--seed", "7"]);
    let n = event_count(&read(dir.path(), "t.csv")) as f64;
    let expected = 1e6 / 15.61116;
    assert!((n - expected).abs() < 0.03 * expected, "{n} events, expected about {expected}");
    let m = json(dir.path(), "t.manifest.json");
    assert_eq!(m["subcommand"], "simulate");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["epsilon"], 0.258);
    assert_eq!(m["outputs"][0]["path"], "t.csv");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--wtd", "exp:2", "--eps", "0", "--jumps", "const:0.01", "--horizon", "1e4", "--seed", "3"];
    ok(dir.path(), &[&args[..], &["-o", "a.csv"]].concat());
    ok(dir.path(), &[&args[..], &["-o", "b.csv"]].concat());
    assert_eq!(read(dir.path(), "a.csv"), read(dir.path(), "b.csv"));
    ok(
        dir.path(),
        &[
            "simulate",
            "--wtd",
            "exp:2",
            "--eps",
            "0",
            "--jumps",
            "const:0.01",
            "--horizon",
            "1e4",
            "--seed",
            "4",
            "-o",
            "c.csv",
        ],
    );
    assert_ne!(read(dir.path(), "a.csv"), read(dir.path(), "c.csv"));
}

#[test]
fn invalid_parameters_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dctrw(dir.path(), &["simulate", "--wtd", "exp:1", "--eps", "1.5", "--jumps", "exp:1", "--horizon", "10"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
    assert!(!dir.path().join("ticks.csv").exists());
    assert_eq!(code(&dctrw(dir.path(), &["simulate", "--wtd", "exp:1", "--eps", "0.1", "--jumps", "exp:1"])), 2);
    assert_eq!(
        code(&dctrw(
            dir.path(),
            &["simulate", "--wtd", "gamma:1", "--eps", "0.1", "--jumps", "exp:1", "--horizon", "1"]
        )),
        2
    );
    assert_eq!(code(&dctrw(dir.path(), &["curves", "--wtd", "exp:1", "--eps", "0.1", "--m", "1.2"])), 2);
    assert_eq!(code(&dctrw(dir.path(), &["--bogus"])), 2);
    assert_eq!(code(&dctrw(dir.path(), &[])), 2);
}

#[test]
fn analyze_recovers_simulated_parameters() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "t.csv", &["--horizon", "1e6", "--seed", "7"]);
    ok(dir.path(), &["analyze", "t.csv"]);
    let model = json(dir.path(), "model.json");
    let n = model["fit_diagnostics"]["n_events"].as_f64().unwrap();
    let eps = model["epsilon"].as_f64().unwrap();
    assert!((eps - 0.258).abs() < 4.5 / n.sqrt(), "ε̂ = {eps}");
    let tau1 = model["wtd"]["tau1"].as_f64().unwrap();
    assert!((tau1 - 3.63).abs() < 0.05 * 3.63, "τ̂₁ = {tau1}");
    let vaf = read(dir.path(), "vaf.csv");
    assert!(vaf.starts_with("# version="));
    assert!(vaf.lines().any(|l| l == "lag,nvaf,stderr"));
    assert_eq!(rows(&vaf).len(), 99);
}

#[test]
fn analyze_rejects_empty_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    assert_eq!(code(&dctrw(dir.path(), &["analyze", "empty.csv"])), 3);
    std::fs::write(dir.path().join("bad.csv"), "time,price\n0,100\n1,abc\n").unwrap();
    let out = dctrw(dir.path(), &["analyze", "bad.csv"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3"));
    assert_eq!(code(&dctrw(dir.path(), &["analyze", "missing.csv"])), 1);
    assert_eq!(code(&dctrw(dir.path(), &["analyze"])), 2);
}

#[test]
fn seasonal_round_trip_recovers_the_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let day = 28800.0;
    simulate(
        dir.path(),
        "s.csv",
        &["--season", "14986,2.25e8", "--day-length", "28800", "--horizon", "5760000", "--seed", "3"],
    );
    ok(
        dir.path(),
        &["analyze", "s.csv", "--seasonality", "--day-length", "28800", "--vaf-bin", "10", "--vaf-max-lag", "200"],
    );
    let s = &json(dir.path(), "model.json")["seasonality"];
    let (p, q) = (s["p"].as_f64().unwrap(), s["q"].as_f64().unwrap());
    assert!((p - 14986.0).abs() < 0.01 * day, "p̂ = {p}");
    assert!((q / 2.25e8 - 1.0).abs() < 0.15, "q̂ = {q}");

    ok(dir.path(), &["curves", "--model", "model.json", "--lags", "15:195:10", "--bin-width", "10"]);
    let curves = read(dir.path(), "curves.csv");
    assert!(curves.lines().any(|l| l == "lag,nvaf_stationary,nvaf_seasonal"));
    ok(dir.path(), &["compare", "--empirical", "vaf.csv", "--theory", "curves.csv"]);
    let report = json(dir.path(), "report.json");
    assert_eq!(report["theory_column"], "nvaf_seasonal");
    assert!(report["chi_square_per_dof"].as_f64().unwrap() < 3.0);
}

#[test]
fn curves_carry_the_three_rates_and_match_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "curves",
            "--wtd",
            "dexp:3.63,32.57,0.586",
            "--eps",
            "0.258",
            "--m",
            "0.269",
            "--lags",
            "0.5:100:0.5",
            "--oracle",
        ],
    );
    let text = read(dir.path(), "curves.csv");
    assert_eq!(meta(&text, "delta_weight"), "1");
    let rates: Vec<f64> = meta(&text, "rates").split(' ').map(|x| x.parse().unwrap()).collect();
    for (got, want) in rates.iter().zip([0.1320, 0.2345, 0.0268]) {
        assert!((got - want).abs() < 5e-5, "rate {got}, expected {want}");
    }
    assert!(text.lines().any(|l| l == "lag,nvaf_stationary,oracle"));
    let table = rows(&text);
    assert_eq!(table.len(), 200);
    for r in &table {
        assert!((r[1] - r[2]).abs() <= 1e-6 * r[1].abs(), "lag {}: {} vs {}", r[0], r[1], r[2]);
    }
}

#[test]
fn memoryless_exponential_curve_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["curves", "--wtd", "exp:15.6", "--eps", "0", "--jumps", "exp:1", "--oracle"]);
    for r in rows(&read(dir.path(), "curves.csv")) {
        assert_eq!(r[1], 0.0);
        assert!(r[2].abs() < 1e-9);
    }
    assert_eq!(
        code(&dctrw(
            dir.path(),
            &["curves", "--wtd", "exp:1", "--eps", "0.1", "--m", "0.5", "--oracle", "--bin-width", "1"]
        )),
        2
    );
}

#[test]
fn compare_is_calibrated_and_discriminating() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "t.csv", &["--horizon", "1e7", "--seed", "11"]);
    ok(dir.path(), &["analyze", "t.csv"]);
    ok(
        dir.path(),
        &[
            "curves",
            "--wtd",
            "dexp:3.63,32.57,0.586",
            "--eps",
            "0.258",
            "--jumps",
            "exp:1",
            "--lags",
            "1.5:99.5:1",
            "--bin-width",
            "1",
            "-o",
            "theory.csv",
        ],
    );
    ok(dir.path(), &["compare", "--empirical", "vaf.csv", "--theory", "theory.csv"]);
    let report = json(dir.path(), "report.json");
    let per_dof = report["chi_square_per_dof"].as_f64().unwrap();
    assert_eq!(report["compared"], 99);
    assert!((0.6..1.6).contains(&per_dof), "χ²/dof = {per_dof}");

    ok(
        dir.path(),
        &["curves", "--wtd", "dexp:3.63,32.57,0.586", "--eps", "0", "--m", "1", "--lags", "1:100:1", "-o", "flat.csv"],
    );
    ok(dir.path(), &["compare", "--empirical", "vaf.csv", "--theory", "flat.csv", "-o", "flat.json"]);
    assert!(json(dir.path(), "flat.json")["chi_square_per_dof"].as_f64().unwrap() > 10.0);

    ok(dir.path(), &["curves", "--wtd", "exp:1", "--eps", "0.2", "--m", "0.5", "--lags", "200:300:1", "-o", "far.csv"]);
    assert_eq!(code(&dctrw(dir.path(), &["compare", "--empirical", "vaf.csv", "--theory", "far.csv"])), 2);
    assert_eq!(code(&dctrw(dir.path(), &["compare", "--empirical", "theory.csv", "--theory", "theory.csv"])), 3);
    assert_eq!(
        code(&dctrw(
            dir.path(),
            &["compare", "--empirical", "vaf.csv", "--theory", "theory.csv", "--column", "nvaf_seasonal"]
        )),
        3
    );
}

#[test]
fn manifest_replays_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "t.csv", &["--horizon", "2e5", "--seed", "5"]);
    ok(dir.path(), &["analyze", "t.csv", "--vaf-max-lag", "50"]);
    let model = read(dir.path(), "model.json");
    let vaf = read(dir.path(), "vaf.csv");
    let manifest = read(dir.path(), "model.manifest.json");
    std::fs::remove_file(dir.path().join("model.json")).unwrap();
    std::fs::remove_file(dir.path().join("vaf.csv")).unwrap();

    ok(dir.path(), &["--from-manifest", "model.manifest.json"]);
    assert_eq!(read(dir.path(), "model.json"), model);
    assert_eq!(read(dir.path(), "vaf.csv"), vaf);
    assert_eq!(read(dir.path(), "model.manifest.json"), manifest);
    ok(dir.path(), &["--from-manifest", "t.manifest.json", "--verify"]);

    std::fs::write(dir.path().join("vaf.csv"), "tampered").unwrap();
    assert!(ok(dir.path(), &["--from-manifest", "model.manifest.json", "--verify"]).contains("verified"));
    assert_eq!(read(dir.path(), "vaf.csv"), "tampered");

    let ticks = read(dir.path(), "t.csv");
    std::fs::write(dir.path().join("t.csv"), format!("{ticks}# edited\n")).unwrap();
    assert_eq!(code(&dctrw(dir.path(), &["--from-manifest", "model.manifest.json"])), 2);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "t.csv", &["--horizon", "2e5", "--seed", "9"]);
    let run = |threads: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_dctrw"))
            .current_dir(dir.path())
            .env("DCTRW_THREADS", threads)
            .args(["analyze", "t.csv", "--vaf-max-lag", "50", "--vaf-out", out, "--model-out", &format!("{out}.json")])
            .output()
            .unwrap();
        assert!(status.status.success());
        (read(dir.path(), out), read(dir.path(), &format!("{out}.json")))
    };
    assert_eq!(run("1", "one.csv"), run("3", "three.csv"));
    assert_eq!(code(&dctrw(dir.path(), &["--threads", "0", "curves", "--wtd", "exp:1", "--eps", "0", "--m", "1"])), 2);
}

#[test]
fn config_file_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "flags.csv", &["--horizon", "1e4", "--seed", "2"]);
    std::fs::write(
        dir.path().join("run.toml"),
        "wtd = \"dexp:3.63,32.57,0.586\"\neps = 0.258\njumps = \"exp:1.0\"\nhorizon = 1e4\nseed = 99\nout = \"file.csv\"\n",
    )
    .unwrap();
    // flags override the file
    ok(dir.path(), &["simulate", "--config", "run.toml", "--seed", "2"]);
    assert_eq!(read(dir.path(), "file.csv"), read(dir.path(), "flags.csv"));

    std::fs::write(dir.path().join("typo.toml"), "wdt = \"exp:1\"\n").unwrap();
    assert_eq!(code(&dctrw(dir.path(), &["simulate", "--config", "typo.toml"])), 3);
    std::fs::write(dir.path().join("broken.toml"), "eps = \n").unwrap();
    let out = dctrw(dir.path(), &["simulate", "--config", "broken.toml"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.toml:1"));
}
