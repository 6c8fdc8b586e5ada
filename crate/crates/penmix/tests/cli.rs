use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use penmix::wire::{
    parse_experiment, parse_json, read_experiment, ExperimentDoc, FamilyDoc, FitDoc, SummaryDoc, ValidationDoc,
    VerdictDoc,
};
use penmix_core::families::{fit_envelope, mean_sd};
use penmix_core::oracle::{grid_argmax, GridSpec};
use penmix_core::penalties::ScalePenalty;
use penmix_core::{penalized_objective, FamilyKind, FitStatus, PenaltySpec, Regime};
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn penmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penmix")).args(args).env_remove("PENMIX_SEED").output().unwrap()
}

fn penmix_env(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penmix")).args(args).env("PENMIX_SEED", seed).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

fn polylines(svg: &str) -> usize {
    let doc = roxmltree::Document::parse(svg).expect("valid XML");
    doc.descendants().filter(|n| n.has_tag_name("polyline")).count()
}

#[test]
fn single_component_fit_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let xs = [1.0, 2.5, -0.5, 3.25, 0.75];
    let text: String = xs.iter().map(|x| format!("{x}\n")).collect();
    let csv = write(&dir, "d.csv", &text);
    let out = dir.path().join("out");
    let run = penmix(&["fit", "--data", p(&csv), "--m", "1", "--penalty", "none", "--out", p(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let doc: FitDoc = parse_json(&read(&out.join("fit.json"))).unwrap();
    let (mean, sd) = mean_sd(&xs);
    let c = doc.theta.components()[0];
    assert!((c.mu - mean).abs() < 1e-8, "{} vs {mean}", c.mu);
    assert!((c.sigma - sd).abs() < 1e-8, "{} vs {sd}", c.sigma);
    assert_eq!(doc.status, FitStatus::Converged);
    assert!(read(&out.join("fit.txt")).contains("status    converged"));
}

#[test]
fn non_numeric_row_is_reported_by_line() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "d.csv", "# values\n1.0\n2.0\nbanana\n4.0\n");
    let run = penmix(&["fit", "--data", p(&csv), "--m", "1", "--penalty", "none"]);
    assert_eq!(run.status.code(), Some(1));
    let err = stderr(&run);
    assert!(err.contains("line 4") && err.contains("banana"), "{err}");
}

#[test]
fn unreadable_inputs_exit_one() {
    let run = penmix(&["fit", "--data", "/nonexistent.csv", "--m", "1", "--penalty", "none"]);
    assert_eq!(run.status.code(), Some(1));
    let run = penmix(&["fit", "--data", p(&data("example.csv")), "--header", "--m", "2", "--penalty", "lasso"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("preset"));
    let run = penmix(&["fit", "--m", "2"]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn degenerate_fit_exits_two() {
    let run = penmix(&["fit", "--data", p(&data("example.csv")), "--header", "--m", "2", "--penalty", "none"]);
    assert_eq!(run.status.code(), Some(2), "{}", stderr(&run));
    let stdout = String::from_utf8(run.stdout).unwrap();
    let doc: FitDoc = parse_json(&stdout[stdout.find('{').unwrap()..]).unwrap();
    assert_eq!(doc.status, FitStatus::DegenerateDetected);
}

#[test]
fn bundled_scale_fit_matches_fixture_and_oracle() {
    let dir = TempDir::new().unwrap();
    let run = penmix(&[
        "fit",
        "--data",
        p(&data("example.csv")),
        "--header",
        "--m",
        "2",
        "--penalty",
        "scale",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let got: FitDoc = parse_json(&read(&dir.path().join("fit.json"))).unwrap();
    let want: FitDoc = parse_json(&read(&data("example_fit_scale.json"))).unwrap();
    assert_eq!(got.status, want.status);
    assert!((got.logpen - want.logpen).abs() < 1e-6);
    for (a, b) in got.theta.components().iter().zip(want.theta.components()) {
        assert!((a.mu - b.mu).abs() < 1e-6 && (a.sigma - b.sigma).abs() < 1e-6);
    }
    for (a, b) in got.theta.weights().iter().zip(want.theta.weights()) {
        assert!((a - b).abs() < 1e-6);
    }

    // the fixture is no worse than an exhaustive grid search
    let spec = fit_envelope(FamilyKind::Normal, 3.0).unwrap();
    let pen = PenaltySpec::new(Regime::Scale(ScalePenalty { a: 1.0, b: 1.0, d: 0.5 }));
    let xs = penmix::io::read_data_file(&data("example.csv"), true).unwrap();
    let grid = GridSpec { m: 2, mu_points: 30, log_sigma_range: (-2.0, 1.0), log_sigma_points: 20, weight_points: 11 };
    let (_, g) = grid_argmax(&spec, &pen, &xs, &grid, xs.len() as u64).unwrap();
    let f = penalized_objective(&spec, &pen, &want.theta, &xs, xs.len() as u64).unwrap();
    assert!((f - want.logpen).abs() < 1e-9);
    assert!(g <= f + 1e-3, "grid {g} beats fit {f}");
}

#[test]
fn fit_json_round_trips() {
    let text = read(&data("example_fit_scale.json"));
    let doc: FitDoc = parse_json(&text).unwrap();
    assert_eq!(penmix::io::to_json(&doc).unwrap(), text);
}

#[test]
fn simulate_writes_three_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "min.json",
        r#"{"theta0": {"weights": [0.5, 0.5], "components": [{"mu": 0, "sigma": 1}, {"mu": 4, "sigma": 1}]},
            "pens": [{"regime": "scale", "params": {"a": 1, "b": 1}}],
            "n_grid": [30], "replicates": 1, "base_seed": 3}"#,
    );
    let out = dir.path().join("out");
    let run = penmix(&["simulate", "--config", p(&cfg), "--out", p(&out), "--jobs", "1"]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let csv = read(&out.join("report.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "pen_id,n,replicate,distance,status,seconds");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,30,0,") && lines[1].ends_with(','));
    let summary_text = read(&out.join("summary.json"));
    let summary: SummaryDoc = parse_json(&summary_text).unwrap();
    assert_eq!(summary.cells.len(), 1);
    assert_eq!(summary.cells[0].mean_seconds, None);
    assert_eq!(penmix::io::to_json(&summary).unwrap(), summary_text);
    let svg = read(&out.join("median_distance.svg"));
    assert_eq!(polylines(&svg), 1);
    assert!(svg.contains("sample size n") && svg.contains("median distance"));
}

#[test]
fn simulate_timing_fills_seconds() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let run = penmix(&["simulate", "--config", p(&data("quick.json")), "--out", p(&out), "--timing"]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let csv = read(&out.join("report.csv"));
    assert!(csv.lines().skip(1).all(|l| !l.ends_with(',')));
    let summary: SummaryDoc = parse_json(&read(&out.join("summary.json"))).unwrap();
    assert!(summary.cells.iter().all(|c| c.mean_seconds.is_some()));
    assert_eq!(polylines(&read(&out.join("median_distance.svg"))), 2);
}

#[test]
fn written_config_is_accepted_unchanged() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let run = penmix(&["simulate", "--config", p(&data("quick.json")), "--out", p(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let original = read_experiment(&data("quick.json")).unwrap();
    let written = read(&out.join("config.json"));
    assert_eq!(parse_experiment(&written).unwrap(), original);
    assert_eq!(penmix::io::to_json(&ExperimentDoc::from(&original)).unwrap(), written);
    let again = dir.path().join("again");
    let run = penmix(&["simulate", "--config", p(&out.join("config.json")), "--out", p(&again)]);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(read(&again.join("report.csv")), read(&out.join("report.csv")));
}

#[test]
fn missing_theta0_is_named_with_its_path() {
    let dir = TempDir::new().unwrap();
    let cfg =
        write(&dir, "bad.json", r#"{"pens": [{"regime": "none"}], "n_grid": [10], "replicates": 1, "base_seed": 1}"#);
    let run = penmix(&["simulate", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("theta0"), "{}", stderr(&run));

    let cfg = write(
        &dir,
        "bad2.json",
        r#"{"theta0": {"weights": [1], "components": [{"mu": 0, "sigma": 1}]},
            "pens": [{"regime": "none"}, {"regime": "ratio", "params": {"alpha": 3}}],
            "n_grid": [10], "replicates": 1, "base_seed": 1}"#,
    );
    let run = penmix(&["simulate", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("pens[1]"), "{}", stderr(&run));
}

#[test]
fn validate_exit_code_follows_failures() {
    let dir = TempDir::new().unwrap();
    let run = penmix(&["validate", "--penalty", p(&data("penalties/ratio.json")), "--m", "2", "--out", p(dir.path())]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("0 failure(s)"));
    let text = read(&dir.path().join("validate.json"));
    let doc: ValidationDoc = parse_json(&text).unwrap();
    assert_eq!(penmix::io::to_json(&doc).unwrap(), text);

    let run = penmix(&["validate", "--penalty", p(&data("penalties/ratio_alpha_m.json")), "--m", "2"]);
    assert_eq!(run.status.code(), Some(1));
    let stdout = String::from_utf8(run.stdout).unwrap();
    let json = &stdout[stdout.find('{').unwrap()..];
    let doc: ValidationDoc = parse_json(json).unwrap();
    let a6 = doc.reports.iter().find(|r| r.assumption == "A6").unwrap();
    assert_eq!(a6.verdict, VerdictDoc::Fail);
    assert!(a6.counterexample.contains_key("y"));

    let run = penmix(&["validate", "--penalty", "scale", "--m", "3", "--family", "laplace"]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let run = penmix(&["validate", "--penalty", "ratio", "--m", "2", "--family", "t:1.5", "--beta", "2"]);
    assert_eq!(run.status.code(), Some(1), "beta <= 2 cannot carry a ratio penalty");
}

#[test]
fn demo_writes_table_and_three_curves() {
    let dir = TempDir::new().unwrap();
    let run = penmix(&["demo-unbounded", "--seed", "2", "--n", "50", "--out", p(dir.path())]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let csv = read(&dir.path().join("demo.csv"));
    assert_eq!(csv.lines().count(), 13);
    assert!(csv.starts_with("t,loglik_none,objective_ratio,objective_scale\n0.1,"));
    let svg = read(&dir.path().join("demo.svg"));
    assert_eq!(polylines(&svg), 3);
    assert!(svg.contains("objective (nats)"));

    let one = dir.path().join("one");
    let run = penmix(&["demo-unbounded", "--t-grid", "1e-4", "--out", p(&one)]);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(read(&one.join("demo.csv")).lines().count(), 2);
}

#[test]
fn demo_rejects_a_single_point() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "one.csv", "0.5\n");
    let run = penmix(&["demo-unbounded", "--data", p(&csv), "--out", p(dir.path())]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("at least 2"));
    let run = penmix(&["demo-unbounded", "--data", p(&csv), "--seed", "1", "--out", p(dir.path())]);
    assert_eq!(run.status.code(), Some(1), "--data conflicts with --seed");
}

#[test]
fn seed_variable_overrides_flag() {
    let dir = TempDir::new().unwrap();
    let out = |name: &str| dir.path().join(name);
    penmix(&["demo-unbounded", "--seed", "5", "--out", p(&out("a"))]);
    penmix(&["demo-unbounded", "--seed", "9", "--out", p(&out("b"))]);
    let run = penmix_env(&["demo-unbounded", "--seed", "9", "--out", p(&out("c"))], "5");
    assert_eq!(run.status.code(), Some(0));
    let csv = |name: &str| read(&out(name).join("demo.csv"));
    assert_eq!(csv("a"), csv("c"));
    assert_ne!(csv("b"), csv("c"));
    let run = penmix_env(&["demo-unbounded", "--out", p(&out("d"))], "not-a-number");
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn envelope_json_is_a_family_document() {
    let dir = TempDir::new().unwrap();
    let run = penmix(&["envelope", "--family", "laplace", "--beta", "2.5", "--out", p(dir.path())]);
    assert_eq!(run.status.code(), Some(0));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.starts_with("family laplace beta 2.5: v0 = 0.5"), "{stdout}");
    let text = read(&dir.path().join("envelope.json"));
    let doc: FamilyDoc = parse_json(&text).unwrap();
    assert_eq!(doc.0, fit_envelope(FamilyKind::Laplace, 2.5).unwrap());
    assert_eq!(penmix::io::to_json(&doc).unwrap(), text);
    let run = penmix(&["envelope", "--family", "t:2", "--beta", "4"]);
    assert_eq!(run.status.code(), Some(1));
}
