//! Subcommands of the `penmix` binary.
//!
//! Exit codes: 0 on success, 1 on any error, and 2 from `fit` when the
//! winning fit is degenerate. `validate` exits 1 when an assumption fails.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use penmix_core::estimator::fit;
use penmix_core::experiments::sample;
use penmix_core::oracle::degeneracy_path;
use penmix_core::penalties::{
    validate_assumption6, validate_assumption8, validate_assumption9, validate_assumptions_10_11_12,
    validate_tail_envelope, ProbeGrid,
};
use penmix_core::{
    penalized_objective, FamilyKind, FamilySpec, FitConfig, FitResult, FitStatus, MixtureParams, PenaltySpec, Regime,
};
use serde::{Deserialize, Serialize};

use crate::io::{read_data_file, to_json, write_file};
use crate::plot::{Axis, Plot, Series};
use crate::runner::run_study;
use crate::wire::{
    family_spec, parse_family_arg, preset, read_experiment, read_json_file, resolve_penalty, ExperimentDoc, FamilyDoc,
    FitDoc, PenaltyDoc, ReportDoc, ValidationDoc, VerdictDoc,
};

/// Environment variable that takes precedence over every `--seed` flag.
pub const SEED_ENV: &str = "PENMIX_SEED";

/// Points of the tail-envelope check run by `validate`.
const ENVELOPE_POINTS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "penmix", version, about = "Penalized maximum likelihood for location-scale mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an M-component mixture to a single-column CSV file.
    Fit(FitArgs),
    /// Run a Monte Carlo consistency study from a JSON config.
    Simulate(SimulateArgs),
    /// Check a penalty against the conditions its regime relies on.
    Validate(ValidateArgs),
    /// Evaluate the likelihood along a path collapsing one scale to zero.
    DemoUnbounded(DemoArgs),
    /// Print the tail-envelope constants of a family.
    Envelope(EnvelopeArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub m: usize,
    /// Penalty JSON file or preset name (none, ratio, scale, hard_ratio, hard_floor).
    #[arg(long)]
    pub penalty: String,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write fit.json and fit.txt here instead of printing the JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// The first CSV row is a header.
    #[arg(long)]
    pub header: bool,
    /// normal, laplace, logistic, uniform or t:DF.
    #[arg(long, default_value = "normal")]
    pub family: String,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; all cores by default.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Replaces the config's base_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record wall-clock seconds per fit. Timed reports are not reproducible.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Penalty JSON file or preset name.
    #[arg(long)]
    pub penalty: String,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value = "normal")]
    pub family: String,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Mixture JSON used where a true parameter is needed.
    #[arg(long)]
    pub theta0: Option<PathBuf>,
    /// Largest n searched for the eventual-dominance index.
    #[arg(long, default_value_t = 1 << 20)]
    pub n_max: u64,
    /// Write validate.json here instead of printing the JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Single-column CSV; synthetic N(0, 1) data when absent.
    #[arg(long, conflicts_with_all = ["seed", "n"])]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated path scales; 1e-1 down to 1e-12 by default.
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub beta: f64,
    /// Write envelope.json here instead of printing the JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::DemoUnbounded(a) => cmd_demo(a),
        Command::Envelope(a) => cmd_envelope(a),
    }
}

/// `PENMIX_SEED` if set, otherwise the flag.
pub fn effective_seed(flag: Option<u64>) -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_ENV}=`{v}` is not a u64"))?)),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(e).context(SEED_ENV),
    }
}

fn emit(out: Option<&PathBuf>, name: &str, json: &str) -> Result<()> {
    match out {
        Some(dir) => write_file(dir, name, json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// fit

pub fn fit_table(res: &FitResult, regime: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<6}{:>14}{:>16}{:>16}", "comp", "weight", "mu", "sigma");
    for (k, (w, c)) in res.theta_hat.weights().iter().zip(res.theta_hat.components()).enumerate() {
        let _ = writeln!(s, "{:<6}{:>14.6}{:>16.6}{:>16.6e}", k + 1, w, c.mu, c.sigma);
    }
    let _ = writeln!(s, "{:<10}{}", "regime", regime);
    let _ = writeln!(s, "{:<10}{}", "n", res.n);
    let _ = writeln!(s, "{:<10}{:.6}", "loglik", res.loglik);
    let _ = writeln!(s, "{:<10}{:.6}", "logpen", res.logpen);
    let _ = writeln!(s, "{:<10}{}", "status", res.status.as_str());
    let _ = writeln!(s, "{:<10}{}", "iters", res.iters);
    s
}

fn cmd_fit(a: FitArgs) -> Result<u8> {
    let data = read_data_file(&a.data, a.header)?;
    let family = family_spec(parse_family_arg(&a.family)?, a.beta)?;
    let pen = resolve_penalty(&a.penalty, a.m)?;
    let mut cfg = FitConfig::with_m(a.m);
    if let Some(starts) = a.starts {
        cfg.starts = starts;
    }
    if let Some(iters) = a.max_iters {
        cfg.max_iters = iters;
    }
    if let Some(seed) = effective_seed(a.seed)? {
        cfg.seed = seed;
    }
    let res = fit(&family, &pen, &data, &cfg)?;
    let table = fit_table(&res, pen.regime.name());
    print!("{table}");
    let json = to_json(&FitDoc::from(&res))?;
    if let Some(dir) = &a.out {
        write_file(dir, "fit.txt", &table)?;
    }
    emit(a.out.as_ref(), "fit.json", &json)?;
    Ok(if res.status == FitStatus::DegenerateDetected { 2 } else { 0 })
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(a: SimulateArgs) -> Result<u8> {
    let mut cfg = read_experiment(&a.config)?;
    if let Some(seed) = effective_seed(a.seed)? {
        cfg.base_seed = seed;
    }
    let run = run_study(&cfg, a.jobs.map(usize::from), a.timing)?;
    run.write(&cfg, &a.out)?;
    write_file(&a.out, "config.json", &to_json(&ExperimentDoc::from(&cfg))?)?;
    println!(
        "{:<4}{:<12}{:>6}{:>12}{:>12}{:>12}{:>6}{:>6}",
        "pen", "regime", "n", "median", "q1", "q3", "degn", "expl"
    );
    for c in &run.cells {
        println!(
            "{:<4}{:<12}{:>6}{:>12.5}{:>12.5}{:>12.5}{:>6}{:>6}",
            c.pen_id, c.regime, c.n, c.median, c.q1, c.q3, c.degenerate, c.explosions
        );
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// validate

/// Equal weights, locations `0, 5, 10, ...`, scales `1, 1/2, 1/4, ...`.
pub fn default_theta0(m: usize) -> Result<MixtureParams> {
    let triples: Vec<(f64, f64, f64)> =
        (0..m).map(|k| (1.0 / m as f64, 5.0 * k as f64, 0.5f64.powi(k as i32))).collect();
    Ok(MixtureParams::from_triples(&triples)?)
}

/// Runs every validator that applies to the regime of `pen`.
pub fn validation(
    pen: &PenaltySpec,
    m: usize,
    family: &FamilySpec,
    theta0: &MixtureParams,
    n_max: u64,
) -> Result<ValidationDoc> {
    ensure!(m >= 1, "m must be at least 1");
    ensure!(theta0.m() == m, "theta0 has {} components, expected {m}", theta0.m());
    pen.validate()?;
    let probe = ProbeGrid::default();
    let mut reports = Vec::new();
    match &pen.regime {
        Regime::Ratio(_) | Regime::HardRatio(_) => {
            let fam = pen.regime.ratio_family().expect("ratio regime");
            reports.push(validate_tail_envelope(family, true, ENVELOPE_POINTS));
            reports.push(validate_assumption6(&fam, m, &probe));
            reports.push(validate_assumption8(pen, theta0, n_max));
            reports.push(validate_assumption9(&fam, &pen.schedules, m, &probe)?);
        }
        Regime::Scale(s) => {
            reports.push(validate_tail_envelope(family, false, ENVELOPE_POINTS));
            reports.extend(validate_assumptions_10_11_12(s, theta0, &probe));
        }
        Regime::HardFloor(_) => {
            reports.push(validate_tail_envelope(family, false, ENVELOPE_POINTS));
            reports.push(validate_assumption8(pen, theta0, n_max));
        }
        Regime::None => reports.push(validate_tail_envelope(family, false, ENVELOPE_POINTS)),
    }
    let reports: Vec<ReportDoc> = reports.iter().map(ReportDoc::from).collect();
    let failures = reports.iter().filter(|r| r.verdict == VerdictDoc::Fail).count();
    Ok(ValidationDoc {
        penalty: PenaltyDoc(*pen),
        m,
        family: FamilyDoc(*family),
        theta0: theta0.clone(),
        reports,
        failures,
    })
}

pub fn validation_text(doc: &ValidationDoc) -> String {
    let mut s = String::new();
    let f = doc.family.0;
    let _ = writeln!(
        s,
        "penalty {}, M = {}, family {} (beta = {}, v0 = {:.6}, v1 = {:.6})",
        doc.penalty.0.regime.name(),
        doc.m,
        f.kind.name(),
        f.beta,
        f.v0,
        f.v1
    );
    for r in &doc.reports {
        let verdict = match r.verdict {
            VerdictDoc::Pass => "pass",
            VerdictDoc::NoCounterexample => "no counterexample",
            VerdictDoc::Fail => "FAIL",
        };
        let list = |m: &std::collections::BTreeMap<String, crate::wire::Value64>| {
            m.iter().map(|(k, v)| format!("{k}={}", v.0)).collect::<Vec<_>>().join(" ")
        };
        let detail = if r.verdict == VerdictDoc::Fail {
            format!("counterexample {}", list(&r.counterexample))
        } else {
            list(&r.witnesses)
        };
        let _ = writeln!(s, "{:<5}{:<19}{}", r.assumption, verdict, detail);
        if !r.note.is_empty() {
            let _ = writeln!(s, "     {}", r.note);
        }
    }
    let _ = writeln!(s, "{} failure(s)", doc.failures);
    s
}

fn cmd_validate(a: ValidateArgs) -> Result<u8> {
    let pen = resolve_penalty(&a.penalty, a.m)?;
    let family = family_spec(parse_family_arg(&a.family)?, a.beta)?;
    let theta0 = match &a.theta0 {
        Some(path) => read_json_file::<MixtureParams>(path)?,
        None => default_theta0(a.m)?,
    };
    let doc = validation(&pen, a.m, &family, &theta0, a.n_max)?;
    print!("{}", validation_text(&doc));
    emit(a.out.as_ref(), "validate.json", &to_json(&doc)?)?;
    Ok(if doc.failures == 0 { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// demo-unbounded

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoRow {
    pub t: f64,
    pub loglik_none: f64,
    pub objective_ratio: f64,
    pub objective_scale: f64,
}

pub fn default_t_grid() -> Vec<f64> {
    (1..=12).map(|k| 10f64.powi(-k)).collect()
}

/// Objectives along the degeneracy path under no penalty and the bundled
/// ratio and scale presets for two components.
pub fn demo_rows(family: &FamilySpec, data: &[f64], ts: &[f64]) -> Result<Vec<DemoRow>> {
    ensure!(!ts.is_empty(), "t grid is empty");
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        bail!("t grid values must be positive and finite, got {t}");
    }
    let path = degeneracy_path(data, ts)?;
    let n = data.len() as u64;
    let ratio = preset("ratio", 2).expect("preset");
    let scale = preset("scale", 2).expect("preset");
    path.iter()
        .zip(ts)
        .map(|(theta, &t)| {
            Ok(DemoRow {
                t,
                loglik_none: penalized_objective(family, &PenaltySpec::none(), theta, data, n)?,
                objective_ratio: penalized_objective(family, &ratio, theta, data, n)?,
                objective_scale: penalized_objective(family, &scale, theta, data, n)?,
            })
        })
        .collect()
}

pub fn demo_plot(rows: &[DemoRow]) -> Plot {
    let curve = |label: &str, f: fn(&DemoRow) -> f64| Series {
        label: label.to_string(),
        points: rows.iter().map(|r| (r.t, f(r))).collect(),
    };
    // Penalized objectives fall off a cliff; keep the unpenalized curve readable.
    let none: Vec<f64> = rows.iter().map(|r| r.loglik_none).filter(|v| v.is_finite()).collect();
    let all = rows.iter().flat_map(|r| [r.loglik_none, r.objective_ratio, r.objective_scale]);
    let hi = all.filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let (lo_none, hi_none) = none.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = (lo_none.is_finite() && hi.is_finite()).then(|| {
        let span = (hi_none - lo_none).max(10.0);
        (lo_none - span, hi + 0.05 * span)
    });
    Plot {
        title: "Objective along the degeneracy path".into(),
        x: Axis::log("scale t of the collapsing component"),
        y: Axis { label: "objective (nats)".into(), log: false, range },
        series: vec![
            curve("none", |r| r.loglik_none),
            curve("ratio", |r| r.objective_ratio),
            curve("scale", |r| r.objective_scale),
        ],
    }
}

pub fn demo_csv(rows: &[DemoRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn cmd_demo(a: DemoArgs) -> Result<u8> {
    let family = family_spec(FamilyKind::Normal, None)?;
    let data = match &a.data {
        Some(path) => read_data_file(path, a.header)?,
        None => {
            let seed = effective_seed(a.seed)?.unwrap_or(1);
            let standard = MixtureParams::from_triples(&[(1.0, 0.0, 1.0)])?;
            sample(&family, &standard, a.n.unwrap_or(50), seed)
        }
    };
    let ts = a.t_grid.unwrap_or_else(default_t_grid);
    let rows = demo_rows(&family, &data, &ts)?;
    println!("{:>10}{:>20}{:>20}{:>20}", "t", "loglik (none)", "ratio", "scale");
    for r in &rows {
        println!("{:>10.0e}{:>20.6}{:>20.6}{:>20.6e}", r.t, r.loglik_none, r.objective_ratio, r.objective_scale);
    }
    write_file(&a.out, "demo.csv", &demo_csv(&rows)?)?;
    write_file(&a.out, "demo.svg", &demo_plot(&rows).render())?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// envelope

fn cmd_envelope(a: EnvelopeArgs) -> Result<u8> {
    let spec = family_spec(parse_family_arg(&a.family)?, Some(a.beta))?;
    println!("family {} beta {}: v0 = {:.12}, v1 = {:.12}", spec.kind.name(), spec.beta, spec.v0, spec.v1);
    emit(a.out.as_ref(), "envelope.json", &to_json(&FamilyDoc(spec))?)?;
    Ok(0)
}
