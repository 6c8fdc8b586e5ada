//! JSON documents read and written by the CLI.
//!
//! Penalties use `{"regime", "params", "schedules"}`; families use
//! `{"name", "df"?, "beta", "v0", "v1"}` where `v0`/`v1` are derived from
//! `beta` when omitted.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use penmix_core::experiments::{CellSummary, ExperimentConfig};
use penmix_core::families::fit_envelope;
use penmix_core::penalties::{AssumptionReport, HardFloor, HardRatio, ScalePenalty, SmoothRatio, Verdict, Witness};
use penmix_core::{
    FamilyKind, FamilySpec, FitConfig, FitResult, FitStatus, MixtureParams, PenaltySpec, Regime, Schedules,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Serde adapter writing non-finite floats as `"inf"`, `"-inf"` or `"nan"`.
pub mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("expected a number, found \"{other}\""))),
            },
        }
    }
}

/// Parses `text` as `T`, reporting the field path of the first error.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| anyhow!("at `{}`: {}", e.path(), e.inner()))
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_json(&text).with_context(|| format!("invalid {}", path.display()))
}

// ---------------------------------------------------------------------------
// Penalties

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RegimeName {
    None,
    Ratio,
    Scale,
    HardRatio,
    HardFloor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PenaltyWire {
    regime: RegimeName,
    #[serde(default)]
    params: Map<String, Value>,
    #[serde(default)]
    schedules: Schedules,
}

/// A [`PenaltySpec`] in its JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PenaltyWire", into = "PenaltyWire")]
pub struct PenaltyDoc(pub PenaltySpec);

fn from_params<T: DeserializeOwned>(params: Map<String, Value>) -> Result<T, String> {
    serde_json::from_value(Value::Object(params)).map_err(|e| format!("params: {e}"))
}

fn to_params<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value) {
        Ok(Value::Object(map)) => map,
        _ => Map::new(),
    }
}

impl TryFrom<PenaltyWire> for PenaltyDoc {
    type Error = String;

    fn try_from(w: PenaltyWire) -> Result<Self, String> {
        let regime = match w.regime {
            RegimeName::None => {
                if !w.params.is_empty() {
                    return Err("params: regime `none` takes no parameters".into());
                }
                Regime::None
            }
            RegimeName::Ratio => Regime::Ratio(from_params(w.params)?),
            RegimeName::Scale => Regime::Scale(from_params(w.params)?),
            RegimeName::HardRatio => Regime::HardRatio(from_params(w.params)?),
            RegimeName::HardFloor => Regime::HardFloor(from_params(w.params)?),
        };
        let spec = PenaltySpec { regime, schedules: w.schedules };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(PenaltyDoc(spec))
    }
}

impl From<PenaltyDoc> for PenaltyWire {
    fn from(doc: PenaltyDoc) -> Self {
        let (regime, params) = match &doc.0.regime {
            Regime::None => (RegimeName::None, Map::new()),
            Regime::Ratio(p) => (RegimeName::Ratio, to_params(p)),
            Regime::Scale(p) => (RegimeName::Scale, to_params(p)),
            Regime::HardRatio(p) => (RegimeName::HardRatio, to_params(p)),
            Regime::HardFloor(p) => (RegimeName::HardFloor, to_params(p)),
        };
        PenaltyWire { regime, params, schedules: doc.0.schedules }
    }
}

pub const PRESETS: [&str; 5] = ["none", "ratio", "scale", "hard_ratio", "hard_floor"];

/// Bundled penalty for `m` components. Hyphens and underscores are
/// interchangeable in `name`.
pub fn preset(name: &str, m: usize) -> Option<PenaltySpec> {
    let regime = match name.replace('-', "_").as_str() {
        "none" => Regime::None,
        "ratio" => Regime::Ratio(SmoothRatio::preset(m)),
        "scale" => Regime::Scale(ScalePenalty { a: 1.0, b: 1.0, d: 0.5 }),
        "hard_ratio" => Regime::HardRatio(HardRatio { b0: 1.0, d_tilde: 0.25 }),
        "hard_floor" => Regime::HardFloor(HardFloor { c0: 1.0, d: 0.5 }),
        _ => return None,
    };
    Some(PenaltySpec::new(regime))
}

/// `arg` is a path to a penalty JSON file or the name of a preset. An
/// existing file wins over a preset of the same name.
pub fn resolve_penalty(arg: &str, m: usize) -> Result<PenaltySpec> {
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(read_json_file::<PenaltyDoc>(path)?.0);
    }
    preset(arg, m)
        .ok_or_else(|| anyhow!("`{arg}` is neither a penalty file nor a preset (one of {})", PRESETS.join(", ")))
}

// ---------------------------------------------------------------------------
// Families

const DEFAULT_BETA: f64 = 3.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyWire {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    df: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    v0: Option<f64>,
    #[serde(default)]
    v1: Option<f64>,
}

/// A [`FamilySpec`] in its JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyWire", into = "FamilyWire")]
pub struct FamilyDoc(pub FamilySpec);

impl Default for FamilyDoc {
    fn default() -> Self {
        FamilyDoc(family_spec(FamilyKind::Normal, None).expect("normal envelope"))
    }
}

pub fn family_kind(name: &str, df: Option<f64>) -> Result<FamilyKind> {
    let kind = match name.replace('_', "-").as_str() {
        "normal" => FamilyKind::Normal,
        "laplace" => FamilyKind::Laplace,
        "logistic" => FamilyKind::Logistic,
        "uniform" => FamilyKind::Uniform,
        "student-t" | "t" => match df {
            Some(df) => FamilyKind::StudentT { df },
            None => bail!("family `{name}` needs degrees of freedom"),
        },
        other => bail!("unknown family `{other}` (normal, laplace, logistic, uniform, t:DF)"),
    };
    if df.is_some() && !matches!(kind, FamilyKind::StudentT { .. }) {
        bail!("family `{name}` takes no degrees of freedom");
    }
    kind.validate()?;
    Ok(kind)
}

/// Parses a command-line family: `normal`, `laplace`, `logistic`,
/// `uniform` or `t:DF`.
pub fn parse_family_arg(arg: &str) -> Result<FamilyKind> {
    match arg.split_once(':') {
        Some((name, df)) => {
            let df: f64 = df.parse().with_context(|| format!("bad degrees of freedom in `{arg}`"))?;
            family_kind(name, Some(df))
        }
        None => family_kind(arg, None),
    }
}

/// `beta = 3` unless the tails of a Student t are too heavy for it.
pub fn default_beta(kind: FamilyKind) -> f64 {
    kind.max_tail_exponent().map_or(DEFAULT_BETA, |max| max.min(DEFAULT_BETA))
}

pub fn family_spec(kind: FamilyKind, beta: Option<f64>) -> Result<FamilySpec> {
    Ok(fit_envelope(kind, beta.unwrap_or_else(|| default_beta(kind)))?)
}

impl TryFrom<FamilyWire> for FamilyDoc {
    type Error = String;

    fn try_from(w: FamilyWire) -> Result<Self, String> {
        let kind = family_kind(&w.name, w.df).map_err(|e| e.to_string())?;
        let spec = match (w.v0, w.v1) {
            (Some(v0), Some(v1)) => FamilySpec::new(kind, v0, v1, w.beta.unwrap_or_else(|| default_beta(kind))),
            (None, None) => fit_envelope(kind, w.beta.unwrap_or_else(|| default_beta(kind))),
            _ => return Err("v0 and v1 must be given together".into()),
        };
        spec.map(FamilyDoc).map_err(|e| e.to_string())
    }
}

impl From<FamilyDoc> for FamilyWire {
    fn from(doc: FamilyDoc) -> Self {
        let s = doc.0;
        let (name, df) = match s.kind {
            FamilyKind::StudentT { df } => ("student-t".to_string(), Some(df)),
            k => (k.name().to_string(), None),
        };
        FamilyWire { name, df, beta: Some(s.beta), v0: Some(s.v0), v1: Some(s.v1) }
    }
}

// ---------------------------------------------------------------------------
// Experiments

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDoc {
    pub theta0: MixtureParams,
    #[serde(default)]
    pub family: FamilyDoc,
    pub pens: Vec<PenaltyDoc>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    /// Defaults to the estimator defaults with `m` taken from `theta0`.
    #[serde(default)]
    pub fit_cfg: Option<FitConfig>,
}

impl ExperimentDoc {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let m = self.theta0.m();
        let cfg = ExperimentConfig {
            fit_cfg: self.fit_cfg.unwrap_or_else(|| FitConfig::with_m(m)),
            theta0: self.theta0,
            family: self.family.0,
            pens: self.pens.into_iter().map(|p| p.0).collect(),
            n_grid: self.n_grid,
            replicates: self.replicates,
            base_seed: self.base_seed,
        };
        cfg.validate().context("invalid experiment config")?;
        Ok(cfg)
    }
}

impl From<&ExperimentConfig> for ExperimentDoc {
    fn from(cfg: &ExperimentConfig) -> Self {
        ExperimentDoc {
            theta0: cfg.theta0.clone(),
            family: FamilyDoc(cfg.family),
            pens: cfg.pens.iter().copied().map(PenaltyDoc).collect(),
            n_grid: cfg.n_grid.clone(),
            replicates: cfg.replicates,
            base_seed: cfg.base_seed,
            fit_cfg: Some(cfg.fit_cfg),
        }
    }
}

pub fn parse_experiment(text: &str) -> Result<ExperimentConfig> {
    parse_json::<ExperimentDoc>(text).context("invalid experiment config")?.into_config()
}

pub fn read_experiment(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_experiment(&text).with_context(|| format!("in {}", path.display()))
}

// ---------------------------------------------------------------------------
// Fit results

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitDoc {
    pub theta: MixtureParams,
    #[serde(with = "float")]
    pub logpen: f64,
    #[serde(with = "float")]
    pub loglik: f64,
    pub status: FitStatus,
    pub iters: usize,
}

impl From<&FitResult> for FitDoc {
    fn from(r: &FitResult) -> Self {
        FitDoc { theta: r.theta_hat.clone(), logpen: r.logpen, loglik: r.loglik, status: r.status, iters: r.iters }
    }
}

// ---------------------------------------------------------------------------
// Study summaries

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDoc {
    pub pen_id: usize,
    pub regime: String,
    pub n: usize,
    pub replicates: usize,
    #[serde(with = "float")]
    pub median: f64,
    #[serde(with = "float")]
    pub q1: f64,
    #[serde(with = "float")]
    pub q3: f64,
    pub converged: usize,
    pub max_iters: usize,
    pub degenerate: usize,
    pub errors: usize,
    pub explosions: usize,
    /// Only present when timing was requested.
    pub mean_seconds: Option<f64>,
}

impl CellDoc {
    pub fn new(c: &CellSummary, mean_seconds: Option<f64>) -> Self {
        CellDoc {
            pen_id: c.pen_id,
            regime: c.regime.to_string(),
            n: c.n,
            replicates: c.total(),
            median: c.median,
            q1: c.q1,
            q3: c.q3,
            converged: c.converged,
            max_iters: c.max_iters,
            degenerate: c.degenerate,
            errors: c.errors,
            explosions: c.explosions,
            mean_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryDoc {
    pub base_seed: u64,
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    pub cells: Vec<CellDoc>,
}

// ---------------------------------------------------------------------------
// Validation reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictDoc {
    Pass,
    NoCounterexample,
    Fail,
}

impl From<Verdict> for VerdictDoc {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => VerdictDoc::Pass,
            Verdict::NoCounterexample => VerdictDoc::NoCounterexample,
            Verdict::Fail => VerdictDoc::Fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value64(#[serde(with = "float")] pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub assumption: String,
    pub verdict: VerdictDoc,
    pub witnesses: BTreeMap<String, Value64>,
    pub counterexample: BTreeMap<String, Value64>,
    pub note: String,
}

impl From<&AssumptionReport> for ReportDoc {
    fn from(r: &AssumptionReport) -> Self {
        let map = |ws: &[Witness]| ws.iter().map(|w| (w.name.to_string(), Value64(w.value))).collect();
        ReportDoc {
            assumption: r.assumption.label().to_string(),
            verdict: r.verdict.into(),
            witnesses: map(&r.witnesses),
            counterexample: map(&r.counterexample),
            note: r.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationDoc {
    pub penalty: PenaltyDoc,
    pub m: usize,
    pub family: FamilyDoc,
    pub theta0: MixtureParams,
    pub reports: Vec<ReportDoc>,
    pub failures: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip<T: Serialize + DeserializeOwned>(value: &T) -> T {
        parse_json(&serde_json::to_string(value).unwrap()).unwrap()
    }

    #[test]
    fn penalty_presets_round_trip() {
        for name in PRESETS {
            let spec = preset(name, 3).unwrap();
            assert_eq!(round_trip(&PenaltyDoc(spec)).0, spec, "{name}");
        }
        assert_eq!(preset("hard-ratio", 2), preset("hard_ratio", 2));
        assert!(preset("lasso", 2).is_none());
    }

    #[test]
    fn penalty_wire_shape() {
        let v = serde_json::to_value(PenaltyDoc(preset("ratio", 2).unwrap())).unwrap();
        assert_eq!(v["regime"], "ratio");
        assert_eq!(v["params"]["alpha"], 4.0);
        assert_eq!(v["schedules"]["d_tilde"], 0.25);
        let none = serde_json::to_value(PenaltyDoc(PenaltySpec::none())).unwrap();
        assert_eq!(none["params"], serde_json::json!({}));
    }

    #[test]
    fn penalty_errors_name_the_problem() {
        let err = parse_json::<PenaltyDoc>(r#"{"regime": "ratio", "params": {"alpha": 4}}"#).unwrap_err();
        assert!(format!("{err:#}").contains("r_bar"), "{err:#}");
        let err = parse_json::<PenaltyDoc>(r#"{"regime": "lasso"}"#).unwrap_err();
        assert!(format!("{err:#}").contains("lasso"));
        let err = parse_json::<PenaltyDoc>(r#"{"regime": "none", "params": {"a": 1}}"#).unwrap_err();
        assert!(format!("{err:#}").contains("no parameters"));
        let err = parse_json::<PenaltyDoc>(r#"{"regime": "scale", "params": {"a": 1, "b": -1}}"#).unwrap_err();
        assert!(format!("{err:#}").contains('b'));
    }

    #[test]
    fn family_docs() {
        let doc: FamilyDoc = parse_json(r#"{"name": "normal"}"#).unwrap();
        assert_eq!(doc.0.beta, 3.0);
        assert_eq!(round_trip(&doc), doc);
        let t: FamilyDoc = parse_json(r#"{"name": "t", "df": 1.5}"#).unwrap();
        assert_eq!(t.0.beta, 2.5);
        assert_eq!(round_trip(&t), t);
        assert!(parse_json::<FamilyDoc>(r#"{"name": "t"}"#).is_err());
        assert!(parse_json::<FamilyDoc>(r#"{"name": "normal", "v0": 1}"#).is_err());
        assert_eq!(parse_family_arg("t:4").unwrap(), FamilyKind::StudentT { df: 4.0 });
        assert!(parse_family_arg("normal:4").is_err());
    }

    #[test]
    fn non_finite_floats_survive() {
        let doc = FitDoc {
            theta: MixtureParams::from_triples(&[(1.0, 0.0, 1.0)]).unwrap(),
            logpen: f64::NEG_INFINITY,
            loglik: f64::INFINITY,
            status: FitStatus::DegenerateDetected,
            iters: 0,
        };
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains("\"-inf\"") && text.contains("degenerate_detected"));
        assert_eq!(round_trip(&doc), doc);
        let v: Value64 = parse_json("\"nan\"").unwrap();
        assert!(v.0.is_nan());
        assert!(parse_json::<Value64>("\"big\"").is_err());
    }

    #[test]
    fn missing_theta0_is_named() {
        let err = parse_experiment(r#"{"pens": [], "n_grid": [10], "replicates": 1, "base_seed": 0}"#).unwrap_err();
        assert!(format!("{err:#}").contains("theta0"), "{err:#}");
        let err = parse_experiment(
            r#"{"theta0": {"weights": [1], "components": [{"mu": 0, "sigma": 1}]},
                "pens": [{"regime": "scale", "params": {"a": 1}}], "n_grid": [10], "replicates": 1, "base_seed": 0}"#,
        )
        .unwrap_err();
        assert!(format!("{err:#}").contains("pens[0]"), "{err:#}");
    }
}
