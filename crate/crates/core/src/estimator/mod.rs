//! Penalized maximum likelihood fitting.
//!
//! Each start runs a generalized EM (closed-form or 1-D searched M-step
//! blocks, the reward entering the scale blocks exactly) and is then polished
//! by Nelder–Mead on `(logit weights, mu, ln sigma)`. Hard constraints are
//! enforced by the reward itself: an infeasible point has objective `-inf`.

mod em;
mod init;
mod simplex;

use alloc::vec::Vec;

pub use em::{em_step, responsibilities};
pub use init::init_starts;
pub use simplex::{nelder_mead, SimplexResult};

use crate::error::{Error, Result};
use crate::families::{log_likelihood_unchecked, mean_sd, FamilyKind, FamilySpec, MixtureParams};
use crate::math;
use crate::penalties::{log_reward, PenaltySpec, Regime};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Optimizer {
    #[default]
    EmThenPolish,
    DirectOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum FitStatus {
    Converged,
    MaxIters,
    DegenerateDetected,
}

impl FitStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitStatus::Converged => "converged",
            FitStatus::MaxIters => "max_iters",
            FitStatus::DegenerateDetected => "degenerate_detected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct FitConfig {
    pub m: usize,
    pub starts: usize,
    /// EM iterations per start.
    pub max_iters: usize,
    /// Objective evaluations per Nelder–Mead polish.
    pub polish_evals: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Smallest scale the optimizer may represent. Purely numerical.
    pub sigma_floor_numeric: f64,
    /// Add a start with one component collapsed onto the first observation.
    pub probe_degenerate: bool,
    /// Sample size fed to the schedules; defaults to the data length.
    pub schedule_n: Option<u64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            m: 2,
            starts: 4,
            max_iters: 500,
            polish_evals: 2000,
            rel_tol: 1e-9,
            seed: 0,
            optimizer: Optimizer::EmThenPolish,
            sigma_floor_numeric: 1e-300,
            probe_degenerate: true,
            schedule_n: None,
        }
    }
}

impl FitConfig {
    pub fn with_m(m: usize) -> Self {
        Self { m, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter { name: "m", value: 0.0, reason: "need at least one component" });
        }
        if self.starts == 0 {
            return Err(Error::InvalidParameter { name: "starts", value: 0.0, reason: "need at least one start" });
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter { name: "rel_tol", value: self.rel_tol, reason: "must be positive" });
        }
        if !(self.sigma_floor_numeric > 0.0 && self.sigma_floor_numeric <= 1e-30) {
            return Err(Error::InvalidParameter {
                name: "sigma_floor_numeric",
                value: self.sigma_floor_numeric,
                reason: "must lie in (0, 1e-30]",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: MixtureParams,
    pub logpen: f64,
    pub loglik: f64,
    pub status: FitStatus,
    /// Penalized objective after each EM iteration of the winning start, then
    /// after the polish.
    pub trace: Vec<f64>,
    pub n: u64,
    pub iters: usize,
    /// Index of the winning start (the probe start, if any, comes last).
    pub start_index: usize,
}

/// `ln l(theta; data) + ln r_n(theta)`.
pub fn penalized_objective(
    spec: &FamilySpec,
    pen: &PenaltySpec,
    theta: &MixtureParams,
    data: &[f64],
    n: u64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(objective(&spec.kind, pen, theta, data, n))
}

pub(crate) fn objective(kind: &FamilyKind, pen: &PenaltySpec, theta: &MixtureParams, data: &[f64], n: u64) -> f64 {
    let lr = log_reward(pen, n, theta);
    if lr == f64::NEG_INFINITY {
        return lr;
    }
    log_likelihood_unchecked(kind, theta, data) + lr
}

fn check_data(data: &[f64], m: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.len() < m {
        return Err(Error::InsufficientData { got: data.len(), required: m });
    }
    if let Some(i) = data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteData(i));
    }
    Ok(())
}

/// Moves a start into the feasible set: bounded-support components are widened
/// to cover the data, then hard constraints are met by raising scales.
fn make_feasible(kind: &FamilyKind, pen: &PenaltySpec, n: u64, data: &[f64], theta: &mut MixtureParams) {
    if let Some(h) = kind.support_half_width() {
        let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        for c in theta.components_mut() {
            let reach = math::abs(hi - c.mu).max(math::abs(c.mu - lo));
            c.sigma = c.sigma.max(reach / h * (1.0 + 1e-9));
        }
    }
    match pen.regime {
        Regime::HardFloor(f) => {
            let c = f.c(n);
            for comp in theta.components_mut() {
                if comp.sigma < c {
                    comp.sigma = c;
                }
            }
        }
        Regime::HardRatio(_) if log_reward(pen, n, theta) == f64::NEG_INFINITY => {
            let top = theta.sigmas().fold(0.0_f64, f64::max);
            for comp in theta.components_mut() {
                comp.sigma = top;
            }
        }
        _ => {}
    }
}

/// Probe start: component 1 sits on the first observation with a tiny scale.
fn probe_start(base: &MixtureParams, data: &[f64], pen: &PenaltySpec, n: u64) -> Option<MixtureParams> {
    if base.m() < 2 || matches!(pen.regime, Regime::HardRatio(_)) {
        return None;
    }
    let (_, sd) = mean_sd(data);
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let mut sigma = 1e-6 * sd;
    if let Regime::HardFloor(f) = pen.regime {
        sigma = sigma.max(f.c(n));
    }
    let mut theta = base.clone();
    theta.components_mut()[0].mu = data[0];
    theta.components_mut()[0].sigma = sigma;
    Some(theta)
}

struct StartOutcome {
    theta: MixtureParams,
    value: f64,
    trace: Vec<f64>,
    iters: usize,
    converged: bool,
}

fn run_start(
    kind: &FamilyKind,
    pen: &PenaltySpec,
    data: &[f64],
    n: u64,
    cfg: &FitConfig,
    start: MixtureParams,
) -> Option<StartOutcome> {
    let mut theta = start;
    let mut value = objective(kind, pen, &theta, data, n);
    if value == f64::NEG_INFINITY || value.is_nan() {
        return None;
    }
    let mut trace = alloc::vec![value];
    let mut iters = 0;
    let mut converged = false;
    if cfg.optimizer == Optimizer::EmThenPolish {
        let ctx = em::EmContext::new(kind, pen, data, n, cfg.sigma_floor_numeric);
        while iters < cfg.max_iters {
            let next = ctx.step(&theta);
            let next_value = objective(kind, pen, &next, data, n);
            iters += 1;
            let delta = next_value - value;
            if next_value >= value {
                theta = next;
                value = next_value;
            }
            trace.push(value);
            if !(delta > cfg.rel_tol * math::abs(value).max(1.0)) {
                converged = true;
                break;
            }
        }
    }
    if cfg.polish_evals > 0 {
        let polished = simplex::polish(kind, pen, data, n, cfg, &theta);
        if polished.value > value {
            theta = polished.theta;
            value = polished.value;
            trace.push(value);
        }
        if cfg.optimizer == Optimizer::DirectOnly {
            iters = polished.evals;
            converged = polished.converged;
        }
    } else if cfg.optimizer == Optimizer::DirectOnly {
        converged = true;
    }
    Some(StartOutcome { theta, value, trace, iters, converged })
}

/// A component whose scale sits at the numerical floor and whose
/// responsibility mass is carried by a single observation.
fn is_degenerate(kind: &FamilyKind, theta: &MixtureParams, data: &[f64], floor: f64) -> bool {
    let m = theta.m();
    let resp = responsibilities(kind, theta, data);
    (0..m).any(|k| {
        if theta.components()[k].sigma > 10.0 * floor {
            return false;
        }
        let col = resp.iter().skip(k).step_by(m);
        let (total, top) = col.fold((0.0, 0.0_f64), |(t, mx), &r| (t + r, mx.max(r)));
        total - top < 1e-6
    })
}

/// Multi-start maximization of the penalized objective.
pub fn fit(spec: &FamilySpec, pen: &PenaltySpec, data: &[f64], cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    pen.validate()?;
    spec.kind.validate()?;
    check_data(data, cfg.m)?;
    let kind = &spec.kind;
    let n = cfg.schedule_n.unwrap_or(data.len() as u64);

    let mut starts = init_starts(data, cfg.m, cfg.starts, cfg.seed);
    if cfg.probe_degenerate {
        if let Some(p) = probe_start(&starts[0], data, pen, n) {
            starts.push(p);
        }
    }
    let first = starts[0].clone();

    let mut best: Option<(usize, StartOutcome)> = None;
    for (idx, mut start) in starts.into_iter().enumerate() {
        make_feasible(kind, pen, n, data, &mut start);
        let Some(outcome) = run_start(kind, pen, data, n, cfg, start) else { continue };
        let better = match &best {
            None => true,
            Some((_, b)) => outcome.value > b.value + 1e-12,
        };
        if better {
            best = Some((idx, outcome));
        }
    }

    let Some((start_index, out)) = best else {
        return Ok(FitResult {
            theta_hat: first,
            logpen: f64::NEG_INFINITY,
            loglik: f64::NEG_INFINITY,
            status: FitStatus::DegenerateDetected,
            trace: Vec::new(),
            n,
            iters: 0,
            start_index: 0,
        });
    };
    let theta_hat = MixtureParams::new(out.theta.weights().to_vec(), out.theta.components().to_vec())?;
    let loglik = log_likelihood_unchecked(kind, &theta_hat, data);
    let degenerate =
        matches!(pen.regime, Regime::None) && is_degenerate(kind, &theta_hat, data, cfg.sigma_floor_numeric);
    let status = if degenerate {
        FitStatus::DegenerateDetected
    } else if out.converged {
        FitStatus::Converged
    } else {
        FitStatus::MaxIters
    };
    Ok(FitResult { theta_hat, logpen: out.value, loglik, status, trace: out.trace, n, iters: out.iters, start_index })
}
