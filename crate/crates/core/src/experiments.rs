//! Monte Carlo consistency studies and the tail/interval diagnostics.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimator::{fit, FitConfig, FitStatus};
use crate::families::{envelope_radius, FamilySpec, MixtureParams};
use crate::math;
use crate::oracle::max_interval_count;
use crate::penalties::{PenaltySpec, Schedules};
use crate::rng;

/// Distances above this count as an explosion of the estimate.
pub const EXPLOSION_THRESHOLD: f64 = 10.0;

/// All permutations of `0..m` in lexicographic order.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..m).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (1..m).rev().find(|&i| p[i - 1] < p[i]) else { break };
        let j = (i..m).rev().find(|&j| p[j] > p[i - 1]).unwrap_or(i);
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// `min_pi max_m (|d alpha| + |d mu| + |d ln sigma|)` over label permutations.
pub fn param_distance(a: &MixtureParams, b: &MixtureParams) -> Result<f64> {
    if a.m() != b.m() {
        return Err(Error::ComponentCountMismatch { left: a.m(), right: b.m() });
    }
    let m = a.m();
    // cost[i][j]: component i of a against component j of b
    let cost: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let (wa, ca) = (a.weights()[i], a.components()[i]);
            (0..m)
                .map(|j| {
                    let (wb, cb) = (b.weights()[j], b.components()[j]);
                    math::abs(wa - wb) + math::abs(ca.mu - cb.mu) + math::abs(math::ln(ca.sigma) - math::ln(cb.sigma))
                })
                .collect()
        })
        .collect();
    Ok(permutations(m).iter().map(|p| (0..m).map(|i| cost[i][p[i]]).fold(0.0, f64::max)).fold(f64::INFINITY, f64::min))
}

/// `n` i.i.d. draws: a categorical component label, then an inverse-CDF draw.
pub fn sample(family: &FamilySpec, theta0: &MixtureParams, n: usize, seed: u64) -> Vec<f64> {
    let mut g = rng::seeded(seed);
    let mut cum = Vec::with_capacity(theta0.m());
    let mut acc = 0.0;
    for w in theta0.weights() {
        acc += w;
        cum.push(acc);
    }
    let last = theta0.weights().iter().rposition(|&w| w > 0.0).unwrap_or(0);
    (0..n)
        .map(|_| {
            let u = rng::uniform_open(&mut g);
            let k = cum.iter().position(|&c| u < c).unwrap_or(last).min(last);
            let z = family.kind.quantile(rng::uniform_open(&mut g));
            let c = theta0.components()[k];
            c.mu + c.sigma * z
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub theta0: MixtureParams,
    pub family: FamilySpec,
    pub pens: Vec<PenaltySpec>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    pub fit_cfg: FitConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter { name: "replicates", value: 0.0, reason: "need at least one" });
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter {
                name: "n_grid",
                value: self.n_grid.first().copied().unwrap_or(0) as f64,
                reason: "must be non-empty and strictly increasing",
            });
        }
        if self.n_grid[0] < self.theta0.m() {
            return Err(Error::InsufficientData { got: self.n_grid[0], required: self.theta0.m() });
        }
        if self.pens.is_empty() {
            return Err(Error::InvalidParameter { name: "pens", value: 0.0, reason: "need at least one penalty" });
        }
        if self.fit_cfg.m != self.theta0.m() {
            return Err(Error::ComponentCountMismatch { left: self.fit_cfg.m, right: self.theta0.m() });
        }
        if let Some(&w) = self.theta0.weights().iter().find(|&&w| !(w > 0.0)) {
            return Err(Error::InvalidWeights(alloc::format!("theta0 weight {w} must be positive")));
        }
        let comps = self.theta0.components();
        for i in 0..comps.len() {
            for j in 0..i {
                if comps[i] == comps[j] {
                    return Err(Error::InvalidParameter {
                        name: "theta0",
                        value: comps[i].mu,
                        reason: "components must be pairwise distinct",
                    });
                }
            }
        }
        self.family.kind.validate()?;
        self.fit_cfg.validate()?;
        self.pens.iter().try_for_each(|p| p.validate())
    }

    /// Every `(pen_id, n, replicate)` cell in report order.
    pub fn tasks(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.pens.len() * self.n_grid.len() * self.replicates);
        for p in 0..self.pens.len() {
            for &n in &self.n_grid {
                for r in 0..self.replicates {
                    out.push((p, n, r));
                }
            }
        }
        out
    }

    /// Seed of one replicate. The penalty is deliberately left out so every
    /// penalty sees the same samples.
    pub fn replicate_seed(&self, n: usize, replicate: usize) -> u64 {
        rng::derive_seed(&[self.base_seed, n as u64, replicate as u64])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordStatus {
    Fit(FitStatus),
    Error(String),
}

impl RecordStatus {
    pub fn as_str(&self) -> &str {
        match self {
            RecordStatus::Fit(s) => s.as_str(),
            RecordStatus::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub pen_id: usize,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    /// NaN when the fit failed.
    pub distance: f64,
    pub status: RecordStatus,
}

impl ReplicateRecord {
    pub fn is_degenerate(&self) -> bool {
        self.status == RecordStatus::Fit(FitStatus::DegenerateDetected)
    }

    pub fn is_explosion(&self) -> bool {
        self.distance > EXPLOSION_THRESHOLD
    }
}

pub fn run_replicate(cfg: &ExperimentConfig, pen_id: usize, n: usize, replicate: usize) -> ReplicateRecord {
    let seed = cfg.replicate_seed(n, replicate);
    let data = sample(&cfg.family, &cfg.theta0, n, seed);
    let fit_cfg = FitConfig { seed, ..cfg.fit_cfg };
    let (distance, status) = match fit(&cfg.family, &cfg.pens[pen_id], &data, &fit_cfg) {
        Ok(res) => match param_distance(&res.theta_hat, &cfg.theta0) {
            Ok(d) => (d, RecordStatus::Fit(res.status)),
            Err(e) => (f64::NAN, RecordStatus::Error(e.to_string())),
        },
        Err(e) => (f64::NAN, RecordStatus::Error(e.to_string())),
    };
    ReplicateRecord { pen_id, n, replicate, seed, distance, status }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub pen_id: usize,
    pub regime: &'static str,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub converged: usize,
    pub max_iters: usize,
    pub degenerate: usize,
    pub errors: usize,
    pub explosions: usize,
}

impl CellSummary {
    pub fn total(&self) -> usize {
        self.converged + self.max_iters + self.degenerate + self.errors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub records: Vec<ReplicateRecord>,
    pub cells: Vec<CellSummary>,
}

impl ConsistencyReport {
    pub fn cell(&self, pen_id: usize, n: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.pen_id == pen_id && c.n == n)
    }
}

/// Groups records by `(pen_id, n)` in config order. Records may arrive in
/// any order.
pub fn summarize(cfg: &ExperimentConfig, records: &[ReplicateRecord]) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for (pen_id, pen) in cfg.pens.iter().enumerate() {
        for &n in &cfg.n_grid {
            let mut mine: Vec<&ReplicateRecord> = records.iter().filter(|r| r.pen_id == pen_id && r.n == n).collect();
            mine.sort_by_key(|r| r.replicate);
            let mut d: Vec<f64> = mine.iter().map(|r| r.distance).filter(|d| !d.is_nan()).collect();
            d.sort_by(f64::total_cmp);
            let count = |s: FitStatus| mine.iter().filter(|r| r.status == RecordStatus::Fit(s)).count();
            cells.push(CellSummary {
                pen_id,
                regime: pen.regime.name(),
                n,
                median: math::sorted_quantile(&d, 0.5),
                q1: math::sorted_quantile(&d, 0.25),
                q3: math::sorted_quantile(&d, 0.75),
                converged: count(FitStatus::Converged),
                max_iters: count(FitStatus::MaxIters),
                degenerate: count(FitStatus::DegenerateDetected),
                errors: mine.iter().filter(|r| matches!(r.status, RecordStatus::Error(_))).count(),
                explosions: mine.iter().filter(|r| r.is_explosion()).count(),
            });
        }
    }
    cells
}

/// Sequential sweep over every `(pen, n, replicate)`. Failed fits are
/// recorded, not propagated.
pub fn run_consistency(cfg: &ExperimentConfig) -> Result<ConsistencyReport> {
    cfg.validate()?;
    let records: Vec<ReplicateRecord> = cfg.tasks().into_iter().map(|(p, n, r)| run_replicate(cfg, p, n, r)).collect();
    let cells = summarize(cfg, &records);
    Ok(ConsistencyReport { records, cells })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremeRow {
    pub n: usize,
    pub a_n: f64,
    pub events: usize,
    pub trials: usize,
}

impl ExtremeRow {
    pub fn frequency(&self) -> f64 {
        self.events as f64 / self.trials as f64
    }
}

fn diagnostic_seed(seed: u64, n: usize) -> u64 {
    rng::derive_seed(&[seed, n as u64, 0xD1A6])
}

/// Frequency over `seeds` of `{min X < -A_n or max X > A_n}` for each `n`.
pub fn extreme_diagnostic(
    family: &FamilySpec,
    theta0: &MixtureParams,
    s: &Schedules,
    n_grid: &[usize],
    seeds: &[u64],
) -> Result<Vec<ExtremeRow>> {
    n_grid
        .iter()
        .map(|&n| {
            let a_n = s.a(family.beta, n as u64)?;
            let events = seeds
                .iter()
                .filter(|&&seed| {
                    sample(family, theta0, n, diagnostic_seed(seed, n)).iter().any(|&x| x < -a_n || x > a_n)
                })
                .count();
            Ok(ExtremeRow { n, a_n, events, trials: seeds.len() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDiagnostic {
    pub n: usize,
    pub half_width: f64,
    /// `max_interval_count` per seed.
    pub counts: Vec<usize>,
}

impl IntervalDiagnostic {
    pub fn singletons(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 1).count()
    }
}

/// `max_interval_count` with half-width `nu(c_n)` on one sample per seed.
pub fn interval_diagnostic(
    family: &FamilySpec,
    kappa0: f64,
    theta0: &MixtureParams,
    s: &Schedules,
    n: usize,
    seeds: &[u64],
) -> Result<IntervalDiagnostic> {
    let w = envelope_radius(family, kappa0, s.c(n as u64))?;
    let counts =
        seeds.iter().map(|&seed| max_interval_count(&sample(family, theta0, n, diagnostic_seed(seed, n)), w)).collect();
    Ok(IntervalDiagnostic { n, half_width: w, counts })
}

/// Kolmogorov–Smirnov statistic of `data` against the mixture CDF.
pub fn ks_statistic(family: &FamilySpec, theta0: &MixtureParams, data: &[f64]) -> f64 {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = crate::families::mixture_cdf(family, theta0, x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{fit_envelope, FamilyKind};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn normal() -> FamilySpec {
        fit_envelope(FamilyKind::Normal, 3.0).unwrap()
    }

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
        assert_eq!(permutations(3)[5], vec![2, 1, 0]);
    }

    #[test]
    fn distance_examples() {
        let a = MixtureParams::from_triples(&[(0.5, 0.0, 1.0), (0.5, 4.0, 1.0)]).unwrap();
        let b = MixtureParams::from_triples(&[(0.5, 0.1, 1.0), (0.5, 4.0, 1.0)]).unwrap();
        assert_eq!(param_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(param_distance(&a, &a.permuted(&[1, 0])).unwrap(), 0.0);
        assert_relative_eq!(param_distance(&a, &b).unwrap(), 0.1, max_relative = 1e-15);
        let one = MixtureParams::from_triples(&[(1.0, 0.0, 1.0)]).unwrap();
        assert!(param_distance(&a, &one).is_err());
    }

    #[test]
    fn sampling_moments_and_degenerate_weights() {
        let theta = MixtureParams::from_triples(&[(1.0, 0.0, 1.0)]).unwrap();
        let x = sample(&normal(), &theta, 100_000, 3);
        let (mean, sd) = crate::families::mean_sd(&x);
        assert!(mean.abs() < 4.0 / (1e5f64).sqrt());
        assert!((sd - 1.0).abs() < 0.02);
        assert_eq!(x, sample(&normal(), &theta, 100_000, 3));
        let split = MixtureParams::from_triples(&[(1.0, -50.0, 1.0), (0.0, 50.0, 1.0)]).unwrap();
        assert!(sample(&normal(), &split, 1000, 4).iter().all(|&v| v < 0.0));
    }

    #[test]
    fn extreme_frequency_limits() {
        let theta = MixtureParams::from_triples(&[(1.0, 0.0, 1.0)]).unwrap();
        let seeds: Vec<u64> = (0..20).collect();
        let tiny = Schedules { a0: 1e-12, ..Schedules::default() };
        let rows = extreme_diagnostic(&normal(), &theta, &tiny, &[10], &seeds).unwrap();
        assert_eq!(rows[0].frequency(), 1.0);
        let mut last = 1.0;
        for a0 in [0.01, 0.1, 0.5, 1.0, 10.0] {
            let s = Schedules { a0, ..Schedules::default() };
            let f = extreme_diagnostic(&normal(), &theta, &s, &[10], &seeds).unwrap()[0].frequency();
            assert!(f <= last);
            last = f;
        }
    }

    #[test]
    fn config_validation() {
        let theta0 = MixtureParams::from_triples(&[(0.5, 0.0, 1.0), (0.5, 0.0, 1.0)]).unwrap();
        let cfg = ExperimentConfig {
            theta0,
            family: normal(),
            pens: vec![PenaltySpec::none()],
            n_grid: vec![10],
            replicates: 1,
            base_seed: 1,
            fit_cfg: FitConfig::with_m(2),
        };
        assert!(cfg.validate().is_err());
        let ok = ExperimentConfig {
            theta0: MixtureParams::from_triples(&[(0.5, 0.0, 1.0), (0.5, 6.0, 1.0)]).unwrap(),
            ..cfg.clone()
        };
        assert!(ok.validate().is_ok());
        assert!(ExperimentConfig { n_grid: vec![20, 10], ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { replicates: 0, ..ok.clone() }.validate().is_err());
        let report = run_consistency(&ok).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert_eq!(report.cells[0].total(), 1);
    }
}
