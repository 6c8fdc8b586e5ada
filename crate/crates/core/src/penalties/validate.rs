//! Grid falsifiers for the conditions a reward has to satisfy.
//!
//! The conditions quantify over uncountable sets, so none of these can prove
//! anything. Each one sweeps a log-spaced probe grid and either returns the
//! constants that worked on the grid or the grid point that broke them. A
//! quantity is declared unbounded when it is still growing at the edge of the
//! grid.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{PenaltySpec, RatioFamily, ScalePenalty, Schedules};
use crate::error::{Error, Result};
use crate::experiments::permutations;
use crate::families::{FamilySpec, MixtureParams};
use crate::math;

#[cfg(feature = "serde")]
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub enum Assumption {
    /// Tail envelope with `beta > 1`.
    A4,
    /// Tail envelope with `beta > 2` (ratio penalties).
    A5,
    A6,
    A8,
    A9,
    A10,
    A11,
    A12,
}

impl Assumption {
    pub fn label(&self) -> &'static str {
        match self {
            Assumption::A4 => "A4",
            Assumption::A5 => "A5",
            Assumption::A6 => "A6",
            Assumption::A8 => "A8",
            Assumption::A9 => "A9",
            Assumption::A10 => "A10",
            Assumption::A11 => "A11",
            Assumption::A12 => "A12",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize), serde(rename_all = "snake_case"))]
pub enum Verdict {
    Pass,
    /// The condition quantifies over a set the grid cannot cover.
    NoCounterexample,
    Fail,
}

impl Verdict {
    pub fn is_failure(&self) -> bool {
        matches!(self, Verdict::Fail)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::NoCounterexample => "no counterexample",
            Verdict::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct Witness {
    pub name: &'static str,
    pub value: f64,
}

fn w(name: &'static str, value: f64) -> Witness {
    Witness { name, value }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct AssumptionReport {
    pub assumption: Assumption,
    pub verdict: Verdict,
    /// Constants that satisfied the condition on the grid.
    pub witnesses: Vec<Witness>,
    /// Grid point that violated it, when the verdict is a failure.
    pub counterexample: Vec<Witness>,
    pub note: String,
}

impl AssumptionReport {
    fn pass(assumption: Assumption, witnesses: Vec<Witness>, note: String) -> Self {
        Self { assumption, verdict: Verdict::Pass, witnesses, counterexample: Vec::new(), note }
    }

    fn fail(assumption: Assumption, counterexample: Vec<Witness>, note: String) -> Self {
        Self { assumption, verdict: Verdict::Fail, witnesses: Vec::new(), counterexample, note }
    }

    pub fn witness(&self, name: &str) -> Option<f64> {
        self.witnesses.iter().find(|w| w.name == name).map(|w| w.value)
    }

    pub fn counterexample_value(&self, name: &str) -> Option<f64> {
        self.counterexample.iter().find(|w| w.name == name).map(|w| w.value)
    }
}

/// Log-spaced probe grid.
///
/// `y` runs over `[y_min, 1]`, `n` over `{1, 2, 4, ..., 2^max_log2_n}` and
/// scales over `[c_n, sigma_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeGrid {
    pub y_min: f64,
    pub y_per_decade: usize,
    pub max_log2_n: u32,
    pub sigma_per_decade: usize,
    pub sigma_max: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self { y_min: 1e-12, y_per_decade: 10, max_log2_n: 20, sigma_per_decade: 5, sigma_max: 1e3 }
    }
}

impl ProbeGrid {
    /// Same ranges, `factor` times more points per decade.
    pub fn refined(&self, factor: usize) -> Self {
        Self { y_per_decade: self.y_per_decade * factor, sigma_per_decade: self.sigma_per_decade * factor, ..*self }
    }

    /// Ascending ratios, `ys()[0] == y_min`, last element exactly 1.
    pub fn ys(&self) -> Vec<f64> {
        let mut ys: Vec<f64> =
            log_grid(math::ln(self.y_min), 0.0, self.y_per_decade).into_iter().map(math::exp).collect();
        ys[0] = self.y_min;
        *ys.last_mut().unwrap() = 1.0;
        ys
    }

    pub fn ns(&self) -> Vec<u64> {
        (0..=self.max_log2_n).map(|k| 1u64 << k).collect()
    }
}

/// Points from `lo` to `hi` (natural-log units) at `per_decade` per factor 10.
fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi - lo) / core::f64::consts::LN_10;
    let steps = (math::ceil(decades * per_decade as f64) as usize).max(1);
    (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
}

// `a` exceeds `b` by more than rounding.
fn grows(a: f64, b: f64) -> bool {
    a.is_finite() && (b == f64::NEG_INFINITY || a - b > 1e-9 * (1.0 + math::abs(b)))
}

// ln 1e-300: below this the ratio itself is no longer representable.
const Y_FLOOR_LN: f64 = -690.0;
const DELTA_CANDIDATES: [f64; 7] = [2.0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.01];
const BIG_DELTA_CANDIDATES: [f64; 4] = [2.0, 1.0, 0.5, 0.25];

/// Checks `0 <= r_n(y) <= min{R, r * y^(M+delta) * exp(n^d)}` on the grid.
///
/// Looks for the largest `delta` in a fixed candidate list (and the smallest
/// `d` in `[d_tilde, 1)`) for which `r_n(y) / (y^(M+delta) e^(n^d))` stays
/// bounded, i.e. is not still increasing as `y` reaches the bottom of the grid
/// or as `n` reaches the top.
pub fn validate_assumption6(fam: &RatioFamily, m: usize, probe: &ProbeGrid) -> AssumptionReport {
    let ys = probe.ys();
    let ns = probe.ns();
    let ln_ys: Vec<f64> = ys.iter().map(|&y| math::ln(y)).collect();
    let log_r: Vec<Vec<f64>> = ns.iter().map(|&n| ys.iter().map(|&y| fam.log_reward_at(n, y)).collect()).collect();

    let ln_cap = log_r.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if ln_cap == f64::NEG_INFINITY {
        return AssumptionReport::fail(Assumption::A6, Vec::new(), "reward is identically zero on the grid".into());
    }
    if !ln_cap.is_finite() {
        return AssumptionReport::fail(Assumption::A6, Vec::new(), "reward is unbounded on the grid".into());
    }
    let r_cap = math::exp(ln_cap);

    let d0 = fam.d_tilde();
    let d_candidates = [d0, d0 + 0.25 * (1.0 - d0), d0 + 0.5 * (1.0 - d0), d0 + 0.75 * (1.0 - d0)];
    let mut first_violation: Option<Vec<Witness>> = None;

    for &delta in &DELTA_CANDIDATES {
        for &dw in &d_candidates {
            let mut sup_by_n = Vec::with_capacity(ns.len());
            let mut violation = None;
            for (k, &n) in ns.iter().enumerate() {
                let growth = math::powf(n as f64, dw);
                let log_q = |lr: f64, ly: f64| lr - (m as f64 + delta) * ly - growth;
                let mut sup =
                    log_r[k].iter().zip(&ln_ys).map(|(&lr, &ly)| log_q(lr, ly)).fold(f64::NEG_INFINITY, f64::max);
                // Still rising at the bottom of the grid: follow it down a
                // decade at a time until it turns or the ratio underflows.
                let mut prev = log_q(log_r[k][1], ln_ys[1]);
                let (mut ly, mut cur) = (ln_ys[0], log_q(log_r[k][0], ln_ys[0]));
                while grows(cur, prev) {
                    sup = sup.max(cur);
                    if ly < Y_FLOOR_LN {
                        if violation.is_none() {
                            violation =
                                Some(vec![w("n", n as f64), w("y", ys[0]), w("delta", delta), w("d_tilde", dw)]);
                        }
                        break;
                    }
                    prev = cur;
                    ly -= core::f64::consts::LN_10;
                    cur = log_q(fam.log_reward_at(n, math::exp(ly)), ly);
                }
                sup_by_n.push(sup);
            }
            let last = sup_by_n.len() - 1;
            if violation.is_none() && last > 0 && grows(sup_by_n[last], sup_by_n[last - 1]) {
                violation = Some(vec![w("n", ns[last] as f64), w("delta", delta), w("d_tilde", dw)]);
            }
            match violation {
                None => {
                    let r_coef = math::exp(sup_by_n.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                    return AssumptionReport::pass(
                        Assumption::A6,
                        vec![w("R_bar", r_cap), w("r_bar", r_coef), w("delta", delta), w("d_tilde", dw)],
                        format!("bounded on {} ratios x {} sample sizes", ys.len(), ns.len()),
                    );
                }
                Some(v) => {
                    if dw == d0 && first_violation.is_none() {
                        first_violation = Some(v);
                    }
                }
            }
        }
    }
    AssumptionReport::fail(
        Assumption::A6,
        first_violation.unwrap_or_default(),
        format!("r_n(y) / y^(M+delta) keeps growing as y -> 0 for every delta >= {}", DELTA_CANDIDATES[6]),
    )
}

/// Evaluates the reward at `theta0` (and its label permutations) for
/// `n = 1..=n_max` and finds the smallest `N` beyond which it is positive and
/// nondecreasing.
pub fn validate_assumption8(spec: &PenaltySpec, theta0: &MixtureParams, n_max: u64) -> AssumptionReport {
    let perms = if theta0.m() <= 6 { permutations(theta0.m()) } else { vec![(0..theta0.m()).collect()] };
    let variants: Vec<MixtureParams> = perms.iter().map(|p| theta0.permuted(p)).collect();
    let n_max = n_max.max(1);
    let reward =
        |n: u64| variants.iter().map(|t| math::exp(super::log_reward(spec, n, t))).fold(f64::INFINITY, f64::min);
    let rewards: Vec<f64> = (1..=n_max).map(reward).collect();
    let last = rewards.len() - 1;
    if !(rewards[last] > 0.0) {
        return AssumptionReport::fail(
            Assumption::A8,
            vec![w("n", n_max as f64), w("reward", rewards[last])],
            "reward at theta0 is zero at the end of the probe range".into(),
        );
    }
    let mut start = last;
    while start > 0 && rewards[start - 1] > 0.0 && rewards[start] >= rewards[start - 1] * (1.0 - 1e-12) {
        start -= 1;
    }
    let floor = rewards[start..].iter().copied().fold(f64::INFINITY, f64::min);
    let note = if start == 0 {
        format!("positive and nondecreasing for all n in 1..={n_max}")
    } else {
        format!(
            "reward at theta0 is {} at n = {}; positive and nondecreasing from N = {}",
            rewards[start - 1],
            start,
            start + 1
        )
    };
    AssumptionReport::pass(Assumption::A8, vec![w("N", (start + 1) as f64), w("r_theta0", floor)], note)
}

/// Sweeps `(sigma_(1), sigma_(M), n)` with `sigma_(1) >= c_n` and checks
/// `r_n > sigma_(1)^M  =>  sigma_(M) < sigma_(1)^Delta / b_n`.
///
/// The largest `Delta` in `{2, 1, 0.5, 0.25}` without a counterexample is
/// reported. Success is "no counterexample", never "pass".
pub fn validate_assumption9(fam: &RatioFamily, s: &Schedules, m: usize, probe: &ProbeGrid) -> Result<AssumptionReport> {
    let d_tilde = fam.d_tilde();
    if !(0.0 <= d_tilde && d_tilde < s.d && s.d < 1.0) {
        return Err(Error::ScheduleOrder { d_tilde, d: s.d });
    }
    let ys = probe.ys();
    let ln_ys: Vec<f64> = ys.iter().map(|&y| math::ln(y)).collect();
    let ns = probe.ns();
    let ln_sigma_max = math::ln(probe.sigma_max);
    let m = m as f64;

    // Per n: ln b_n, ln r_n(y) for every y, the admissible ln sigma_(1) values.
    let rows: Vec<(u64, f64, Vec<f64>, Vec<f64>)> = ns
        .iter()
        .map(|&n| {
            let ln_b = match fam {
                RatioFamily::Smooth(_) => math::ln(s.b0) - math::powf(n as f64, d_tilde),
                RatioFamily::Hard(h) => math::ln(h.cutoff(n)),
            };
            let log_r: Vec<f64> = ys.iter().map(|&y| fam.log_reward_at(n, y)).collect();
            let ln_c = s.ln_c(n);
            let sigmas =
                if ln_c < ln_sigma_max { log_grid(ln_c, ln_sigma_max, probe.sigma_per_decade) } else { vec![ln_c] };
            (n, ln_b, log_r, sigmas)
        })
        .collect();

    let mut smallest_failure = None;
    for &big_delta in &BIG_DELTA_CANDIDATES {
        let mut counterexample = None;
        'sweep: for (n, ln_b, log_r, sigmas) in &rows {
            for &ln_s in sigmas {
                for (lr, ly) in log_r.iter().zip(&ln_ys) {
                    let premise = *lr > m * ln_s;
                    if !premise {
                        continue;
                    }
                    let ln_sigma_top = ln_s - ly;
                    if !(ln_sigma_top < big_delta * ln_s - ln_b) {
                        counterexample = Some(vec![
                            w("n", *n as f64),
                            w("sigma_min", math::exp(ln_s)),
                            w("sigma_max", math::exp(ln_sigma_top)),
                            w("Delta", big_delta),
                        ]);
                        break 'sweep;
                    }
                }
            }
        }
        match counterexample {
            None => {
                return Ok(AssumptionReport {
                    assumption: Assumption::A9,
                    verdict: Verdict::NoCounterexample,
                    witnesses: vec![w("Delta", big_delta), w("c0", s.c0), w("d", s.d)],
                    counterexample: Vec::new(),
                    note: format!("implication held on {} sample sizes", ns.len()),
                });
            }
            Some(c) => smallest_failure = Some(c),
        }
    }
    Ok(AssumptionReport::fail(
        Assumption::A9,
        smallest_failure.unwrap_or_default(),
        "premise holds but sigma_(M) is too large for every Delta candidate".into(),
    ))
}

// Sup of a log-concave-ish function of ln y on [1e-12, 1e12], refined by
// golden section. `None` when still growing at either end.
fn sup_log_over_y<F: Fn(f64) -> f64>(f: F, per_decade: usize) -> Option<(f64, f64)> {
    let ts = log_grid(math::ln(1e-12), math::ln(1e12), per_decade);
    let vals: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    let k = ts.len();
    if grows(vals[0], vals[1]) || grows(vals[k - 1], vals[k - 2]) {
        return None;
    }
    let best = (0..k).max_by(|&a, &b| vals[a].total_cmp(&vals[b]))?;
    let (t, v) = math::golden_max(&f, ts[best.saturating_sub(1)], ts[(best + 1).min(k - 1)], 1e-12);
    let (t, v) = if v >= vals[best] { (t, v) } else { (ts[best], vals[best]) };
    Some((math::exp(t), v))
}

/// Checks the scale-regime conditions: bounded and nonzero `s(y)`,
/// bounded `s(y) / y^M`, and a positive reward at `theta0`.
pub fn validate_assumptions_10_11_12(
    fam: &ScalePenalty,
    theta0: &MixtureParams,
    probe: &ProbeGrid,
) -> [AssumptionReport; 3] {
    let m = theta0.m() as f64;
    let per_decade = probe.y_per_decade;

    let a10 = match sup_log_over_y(|t| fam.log_factor(math::exp(t)), per_decade) {
        Some((arg, v)) if v.is_finite() => AssumptionReport::pass(
            Assumption::A10,
            vec![w("S_bar", math::exp(v)), w("argmax", arg)],
            "sup of s(y) is finite and positive".into(),
        ),
        _ => AssumptionReport::fail(Assumption::A10, Vec::new(), "s(y) is unbounded or zero on the grid".into()),
    };

    // The built-in factor does not depend on n, so any d in [0, 1) works.
    let a11 = match sup_log_over_y(|t| fam.log_factor(math::exp(t)) - m * t, per_decade) {
        Some((arg, v)) if v.is_finite() => AssumptionReport::pass(
            Assumption::A11,
            vec![w("s_bar", math::exp(v)), w("d", fam.d), w("argmax", arg)],
            "sup of s(y) / y^M is finite and independent of n".into(),
        ),
        _ => AssumptionReport::fail(Assumption::A11, Vec::new(), "s(y) / y^M is unbounded on the grid".into()),
    };

    let log_s0: f64 = theta0.sigmas().map(|s| fam.log_factor(s)).sum();
    let s0 = math::exp(log_s0);
    let a12 = if s0 > 0.0 {
        AssumptionReport::pass(
            Assumption::A12,
            vec![w("s_theta0", s0), w("N", 1.0)],
            "reward at theta0 is positive and does not depend on n".into(),
        )
    } else {
        AssumptionReport::fail(Assumption::A12, vec![w("s_theta0", s0)], "reward at theta0 underflows to zero".into())
    };
    [a10, a11, a12]
}

/// Checks `f(z) <= min{v0, v1 |z|^-beta} + 1e-12` on `points` evenly spaced
/// points of `[-100, 100]` and the exponent condition (`beta > 2` when
/// `for_ratio`).
pub fn validate_tail_envelope(spec: &FamilySpec, for_ratio: bool, points: usize) -> AssumptionReport {
    let assumption = if for_ratio { Assumption::A5 } else { Assumption::A4 };
    let required = if for_ratio { 2.0 } else { 1.0 };
    if !(spec.beta > required) {
        return AssumptionReport::fail(
            assumption,
            vec![w("beta", spec.beta)],
            format!("tail exponent must exceed {required}"),
        );
    }
    let points = points.max(2);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..points {
        let z = -100.0 + 200.0 * i as f64 / (points - 1) as f64;
        let excess = spec.kind.density(z) - spec.envelope(z);
        if excess > 1e-12 {
            return AssumptionReport::fail(
                assumption,
                vec![w("z", z), w("excess", excess)],
                "density exceeds envelope".into(),
            );
        }
        worst = worst.max(excess);
    }
    AssumptionReport::pass(
        assumption,
        vec![w("v0", spec.v0), w("v1", spec.v1), w("beta", spec.beta), w("max_excess", worst)],
        format!("envelope holds on {points} grid points"),
    )
}
