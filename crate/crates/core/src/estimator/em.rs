use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::families::{log_component_density, FamilyKind, FamilySpec, MixtureParams};
use crate::math;
use crate::penalties::{log_reward, PenaltySpec, Regime};

/// Row-major `n x M` posterior membership probabilities.
///
/// A point outside the support of every component gets uniform weights.
pub fn responsibilities(kind: &FamilyKind, theta: &MixtureParams, data: &[f64]) -> Vec<f64> {
    let m = theta.m();
    let mut out = vec![0.0; data.len() * m];
    let log_w: Vec<f64> = theta.weights().iter().map(|&w| math::ln(w)).collect();
    for (row, &x) in out.chunks_exact_mut(m).zip(data) {
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = log_w[k] + log_component_density(kind, &theta.components()[k], x);
        }
        let total = math::log_sum_exp(row);
        if total.is_finite() {
            for slot in row.iter_mut() {
                *slot = math::exp(*slot - total);
            }
        } else {
            row.fill(1.0 / m as f64);
        }
    }
    out
}

/// One generalized EM iteration with the default numerical scale floor.
///
/// Weights get the closed form; locations the weighted mean (normal), the
/// weighted median (laplace), the support midpoint (uniform) or a golden
/// search; each scale a golden search over `ln sigma` of its component
/// objective plus the exact log reward. Each block only moves if it raises
/// its surrogate, so for the separable regimes the penalized objective cannot
/// decrease.
pub fn em_step(
    spec: &FamilySpec,
    pen: &PenaltySpec,
    theta: &MixtureParams,
    data: &[f64],
    n: u64,
) -> Result<MixtureParams> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if log_reward(pen, n, theta) == f64::NEG_INFINITY {
        return Err(Error::Infeasible(pen.regime.name()));
    }
    let ctx = EmContext::new(&spec.kind, pen, data, n, super::FitConfig::default().sigma_floor_numeric);
    Ok(ctx.step(theta))
}

pub(crate) struct EmContext<'a> {
    kind: &'a FamilyKind,
    pen: &'a PenaltySpec,
    data: &'a [f64],
    n: u64,
    ln_floor: f64,
    ln_top: f64,
    lo: f64,
    hi: f64,
}

impl<'a> EmContext<'a> {
    pub(crate) fn new(kind: &'a FamilyKind, pen: &'a PenaltySpec, data: &'a [f64], n: u64, floor: f64) -> Self {
        let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let range = if hi > lo { hi - lo } else { 1.0 };
        Self { kind, pen, data, n, ln_floor: math::ln(floor), ln_top: math::ln(10.0 * range), lo, hi }
    }

    pub(crate) fn step(&self, theta: &MixtureParams) -> MixtureParams {
        let m = theta.m();
        let resp = responsibilities(self.kind, theta, self.data);
        let mut next = theta.clone();
        let mass: Vec<f64> = (0..m).map(|k| resp.iter().skip(k).step_by(m).sum()).collect();
        let total: f64 = mass.iter().sum();
        next.set_weights(mass.iter().map(|w| w / total).collect());

        let mut tau = vec![0.0; self.data.len()];
        for k in 0..m {
            if !(mass[k] > 0.0) {
                continue;
            }
            for (t, row) in tau.iter_mut().zip(resp.chunks_exact(m)) {
                *t = row[k];
            }
            let sigma = next.components()[k].sigma;
            let mu = self.update_location(&tau, mass[k], next.components()[k].mu, sigma);
            next.components_mut()[k].mu = mu;
            let sigma = self.update_scale(&tau, &mut next, k);
            next.components_mut()[k].sigma = sigma;
        }
        next
    }

    /// `sum_i tau_i ln f0((x_i - mu) / sigma)`, zero-weight points skipped.
    fn q_location(&self, tau: &[f64], mu: f64, sigma: f64) -> f64 {
        tau.iter()
            .zip(self.data)
            .filter(|(t, _)| **t > 0.0)
            .map(|(t, x)| t * self.kind.log_density((x - mu) / sigma))
            .sum()
    }

    fn update_location(&self, tau: &[f64], mass: f64, mu: f64, sigma: f64) -> f64 {
        match self.kind {
            FamilyKind::Normal => tau.iter().zip(self.data).map(|(t, x)| t * x).sum::<f64>() / mass,
            FamilyKind::Laplace => weighted_median(self.data, tau, mass),
            FamilyKind::Uniform => {
                let (lo, hi) = tau
                    .iter()
                    .zip(self.data)
                    .filter(|(t, _)| **t > 0.0)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, &x)| (a.min(x), b.max(x)));
                let mid = 0.5 * (lo + hi);
                if self.q_location(tau, mid, sigma) >= self.q_location(tau, mu, sigma) {
                    mid
                } else {
                    mu
                }
            }
            FamilyKind::Logistic | FamilyKind::StudentT { .. } => {
                let tol = 1e-10 * (self.hi - self.lo).max(1.0);
                let (cand, val) = math::golden_max(|c| self.q_location(tau, c, sigma), self.lo, self.hi, tol);
                if val >= self.q_location(tau, mu, sigma) {
                    cand
                } else {
                    mu
                }
            }
        }
    }

    fn q_scale(&self, tau: &[f64], mu: f64, t: f64) -> f64 {
        let sigma = math::exp(t);
        tau.iter()
            .zip(self.data)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, x)| w * (self.kind.log_density((x - mu) / sigma) - t))
            .sum()
    }

    // d/dt of q_scale plus the reward slope, for the smooth regimes.
    fn q_scale_slope(&self, tau: &[f64], mu: f64, t: f64) -> f64 {
        let sigma = math::exp(t);
        let q: f64 = tau
            .iter()
            .zip(self.data)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, x)| {
                let z = (x - mu) / sigma;
                w * (-1.0 - z * self.kind.score(z))
            })
            .sum();
        let p = match self.pen.regime {
            Regime::Scale(s) => s.log_factor_slope(sigma),
            _ => 0.0,
        };
        q + p
    }

    fn update_scale(&self, tau: &[f64], theta: &mut MixtureParams, k: usize) -> f64 {
        let mu = theta.components()[k].mu;
        let current = theta.components()[k].sigma;
        let t0 = math::ln(current);
        let mut lo = self.ln_floor;
        let mut hi = self.ln_top;
        let others = || theta.components().iter().enumerate().filter(move |(j, _)| *j != k).map(|(_, c)| c.sigma);
        match self.pen.regime {
            Regime::HardRatio(h) if theta.m() > 1 => {
                let b = math::ln(h.cutoff(self.n));
                let top = others().fold(0.0_f64, f64::max);
                let bottom = others().fold(f64::INFINITY, f64::min);
                lo = lo.max(math::ln(top) + b);
                hi = hi.min(math::ln(bottom) - b);
            }
            Regime::HardFloor(f) => lo = lo.max(math::ln(f.c(self.n))),
            _ => {}
        }
        lo = lo.min(t0);
        hi = hi.max(t0);

        let mut work = theta.clone();
        let mut h = |t: f64| {
            work.components_mut()[k].sigma = math::exp(t);
            let r = log_reward(self.pen, self.n, &work);
            if r == f64::NEG_INFINITY {
                return r;
            }
            self.q_scale(tau, mu, t) + r
        };
        let h0 = h(t0);
        let (mut t_best, mut h_best) = math::golden_max(&mut h, lo, hi, 1e-10);

        let smooth =
            matches!(self.pen.regime, Regime::None | Regime::Scale(_)) && !matches!(self.kind, FamilyKind::Uniform);
        if smooth {
            let a = (t_best - 1e-6).max(lo);
            let b = (t_best + 1e-6).min(hi);
            let g = |t: f64| self.q_scale_slope(tau, mu, t);
            if g(a) > 0.0 && g(b) < 0.0 {
                let root = math::bisect_decreasing(g, a, b);
                let h_root = h(root);
                if h_root >= h_best - 1e-12 * (1.0 + math::abs(h_best)) {
                    t_best = root;
                    h_best = h_root;
                }
            }
        }
        if h_best >= h0 {
            let s = math::exp(t_best);
            if s > 0.0 && s.is_finite() {
                return s;
            }
        }
        current
    }
}

fn weighted_median(data: &[f64], tau: &[f64], mass: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = data.iter().copied().zip(tau.iter().copied()).filter(|p| p.1 > 0.0).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * mass;
    let mut acc = 0.0;
    for (x, w) in &pairs {
        acc += w;
        if acc >= half {
            return *x;
        }
    }
    pairs.last().map_or(0.0, |p| p.0)
}
