//! Location-scale component families, mixture densities and the tail
//! envelope `f(z) <= min{v0, v1 |z|^-beta}` of the standard density.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Density values below this are floored inside [`log_likelihood`].
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Safety multiplier applied to numerically fitted envelope constants.
pub const ENVELOPE_SAFETY: f64 = 1.01;

/// Standard (location 0, scale 1) member of a built-in family.
///
/// Every built-in family is symmetric about zero. The uniform family is
/// supported on `[-1/2, 1/2]` with height one.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "kind", rename_all = "snake_case"))]
pub enum FamilyKind {
    Normal,
    Laplace,
    Logistic,
    StudentT { df: f64 },
    Uniform,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Normal => "normal",
            FamilyKind::Laplace => "laplace",
            FamilyKind::Logistic => "logistic",
            FamilyKind::StudentT { .. } => "student-t",
            FamilyKind::Uniform => "uniform",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let FamilyKind::StudentT { df } = *self {
            if !(df >= 1.0) || !df.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "df",
                    value: df,
                    reason: "student-t degrees of freedom must be finite and >= 1",
                });
            }
        }
        Ok(())
    }

    /// `ln f(z; 0, 1)`; `-inf` outside the support.
    pub fn log_density(&self, z: f64) -> f64 {
        match *self {
            FamilyKind::Normal => -0.5 * z * z - math::LN_SQRT_2PI,
            FamilyKind::Laplace => -math::abs(z) - core::f64::consts::LN_2,
            FamilyKind::Logistic => {
                let a = math::abs(z);
                -a - 2.0 * math::ln1p(math::exp(-a))
            }
            FamilyKind::StudentT { df } => student_t_log_norm(df) - 0.5 * (df + 1.0) * math::ln1p(z * z / df),
            FamilyKind::Uniform => {
                if math::abs(z) <= 0.5 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        math::exp(self.log_density(z))
    }

    /// `d/dz ln f(z; 0, 1)`, zero where the log density is flat or undefined.
    pub fn score(&self, z: f64) -> f64 {
        match *self {
            FamilyKind::Normal => -z,
            FamilyKind::Laplace => {
                if z > 0.0 {
                    -1.0
                } else if z < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            FamilyKind::Logistic => -math::tanh(0.5 * z),
            FamilyKind::StudentT { df } => -(df + 1.0) * z / (df + z * z),
            FamilyKind::Uniform => 0.0,
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            FamilyKind::Normal => math::normal_cdf(z),
            FamilyKind::Laplace => {
                if z < 0.0 {
                    0.5 * math::exp(z)
                } else {
                    1.0 - 0.5 * math::exp(-z)
                }
            }
            FamilyKind::Logistic => 1.0 / (1.0 + math::exp(-z)),
            FamilyKind::StudentT { df } => {
                let tail = 0.5 * math::reg_inc_beta(0.5 * df, 0.5, df / (df + z * z));
                if z > 0.0 {
                    1.0 - tail
                } else {
                    tail
                }
            }
            FamilyKind::Uniform => (z + 0.5).clamp(0.0, 1.0),
        }
    }

    /// Inverse CDF on the open unit interval.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            FamilyKind::Normal => math::normal_quantile(p),
            FamilyKind::Laplace => {
                if p < 0.5 {
                    math::ln(2.0 * p)
                } else {
                    -math::ln(2.0 * (1.0 - p))
                }
            }
            FamilyKind::Logistic => math::ln(p) - math::ln1p(-p),
            FamilyKind::StudentT { df } => student_t_quantile(df, p),
            FamilyKind::Uniform => p - 0.5,
        }
    }

    /// Half-width of the support for compactly supported families.
    pub fn support_half_width(&self) -> Option<f64> {
        match self {
            FamilyKind::Uniform => Some(0.5),
            _ => None,
        }
    }

    /// Largest `beta` for which `sup |z|^beta f(z)` is finite, if bounded.
    pub fn max_tail_exponent(&self) -> Option<f64> {
        match *self {
            FamilyKind::StudentT { df } => Some(df + 1.0),
            _ => None,
        }
    }
}

fn student_t_log_norm(df: f64) -> f64 {
    math::ln_gamma(0.5 * (df + 1.0)) - math::ln_gamma(0.5 * df) - 0.5 * math::ln(df * core::f64::consts::PI)
}

fn student_t_quantile(df: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    if df == 1.0 {
        return math::tan(core::f64::consts::PI * (p - 0.5));
    }
    // Solve in the lower tail and reflect.
    let (target, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let kind = FamilyKind::StudentT { df };
    let mut hi = 0.0; // cdf(hi) >= target
    let mut lo = -1.0;
    while kind.cdf(lo) > target {
        hi = lo;
        lo *= 2.0;
        if lo < -1e300 {
            break;
        }
    }
    let mut t = math::normal_quantile(target).clamp(lo, hi);
    for _ in 0..200 {
        let f = kind.cdf(t) - target;
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let pdf = kind.density(t);
        let mut next = t - f / pdf;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if math::abs(next - t) <= 1e-15 * math::abs(t) || hi - lo <= 1e-15 * math::abs(lo) {
            t = next;
            break;
        }
        t = next;
    }
    sign * -t
}

/// A standard density together with its tail-envelope constants.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub v0: f64,
    pub v1: f64,
    pub beta: f64,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, v0: f64, v1: f64, beta: f64) -> Result<Self> {
        kind.validate()?;
        positive("v0", v0)?;
        positive("v1", v1)?;
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(Error::TailExponent { beta, required: 1.0 });
        }
        Ok(Self { kind, v0, v1, beta })
    }

    /// Ratio penalties need the stronger tail condition `beta > 2`.
    pub fn require_ratio_compatible(&self) -> Result<()> {
        if self.beta > 2.0 {
            Ok(())
        } else {
            Err(Error::TailExponent { beta: self.beta, required: 2.0 })
        }
    }

    /// `min{v0, v1 |z|^-beta}`.
    pub fn envelope(&self, z: f64) -> f64 {
        let a = math::abs(z);
        if a == 0.0 {
            return self.v0;
        }
        self.v0.min(self.v1 * math::powf(a, -self.beta))
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason: "must be positive and finite" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ComponentParams {
    pub mu: f64,
    pub sigma: f64,
}

impl ComponentParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let p = Self { mu, sigma };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::NonPositiveScale(self.sigma));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter { name: "mu", value: self.mu, reason: "location must be finite" });
        }
        Ok(())
    }
}

/// Mixture parameter vector `(alpha_m, mu_m, sigma_m)` for `m = 1..M`.
///
/// Weights are nonnegative and sum to one within `1e-12`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(try_from = "RawMixture", into = "RawMixture"))]
pub struct MixtureParams {
    weights: Vec<f64>,
    components: Vec<ComponentParams>,
}

#[cfg(feature = "serde")]
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixture {
    weights: Vec<f64>,
    components: Vec<ComponentParams>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawMixture> for MixtureParams {
    type Error = Error;
    fn try_from(raw: RawMixture) -> Result<Self> {
        MixtureParams::new(raw.weights, raw.components)
    }
}

#[cfg(feature = "serde")]
impl From<MixtureParams> for RawMixture {
    fn from(p: MixtureParams) -> Self {
        RawMixture { weights: p.weights, components: p.components }
    }
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, components: Vec<ComponentParams>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::LengthMismatch { weights: weights.len(), components: components.len() });
        }
        if weights.is_empty() {
            return Err(Error::InvalidWeights("at least one component is required".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidWeights(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if math::abs(total - 1.0) > 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        for c in &components {
            c.check()?;
        }
        Ok(Self { weights, components })
    }

    /// Builds from `(weight, mu, sigma)` triples.
    pub fn from_triples(triples: &[(f64, f64, f64)]) -> Result<Self> {
        let weights = triples.iter().map(|t| t.0).collect();
        let components = triples.iter().map(|t| ComponentParams { mu: t.1, sigma: t.2 }).collect();
        Self::new(weights, components)
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[ComponentParams] {
        &self.components
    }

    pub fn sigmas(&self) -> impl Iterator<Item = f64> + '_ {
        self.components.iter().map(|c| c.sigma)
    }

    /// Copy with the components (and weights) reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            weights: perm.iter().map(|&i| self.weights[i]).collect(),
            components: perm.iter().map(|&i| self.components[i]).collect(),
        }
    }

    /// Copy with every scale multiplied by `factor`.
    pub fn with_scaled_sigmas(&self, factor: f64) -> Result<Self> {
        let components =
            self.components.iter().map(|c| ComponentParams { mu: c.mu, sigma: c.sigma * factor }).collect();
        Self::new(self.weights.clone(), components)
    }

    pub(crate) fn from_parts_unchecked(weights: Vec<f64>, components: Vec<ComponentParams>) -> Self {
        debug_assert_eq!(weights.len(), components.len());
        Self { weights, components }
    }

    pub(crate) fn components_mut(&mut self) -> &mut [ComponentParams] {
        &mut self.components
    }

    pub(crate) fn set_weights(&mut self, weights: Vec<f64>) {
        self.weights = weights;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleOrderStats {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub ratio: f64,
}

pub fn scale_order_stats(theta: &MixtureParams) -> ScaleOrderStats {
    let (lo, hi) = theta.sigmas().fold((f64::INFINITY, 0.0_f64), |(lo, hi), s| (lo.min(s), hi.max(s)));
    ScaleOrderStats { sigma_min: lo, sigma_max: hi, ratio: lo / hi }
}

pub fn standard_density(spec: &FamilySpec, z: f64) -> f64 {
    spec.kind.density(z)
}

pub fn component_density(spec: &FamilySpec, p: ComponentParams, x: f64) -> Result<f64> {
    p.check()?;
    Ok(spec.kind.density((x - p.mu) / p.sigma) / p.sigma)
}

#[inline]
pub(crate) fn log_component_density(kind: &FamilyKind, p: &ComponentParams, x: f64) -> f64 {
    kind.log_density((x - p.mu) / p.sigma) - math::ln(p.sigma)
}

pub fn mixture_density(spec: &FamilySpec, theta: &MixtureParams, x: f64) -> f64 {
    theta
        .weights
        .iter()
        .zip(&theta.components)
        .map(|(w, c)| w * spec.kind.density((x - c.mu) / c.sigma) / c.sigma)
        .sum()
}

pub fn mixture_cdf(spec: &FamilySpec, theta: &MixtureParams, x: f64) -> f64 {
    theta.weights.iter().zip(&theta.components).map(|(w, c)| w * spec.kind.cdf((x - c.mu) / c.sigma)).sum()
}

/// `ln f(x; theta)` computed with log-sum-exp.
pub fn log_mixture_density(kind: &FamilyKind, theta: &MixtureParams, x: f64) -> f64 {
    let mut buf = [0.0; 16];
    if theta.m() <= buf.len() {
        for (slot, (w, c)) in buf.iter_mut().zip(theta.weights.iter().zip(&theta.components)) {
            *slot = math::ln(*w) + log_component_density(kind, c, x);
        }
        math::log_sum_exp(&buf[..theta.m()])
    } else {
        let terms: Vec<f64> = theta
            .weights
            .iter()
            .zip(&theta.components)
            .map(|(w, c)| math::ln(*w) + log_component_density(kind, c, x))
            .collect();
        math::log_sum_exp(&terms)
    }
}

/// Log-likelihood of `data` under the mixture.
///
/// Per-point densities are floored at [`DENSITY_FLOOR`]; a point outside the
/// support of every component (uniform family) contributes `-inf`.
pub fn log_likelihood(spec: &FamilySpec, theta: &MixtureParams, data: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(log_likelihood_unchecked(&spec.kind, theta, data))
}

pub(crate) fn log_likelihood_unchecked(kind: &FamilyKind, theta: &MixtureParams, data: &[f64]) -> f64 {
    let floor = math::ln(DENSITY_FLOOR);
    let mut total = 0.0;
    for &x in data {
        let l = log_mixture_density(kind, theta, x);
        if l == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        total += l.max(floor);
    }
    total
}

/// Raw suprema `(sup f, sup |z|^beta f)` of the standard density.
///
/// Found by a grid scan (linear for the density, log-spaced for the tail
/// function) followed by golden-section refinement around the best cell.
pub fn envelope_sups(kind: FamilyKind, beta: f64) -> Result<(f64, f64)> {
    kind.validate()?;
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::TailExponent { beta, required: 1.0 });
    }
    if let Some(max) = kind.max_tail_exponent() {
        if beta > max {
            return Err(Error::IncompatibleEnvelope { family: kind.name(), beta });
        }
    }

    let log_f = |z: f64| kind.log_density(z);
    let sup_density = {
        const N: usize = 4001;
        let at = |i: usize| -20.0 + 40.0 * i as f64 / (N - 1) as f64;
        let best = (0..N).max_by(|&a, &b| log_f(at(a)).total_cmp(&log_f(at(b)))).unwrap_or(0);
        let lo = at(best.saturating_sub(1));
        let hi = at((best + 1).min(N - 1));
        let (_, v) = math::golden_max(log_f, lo, hi, 1e-12);
        math::exp(v.max(log_f(at(best))))
    };

    // Tail function on z > 0, in log space: beta ln z + ln f(z).
    let log_g = |t: f64| beta * t + log_f(math::exp(t));
    const PER_DECADE: usize = 200;
    let t_lo = math::ln(1e-6);
    let t_hi = math::ln(1e8);
    let count = 14 * PER_DECADE + 1;
    let at = |i: usize| t_lo + (t_hi - t_lo) * i as f64 / (count - 1) as f64;
    let best = (0..count).max_by(|&a, &b| log_g(at(a)).total_cmp(&log_g(at(b)))).unwrap_or(0);
    if best == count - 1 {
        // Sup at the far end: finite only if the tail function has levelled off.
        let growth = log_g(at(count - 1)) - log_g(at(count - 1 - PER_DECADE));
        if growth > 1e-9 {
            return Err(Error::IncompatibleEnvelope { family: kind.name(), beta });
        }
    }
    let lo = at(best.saturating_sub(1));
    let hi = at((best + 1).min(count - 1));
    let (_, mut v) = math::golden_max(log_g, lo, hi, 1e-13);
    v = v.max(log_g(at(best)));
    if let Some(h) = kind.support_half_width() {
        v = v.max(beta * math::ln(h) + log_f(h));
    }
    let sup_tail = math::exp(v);
    if !(sup_density > 0.0) || !sup_density.is_finite() || !sup_tail.is_finite() {
        return Err(Error::IncompatibleEnvelope { family: kind.name(), beta });
    }
    Ok((sup_density, sup_tail))
}

/// Fits `(v0, v1)` for the given tail exponent, inflated by
/// [`ENVELOPE_SAFETY`].
pub fn fit_envelope(kind: FamilyKind, beta: f64) -> Result<FamilySpec> {
    let (v0, v1) = envelope_sups(kind, beta)?;
    FamilySpec::new(kind, ENVELOPE_SAFETY * v0, ENVELOPE_SAFETY * v1, beta)
}

/// `(v1 / v0)^(1/beta) * sigma^(1 - 2/beta)`; needs `beta > 2`.
pub fn envelope_radius_tilde(spec: &FamilySpec, sigma: f64) -> Result<f64> {
    spec.require_ratio_compatible()?;
    positive("sigma", sigma)?;
    Ok(math::powf(spec.v1 / spec.v0, 1.0 / spec.beta) * math::powf(sigma, 1.0 - 2.0 / spec.beta))
}

/// `(v1 / kappa0)^(1/beta) * sigma^(1 - 1/beta)`.
pub fn envelope_radius(spec: &FamilySpec, kappa0: f64, sigma: f64) -> Result<f64> {
    positive("kappa0", kappa0)?;
    positive("sigma", sigma)?;
    if !(spec.beta > 1.0) {
        return Err(Error::TailExponent { beta: spec.beta, required: 1.0 });
    }
    Ok(math::powf(spec.v1 / kappa0, 1.0 / spec.beta) * math::powf(sigma, 1.0 - 1.0 / spec.beta))
}

/// Step-function bound on a component of `theta` using the scale order
/// statistics: `max{ 1[|x-mu| <= nu~(sigma)] v0 / sigma_(1), v0 sigma_(M) }`.
pub fn small_sigma_step_bound(
    spec: &FamilySpec,
    component: ComponentParams,
    order: &ScaleOrderStats,
    x: f64,
) -> Result<f64> {
    let radius = envelope_radius_tilde(spec, component.sigma)?;
    let inside = math::abs(x - component.mu) <= radius;
    let peak = if inside { spec.v0 / order.sigma_min } else { 0.0 };
    Ok(peak.max(spec.v0 * order.sigma_max))
}

/// Step-function bound with a constant floor:
/// `max{ 1[|x-mu| <= nu(sigma)] v0 / sigma, kappa0 }`.
pub fn kappa_step_bound(spec: &FamilySpec, kappa0: f64, component: ComponentParams, x: f64) -> Result<f64> {
    let radius = envelope_radius(spec, kappa0, component.sigma)?;
    let inside = math::abs(x - component.mu) <= radius;
    let peak = if inside { spec.v0 / component.sigma } else { 0.0 };
    Ok(peak.max(kappa0))
}

/// Biased (divide-by-n) sample mean and standard deviation.
pub fn mean_sd(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, math::sqrt(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    const NORMAL_MODE: f64 = 0.398_942_280_401_432_7;

    fn normal() -> FamilySpec {
        fit_envelope(FamilyKind::Normal, 3.0).unwrap()
    }

    #[test]
    fn standard_densities_at_known_points() {
        let n = normal();
        assert_relative_eq!(standard_density(&n, 0.0), NORMAL_MODE, max_relative = 1e-15);
        // phi(3) via mpmath
        assert_relative_eq!(standard_density(&n, 3.0), 0.004_431_848_411_938_007, max_relative = 1e-14);
        let lap = fit_envelope(FamilyKind::Laplace, 2.5).unwrap();
        assert_relative_eq!(standard_density(&lap, 0.0), 0.5, max_relative = 1e-15);
        let logi = FamilyKind::Logistic;
        assert_relative_eq!(logi.density(0.0), 0.25, max_relative = 1e-15);
        // scipy.stats.t.pdf(0, 5)
        assert_relative_eq!(
            FamilyKind::StudentT { df: 5.0 }.density(0.0),
            0.379_606_689_822_494_4,
            max_relative = 1e-13
        );
        assert_eq!(FamilyKind::Uniform.density(0.5), 1.0);
        assert_eq!(FamilyKind::Uniform.density(0.500_001), 0.0);
    }

    #[test]
    fn component_density_examples() {
        let n = normal();
        let c = |mu, sigma| ComponentParams { mu, sigma };
        assert_relative_eq!(component_density(&n, c(0.0, 1.0), 0.0).unwrap(), NORMAL_MODE);
        assert_relative_eq!(component_density(&n, c(5.0, 2.0), 5.0).unwrap(), NORMAL_MODE / 2.0);
        let lap = fit_envelope(FamilyKind::Laplace, 2.5).unwrap();
        assert_relative_eq!(component_density(&lap, c(1.0, 0.5), 1.0).unwrap(), 1.0);
        assert_eq!(component_density(&n, c(0.0, 0.0), 0.0), Err(Error::NonPositiveScale(0.0)));
        assert!(component_density(&n, c(0.0, -1.0), 0.0).is_err());
    }

    #[test]
    fn mixture_density_examples() {
        let n = normal();
        let one = MixtureParams::from_triples(&[(1.0, 2.0, 0.7)]).unwrap();
        let c = one.components()[0];
        assert_relative_eq!(mixture_density(&n, &one, 1.3), component_density(&n, c, 1.3).unwrap());
        let twin = MixtureParams::from_triples(&[(0.5, 2.0, 0.7), (0.5, 2.0, 0.7)]).unwrap();
        assert_relative_eq!(mixture_density(&n, &twin, 1.3), component_density(&n, c, 1.3).unwrap());
        let two = MixtureParams::from_triples(&[(0.3, 0.0, 1.0), (0.7, 4.0, 2.0)]).unwrap();
        // 0.3 phi(0) + 0.7 (1/2) phi(-2), mpmath
        assert_relative_eq!(mixture_density(&n, &two, 0.0), 0.138_579_522_400_045_6, max_relative = 1e-14);
    }

    #[test]
    fn log_likelihood_examples() {
        let n = normal();
        let theta = MixtureParams::from_triples(&[(0.3, 0.0, 1.0), (0.7, 4.0, 2.0)]).unwrap();
        let v = mixture_density(&n, &theta, 0.0);
        assert_relative_eq!(log_likelihood(&n, &theta, &[0.0]).unwrap(), math::ln(v), max_relative = 1e-14);
        assert_relative_eq!(log_likelihood(&n, &theta, &[0.0, 0.0]).unwrap(), 2.0 * math::ln(v), max_relative = 1e-14);
        let pts = [-1.5, 0.2, 2.0, 3.7, 6.1];
        let by_hand: f64 = pts
            .iter()
            .map(|&x| {
                let a = 0.3 * (-0.5_f64 * x * x).exp() / math::SQRT_2PI;
                let z = (x - 4.0) / 2.0;
                let b = 0.7 * (-0.5_f64 * z * z).exp() / (2.0 * math::SQRT_2PI);
                (a + b).ln()
            })
            .sum();
        assert_relative_eq!(log_likelihood(&n, &theta, &pts).unwrap(), by_hand, max_relative = 1e-13);
        assert_eq!(log_likelihood(&n, &theta, &[]), Err(Error::EmptyData));
    }

    #[test]
    fn uniform_outside_support_is_neg_infinity() {
        let u = fit_envelope(FamilyKind::Uniform, 3.0).unwrap();
        let theta = MixtureParams::from_triples(&[(1.0, 0.0, 1.0)]).unwrap();
        assert_eq!(log_likelihood(&u, &theta, &[0.1, 0.7]).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_likelihood(&u, &theta, &[0.1, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn far_points_hit_the_floor_not_neg_infinity() {
        let n = normal();
        let theta = MixtureParams::from_triples(&[(1.0, 0.0, 1.0)]).unwrap();
        let ll = log_likelihood(&n, &theta, &[1e4]).unwrap();
        assert_relative_eq!(ll, math::ln(DENSITY_FLOOR));
    }

    #[test]
    fn envelope_sups_match_closed_forms() {
        // normal, beta = 3: stationary point of z^3 exp(-z^2/2) at sqrt(3)
        let (v0, v1) = envelope_sups(FamilyKind::Normal, 3.0).unwrap();
        assert_relative_eq!(v0, NORMAL_MODE, max_relative = 1e-12);
        assert_relative_eq!(v1, 0.462_540_989_411_307_83, max_relative = 1e-10);
        let (v0, v1) = envelope_sups(FamilyKind::Uniform, 3.0).unwrap();
        assert_eq!(v0, 1.0);
        assert_relative_eq!(v1, 0.125, max_relative = 1e-15);
        // laplace, beta = 2.5: peak of z^2.5 e^-z / 2 at z = 2.5
        let (v0, v1) = envelope_sups(FamilyKind::Laplace, 2.5).unwrap();
        assert_relative_eq!(v0, 0.5, max_relative = 1e-12);
        assert_relative_eq!(v1, 0.405_586_808_411_417_7, max_relative = 1e-10);
        // logistic, beta = 3 (mpmath root of the derivative)
        let (_, v1) = envelope_sups(FamilyKind::Logistic, 3.0).unwrap();
        assert_relative_eq!(v1, 1.233_541_709_341_541, max_relative = 1e-10);
        // student-t(5), beta = 3: stationary point at sqrt(5)
        let (_, v1) = envelope_sups(FamilyKind::StudentT { df: 5.0 }, 3.0).unwrap();
        assert_relative_eq!(v1, 0.530_516_476_972_984_5, max_relative = 1e-10);
    }

    #[test]
    fn fitted_spec_carries_safety_factor() {
        let spec = normal();
        assert_relative_eq!(spec.v0, ENVELOPE_SAFETY * NORMAL_MODE, max_relative = 1e-12);
        assert_eq!(spec.beta, 3.0);
    }

    #[test]
    fn heavy_tails_reject_large_beta() {
        assert!(matches!(fit_envelope(FamilyKind::StudentT { df: 3.0 }, 5.0), Err(Error::IncompatibleEnvelope { .. })));
        // Boundary beta = df + 1 is finite (limit at infinity).
        let (_, v1) = envelope_sups(FamilyKind::StudentT { df: 3.0 }, 4.0).unwrap();
        // c * df^((df+1)/2) with c = Gamma(2) / (sqrt(3 pi) Gamma(1.5))
        let c = math::exp(student_t_log_norm(3.0));
        assert_relative_eq!(v1, c * 9.0, max_relative = 1e-9);
        assert!(fit_envelope(FamilyKind::Normal, 1.0).is_err());
        assert!(fit_envelope(FamilyKind::StudentT { df: 0.5 }, 1.2).is_err());
    }

    #[test]
    fn envelope_radius_examples() {
        let spec = FamilySpec::new(FamilyKind::Normal, 0.4, 0.4, 3.0).unwrap();
        assert_relative_eq!(envelope_radius_tilde(&spec, 1.0).unwrap(), 1.0);
        let spec = FamilySpec::new(FamilyKind::Normal, 0.4, 0.8, 4.0).unwrap();
        assert_relative_eq!(envelope_radius_tilde(&spec, 1.0).unwrap(), 1.189_207_115_002_721, max_relative = 1e-14);
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let r = envelope_radius_tilde(&spec, math::powf(0.5, k as f64)).unwrap();
            assert!(r < prev);
            prev = r;
        }
        let low_beta = FamilySpec::new(FamilyKind::Normal, 0.4, 0.8, 2.0).unwrap();
        assert!(envelope_radius_tilde(&low_beta, 1.0).is_err());

        let spec = FamilySpec::new(FamilyKind::Normal, 0.4, 0.5, 3.0).unwrap();
        assert_relative_eq!(envelope_radius(&spec, 0.5, 1.0).unwrap(), 1.0);
        let spec = FamilySpec::new(FamilyKind::Normal, 0.4, 1.0, 2.0).unwrap();
        assert_relative_eq!(
            envelope_radius(&spec, 0.5, 4.0).unwrap(),
            2.0 * core::f64::consts::SQRT_2,
            max_relative = 1e-14
        );
        let base = envelope_radius(&spec, 0.5, 3.0).unwrap();
        let scaled = envelope_radius(&spec, 0.5, 3.0 * math::powf(2.0, spec.beta)).unwrap();
        assert_relative_eq!(scaled / base, math::powf(2.0, spec.beta - 1.0), max_relative = 1e-13);
        assert!(envelope_radius(&spec, 0.0, 1.0).is_err());
        assert!(envelope_radius(&spec, -1.0, 1.0).is_err());
    }

    #[test]
    fn scale_order_stats_examples() {
        let t = MixtureParams::from_triples(&[(0.2, 0.0, 1.0), (0.3, 0.0, 2.0), (0.5, 0.0, 4.0)]).unwrap();
        assert_eq!(scale_order_stats(&t), ScaleOrderStats { sigma_min: 1.0, sigma_max: 4.0, ratio: 0.25 });
        let t = MixtureParams::from_triples(&[(0.5, 0.0, 3.0), (0.5, 1.0, 3.0)]).unwrap();
        assert_eq!(scale_order_stats(&t).ratio, 1.0);
        let t = MixtureParams::from_triples(&[(0.5, 0.0, 0.001), (0.5, 1.0, 1.0)]).unwrap();
        assert_relative_eq!(scale_order_stats(&t).ratio, 0.001);
    }

    #[test]
    fn mixture_params_invariants() {
        assert!(MixtureParams::new(vec![0.5, 0.6], vec![ComponentParams { mu: 0.0, sigma: 1.0 }; 2]).is_err());
        assert!(MixtureParams::new(vec![1.0], vec![ComponentParams { mu: 0.0, sigma: 1.0 }; 2]).is_err());
        assert!(MixtureParams::new(vec![-0.5, 1.5], vec![ComponentParams { mu: 0.0, sigma: 1.0 }; 2]).is_err());
        assert!(MixtureParams::from_triples(&[(1.0, 0.0, 0.0)]).is_err());
        assert!(MixtureParams::from_triples(&[(1.0, 0.0, 1.0)]).is_ok());
    }

    #[test]
    fn quantiles_invert_cdfs() {
        let kinds = [
            FamilyKind::Normal,
            FamilyKind::Laplace,
            FamilyKind::Logistic,
            FamilyKind::StudentT { df: 1.0 },
            FamilyKind::StudentT { df: 2.5 },
            FamilyKind::StudentT { df: 7.0 },
            FamilyKind::Uniform,
        ];
        for kind in kinds {
            for &p in &[1e-9, 0.001, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
                let z = kind.quantile(p);
                assert_relative_eq!(kind.cdf(z), p, max_relative = 1e-9);
            }
        }
        // scipy.stats.t.ppf(0.975, 5)
        assert_relative_eq!(
            FamilyKind::StudentT { df: 5.0 }.quantile(0.975),
            2.570_581_835_636_314,
            max_relative = 1e-12
        );
    }
}
