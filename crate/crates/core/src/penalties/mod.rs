//! Reward functions that multiply the likelihood.
//!
//! Two regimes are supported. The ratio regime depends on `theta` only through
//! `y = sigma_(1) / sigma_(M)` and comes in a smooth form
//! `min(r_bar * y^(alpha-1) * exp(n^d_tilde), r_bar)` and an indicator form
//! `1[y >= b_n]`. The scale regime is the separable product
//! `prod_m exp(-b / sigma_m) * sigma_m^-(a+1)`, the kernel of an inverse-gamma
//! prior on each scale. A hard floor `1[sigma_(1) >= c_n]` is also exposed
//! as a baseline.
//!
//! All rewards are evaluated in log space; an indicator that is off gives
//! `-inf`.

mod validate;

pub use validate::{
    validate_assumption6, validate_assumption8, validate_assumption9, validate_assumptions_10_11_12,
    validate_tail_envelope, Assumption, AssumptionReport, ProbeGrid, Verdict, Witness,
};

use crate::error::{Error, Result};
use crate::families::{scale_order_stats, MixtureParams};
use crate::math;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

fn n_pow(n: u64, e: f64) -> f64 {
    math::powf(n as f64, e)
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason: "must be positive and finite" })
    }
}

fn check_unit_exponent(name: &'static str, value: f64) -> Result<()> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason: "must lie in [0, 1)" })
    }
}

/// Sample-size schedules `b_n`, `c_n` and the extreme-value radius `A_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct Schedules {
    pub b0: f64,
    pub c0: f64,
    pub d_tilde: f64,
    pub d: f64,
    pub a0: f64,
    pub zeta: f64,
}

impl Default for Schedules {
    fn default() -> Self {
        Self { b0: 1.0, c0: 1.0, d_tilde: 0.25, d: 0.5, a0: 10.0, zeta: 1.0 }
    }
}

impl Schedules {
    pub fn validate(&self) -> Result<()> {
        check_positive("b0", self.b0)?;
        check_positive("c0", self.c0)?;
        check_positive("a0", self.a0)?;
        check_positive("zeta", self.zeta)?;
        if !(0.0 <= self.d_tilde && self.d_tilde < self.d && self.d < 1.0) {
            return Err(Error::ScheduleOrder { d_tilde: self.d_tilde, d: self.d });
        }
        Ok(())
    }

    /// `b_n = b0 * exp(-n^d_tilde)`.
    pub fn b(&self, n: u64) -> f64 {
        self.b0 * math::exp(-n_pow(n, self.d_tilde))
    }

    /// `c_n = c0 * exp(-n^d)`.
    pub fn c(&self, n: u64) -> f64 {
        self.c0 * math::exp(-n_pow(n, self.d))
    }

    /// `ln c_n`, finite even when `c_n` underflows.
    pub fn ln_c(&self, n: u64) -> f64 {
        math::ln(self.c0) - n_pow(n, self.d)
    }

    /// `A_n = A0 * n^((2 + zeta) / (beta - 1))`.
    pub fn a(&self, beta: f64, n: u64) -> Result<f64> {
        if !(beta > 1.0) {
            return Err(Error::TailExponent { beta, required: 1.0 });
        }
        Ok(self.a0 * n_pow(n, (2.0 + self.zeta) / (beta - 1.0)))
    }
}

pub fn schedule_b(s: &Schedules, n: u64) -> f64 {
    s.b(n)
}

pub fn schedule_c(s: &Schedules, n: u64) -> f64 {
    s.c(n)
}

pub fn schedule_a(s: &Schedules, beta: f64, n: u64) -> Result<f64> {
    s.a(beta, n)
}

/// Smooth ratio reward `min(r_bar * y^(alpha-1) * exp(n^d_tilde), r_bar)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct SmoothRatio {
    pub r_bar: f64,
    pub alpha: f64,
    pub d_tilde: f64,
}

impl SmoothRatio {
    /// The default family for `m` components: `alpha = m + 2`, `r_bar = 1`.
    pub fn preset(m: usize) -> Self {
        Self { r_bar: 1.0, alpha: m as f64 + 2.0, d_tilde: 0.25 }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("r_bar", self.r_bar)?;
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter { name: "alpha", value: self.alpha, reason: "must be finite" });
        }
        check_unit_exponent("d_tilde", self.d_tilde)
    }

    pub fn log_reward_at(&self, n: u64, y: f64) -> f64 {
        let raw = (self.alpha - 1.0) * math::ln(y) + n_pow(n, self.d_tilde);
        math::ln(self.r_bar) + raw.min(0.0)
    }

    /// Ratio below which the cap is inactive.
    pub fn cap_ratio(&self, n: u64) -> f64 {
        math::exp(-n_pow(n, self.d_tilde) / (self.alpha - 1.0))
    }
}

/// Indicator reward `1[y >= b_n]` with `b_n = b0 * exp(-n^d_tilde)`.
///
/// A cutoff above one is clamped to one, so the feasible set is never empty:
/// it shrinks to equal scales.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct HardRatio {
    pub b0: f64,
    pub d_tilde: f64,
}

impl HardRatio {
    pub fn validate(&self) -> Result<()> {
        check_positive("b0", self.b0)?;
        check_unit_exponent("d_tilde", self.d_tilde)
    }

    /// Unclamped `b_n`.
    pub fn b(&self, n: u64) -> f64 {
        self.b0 * math::exp(-n_pow(n, self.d_tilde))
    }

    pub fn cutoff(&self, n: u64) -> f64 {
        self.b(n).min(1.0)
    }

    pub fn log_reward_at(&self, n: u64, y: f64) -> f64 {
        if y >= self.cutoff(n) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Separable reward `prod_m exp(-b / sigma_m) * sigma_m^-(a+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct ScalePenalty {
    pub a: f64,
    pub b: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_d"))]
    pub d: f64,
}

#[cfg(feature = "serde")]
fn default_d() -> f64 {
    0.5
}

impl ScalePenalty {
    pub fn validate(&self) -> Result<()> {
        check_positive("a", self.a)?;
        check_positive("b", self.b)?;
        check_unit_exponent("d", self.d)
    }

    /// `ln s(y) = -b / y - (a + 1) ln y`.
    pub fn log_factor(&self, y: f64) -> f64 {
        -self.b / y - (self.a + 1.0) * math::ln(y)
    }

    /// `d/d ln y` of [`Self::log_factor`].
    pub fn log_factor_slope(&self, y: f64) -> f64 {
        self.b / y - (self.a + 1.0)
    }

    /// `sup_y s(y) = (b / (a + 1))^-(a+1) e^-(a+1)`, attained at `b / (a + 1)`.
    pub fn sup_factor(&self) -> f64 {
        math::exp(self.log_factor(self.b / (self.a + 1.0)))
    }
}

/// Floor constraint `1[sigma_(1) >= c_n]` with `c_n = c0 * exp(-n^d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct HardFloor {
    pub c0: f64,
    pub d: f64,
}

impl HardFloor {
    pub fn validate(&self) -> Result<()> {
        check_positive("c0", self.c0)?;
        check_unit_exponent("d", self.d)
    }

    pub fn c(&self, n: u64) -> f64 {
        self.c0 * math::exp(-n_pow(n, self.d))
    }
}

/// The two reward shapes that depend on `theta` only through the scale ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatioFamily {
    Smooth(SmoothRatio),
    Hard(HardRatio),
}

impl RatioFamily {
    pub fn log_reward_at(&self, n: u64, y: f64) -> f64 {
        match self {
            RatioFamily::Smooth(s) => s.log_reward_at(n, y),
            RatioFamily::Hard(h) => h.log_reward_at(n, y),
        }
    }

    pub fn reward_at(&self, n: u64, y: f64) -> f64 {
        math::exp(self.log_reward_at(n, y))
    }

    pub fn d_tilde(&self) -> f64 {
        match self {
            RatioFamily::Smooth(s) => s.d_tilde,
            RatioFamily::Hard(h) => h.d_tilde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    None,
    Ratio(SmoothRatio),
    Scale(ScalePenalty),
    HardRatio(HardRatio),
    HardFloor(HardFloor),
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::None => "none",
            Regime::Ratio(_) => "ratio",
            Regime::Scale(_) => "scale",
            Regime::HardRatio(_) => "hard_ratio",
            Regime::HardFloor(_) => "hard_floor",
        }
    }

    pub fn ratio_family(&self) -> Option<RatioFamily> {
        match *self {
            Regime::Ratio(s) => Some(RatioFamily::Smooth(s)),
            Regime::HardRatio(h) => Some(RatioFamily::Hard(h)),
            _ => None,
        }
    }

    pub fn is_hard(&self) -> bool {
        matches!(self, Regime::HardRatio(_) | Regime::HardFloor(_))
    }
}

/// A reward regime together with the schedules used to validate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub regime: Regime,
    pub schedules: Schedules,
}

impl PenaltySpec {
    pub fn new(regime: Regime) -> Self {
        Self { regime, schedules: Schedules::default() }
    }

    pub fn none() -> Self {
        Self::new(Regime::None)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.regime {
            Regime::None => {}
            Regime::Ratio(s) => s.validate()?,
            Regime::Scale(s) => s.validate()?,
            Regime::HardRatio(h) => h.validate()?,
            Regime::HardFloor(h) => h.validate()?,
        }
        self.schedules.validate()
    }
}

pub fn ratio_reward(fam: &RatioFamily, n: u64, theta: &MixtureParams) -> f64 {
    fam.reward_at(n, scale_order_stats(theta).ratio)
}

pub fn scale_reward(fam: &ScalePenalty, n: u64, theta: &MixtureParams) -> f64 {
    math::exp(log_scale_reward(fam, n, theta))
}

fn log_scale_reward(fam: &ScalePenalty, _n: u64, theta: &MixtureParams) -> f64 {
    theta.sigmas().map(|s| fam.log_factor(s)).sum()
}

/// `ln r_n(theta)` (or `ln s_n(theta)`); zero for the unpenalized regime.
pub fn log_reward(spec: &PenaltySpec, n: u64, theta: &MixtureParams) -> f64 {
    match &spec.regime {
        Regime::None => 0.0,
        Regime::Ratio(s) => s.log_reward_at(n, scale_order_stats(theta).ratio),
        Regime::HardRatio(h) => h.log_reward_at(n, scale_order_stats(theta).ratio),
        Regime::Scale(s) => log_scale_reward(s, n, theta),
        Regime::HardFloor(h) => {
            if scale_order_stats(theta).sigma_min >= h.c(n) {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two(s1: f64, s2: f64) -> MixtureParams {
        MixtureParams::from_triples(&[(0.5, 0.0, s1), (0.5, 3.0, s2)]).unwrap()
    }

    #[test]
    fn hard_ratio_boundary_is_inclusive() {
        let h = HardRatio { b0: 0.5, d_tilde: 0.0 };
        let b = h.cutoff(1);
        let theta = two(b, 1.0);
        assert_eq!(scale_order_stats(&theta).ratio, b);
        assert_eq!(ratio_reward(&RatioFamily::Hard(h), 1, &theta), 1.0);
        let below = two(b * (1.0 - 1e-15), 1.0);
        assert_eq!(ratio_reward(&RatioFamily::Hard(h), 1, &below), 0.0);
        let spec = PenaltySpec::new(Regime::HardRatio(h));
        assert_eq!(log_reward(&spec, 1, &below), f64::NEG_INFINITY);
    }

    #[test]
    fn smooth_ratio_examples() {
        let s = SmoothRatio { r_bar: 1.0, alpha: 4.0, d_tilde: 0.0 };
        assert_eq!(ratio_reward(&RatioFamily::Smooth(s), 1, &two(2.0, 2.0)), 1.0);
        // 0.5^3 * e
        assert_relative_eq!(
            ratio_reward(&RatioFamily::Smooth(s), 1, &two(0.5, 1.0)),
            0.339_785_228_557_380_65,
            max_relative = 1e-14
        );
        let big_n = ratio_reward(&RatioFamily::Smooth(SmoothRatio { d_tilde: 0.5, ..s }), 1 << 20, &two(0.5, 1.0));
        assert_eq!(big_n, 1.0);
    }

    #[test]
    fn scale_reward_examples() {
        let f = ScalePenalty { a: 1.0, b: 1.0, d: 0.5 };
        let one = MixtureParams::from_triples(&[(1.0, 0.0, 1.0)]).unwrap();
        assert_relative_eq!(scale_reward(&f, 10, &one), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(scale_reward(&f, 10, &two(1.0, 1.0)), (-2.0f64).exp(), max_relative = 1e-15);
        assert_eq!(scale_reward(&f, 10, &two(1e-4, 1.0)), 0.0);
        let spec = PenaltySpec::new(Regime::Scale(f));
        assert_relative_eq!(log_reward(&spec, 10, &one), -1.0);
        assert_relative_eq!(f.sup_factor(), 4.0 * (-2.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn none_regime_is_zero() {
        assert_eq!(log_reward(&PenaltySpec::none(), 5, &two(1e-9, 10.0)), 0.0);
    }

    #[test]
    fn hard_floor_uses_c_n() {
        let h = HardFloor { c0: 1.0, d: 0.5 };
        let spec = PenaltySpec::new(Regime::HardFloor(h));
        let c4 = h.c(4);
        assert_relative_eq!(c4, (-2.0f64).exp(), max_relative = 1e-15);
        assert_eq!(log_reward(&spec, 4, &two(c4, 1.0)), 0.0);
        assert_eq!(log_reward(&spec, 4, &two(c4 * 0.999, 1.0)), f64::NEG_INFINITY);
    }

    #[test]
    fn schedules_examples() {
        let s = Schedules { b0: 1.0, d_tilde: 0.0, ..Schedules::default() };
        for n in [1, 2, 100] {
            assert_relative_eq!(s.b(n), (-1.0f64).exp(), max_relative = 1e-15);
        }
        let s = Schedules { b0: 1.0, d_tilde: 0.5, d: 0.75, ..Schedules::default() };
        assert_relative_eq!(s.b(4), 0.135_335_283_236_612_7, max_relative = 1e-15);
        for n in 1..200 {
            assert!(s.b(n + 1) <= s.b(n));
        }
        let s = Schedules { c0: 1.0, d: 0.5, a0: 1.0, zeta: 1.0, ..Schedules::default() };
        assert_relative_eq!(s.c(4), (-2.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(s.a(4.0, 8).unwrap(), 8.0, max_relative = 1e-14);
        assert_eq!(s.a(4.0, 1).unwrap(), 1.0);
        assert!(s.a(1.0, 8).is_err());
        assert!(Schedules { d_tilde: 0.6, d: 0.5, ..Schedules::default() }.validate().is_err());
        assert!(Schedules::default().validate().is_ok());
    }

    #[test]
    fn type_guards_reject_bad_hyperparameters() {
        assert!(ScalePenalty { a: -2.0, b: 1.0, d: 0.5 }.validate().is_err());
        assert!(ScalePenalty { a: 1.0, b: 0.0, d: 0.5 }.validate().is_err());
        assert!(SmoothRatio { r_bar: 1.0, alpha: 4.0, d_tilde: 1.0 }.validate().is_err());
        assert!(HardRatio { b0: 0.0, d_tilde: 0.1 }.validate().is_err());
    }
}
