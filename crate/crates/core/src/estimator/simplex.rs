use alloc::vec;
use alloc::vec::Vec;

use super::{objective, FitConfig};
use crate::families::{mean_sd, ComponentParams, FamilyKind, MixtureParams};
use crate::math;
use crate::penalties::PenaltySpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder–Mead maximization of `f` from `x0` with per-coordinate initial
/// steps. `-inf` and NaN values are treated as worse than anything finite.
///
/// Stops when the spread of values across the simplex drops below
/// `ftol * max(1, |best|)` or after `max_evals` evaluations.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    max_evals: usize,
    ftol: f64,
) -> SimplexResult {
    let dim = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(dim + 1);
    pts.push(x0.to_vec());
    vals.push(eval(x0, &mut evals));
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        vals.push(eval(&p, &mut evals));
        pts.push(p);
    }

    let mut converged = false;
    let mut order: Vec<usize> = (0..=dim).collect();
    while evals < max_evals {
        // best first; stable sort keeps ties deterministic
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        let (best, worst, second) = (order[0], order[dim], order[dim.saturating_sub(1)]);
        let spread = vals[best] - vals[worst];
        if vals[best].is_finite() && spread <= ftol * math::abs(vals[best]).max(1.0) {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; dim];
        for &i in &order[..dim] {
            for (c, x) in centroid.iter_mut().zip(&pts[i]) {
                *c += x / dim as f64;
            }
        }
        let toward = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[worst]).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = toward(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr > vals[best] {
            let xe = toward(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe > fr {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr > vals[second] {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        let outside = fr > vals[worst];
        let xc = toward(if outside { -0.5 } else { 0.5 });
        let fc = eval(&xc, &mut evals);
        if (outside && fc >= fr) || (!outside && fc > vals[worst]) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            for (x, a) in pts[i].iter_mut().zip(&anchor) {
                *x = a + 0.5 * (*x - a);
            }
            vals[i] = eval(&pts[i], &mut evals);
        }
    }
    let best = (0..=dim).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    SimplexResult { x: pts[best].clone(), value: vals[best], evals, converged }
}

pub(crate) struct Polished {
    pub theta: MixtureParams,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

// Coordinates: log weight ratios against the heaviest component, then all
// locations, then all log scales.
struct Coords {
    reference: usize,
    m: usize,
}

impl Coords {
    fn encode(&self, theta: &MixtureParams) -> Vec<f64> {
        let w = theta.weights();
        let lr = math::ln(w[self.reference]);
        let mut x: Vec<f64> =
            (0..self.m).filter(|&k| k != self.reference).map(|k| (math::ln(w[k]) - lr).max(-700.0)).collect();
        x.extend(theta.components().iter().map(|c| c.mu));
        x.extend(theta.components().iter().map(|c| math::ln(c.sigma)));
        x
    }

    fn decode(&self, x: &[f64], floor: f64) -> Option<MixtureParams> {
        let m = self.m;
        let mut logits = Vec::with_capacity(m);
        let mut j = 0;
        for k in 0..m {
            if k == self.reference {
                logits.push(0.0);
            } else {
                logits.push(x[j]);
                j += 1;
            }
        }
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logits.iter().map(|l| math::exp(l - top)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let mut comps = Vec::with_capacity(m);
        for k in 0..m {
            let mu = x[m - 1 + k];
            let sigma = math::exp(x[2 * m - 1 + k]);
            if !mu.is_finite() || !(sigma >= floor) || !sigma.is_finite() {
                return None;
            }
            comps.push(ComponentParams { mu, sigma });
        }
        Some(MixtureParams::from_parts_unchecked(weights, comps))
    }
}

pub(crate) fn polish(
    kind: &FamilyKind,
    pen: &PenaltySpec,
    data: &[f64],
    n: u64,
    cfg: &FitConfig,
    start: &MixtureParams,
) -> Polished {
    let m = start.m();
    let reference = (0..m).fold(0, |b, k| if start.weights()[k] > start.weights()[b] { k } else { b });
    let coords = Coords { reference, m };
    let x0 = coords.encode(start);
    let (_, sd) = mean_sd(data);
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let mut steps = vec![0.5; m - 1];
    steps.extend(start.components().iter().map(|c| 0.1 * c.sigma.min(sd)));
    steps.extend(core::iter::repeat_n(0.2, m));
    let floor = cfg.sigma_floor_numeric;
    let f = |x: &[f64]| match coords.decode(x, floor) {
        Some(theta) => objective(kind, pen, &theta, data, n),
        None => f64::NEG_INFINITY,
    };
    let res = nelder_mead(f, &x0, &steps, cfg.polish_evals, cfg.rel_tol * 1e-3);
    let theta = coords.decode(&res.x, floor).unwrap_or_else(|| start.clone());
    Polished { theta, value: res.value, evals: res.evals, converged: res.converged }
}
