//! Brute-force references: exhaustive grid maximization for `M <= 2`, the
//! degeneracy path, and the interval-count statistic.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::families::{log_component_density, mean_sd, ComponentParams, FamilySpec, MixtureParams, DENSITY_FLOOR};
use crate::math;
use crate::penalties::{log_reward, PenaltySpec};

/// Largest number of grid points [`grid_argmax`] will evaluate.
pub const GRID_LIMIT: u128 = 100_000_000;

/// Product grid over `(alpha_1, mu_1, sigma_1, ..., mu_M, sigma_M)`.
///
/// Locations span `[min - SD, max + SD]` of the data, scales are log-spaced
/// over `log_sigma_range`, and the first weight runs over an evenly spaced
/// grid of `[0, 1]` including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub m: usize,
    pub mu_points: usize,
    pub log_sigma_range: (f64, f64),
    pub log_sigma_points: usize,
    pub weight_points: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.m) {
            return Err(Error::Unsupported(alloc::format!("grid oracle supports M <= 2, got {}", self.m)));
        }
        for (name, v) in [
            ("mu_points", self.mu_points),
            ("log_sigma_points", self.log_sigma_points),
            ("weight_points", self.weight_points),
        ] {
            if v < 2 {
                return Err(Error::InvalidParameter { name, value: v as f64, reason: "need at least 2 points" });
            }
        }
        let (lo, hi) = self.log_sigma_range;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter { name: "log_sigma_range", value: lo, reason: "need lo < hi" });
        }
        Ok(())
    }

    pub fn size(&self) -> u128 {
        let per = self.mu_points as u128 * self.log_sigma_points as u128;
        match self.m {
            1 => per,
            _ => self.weight_points as u128 * per * per,
        }
    }
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Exhaustive maximization of the penalized objective over `grid`.
///
/// Points are visited in lexicographic order of `(alpha_1, mu_1, sigma_1,
/// mu_2, sigma_2)` and only a strictly larger value replaces the incumbent.
pub fn grid_argmax(
    spec: &FamilySpec,
    pen: &PenaltySpec,
    data: &[f64],
    grid: &GridSpec,
    n: u64,
) -> Result<(MixtureParams, f64)> {
    grid.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if grid.size() > GRID_LIMIT {
        return Err(Error::GridTooLarge { size: grid.size(), limit: GRID_LIMIT });
    }
    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (_, sd) = mean_sd(data);
    let mus = linspace(lo - sd, hi + sd, grid.mu_points);
    let sigmas: Vec<f64> = linspace(grid.log_sigma_range.0, grid.log_sigma_range.1, grid.log_sigma_points)
        .into_iter()
        .map(math::exp)
        .collect();

    // log component densities for every (mu, sigma) cell and data point
    let cells: Vec<ComponentParams> =
        mus.iter().flat_map(|&mu| sigmas.iter().map(move |&sigma| ComponentParams { mu, sigma })).collect();
    let table: Vec<Vec<f64>> =
        cells.iter().map(|c| data.iter().map(|&x| log_component_density(&spec.kind, c, x)).collect()).collect();
    let floor = math::ln(DENSITY_FLOOR);
    let loglik = |lw: [f64; 2], a: &[f64], b: Option<&[f64]>| -> f64 {
        let mut total = 0.0;
        for i in 0..a.len() {
            let l = match b {
                None => a[i],
                Some(b) => math::log_sum_exp(&[lw[0] + a[i], lw[1] + b[i]]),
            };
            if l == f64::NEG_INFINITY {
                return l;
            }
            total += l.max(floor);
        }
        total
    };

    let mut best: Option<(MixtureParams, f64)> = None;
    if grid.m == 1 {
        for (c, row) in cells.iter().zip(&table) {
            let theta = MixtureParams::from_parts_unchecked(alloc::vec![1.0], alloc::vec![*c]);
            let r = log_reward(pen, n, &theta);
            if r == f64::NEG_INFINITY {
                continue;
            }
            let v = loglik([0.0, 0.0], row, None) + r;
            if best.as_ref().is_none_or(|b| v > b.1) {
                best = Some((theta, v));
            }
        }
    } else {
        for w in linspace(0.0, 1.0, grid.weight_points) {
            let weights = alloc::vec![w, 1.0 - w];
            let lw = [math::ln(w), math::ln(1.0 - w)];
            let mut theta = MixtureParams::from_parts_unchecked(weights, alloc::vec![cells[0], cells[0]]);
            for (c1, r1) in cells.iter().zip(&table) {
                for (c2, r2) in cells.iter().zip(&table) {
                    theta.components_mut()[0] = *c1;
                    theta.components_mut()[1] = *c2;
                    let r = log_reward(pen, n, &theta);
                    if r == f64::NEG_INFINITY {
                        continue;
                    }
                    let v = loglik(lw, r1, Some(r2)) + r;
                    if v.is_nan() {
                        continue;
                    }
                    if best.as_ref().is_none_or(|b| v > b.1) {
                        best = Some((theta.clone(), v));
                    }
                }
            }
        }
    }
    best.ok_or(Error::AllStartsDiverged)
}

/// For each `t`: component 1 = `(0.5, X_1, t)`, component 2 =
/// `(0.5, mean, SD)` with the biased sample SD.
pub fn degeneracy_path(data: &[f64], t_values: &[f64]) -> Result<Vec<MixtureParams>> {
    if data.len() < 2 {
        return Err(Error::InsufficientData { got: data.len(), required: 2 });
    }
    let (mean, sd) = mean_sd(data);
    t_values.iter().map(|&t| MixtureParams::from_triples(&[(0.5, data[0], t), (0.5, mean, sd)])).collect()
}

/// Number of points in the closed interval `[center - w, center + w]`.
pub fn interval_count(data: &[f64], center: f64, half_width: f64) -> usize {
    data.iter().filter(|&&x| center - half_width <= x && x <= center + half_width).count()
}

/// `sup_mu` of [`interval_count`] over all centers.
///
/// The count only changes at `X_i +- w`, so it suffices to slide a window
/// of width `2w` whose left edge sits on a sorted data point; a point `x_j` is
/// in the window anchored at `x_i` iff `x_i <= x_j` and `x_j - x_i <= 2w`.
pub fn max_interval_count(data: &[f64], half_width: f64) -> usize {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let width = 2.0 * half_width;
    let mut best = 0;
    let mut j = 0;
    for i in 0..sorted.len() {
        if j < i {
            j = i;
        }
        while j < sorted.len() && sorted[j] - sorted[i] <= width {
            j += 1;
        }
        best = best.max(j - i);
    }
    best
}
