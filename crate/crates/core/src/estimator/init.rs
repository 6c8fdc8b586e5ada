use alloc::vec::Vec;

use crate::families::{mean_sd, ComponentParams, MixtureParams};
use crate::math;
use crate::rng;

/// Starting points for the multi-start search.
///
/// Start 0 puts the locations at the `(k + 0.5) / M` sample quantiles with
/// every scale equal to the (biased) sample SD and equal weights. The others
/// jitter start 0: locations by up to `0.5 * SD`, scales by a factor in
/// `[0.5, 2]`.
pub fn init_starts(data: &[f64], m: usize, starts: usize, seed: u64) -> Vec<MixtureParams> {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (_, sd) = mean_sd(data);
    let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
    let locs: Vec<f64> = (0..m).map(|k| math::sorted_quantile(&sorted, (k as f64 + 0.5) / m as f64)).collect();
    let weights = alloc::vec![1.0 / m as f64; m];

    let base = MixtureParams::from_parts_unchecked(
        weights.clone(),
        locs.iter().map(|&mu| ComponentParams { mu, sigma: sd }).collect(),
    );
    let mut out = Vec::with_capacity(starts.max(1));
    out.push(base);
    let mut g = rng::seeded(seed);
    for _ in 1..starts {
        let comps = locs
            .iter()
            .map(|&mu| {
                let shift = (rng::uniform_open(&mut g) - 0.5) * sd;
                let factor = math::powf(2.0, 2.0 * rng::uniform_open(&mut g) - 1.0);
                ComponentParams { mu: mu + shift, sigma: sd * factor }
            })
            .collect();
        out.push(MixtureParams::from_parts_unchecked(weights.clone(), comps));
    }
    out
}
