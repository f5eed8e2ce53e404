use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_RESAMPLES: usize = 5000;

/// Linear-interpolated (inclusive) percentile of ascending `sorted`,
/// `q` in [0, 100].
pub fn percentile<T: Scalar>(sorted: &[T], q: f64) -> T {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval<T> {
    pub mean: T,
    pub lower: T,
    pub upper: T,
}

/// Mean computed as an offset from the minimum so that constant samples
/// reproduce their value exactly; clamped to the sample range.
fn anchored_mean<T: Scalar>(values: impl Iterator<Item = T> + Clone, lo: T, hi: T, n: usize) -> T {
    let offset: T = values.map(|v| v - lo).sum();
    (lo + offset / T::from_count(n)).max(lo).min(hi)
}

fn range<T: Scalar>(values: &[T]) -> (T, T) {
    values
        .iter()
        .fold((values[0], values[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Percentile-method 95% bootstrap interval for the mean. Resample `i`
/// draws from its own ChaCha8 stream, so the result does not depend on
/// scheduling.
pub fn bootstrap_ci<T: Scalar>(values: &[T], n_resamples: usize, seed: u64) -> Result<ConfidenceInterval<T>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_resamples == 0 {
        return Err(Error::InvalidParam("bootstrap needs at least one resample".into()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let m = values.len();
    let (lo, hi) = range(values);
    let mean = anchored_mean(values.iter().copied(), lo, hi, m);
    let mut means: Vec<T> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let draws: Vec<T> = (0..m).map(|_| values[rng.random_range(0..m)]).collect();
            anchored_mean(draws.into_iter(), lo, hi, m)
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
    Ok(ConfidenceInterval {
        mean,
        lower: percentile(&means, 2.5),
        upper: percentile(&means, 97.5),
    })
}
