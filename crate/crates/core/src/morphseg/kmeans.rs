use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::Image;
use crate::scalar::Scalar;

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub centroids: Vec<T>,
    /// Cluster index per input value.
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned centroids.
    pub objective: T,
    /// Objective after each centroid update of the winning restart.
    pub history: Vec<T>,
}

impl<T: Scalar> KMeansResult<T> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the lowest centroid (first one on ties).
    pub fn darkest(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.centroids.iter().enumerate() {
            if c < self.centroids[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
}

impl KMeansOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            restarts: DEFAULT_RESTARTS,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

fn objective<T: Scalar>(values: &[T], centroids: &[T], assignment: &[usize]) -> T {
    values
        .iter()
        .zip(assignment)
        .map(|(&x, &a)| {
            let d = x - centroids[a];
            d * d
        })
        .sum()
}

fn nearest<T: Scalar>(x: T, centroids: &[T]) -> usize {
    let mut best = 0;
    let mut best_d = (x - centroids[0]).abs();
    for (i, &c) in centroids.iter().enumerate().skip(1) {
        let d = (x - c).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Counts distinct values, stopping once `limit` is exceeded.
fn distinct_up_to<T: Scalar>(values: &[T], limit: usize) -> usize {
    let mut seen: Vec<T> = Vec::with_capacity(limit + 1);
    for &v in values {
        if !seen.contains(&v) {
            seen.push(v);
            if seen.len() > limit {
                break;
            }
        }
    }
    seen.len()
}

/// k-means++ seeding: first centre uniform, the rest drawn with probability
/// proportional to squared distance from the nearest chosen centre.
fn plus_plus_init<T: Scalar>(values: &[T], k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut centroids = vec![values[rng.random_range(0..values.len())]];
    let mut d2: Vec<f64> = values.iter().map(|&x| (x - centroids[0]).as_f64().powi(2)).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 {
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
        }
        let c = values[pick.expect("k <= distinct values guarantees a positive weight")];
        centroids.push(c);
        for (w, &x) in d2.iter_mut().zip(values) {
            *w = w.min((x - c).as_f64().powi(2));
        }
    }
    centroids
}

fn lloyd<T: Scalar>(values: &[T], mut centroids: Vec<T>, max_iterations: usize) -> KMeansResult<T> {
    let k = centroids.len();
    let mut assignment: Vec<usize> = values.iter().map(|&x| nearest(x, &centroids)).collect();
    let mut history = Vec::new();
    for _ in 0..max_iterations {
        let mut sums = vec![T::zero(); k];
        let mut counts = vec![0usize; k];
        for (&x, &a) in values.iter().zip(&assignment) {
            sums[a] += x;
            counts[a] += 1;
        }
        for i in 0..k {
            if counts[i] > 0 {
                centroids[i] = sums[i] / T::from_count(counts[i]);
            }
        }
        history.push(objective(values, &centroids, &assignment));
        let mut changed = false;
        for (a, &x) in assignment.iter_mut().zip(values) {
            let n = nearest(x, &centroids);
            if n != *a {
                *a = n;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let objective = objective(values, &centroids, &assignment);
    KMeansResult {
        centroids,
        assignment,
        objective,
        history,
    }
}

/// Within-cluster sum of squares of `sorted[i..j]` from prefix sums.
fn segment_cost(s1: &[f64], s2: &[f64], i: usize, j: usize) -> f64 {
    let n = (j - i) as f64;
    let s = s1[j] - s1[i];
    (s2[j] - s2[i] - s * s / n).max(0.0)
}

/// Fills `cur[j]` for `j` in `lo..=hi` given the previous layer, with the
/// optimal split index known to lie in `opt_lo..=opt_hi`.
#[allow(clippy::too_many_arguments)]
fn dp_layer(
    prev: &[f64],
    cur: &mut [f64],
    arg: &mut [usize],
    s1: &[f64],
    s2: &[f64],
    (lo, hi): (usize, usize),
    (opt_lo, opt_hi): (usize, usize),
) {
    if lo > hi {
        return;
    }
    let mid = (lo + hi) / 2;
    let mut best = (f64::INFINITY, opt_lo);
    for (i, &p) in prev.iter().enumerate().take(opt_hi.min(mid - 1) + 1).skip(opt_lo) {
        let v = p + segment_cost(s1, s2, i, mid);
        if v < best.0 {
            best = (v, i);
        }
    }
    cur[mid] = best.0;
    arg[mid] = best.1;
    if mid > lo {
        dp_layer(prev, cur, arg, s1, s2, (lo, mid - 1), (opt_lo, best.1));
    }
    dp_layer(prev, cur, arg, s1, s2, (mid + 1, hi), (best.1, opt_hi));
}

/// Optimal centroids of a 1D k-partition. Optimal clusters are contiguous
/// runs of the sorted values, so a dynamic program over split points is
/// exact; monotone split indices allow divide and conquer per layer.
fn exact_centroids(values: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let shift = sorted.iter().sum::<f64>() / n as f64;
    let (mut s1, mut s2) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    for (i, &x) in sorted.iter().enumerate() {
        let d = x - shift;
        s1[i + 1] = s1[i] + d;
        s2[i + 1] = s2[i] + d * d;
    }
    let mut layer: Vec<f64> = (0..=n)
        .map(|j| {
            if j == 0 {
                f64::INFINITY
            } else {
                segment_cost(&s1, &s2, 0, j)
            }
        })
        .collect();
    let mut splits: Vec<Vec<usize>> = Vec::with_capacity(k);
    splits.push(vec![0; n + 1]);
    for m in 2..=k {
        let mut cur = vec![f64::INFINITY; n + 1];
        let mut arg = vec![0; n + 1];
        dp_layer(&layer, &mut cur, &mut arg, &s1, &s2, (m, n), (m - 1, n - 1));
        layer = cur;
        splits.push(arg);
    }
    let mut bounds = vec![n];
    for m in (1..k).rev() {
        let j = *bounds.last().expect("non-empty");
        bounds.push(splits[m][j]);
    }
    bounds.push(0);
    bounds.reverse();
    bounds
        .windows(2)
        .map(|w| sorted[w[0]..w[1]].iter().sum::<f64>() / (w[1] - w[0]) as f64)
        .collect()
}

/// Replaces `run` by the exact optimum when that is strictly better.
fn exact_refine<T: Scalar>(values: &[T], run: &mut KMeansResult<T>) {
    let as_f64: Vec<f64> = values.iter().map(|v| v.as_f64()).collect();
    let seeds: Vec<T> = exact_centroids(&as_f64, run.k()).into_iter().map(T::lit).collect();
    let candidate = lloyd(values, seeds, 1);
    if candidate.objective < run.objective {
        run.centroids = candidate.centroids;
        run.assignment = candidate.assignment;
        run.objective = candidate.objective;
        run.history.push(candidate.objective);
    }
}

/// Lloyd's algorithm on scalar features from seeded k-means++ starts,
/// keeping the restart with the lowest objective (earliest on ties). The
/// winner is then checked against the exact contiguous-partition optimum,
/// which replaces it when strictly lower.
///
/// Restart `r` draws from the ChaCha8 stream `r` of `seed`, so the result
/// does not depend on how restarts are scheduled.
pub fn kmeans_1d<T: Scalar>(values: &[T], opts: &KMeansOptions) -> Result<KMeansResult<T>> {
    if opts.k == 0 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    let distinct = distinct_up_to(values, opts.k);
    if distinct < opts.k {
        return Err(Error::TooFewDistinct { k: opts.k, distinct });
    }
    let runs: Vec<KMeansResult<T>> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let init = plus_plus_init(values, opts.k, &mut rng);
            lloyd(values, init, opts.max_iterations)
        })
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.objective < runs[best].objective {
            best = i;
        }
    }
    let mut run = runs.into_iter().nth(best).expect("at least one restart");
    exact_refine(values, &mut run);
    Ok(run)
}

/// k-means over the pixel intensities of a single-channel image.
pub fn kmeans_intensity<T: Scalar>(img: &Image<T>, k: usize, seed: u64) -> Result<KMeansResult<T>> {
    if img.channels() != 1 {
        return Err(Error::InvalidParam("k-means expects a single-channel image".into()));
    }
    kmeans_1d(img.data(), &KMeansOptions::new(k, seed))
}
