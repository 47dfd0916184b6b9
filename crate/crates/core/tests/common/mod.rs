//! Test oracles shared by the integration tests.

#![allow(dead_code)]

use decision_factor::dataset::RctSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞)`, or 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Random batch with every level in `0..levels` present.
pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, levels: usize) -> Vec<RctSample> {
    (0..n)
        .map(|i| RctSample {
            features: vec![rng.random_range(-1.0..1.0)],
            treatment: if i < levels { i } else { rng.random_range(0..levels) },
            reward: rng.random_range(0.0..2.0),
            cost: rng.random_range(0.0..2.0),
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-key mean of `values` given each sample's key.
pub fn per_key(keys: &[usize], values: &[f64], k: usize) -> Vec<f64> {
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (&key, &v) in keys.iter().zip(values) {
        sum[key] += v;
        count[key] += 1;
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
}
