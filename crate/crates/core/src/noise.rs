//! Seeded samplers for the speckle model `y_i = f(i/n) ξ_i + τ_i` and the
//! additive baseline `y_i = f(i/n) + w_i`.
//!
//! Randomness is counter based. Observation `i` of a data set drawn with
//! seed `s` reads from its own stream keyed by `(s, i)`, so a draw never
//! depends on `n`, on the order in which indices are visited, or on how work
//! is split across threads. A stream is a SplitMix64 sequence started at
//! `mix(s ^ mix(i))`; Gaussians come from the ziggurat sampler of
//! `rand_distr`. Ports to other languages may use a different Gaussian
//! sampler and agree at the level of statistics.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::holder::FunctionHandle;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in a run with master seed `master`.
#[inline]
pub fn derive_seed(master: u64, trial: u64) -> u64 {
    mix64(master ^ mix64(trial.wrapping_add(GOLDEN_GAMMA)))
}

/// SplitMix64 stream. Each `next_u64` is `mix(state += γ)`.
#[derive(Debug, Clone)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    pub fn new(key: u64) -> Self {
        Self { state: key }
    }

    /// Stream of observation `index` under `seed`.
    pub fn for_index(seed: u64, index: u64) -> Self {
        Self::new(derive_seed(seed, index))
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseModel {
    Speckle,
    AdditiveOnly,
}

/// Noisy samples on the design `x_i = i/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub n: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub sigma: f64,
    pub model: NoiseModel,
    pub seed: u64,
}

pub fn design_points(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

/// `(ξ_i, τ_i / σ)` for observation `i` (1-based).
#[inline]
pub fn speckle_pair(seed: u64, i: usize) -> (f64, f64) {
    let mut rng = StreamRng::for_index(seed, i as u64);
    let xi: f64 = StandardNormal.sample(&mut rng);
    let tau: f64 = StandardNormal.sample(&mut rng);
    (xi, tau)
}

#[inline]
pub fn additive_draw(seed: u64, i: usize) -> f64 {
    let mut rng = StreamRng::for_index(seed, i as u64);
    StandardNormal.sample(&mut rng)
}

/// Writes `f_i · s ξ_i + σ τ_i` into `out`, where `f` holds `f(i/n)` and `s`
/// is the speckle standard deviation.
pub fn fill_speckle(f_values: &[f64], speckle_std: f64, sigma: f64, seed: u64, out: &mut [f64]) {
    for (i, (y, &f)) in out.iter_mut().zip(f_values).enumerate() {
        let (xi, tau) = speckle_pair(seed, i + 1);
        *y = f * speckle_std * xi + sigma * tau;
    }
}

pub fn fill_additive(f_values: &[f64], sigma: f64, seed: u64, out: &mut [f64]) {
    for (i, (y, &f)) in out.iter_mut().zip(f_values).enumerate() {
        *y = f + sigma * additive_draw(seed, i + 1);
    }
}

pub fn sample_speckle(f: &FunctionHandle, n: usize, sigma: f64, seed: u64) -> ObservationSet {
    sample_speckle_scaled(f, n, 1.0, sigma, seed)
}

/// Speckle model with `ξ_i ~ N(0, speckle_std²)`.
pub fn sample_speckle_scaled(
    f: &FunctionHandle,
    n: usize,
    speckle_std: f64,
    sigma: f64,
    seed: u64,
) -> ObservationSet {
    assert!(n >= 1, "n must be positive");
    assert!(sigma >= 0.0, "sigma must be non-negative");
    let fv = f.on_design(n);
    let mut ys = vec![0.0; n];
    fill_speckle(&fv, speckle_std, sigma, seed, &mut ys);
    ObservationSet {
        n,
        xs: design_points(n),
        ys,
        sigma,
        model: NoiseModel::Speckle,
        seed,
    }
}

pub fn sample_additive(f: &FunctionHandle, n: usize, sigma: f64, seed: u64) -> ObservationSet {
    assert!(n >= 1, "n must be positive");
    assert!(sigma >= 0.0, "sigma must be non-negative");
    let fv = f.on_design(n);
    let mut ys = vec![0.0; n];
    fill_additive(&fv, sigma, seed, &mut ys);
    ObservationSet {
        n,
        xs: design_points(n),
        ys,
        sigma,
        model: NoiseModel::AdditiveOnly,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holder::HolderSpec;

    fn spec() -> HolderSpec {
        HolderSpec::new(1.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn zero_signal_zero_noise() {
        let f = FunctionHandle::constant(0.0, spec());
        let obs = sample_speckle(&f, 100, 0.0, 7);
        assert!(obs.ys.iter().all(|&y| y == 0.0));
        assert_eq!(obs.xs[99], 1.0);
        assert_eq!(obs.xs[0], 0.01);
    }

    #[test]
    fn additive_without_noise_is_exact() {
        let f = FunctionHandle::new("lin", spec(), |x| 0.2 + 0.3 * x);
        let obs = sample_additive(&f, 64, 0.0, 3);
        for (i, y) in obs.ys.iter().enumerate() {
            assert_eq!(*y, 0.2 + 0.3 * ((i + 1) as f64 / 64.0));
        }
    }

    #[test]
    fn reproducible_and_prefix_stable() {
        let f = FunctionHandle::constant(0.7, spec());
        let a = sample_speckle(&f, 500, 0.5, 42);
        let b = sample_speckle(&f, 500, 0.5, 42);
        assert_eq!(a, b);
        let c = sample_speckle(&f, 200, 0.5, 42);
        assert_eq!(&a.ys[..200], &c.ys[..]);
        let d = sample_speckle(&f, 500, 0.5, 43);
        assert_ne!(a.ys, d.ys);
    }

    #[test]
    fn second_moment_of_speckle() {
        let theta = 0.6;
        let f = FunctionHandle::constant(theta, spec());
        let obs = sample_speckle(&f, 1_000_000, 1.0, 2024);
        let m2 = obs.ys.iter().map(|y| y * y).sum::<f64>() / obs.n as f64;
        let expected = theta * theta + 1.0;
        assert!((m2 - expected).abs() / expected < 0.01, "{m2}");
    }

    #[test]
    fn additive_variance() {
        let f = FunctionHandle::new("s", spec(), |x| x * x);
        let sigma = 0.7;
        let n = 1_000_000;
        let obs = sample_additive(&f, n, sigma, 11);
        let fv = f.on_design(n);
        let resid: Vec<f64> = obs.ys.iter().zip(&fv).map(|(y, f)| y - f).collect();
        let mean = resid.iter().sum::<f64>() / n as f64;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(
            (var - sigma * sigma).abs() / (sigma * sigma) < 0.01,
            "{var}"
        );
    }

    #[test]
    fn rescaling_equivalence() {
        // s·f·ξ + σ τ divided by s has the law of f·ξ + (σ/s) τ
        let f = FunctionHandle::constant(0.8, spec());
        let (s, sigma, n) = (2.5, 1.5, 400_000);
        let scaled = sample_speckle_scaled(&f, n, s, sigma, 5);
        let direct = sample_speckle(&f, n, sigma / s, 6);
        let moments = |ys: &[f64], scale: f64| {
            let m1 = ys.iter().map(|y| y / scale).sum::<f64>() / ys.len() as f64;
            let m2 = ys.iter().map(|y| (y / scale).powi(2)).sum::<f64>() / ys.len() as f64;
            (m1, m2)
        };
        let (a1, a2) = moments(&scaled.ys, s);
        let (b1, b2) = moments(&direct.ys, 1.0);
        // Var(y) = 0.64 + 0.36 = 1; se of the mean ≈ 1/√n, of m2 ≈ √2/√n
        let se = (1.0 / n as f64).sqrt();
        assert!((a1 - b1).abs() < 4.0 * se * 2f64.sqrt());
        assert!((a2 - b2).abs() < 4.0 * 2.0 * se);
        assert!((a2 - 1.0).abs() < 4.0 * 2f64.sqrt() * se);
    }

    #[test]
    fn stream_rng_fill_bytes_matches_words() {
        let mut a = StreamRng::new(9);
        let mut b = StreamRng::new(9);
        let mut buf = [0u8; 12];
        a.fill_bytes(&mut buf);
        let w0 = b.next_u64().to_le_bytes();
        let w1 = b.next_u64().to_le_bytes();
        assert_eq!(&buf[..8], &w0);
        assert_eq!(&buf[8..], &w1[..4]);
    }
}
