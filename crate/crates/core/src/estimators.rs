//! The de-speckling estimator, the additive-noise baseline, the rate-driven
//! bandwidth rules and the scalar maximum-likelihood estimator.
//!
//! De-speckling runs a local polynomial fit on the debiased squares
//! `Y_i² − σ²`, whose mean is `f²(i/n)`, yielding `ĝ ≈ f²`. The estimate of
//! `f` is `√clamp(ĝ, 𝔥², 1)`, which lies in `[𝔥, 1]` and satisfies
//! `|f̂ − f| ≤ |ĝ − f²| / 𝔥` whenever `f ≥ 𝔥`.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::holder::HolderSpec;
use crate::lpe::{degree_for_beta, lpe_weights, LpeConfig, WeightTable};
use crate::noise::{NoiseModel, ObservationSet};

/// Largest bandwidth any selector returns.
pub const BANDWIDTH_CAP: f64 = 0.5;
pub const DEFAULT_GRID_SIZE: usize = 512;

/// Estimates on an evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateCurve {
    pub grid: Vec<f64>,
    /// `f̂`, clamped to `[𝔥, 1]`.
    pub values: Vec<f64>,
    /// Unclamped intermediate: `ĝ` for de-speckling, the raw local
    /// polynomial fit for the additive baseline.
    pub gsq_values: Vec<f64>,
    pub config: LpeConfig,
}

/// Uniform midpoint grid `(j + ½)/size`, `j = 0..size`.
pub fn midpoint_grid(size: usize) -> Vec<f64> {
    (0..size).map(|j| (j as f64 + 0.5) / size as f64).collect()
}

/// `√clamp(g, 𝔥², 1)`.
#[inline]
pub fn root_clamp(gsq: f64, h_floor: f64) -> f64 {
    gsq.clamp(h_floor * h_floor, 1.0).sqrt()
}

pub fn despeckle_gsq(obs: &ObservationSet, x: f64, cfg: &LpeConfig) -> Result<f64> {
    check_design(obs, cfg)?;
    if obs.model != NoiseModel::Speckle {
        warn!("de-speckling applied to {:?} observations", obs.model);
    }
    if cfg.sigma != obs.sigma {
        warn!(
            "debiasing with sigma = {} but observations were drawn with sigma = {}",
            cfg.sigma, obs.sigma
        );
    }
    let w = lpe_weights(x, cfg)?;
    let s2 = cfg.sigma * cfg.sigma;
    Ok(w.iter()
        .map(|(i, wi)| (obs.ys[i - 1].powi(2) - s2) * wi)
        .sum())
}

fn check_design(obs: &ObservationSet, cfg: &LpeConfig) -> Result<()> {
    if obs.ys.len() != cfg.n || obs.n != cfg.n {
        return Err(Error::LengthMismatch {
            expected: cfg.n,
            actual: obs.ys.len(),
        });
    }
    Ok(())
}

/// Precomputed weights for repeated estimation at one `(n, h, k, grid)`.
#[derive(Debug, Clone)]
pub struct Smoother {
    table: WeightTable,
    spec: HolderSpec,
}

impl Smoother {
    pub fn new(grid: &[f64], spec: HolderSpec, n: usize, sigma: f64, h: f64) -> Result<Self> {
        let cfg = LpeConfig::new(degree_for_beta(spec.beta), h, n, sigma)?;
        Ok(Self {
            table: WeightTable::build(grid, cfg)?,
            spec,
        })
    }

    pub fn config(&self) -> &LpeConfig {
        self.table.config()
    }

    pub fn grid(&self) -> Vec<f64> {
        self.table.grid()
    }

    /// `ĝ` at every grid point from raw speckle observations.
    pub fn gsq(&self, ys: &[f64]) -> Result<Vec<f64>> {
        let s2 = self.config().sigma * self.config().sigma;
        let mut debiased = Vec::with_capacity(ys.len());
        debiased.extend(ys.iter().map(|y| y * y - s2));
        self.table.apply(&debiased)
    }

    pub fn despeckle(&self, ys: &[f64]) -> Result<EstimateCurve> {
        let gsq_values = self.gsq(ys)?;
        let values = gsq_values
            .iter()
            .map(|&g| root_clamp(g, self.spec.h_floor))
            .collect();
        Ok(EstimateCurve {
            grid: self.grid(),
            values,
            gsq_values,
            config: *self.config(),
        })
    }

    pub fn denoise(&self, ys: &[f64]) -> Result<EstimateCurve> {
        let raw = self.table.apply(ys)?;
        let values = raw
            .iter()
            .map(|&v| v.clamp(self.spec.h_floor, 1.0))
            .collect();
        Ok(EstimateCurve {
            grid: self.grid(),
            values,
            gsq_values: raw,
            config: *self.config(),
        })
    }
}

pub fn despeckle_estimate(
    obs: &ObservationSet,
    grid: &[f64],
    spec: &HolderSpec,
    h: f64,
) -> Result<EstimateCurve> {
    if obs.model != NoiseModel::Speckle {
        warn!("de-speckling applied to {:?} observations", obs.model);
    }
    Smoother::new(grid, *spec, obs.n, obs.sigma, h)?.despeckle(&obs.ys)
}

pub fn denoise_estimate(
    obs: &ObservationSet,
    grid: &[f64],
    spec: &HolderSpec,
    h: f64,
) -> Result<EstimateCurve> {
    if obs.model != NoiseModel::AdditiveOnly {
        warn!(
            "additive-noise smoother applied to {:?} observations",
            obs.model
        );
    }
    Smoother::new(grid, *spec, obs.n, obs.sigma, h)?.denoise(&obs.ys)
}

fn rate_bandwidth(scale: f64, n: usize, beta: f64) -> f64 {
    (scale / n as f64).powf(1.0 / (2.0 * beta + 1.0))
}

/// `(max(1, σ⁴)/n)^{1/(2β+1)}`, capped at ½.
pub fn bandwidth_l2(n: usize, sigma: f64, beta: f64) -> f64 {
    assert!(n >= 2, "bandwidth_l2 needs n ≥ 2");
    rate_bandwidth(sigma.powi(4).max(1.0), n, beta).min(BANDWIDTH_CAP)
}

/// `(max(1, σ⁴) ln n / n)^{1/(2β+1)}`, capped at ½.
pub fn bandwidth_sup(n: usize, sigma: f64, beta: f64) -> f64 {
    assert!(n >= 3, "bandwidth_sup needs n ≥ 3");
    let s4 = sigma.powi(4);
    if s4 >= (n as f64).powf(0.9) {
        warn!("σ⁴ = {s4} ≥ n^0.9: outside the regime of the sup-norm rate");
    }
    rate_bandwidth(s4.max(1.0) * (n as f64).ln(), n, beta).min(BANDWIDTH_CAP)
}

/// `(σ²/n)^{1/(2β+1)}` floored at `(k+1)/n`, then capped at ½.
pub fn bandwidth_l2_additive(n: usize, sigma: f64, beta: f64) -> f64 {
    assert!(n >= 2, "bandwidth_l2_additive needs n ≥ 2");
    let floor = (degree_for_beta(beta) + 1) as f64 / n as f64;
    rate_bandwidth(sigma * sigma, n, beta)
        .max(floor)
        .min(BANDWIDTH_CAP)
}

/// `(σ² ln n / n)^{1/(2β+1)}` floored at `(k+1)/n`, then capped at ½. Sup-norm analogue
/// of [`bandwidth_l2_additive`].
pub fn bandwidth_sup_additive(n: usize, sigma: f64, beta: f64) -> f64 {
    assert!(n >= 3, "bandwidth_sup_additive needs n ≥ 3");
    let floor = (degree_for_beta(beta) + 1) as f64 / n as f64;
    rate_bandwidth(sigma * sigma * (n as f64).ln(), n, beta)
        .max(floor)
        .min(BANDWIDTH_CAP)
}

/// `√max(0, mean(y²) − σ²)`.
pub fn scalar_mle(ys: &[f64], sigma: f64) -> f64 {
    assert!(!ys.is_empty(), "scalar_mle needs at least one observation");
    let m2 = ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64;
    (m2 - sigma * sigma).max(0.0).sqrt()
}

/// Delta-method asymptotic variance of `√n (θ̂ − θ₀)`:
/// `Var(Y²) · (1/(2θ₀))² = 2(θ₀² + σ²)² / (4θ₀²)`.
pub fn scalar_mle_asymptotic_variance(theta0: f64, sigma: f64) -> f64 {
    2.0 * (theta0 * theta0 + sigma * sigma).powi(2) / (4.0 * theta0 * theta0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holder::FunctionHandle;
    use crate::lpe::lpe_apply;
    use crate::noise::{sample_additive, sample_speckle};

    fn spec(beta: f64) -> HolderSpec {
        HolderSpec::new(beta, 1.0, 0.1).unwrap()
    }

    fn obs_from(ys: Vec<f64>, sigma: f64, model: NoiseModel) -> ObservationSet {
        let n = ys.len();
        ObservationSet {
            n,
            xs: crate::noise::design_points(n),
            ys,
            sigma,
            model,
            seed: 0,
        }
    }

    #[test]
    fn root_clamp_cases() {
        assert!((root_clamp(0.25, 0.1) - 0.5).abs() < 1e-15);
        assert_eq!(root_clamp(-0.3, 0.1), 0.1);
        assert_eq!(root_clamp(1.7, 0.1), 1.0);
    }

    #[test]
    fn gsq_of_exact_squares() {
        let sigma: f64 = 0.4;
        let c: f64 = 0.3;
        let n = 200;
        let ys: Vec<f64> = (0..n)
            .map(|i| {
                let y = (c + sigma * sigma).sqrt();
                if i % 2 == 0 {
                    y
                } else {
                    -y
                }
            })
            .collect();
        let obs = obs_from(ys, sigma, NoiseModel::Speckle);
        let cfg = LpeConfig::new(1, 0.1, n, sigma).unwrap();
        for &x in &[0.0, 0.3, 1.0] {
            assert!((despeckle_gsq(&obs, x, &cfg).unwrap() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn gsq_with_deterministic_unit_signal() {
        let f = FunctionHandle::constant(1.0, spec(2.0));
        let obs = sample_additive(&f, 300, 0.0, 1);
        let cfg = LpeConfig::new(1, 0.1, 300, 0.0).unwrap();
        assert!((despeckle_gsq(&obs, 0.42, &cfg).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn debias_identity_without_additive_noise() {
        let f = FunctionHandle::new("f", spec(2.0), |x| 0.4 + 0.3 * x);
        let obs = sample_speckle(&f, 500, 0.0, 99);
        let cfg = LpeConfig::new(1, 0.08, 500, 0.0).unwrap();
        let squares: Vec<f64> = obs.ys.iter().map(|y| y * y).collect();
        for &x in &[0.01, 0.5, 0.77] {
            let a = despeckle_gsq(&obs, x, &cfg).unwrap();
            let b = lpe_apply(&squares, x, &cfg).unwrap();
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn gsq_is_unbiased() {
        let theta = 0.7;
        let sigma = 0.5;
        let n = 512;
        let f = FunctionHandle::constant(theta, spec(2.0));
        let cfg = LpeConfig::new(1, 0.1, n, sigma).unwrap();
        let w = lpe_weights(0.5, &cfg).unwrap();
        let trials = 10_000;
        let vals: Vec<f64> = (0..trials)
            .map(|t| {
                let obs = sample_speckle(&f, n, sigma, crate::noise::derive_seed(17, t));
                let s2 = sigma * sigma;
                w.iter()
                    .map(|(i, wi)| (obs.ys[i - 1].powi(2) - s2) * wi)
                    .sum()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - theta * theta).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn despeckle_curve_in_range() {
        let f = FunctionHandle::new("f", spec(2.0), |x| 0.5 + 0.2 * (6.0 * x).sin());
        let obs = sample_speckle(&f, 1024, 1.0, 5);
        let grid = midpoint_grid(64);
        let curve = despeckle_estimate(&obs, &grid, &spec(2.0), 0.2).unwrap();
        assert_eq!(curve.values.len(), 64);
        assert!(curve.values.iter().all(|&v| (0.1..=1.0).contains(&v)));
        for (v, g) in curve.values.iter().zip(&curve.gsq_values) {
            assert_eq!(*v, root_clamp(*g, 0.1));
        }
        assert_eq!(curve.config.degree, 1);
    }

    #[test]
    fn denoise_reproduces_polynomials() {
        let s = spec(3.0); // k = 2
        let f = FunctionHandle::new("p", s, |x| 0.2 + 0.5 * x - 0.3 * x * x);
        let obs = sample_additive(&f, 400, 0.0, 0);
        let grid = midpoint_grid(50);
        let curve = denoise_estimate(&obs, &grid, &s, 0.1).unwrap();
        for (x, v) in grid.iter().zip(&curve.values) {
            assert!((v - f.eval(*x)).abs() < 1e-9);
        }
        let c = obs_from(vec![0.45; 400], 0.0, NoiseModel::AdditiveOnly);
        let curve = denoise_estimate(&c, &grid, &s, 0.1).unwrap();
        assert!(curve.values.iter().all(|v| (v - 0.45).abs() < 1e-12));
        let c = obs_from(vec![3.0; 400], 0.0, NoiseModel::AdditiveOnly);
        let curve = denoise_estimate(&c, &grid, &s, 0.1).unwrap();
        assert!(curve.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn denoise_risk_falls_with_n() {
        let s = spec(2.0);
        let f = FunctionHandle::constant(1.0, s);
        let grid = midpoint_grid(256);
        let mse = |n: usize| -> f64 {
            let h = bandwidth_l2_additive(n, 0.1, 2.0);
            (0..20)
                .map(|t| {
                    let obs = sample_additive(&f, n, 0.1, crate::noise::derive_seed(3, t));
                    let c = denoise_estimate(&obs, &grid, &s, h).unwrap();
                    c.values.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() / 256.0
                })
                .sum::<f64>()
                / 20.0
        };
        assert!(mse(4096) < mse(256));
    }

    #[test]
    fn bandwidths() {
        assert!((bandwidth_l2(1024, 1.0, 1.0) - 1024f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!((bandwidth_l2(1024, 1.0, 1.0) - 0.0992).abs() < 1e-4);
        assert_eq!(bandwidth_l2(1024, 0.0, 1.0), bandwidth_l2(1024, 1.0, 1.0));
        assert_eq!(bandwidth_l2(1024, 0.3, 1.0), bandwidth_l2(1024, 1.0, 1.0));
        assert!((bandwidth_l2(1024, 2.0, 1.0) - 0.25).abs() < 1e-15);

        let expected = ((2981f64).ln() / 2981.0).powf(1.0 / 3.0);
        assert!((bandwidth_sup(2981, 1.0, 1.0) - expected).abs() < 1e-15);
        assert!((bandwidth_sup(2981, 1.0, 1.0) - 0.13897).abs() < 1e-4);
        assert!(bandwidth_sup(5000, 1.5, 1.0) < bandwidth_sup(5000, 1.6, 1.0));
        // (ln 1024/1024)^{1/5} ≈ 0.3682, below the cap
        assert!((bandwidth_sup(1024, 1.0, 2.0) - 0.36822).abs() < 1e-4);
        assert_eq!(bandwidth_sup(16, 1.0, 2.0), 0.5);
        assert_eq!(bandwidth_l2(8, 1.0, 3.0), 0.5);

        assert!((bandwidth_l2_additive(1024, 1.0, 1.0) - 0.0992).abs() < 1e-4);
        assert_eq!(bandwidth_l2_additive(1024, 0.0, 1.0), 1.0 / 1024.0);
        assert_eq!(bandwidth_l2_additive(1024, 0.0, 2.0), 2.0 / 1024.0);
        assert!((bandwidth_l2_additive(1024, 2.0, 1.0) - 0.15749).abs() < 1e-4);
    }

    #[test]
    fn bandwidth_scale_consistency() {
        for &(n, sigma) in &[(4096usize, 2.0f64), (65536, 3.0), (100_000, 1.5)] {
            let s4 = sigma.powi(4);
            let reduced = (n as f64 / s4).round() as usize;
            // exact identity holds for the continuous formula
            let lhs = bandwidth_l2(n, sigma, 2.0);
            let rhs = (1.0 / (n as f64 / s4)).powf(0.2).min(0.5);
            assert!((lhs - rhs).abs() < 1e-14);
            let approx = bandwidth_l2(reduced, 1.0, 2.0);
            assert!((lhs - approx).abs() / lhs < 1e-3);
        }
    }

    #[test]
    fn mle_cases() {
        assert!((scalar_mle(&[0.8; 10], 0.0) - 0.8).abs() < 1e-15);
        assert!((scalar_mle(&[-0.8; 10], 0.0) - 0.8).abs() < 1e-15);
        assert_eq!(scalar_mle(&[0.1, -0.1], 1.0), 0.0);
        assert!((scalar_mle_asymptotic_variance(0.5, 1.0) - 3.125).abs() < 1e-15);
    }
}
