//! Monte Carlo risk estimation and log-log rate fitting.
//!
//! Every trial draws its data from `derive_seed(master, trial)`, and trial
//! results are reduced in trial order after the parallel map, so a risk
//! point depends only on its configuration and master seed, never on the
//! number of worker threads.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{
    bandwidth_l2, bandwidth_l2_additive, bandwidth_sup, bandwidth_sup_additive, midpoint_grid,
    EstimateCurve, Smoother, BANDWIDTH_CAP, DEFAULT_GRID_SIZE,
};
use crate::holder::{check_holder_membership, FunctionHandle, HolderSpec, DEFAULT_HOLDER_GRID};
use crate::lpe::degree_for_beta;
use crate::noise::{derive_seed, fill_additive, fill_speckle};

pub const DEFAULT_L2_TRIALS: usize = 200;
pub const DEFAULT_SUP_TRIALS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Despeckle,
    Denoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    L2,
    Sup,
}

/// How the additive noise level scales with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum SigmaRule {
    Fixed(f64),
    /// `σ_n = n^a`
    Power(f64),
}

impl SigmaRule {
    pub fn sigma_at(&self, n: usize) -> f64 {
        match *self {
            SigmaRule::Fixed(s) => s,
            SigmaRule::Power(a) => (n as f64).powf(a),
        }
    }
}

/// `∫₀¹ (f̂ − f)²` by the midpoint rule on the curve grid.
pub fn l2_risk(f: &FunctionHandle, curve: &EstimateCurve) -> f64 {
    let g = curve.grid.len() as f64;
    curve
        .grid
        .iter()
        .zip(&curve.values)
        .map(|(&x, &v)| (v - f.eval(x)).powi(2))
        .sum::<f64>()
        / g
}

/// `max |f̂ − f|` over the curve grid.
pub fn sup_risk(f: &FunctionHandle, curve: &EstimateCurve) -> f64 {
    curve
        .grid
        .iter()
        .zip(&curve.values)
        .map(|(&x, &v)| (v - f.eval(x)).abs())
        .fold(0.0, f64::max)
}

/// Rate-matched bandwidth for an estimator and loss, times `multiplier`,
/// floored at `(k+1)/n` and then capped at ½.
pub fn select_bandwidth(
    estimator: EstimatorKind,
    loss: Loss,
    n: usize,
    sigma: f64,
    beta: f64,
    multiplier: f64,
) -> f64 {
    let base = match (estimator, loss) {
        (EstimatorKind::Despeckle, Loss::L2) => bandwidth_l2(n, sigma, beta),
        (EstimatorKind::Despeckle, Loss::Sup) => bandwidth_sup(n, sigma, beta),
        (EstimatorKind::Denoise, Loss::L2) => bandwidth_l2_additive(n, sigma, beta),
        (EstimatorKind::Denoise, Loss::Sup) => bandwidth_sup_additive(n, sigma, beta),
    };
    let floor = (degree_for_beta(beta) + 1) as f64 / n as f64;
    (multiplier * base).max(floor).min(BANDWIDTH_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub estimator: EstimatorKind,
    pub loss: Loss,
    pub n: usize,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub bandwidth_multiplier: f64,
}

impl RiskConfig {
    pub fn new(
        estimator: EstimatorKind,
        loss: Loss,
        n: usize,
        sigma: f64,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            estimator,
            loss,
            n,
            sigma,
            trials,
            seed,
            grid_size: DEFAULT_GRID_SIZE,
            bandwidth_multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPoint {
    pub n: usize,
    pub sigma: f64,
    pub trials: usize,
    pub bandwidth: f64,
    /// Mean of `‖f̂ − f‖₂²`.
    pub risk_l2: f64,
    /// Mean of `‖f̂ − f‖_∞`.
    pub risk_sup: f64,
    pub se_l2: f64,
    pub se_sup: f64,
}

impl RiskPoint {
    pub fn risk(&self, loss: Loss) -> f64 {
        match loss {
            Loss::L2 => self.risk_l2,
            Loss::Sup => self.risk_sup,
        }
    }

    pub fn se(&self, loss: Loss) -> f64 {
        match loss {
            Loss::L2 => self.se_l2,
            Loss::Sup => self.se_sup,
        }
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, count: usize) -> (f64, f64) {
    let n = count as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of both losses for one `(estimator, n, σ)`.
pub fn mc_risk(f: &FunctionHandle, cfg: &RiskConfig) -> Result<RiskPoint> {
    if cfg.trials < 2 {
        return Err(invalid("trials", "need at least two trials"));
    }
    if cfg.n < 3 {
        return Err(invalid("n", "need at least three observations"));
    }
    if !(cfg.sigma >= 0.0) {
        return Err(invalid("sigma", "must be non-negative"));
    }
    let spec = f.spec;
    let h = select_bandwidth(
        cfg.estimator,
        cfg.loss,
        cfg.n,
        cfg.sigma,
        spec.beta,
        cfg.bandwidth_multiplier,
    );
    let grid = midpoint_grid(cfg.grid_size);
    let smoother = Smoother::new(&grid, spec, cfg.n, cfg.sigma, h)?;
    let f_design = f.on_design(cfg.n);
    let f_grid = f.on_grid(&grid);

    let losses: Vec<(f64, f64)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; cfg.n],
            |ys, t| -> Result<(f64, f64)> {
                let seed = derive_seed(cfg.seed, t);
                let curve = match cfg.estimator {
                    EstimatorKind::Despeckle => {
                        fill_speckle(&f_design, 1.0, cfg.sigma, seed, ys);
                        smoother.despeckle(ys)?
                    }
                    EstimatorKind::Denoise => {
                        fill_additive(&f_design, cfg.sigma, seed, ys);
                        smoother.denoise(ys)?
                    }
                };
                let (mut sq, mut sup) = (0.0, 0.0f64);
                for (v, fx) in curve.values.iter().zip(&f_grid) {
                    let e = v - fx;
                    sq += e * e;
                    sup = sup.max(e.abs());
                }
                Ok((sq / grid.len() as f64, sup))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let (risk_l2, se_l2) = mean_and_se(losses.iter().map(|l| l.0), losses.len());
    let (risk_sup, se_sup) = mean_and_se(losses.iter().map(|l| l.1), losses.len());
    Ok(RiskPoint {
        n: cfg.n,
        sigma: cfg.sigma,
        trials: cfg.trials,
        bandwidth: h,
        risk_l2,
        risk_sup,
        se_l2,
        se_sup,
    })
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, R²)`.
pub fn ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, intercept, r_squared)
}

/// Exponent of `n` in the theoretical risk for the given noise rule.
///
/// * de-speckling, L₂: `min{1, (max(1,σ⁴)/n)^{2β/(2β+1)}}`
/// * de-speckling, sup: `(max(1,σ⁴) ln n / n)^{β/(2β+1)}`
/// * additive baseline: the same with `σ²` in place of `max(1, σ⁴)`
///
/// With `σ = n^a` the polynomial part is `n^{e(1 − p)}`, `e` the loss
/// exponent and `p` the power of `n` carried by the noise factor. Sup-norm
/// fits regress on `ln(n/ln n)`, absorbing the logarithm.
pub fn theoretical_slope(loss: Loss, estimator: EstimatorKind, beta: f64, rule: SigmaRule) -> f64 {
    let e = match loss {
        Loss::L2 => 2.0 * beta / (2.0 * beta + 1.0),
        Loss::Sup => beta / (2.0 * beta + 1.0),
    };
    let noise_power = match (rule, estimator) {
        (SigmaRule::Fixed(_), _) => 0.0,
        (SigmaRule::Power(a), EstimatorKind::Despeckle) => (4.0 * a).max(0.0),
        (SigmaRule::Power(a), EstimatorKind::Denoise) => 2.0 * a,
    };
    -e * (1.0 - noise_power).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// `(regressor, ln risk)` pairs.
    pub points: Vec<(f64, f64)>,
    /// `"ln n"` or `"ln(n/ln n)"`.
    pub regressor: &'static str,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theoretical_slope: f64,
}

pub fn rate_fit(
    points: &[RiskPoint],
    loss: Loss,
    beta: f64,
    rule: SigmaRule,
    estimator: EstimatorKind,
) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(invalid("points", "need at least two risk points"));
    }
    if points.len() < 4 {
        warn!(
            "rate fit on {} points; four or more preferred",
            points.len()
        );
    }
    let (lo, hi) = points
        .iter()
        .fold((usize::MAX, 0), |(lo, hi), p| (lo.min(p.n), hi.max(p.n)));
    if (hi as f64) < 100.0 * lo as f64 {
        warn!("rate fit spans less than two decades of n ({lo}..{hi})");
    }
    let (regressor, xf): (&'static str, fn(f64) -> f64) = match loss {
        Loss::L2 => ("ln n", |n| n.ln()),
        Loss::Sup => ("ln(n/ln n)", |n| (n / n.ln()).ln()),
    };
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (xf(p.n as f64), p.risk(loss).ln()))
        .collect();
    let (slope, intercept, r_squared) = ols(&pts);
    Ok(RateFit {
        points: pts,
        regressor,
        slope,
        intercept,
        r_squared,
        theoretical_slope: theoretical_slope(loss, estimator, beta, rule),
    })
}

/// Representative member of `Σ_𝔥(β, L)` for rate experiments:
/// `f = 𝔥 + (1 − 𝔥 − a)(1 − κ(1 − s))` with `a = 0.1`, `s` a normalised
/// mixture of two wide rescaled `φ₀` bumps, and `κ ∈ (0, 1]` the largest
/// factor (capped at 1) keeping the numerical Hölder ratio within `0.9 L`.
pub fn default_test_function(spec: HolderSpec) -> Result<FunctionHandle> {
    let psi = |t: f64| {
        if t.abs() >= 0.5 {
            0.0
        } else {
            (4.0 / (4.0 * t * t - 1.0) + 4.0).exp()
        }
    };
    let raw = move |x: f64| 0.2 + 0.5 * psi((x - 0.3) / 1.2) + 0.3 * psi((x - 0.8) / 1.0);
    let peak = (0..=DEFAULT_HOLDER_GRID)
        .map(|j| raw(j as f64 / DEFAULT_HOLDER_GRID as f64))
        .fold(0.0, f64::max);
    let margin = 0.1;
    let amp = 1.0 - spec.h_floor - margin;
    if amp <= 0.0 {
        return Err(invalid("h_floor", "leaves no room below the 0.1 margin"));
    }
    let floor = spec.h_floor;
    let build = move |kappa: f64| {
        FunctionHandle::new(format!("mixture[kappa={kappa}]"), spec, move |x| {
            floor + amp * (1.0 - kappa * (1.0 - raw(x) / peak))
        })
    };
    let full = build(1.0);
    let ratio = check_holder_membership(&full, DEFAULT_HOLDER_GRID)?.max_ratio;
    let kappa = if ratio <= 0.9 * spec.l {
        1.0
    } else {
        0.9 * spec.l / ratio
    };
    Ok(if kappa == 1.0 { full } else { build(kappa) })
}

/// Constant control `f ≡ (1 + 𝔥)/2`.
pub fn control_test_function(spec: HolderSpec) -> FunctionHandle {
    FunctionHandle::constant((1.0 + spec.h_floor) / 2.0, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub spec: HolderSpec,
    pub ns: Vec<usize>,
    pub sigma_rule: SigmaRule,
    pub loss: Loss,
    pub trials: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub bandwidth_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSweep {
    pub estimator: EstimatorKind,
    pub points: Vec<RiskPoint>,
    pub fit: RateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub test_function: String,
    pub despeckle: EstimatorSweep,
    pub denoise: EstimatorSweep,
    /// De-speckling slope minus baseline slope; positive means the
    /// de-speckling risk decays more slowly.
    pub slope_gap: f64,
}

pub fn run_estimator_sweep(
    f: &FunctionHandle,
    cfg: &SweepConfig,
    estimator: EstimatorKind,
) -> Result<EstimatorSweep> {
    let points = cfg
        .ns
        .iter()
        .map(|&n| {
            let mut rc = RiskConfig::new(
                estimator,
                cfg.loss,
                n,
                cfg.sigma_rule.sigma_at(n),
                cfg.trials,
                // one seed family per n
                derive_seed(cfg.seed, n as u64),
            );
            rc.grid_size = cfg.grid_size;
            rc.bandwidth_multiplier = cfg.bandwidth_multiplier;
            mc_risk(f, &rc)
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = rate_fit(&points, cfg.loss, cfg.spec.beta, cfg.sigma_rule, estimator)?;
    Ok(EstimatorSweep {
        estimator,
        points,
        fit,
    })
}

/// Both estimators over `ns` with fitted rates.
pub fn regime_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.ns.len() < 2 {
        return Err(invalid("ns", "need at least two sample sizes"));
    }
    if cfg.ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("ns", "sample sizes must be strictly increasing"));
    }
    let f = default_test_function(cfg.spec)?;
    let despeckle = run_estimator_sweep(&f, cfg, EstimatorKind::Despeckle)?;
    let denoise = run_estimator_sweep(&f, cfg, EstimatorKind::Denoise)?;
    let slope_gap = despeckle.fit.slope - denoise.fit.slope;
    Ok(SweepReport {
        config: cfg.clone(),
        test_function: f.label.clone(),
        despeckle,
        denoise,
        slope_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpe::LpeConfig;

    fn spec() -> HolderSpec {
        HolderSpec::new(2.0, 20.0, 0.2).unwrap()
    }

    fn curve_of(grid: Vec<f64>, values: Vec<f64>) -> EstimateCurve {
        EstimateCurve {
            gsq_values: values.clone(),
            grid,
            values,
            config: LpeConfig::new(0, 0.5, 10, 0.0).unwrap(),
        }
    }

    #[test]
    fn quadrature_losses() {
        let f = FunctionHandle::new("f", spec(), |x| 0.3 + 0.2 * x);
        let grid = midpoint_grid(512);
        let exact = curve_of(grid.clone(), f.on_grid(&grid));
        assert_eq!(l2_risk(&f, &exact), 0.0);
        assert_eq!(sup_risk(&f, &exact), 0.0);
        let shifted = curve_of(
            grid.clone(),
            grid.iter().map(|&x| f.eval(x) + 0.1).collect(),
        );
        assert!((l2_risk(&f, &shifted) - 0.01).abs() < 1e-15);
        assert!((sup_risk(&f, &shifted) - 0.1).abs() < 1e-15);
        let wavy = curve_of(
            grid.clone(),
            grid.iter()
                .map(|&x| f.eval(x) + (2.0 * std::f64::consts::PI * x).sin())
                .collect(),
        );
        assert!((l2_risk(&f, &wavy) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn sup_loss_refinement() {
        let f = FunctionHandle::new("f", spec(), |_| 0.5);
        let err = |x: f64| 0.5 + 0.1 * (3.0 * x).sin() * (-x).exp();
        let coarse = midpoint_grid(512);
        let fine = midpoint_grid(4096);
        let a = sup_risk(
            &f,
            &curve_of(coarse.clone(), coarse.iter().map(|&x| err(x)).collect()),
        );
        let b = sup_risk(
            &f,
            &curve_of(fine.clone(), fine.iter().map(|&x| err(x)).collect()),
        );
        assert!((a - b).abs() / b < 0.02);
    }

    #[test]
    fn exact_line_fit() {
        let pts: Vec<RiskPoint> = [512usize, 1024, 2048, 4096, 8192]
            .iter()
            .map(|&n| RiskPoint {
                n,
                sigma: 1.0,
                trials: 2,
                bandwidth: 0.1,
                risk_l2: 3.0 * (n as f64).powf(-2.0 / 3.0),
                risk_sup: 1.0,
                se_l2: 0.0,
                se_sup: 0.0,
            })
            .collect();
        let fit = rate_fit(
            &pts,
            Loss::L2,
            1.0,
            SigmaRule::Fixed(1.0),
            EstimatorKind::Despeckle,
        )
        .unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.theoretical_slope + 2.0 / 3.0).abs() < 1e-15);

        let scaled: Vec<RiskPoint> = pts
            .iter()
            .map(|p| RiskPoint {
                risk_l2: p.risk_l2 * 7.5,
                ..*p
            })
            .collect();
        let fit2 = rate_fit(
            &scaled,
            Loss::L2,
            1.0,
            SigmaRule::Fixed(1.0),
            EstimatorKind::Despeckle,
        )
        .unwrap();
        assert!((fit2.slope - fit.slope).abs() < 1e-12);
        assert!((fit2.intercept - fit.intercept - 7.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn theory_targets() {
        let d = EstimatorKind::Despeckle;
        let a = EstimatorKind::Denoise;
        assert!((theoretical_slope(Loss::L2, d, 2.0, SigmaRule::Fixed(1.0)) + 0.8).abs() < 1e-15);
        assert!((theoretical_slope(Loss::Sup, d, 2.0, SigmaRule::Fixed(1.0)) + 0.4).abs() < 1e-15);
        assert!((theoretical_slope(Loss::L2, d, 2.0, SigmaRule::Power(0.125)) + 0.4).abs() < 1e-15);
        assert!((theoretical_slope(Loss::L2, a, 2.0, SigmaRule::Power(0.125)) + 0.6).abs() < 1e-15);
        // σ⁴ ≥ n saturates at the trivial rate
        assert_eq!(
            theoretical_slope(Loss::L2, d, 2.0, SigmaRule::Power(0.3)),
            0.0
        );
        // weak noise does not help de-speckling
        assert!((theoretical_slope(Loss::L2, d, 2.0, SigmaRule::Power(-0.2)) + 0.8).abs() < 1e-15);
    }

    #[test]
    fn denoise_without_noise_reproduces_linear_signal() {
        let f = FunctionHandle::new("lin", spec(), |x| 0.3 + 0.4 * x);
        let cfg = RiskConfig::new(EstimatorKind::Denoise, Loss::L2, 1024, 0.0, 4, 1);
        let p = mc_risk(&f, &cfg).unwrap();
        assert!(p.risk_l2 < 1e-12);
    }

    #[test]
    fn standard_error_scales_with_trials() {
        let f = control_test_function(spec());
        let base = RiskConfig::new(EstimatorKind::Despeckle, Loss::L2, 512, 1.0, 400, 3);
        let p1 = mc_risk(&f, &base).unwrap();
        let p2 = mc_risk(
            &f,
            &RiskConfig {
                trials: 800,
                ..base
            },
        )
        .unwrap();
        let ratio = p2.se_l2 / p1.se_l2;
        assert!((0.6..=0.85).contains(&ratio), "{ratio}");
    }

    #[test]
    fn risk_is_thread_count_independent() {
        let f = default_test_function(spec()).unwrap();
        let cfg = RiskConfig::new(EstimatorKind::Despeckle, Loss::Sup, 1000, 0.5, 24, 9);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| mc_risk(&f, &cfg)).unwrap();
        let b = four.install(|| mc_risk(&f, &cfg)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, mc_risk(&f, &cfg).unwrap());
    }

    #[test]
    fn default_function_is_in_class() {
        for l in [0.5, 20.0] {
            let s = HolderSpec::new(2.0, l, 0.2).unwrap();
            let f = default_test_function(s).unwrap();
            let r = check_holder_membership(&f, DEFAULT_HOLDER_GRID).unwrap();
            assert!(r.passes(), "L={l}: {r:?}");
        }
        let s = HolderSpec::new(1.5, 3.0, 0.1).unwrap();
        assert!(
            check_holder_membership(&default_test_function(s).unwrap(), 2048)
                .unwrap()
                .passes()
        );
    }

    #[test]
    fn selector_routing_and_clamps() {
        let b = select_bandwidth(EstimatorKind::Denoise, Loss::L2, 1024, 0.0, 2.0, 1.0);
        assert_eq!(b, 2.0 / 1024.0);
        let b = select_bandwidth(EstimatorKind::Despeckle, Loss::L2, 1024, 1.0, 2.0, 10.0);
        assert_eq!(b, 0.5);
        let b = select_bandwidth(EstimatorKind::Despeckle, Loss::Sup, 4096, 1.0, 2.0, 1.0);
        assert_eq!(b, bandwidth_sup(4096, 1.0, 2.0));
    }

    #[test]
    fn mc_risk_rejects_bad_input() {
        let f = control_test_function(spec());
        let cfg = RiskConfig::new(EstimatorKind::Despeckle, Loss::L2, 512, 1.0, 1, 3);
        assert!(mc_risk(&f, &cfg).is_err());
    }

    #[test]
    fn sweep_validates_ns() {
        let cfg = SweepConfig {
            spec: spec(),
            ns: vec![512, 256],
            sigma_rule: SigmaRule::Fixed(1.0),
            loss: Loss::L2,
            trials: 4,
            seed: 0,
            grid_size: 64,
            bandwidth_multiplier: 1.0,
        };
        assert!(regime_sweep(&cfg).is_err());
        assert!(regime_sweep(&SweepConfig {
            ns: vec![],
            ..cfg.clone()
        })
        .is_err());
        let ok = regime_sweep(&SweepConfig {
            ns: vec![256, 512, 1024],
            ..cfg
        })
        .unwrap();
        assert_eq!(ok.despeckle.points.len(), 3);
        assert!((ok.slope_gap - (ok.despeckle.fit.slope - ok.denoise.fit.slope)).abs() < 1e-15);
    }
}
