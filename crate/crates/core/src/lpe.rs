//! Local polynomial weights on the equispaced design `x_i = i/n`.
//!
//! For an evaluation point `x`, bandwidth `h` and degree `k` the weight of
//! observation `i` is
//!
//! ```text
//! W_i(x) = (1/(n h)) · U(0)ᵀ B⁻¹ U(u_i) K(u_i),   u_i = (i/n − x)/h
//! B      = (1/(n h)) · Σ_i U(u_i) U(u_i)ᵀ K(u_i)
//! U(u)   = (1, u, u²/2!, …, u^k/k!)ᵀ
//! ```
//!
//! With `B` normalised by `1/(n h)` the weights sum to one, annihilate the
//! monomials `(i/n − x)^r` for `1 ≤ r ≤ k`, and therefore reproduce any
//! polynomial of degree at most `k` exactly.
//!
//! Windows at the ends of `[0, 1]` are one-sided; nothing is reflected.

use crate::error::{invalid, Error, Result};
use crate::linalg::SymMatrix;

/// Smallest admissible eigenvalue of the normalised design matrix.
pub const MIN_DESIGN_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    /// `K(u) = ½ · 1{|u| ≤ 1}`
    #[default]
    BoxHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Kernel {
    pub kind: KernelKind,
}

impl Kernel {
    pub const BOX_HALF: Kernel = Kernel {
        kind: KernelKind::BoxHalf,
    };

    pub fn support_radius(&self) -> f64 {
        match self.kind {
            KernelKind::BoxHalf => 1.0,
        }
    }

    /// Kernel value; the support boundary `|u| = 1` is included.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self.kind {
            KernelKind::BoxHalf => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn kernel_eval(kernel: Kernel, u: f64) -> f64 {
    kernel.eval(u)
}

/// Largest integer strictly below `beta`.
pub fn degree_for_beta(beta: f64) -> usize {
    assert!(beta > 0.0, "beta must be positive");
    let c = beta.ceil();
    if c == beta {
        (beta as usize).saturating_sub(1)
    } else {
        c as usize - 1
    }
}

/// Parameters of one local polynomial fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LpeConfig {
    pub degree: usize,
    pub bandwidth: f64,
    pub n: usize,
    /// Standard deviation of the additive noise.
    pub sigma: f64,
}

impl LpeConfig {
    pub fn new(degree: usize, bandwidth: f64, n: usize, sigma: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "sample count must be positive"));
        }
        if !(bandwidth > 0.0 && bandwidth <= 1.0) {
            return Err(invalid("bandwidth", format!("{bandwidth} not in (0, 1]")));
        }
        if (n as f64) * bandwidth < (degree + 1) as f64 {
            return Err(invalid(
                "bandwidth",
                format!(
                    "n·h = {} is below degree + 1 = {}",
                    n as f64 * bandwidth,
                    degree + 1
                ),
            ));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("{sigma} must be finite and ≥ 0")));
        }
        Ok(Self {
            degree,
            bandwidth,
            n,
            sigma,
        })
    }

    pub fn for_beta(beta: f64, bandwidth: f64, n: usize, sigma: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(invalid("beta", "must be positive"));
        }
        Self::new(degree_for_beta(beta), bandwidth, n, sigma)
    }

    /// Scaled offset `(i/n − x)/h` of design index `i` (1-based).
    #[inline]
    fn offset(&self, i: usize, x: f64) -> f64 {
        (i as f64 / self.n as f64 - x) / self.bandwidth
    }

    /// 1-based design indices inside the kernel window around `x`.
    pub fn window(&self, x: f64) -> std::ops::RangeInclusive<usize> {
        let n = self.n as f64;
        let lo = (((x - self.bandwidth) * n).floor() as i64 - 1).max(1);
        let hi = (((x + self.bandwidth) * n).ceil() as i64 + 1).min(self.n as i64);
        let kernel = Kernel::BOX_HALF;
        let mut first = None;
        let mut last = None;
        for i in lo..=hi {
            if kernel.eval(self.offset(i as usize, x)) > 0.0 {
                first.get_or_insert(i as usize);
                last = Some(i as usize);
            }
        }
        match (first, last) {
            (Some(a), Some(b)) => a..=b,
            // empty range
            _ => 1..=0,
        }
    }
}

/// `U(u) = (1, u, u²/2!, …, u^k/k!)`.
pub fn feature_vector(u: f64, degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    fill_features(u, degree, &mut out);
    out
}

fn fill_features(u: f64, degree: usize, out: &mut Vec<f64>) {
    out.clear();
    let mut term = 1.0;
    out.push(term);
    for r in 1..=degree {
        term *= u / r as f64;
        out.push(term);
    }
}

/// Normalised design matrix `B_nx` at `x`.
pub fn design_matrix(x: f64, cfg: &LpeConfig) -> Result<SymMatrix> {
    let kernel = Kernel::BOX_HALF;
    let dim = cfg.degree + 1;
    let mut b = SymMatrix::zeros(dim);
    let mut u = Vec::with_capacity(dim);
    for i in cfg.window(x) {
        let t = cfg.offset(i, x);
        fill_features(t, cfg.degree, &mut u);
        b.add_outer(&u, kernel.eval(t));
    }
    b.scale(1.0 / (cfg.n as f64 * cfg.bandwidth));
    let min_eigenvalue = b.min_eigenvalue();
    if !(min_eigenvalue >= MIN_DESIGN_EIGENVALUE) {
        return Err(Error::SingularDesign { x, min_eigenvalue });
    }
    Ok(b)
}

/// Weights `W_i(x)` for one evaluation point. Only the kernel window is
/// stored; every index outside `first..first + values.len()` has weight 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub x: f64,
    pub n: usize,
    /// 1-based index of `values[0]`.
    pub first: usize,
    pub values: Vec<f64>,
}

impl WeightRow {
    /// Weight of design index `i` (1-based).
    pub fn weight(&self, i: usize) -> f64 {
        if i >= self.first && i < self.first + self.values.len() {
            self.values[i - self.first]
        } else {
            0.0
        }
    }

    /// `(i, W_i)` over the window.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(j, &w)| (self.first + j, w))
    }

    /// All `n` weights.
    pub fn dense(&self) -> Vec<f64> {
        (1..=self.n).map(|i| self.weight(i)).collect()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|w| w.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// `Σ_i (i/n − x)^r W_i`.
    pub fn moment(&self, r: i32) -> f64 {
        let n = self.n as f64;
        self.iter()
            .map(|(i, w)| (i as f64 / n - self.x).powi(r) * w)
            .sum()
    }

    /// `Σ_i responses_i W_i`; `responses` is indexed from design point 1.
    #[inline]
    pub fn dot(&self, responses: &[f64]) -> f64 {
        let start = self.first - 1;
        responses[start..start + self.values.len()]
            .iter()
            .zip(&self.values)
            .map(|(y, w)| y * w)
            .sum()
    }
}

pub fn lpe_weights(x: f64, cfg: &LpeConfig) -> Result<WeightRow> {
    let b = design_matrix(x, cfg)?;
    let dim = cfg.degree + 1;
    let mut e0 = vec![0.0; dim];
    e0[0] = 1.0;
    let coef = b.solve(&e0).ok_or(Error::SingularDesign {
        x,
        min_eigenvalue: b.min_eigenvalue(),
    })?;
    let kernel = Kernel::BOX_HALF;
    let scale = 1.0 / (cfg.n as f64 * cfg.bandwidth);
    let window = cfg.window(x);
    let first = *window.start();
    let mut u = Vec::with_capacity(dim);
    let values = window
        .map(|i| {
            let t = cfg.offset(i, x);
            fill_features(t, cfg.degree, &mut u);
            let proj: f64 = coef.iter().zip(&u).map(|(a, b)| a * b).sum();
            scale * proj * kernel.eval(t)
        })
        .collect();
    Ok(WeightRow {
        x,
        n: cfg.n,
        first,
        values,
    })
}

pub fn lpe_apply(responses: &[f64], x: f64, cfg: &LpeConfig) -> Result<f64> {
    if responses.len() != cfg.n {
        return Err(Error::LengthMismatch {
            expected: cfg.n,
            actual: responses.len(),
        });
    }
    Ok(lpe_weights(x, cfg)?.dot(responses))
}

/// Weight rows for a fixed evaluation grid, reusable across many response
/// vectors drawn at the same `(n, h, k)`.
#[derive(Debug, Clone)]
pub struct WeightTable {
    config: LpeConfig,
    rows: Vec<WeightRow>,
}

impl WeightTable {
    pub fn build(grid: &[f64], config: LpeConfig) -> Result<Self> {
        let rows = grid
            .iter()
            .map(|&x| lpe_weights(x, &config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, rows })
    }

    pub fn config(&self) -> &LpeConfig {
        &self.config
    }

    pub fn rows(&self) -> &[WeightRow] {
        &self.rows
    }

    pub fn grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn apply(&self, responses: &[f64]) -> Result<Vec<f64>> {
        if responses.len() != self.config.n {
            return Err(Error::LengthMismatch {
                expected: self.config.n,
                actual: responses.len(),
            });
        }
        Ok(self.rows.iter().map(|r| r.dot(responses)).collect())
    }
}
