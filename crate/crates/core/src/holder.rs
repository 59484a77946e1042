//! Hölder-class test functions: the smooth compactly supported basic
//! function, its rescaled bumps, the hypothesis families built from binary
//! codewords, and a numerical membership check for `Σ_𝔥(β, L)`.

use std::fmt;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lpe::degree_for_beta;

/// Grid resolution used to locate `max |φ₀^{(k+1)}|`.
pub const PHIBAR_GRID: usize = 100_000;
/// Midpoint-rule resolution for norms of `φ`.
pub const NORM_QUADRATURE_POINTS: usize = 1 << 16;
pub const DEFAULT_HOLDER_GRID: usize = 4096;
/// Multiplicative slack on `L` accepted by [`check_holder_membership`].
pub const HOLDER_TOLERANCE: f64 = 0.05;

/// Parameters of `Σ_𝔥(β, L)`. A floor of 0 denotes the plain class `Σ(β, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderSpec {
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub h_floor: f64,
}

impl HolderSpec {
    pub fn new(beta: f64, l: f64, h_floor: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("{beta} must be positive")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(invalid("L", format!("{l} must be positive")));
        }
        if !(h_floor > 0.0 && h_floor < 1.0) {
            return Err(invalid("h_floor", format!("{h_floor} not in (0, 1)")));
        }
        Ok(Self { beta, l, h_floor })
    }

    pub(crate) fn without_floor(beta: f64, l: f64) -> Self {
        Self {
            beta,
            l,
            h_floor: 0.0,
        }
    }

    /// Largest integer strictly below `beta`.
    pub fn degree(&self) -> usize {
        degree_for_beta(self.beta)
    }
}

/// An immutable, shareable real function on `[0, 1]` with class metadata.
#[derive(Clone)]
pub struct FunctionHandle {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub spec: HolderSpec,
    pub label: String,
}

impl FunctionHandle {
    pub fn new(
        label: impl Into<String>,
        spec: HolderSpec,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(f),
            spec,
            label: label.into(),
        }
    }

    pub fn constant(c: f64, spec: HolderSpec) -> Self {
        Self::new(format!("const({c})"), spec, move |_| c)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Values at the design points `i/n`, `i = 1..=n`.
    pub fn on_design(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|i| self.eval(i as f64 / n as f64)).collect()
    }

    pub fn on_grid(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.eval(x)).collect()
    }
}

impl fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("label", &self.label)
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

/// Composite midpoint rule with `points` cells on `[a, b]`.
pub fn midpoint_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, points: usize) -> f64 {
    let dx = (b - a) / points as f64;
    (0..points)
        .map(|j| f(a + (j as f64 + 0.5) * dx))
        .sum::<f64>()
        * dx
}

/// Exact derivatives of `φ₀(x) = exp(4/(4x² − 1))` on `|x| < ½`.
///
/// `φ₀^{(m)} = R_m φ₀` with `R_m = P_m / (4x² − 1)^{2m}`, where the integer
/// polynomials obey
/// `P_{m+1} = (P_m' D − 16 m x P_m) D − 32 x P_m`, `D = 4x² − 1`.
#[derive(Debug, Clone)]
pub struct Phi0Derivatives {
    /// Ascending coefficients of `P_m`, for `m = 0..=max_order`.
    numerators: Vec<Vec<i128>>,
}

impl Phi0Derivatives {
    pub fn up_to(max_order: usize) -> Self {
        let mut numerators = vec![vec![1i128]];
        for m in 0..max_order {
            let next = next_numerator(&numerators[m], m as i128);
            numerators.push(next);
        }
        Self { numerators }
    }

    pub fn max_order(&self) -> usize {
        self.numerators.len() - 1
    }

    pub fn numerator(&self, m: usize) -> &[i128] {
        &self.numerators[m]
    }

    /// `φ₀^{(m)}(x)`; zero outside the open support.
    pub fn eval(&self, m: usize, x: f64) -> f64 {
        if x.abs() >= 0.5 {
            return 0.0;
        }
        let d = 4.0 * x * x - 1.0;
        if m == 0 {
            return (4.0 / d).exp();
        }
        let p = self.numerators[m]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c as f64);
        if p == 0.0 {
            return 0.0;
        }
        // log domain: D^{2m} underflows long before exp(4/D) stops doing so
        let log_mag = 4.0 / d + p.abs().ln() - 2.0 * m as f64 * d.abs().ln();
        p.signum() * log_mag.exp()
    }
}

fn next_numerator(p: &[i128], m: i128) -> Vec<i128> {
    let mul = |a: &[i128], b: &[i128]| -> Vec<i128> {
        let mut out = vec![0i128; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = out[i + j]
                    .checked_add(
                        x.checked_mul(y)
                            .expect("φ₀ derivative coefficients overflow"),
                    )
                    .expect("φ₀ derivative coefficients overflow");
            }
        }
        out
    };
    let add = |a: &[i128], b: &[i128]| -> Vec<i128> {
        let len = a.len().max(b.len());
        (0..len)
            .map(|i| a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0))
            .collect()
    };
    let d = [-1i128, 0, 4];
    let deriv: Vec<i128> = if p.len() > 1 {
        p.iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as i128)
            .collect()
    } else {
        vec![0]
    };
    let t1 = mul(&deriv, &d);
    let t2 = mul(&[0, -16 * m], p);
    let inner = mul(&add(&t1, &t2), &d);
    let t3 = mul(&[0, -32], p);
    let mut out = add(&inner, &t3);
    while out.len() > 1 && *out.last().unwrap() == 0 {
        out.pop();
    }
    out
}

pub fn phi0_derivative(m: usize, x: f64) -> f64 {
    Phi0Derivatives::up_to(m).eval(m, x)
}

/// `φ = shrink · (L/2) · φ₀ / φ̄₀` with `φ̄₀ = max |φ₀^{(k+1)}|`.
#[derive(Debug, Clone)]
pub struct BasicFunction {
    pub beta: f64,
    #[doc(alias = "L")]
    pub l: f64,
    pub k: usize,
    pub phibar: f64,
    /// Location of the maximiser of `|φ₀^{(k+1)}|` (a `±` pair; the positive one).
    pub phibar_at: f64,
    /// Extra factor in `(0, 1]`; shrinking keeps `max |φ^{(k+1)}| ≤ L/2`.
    pub shrink: f64,
    derivs: Phi0Derivatives,
}

pub fn build_basic_function(beta: f64, l: f64) -> Result<BasicFunction> {
    if !(beta > 0.0) {
        return Err(invalid("beta", "must be positive"));
    }
    if !(l > 0.0) {
        return Err(invalid("L", "must be positive"));
    }
    let k = degree_for_beta(beta);
    let derivs = Phi0Derivatives::up_to(k + 2);
    let order = k + 1;
    let target = |x: f64| derivs.eval(order, x).abs();
    let step = 1.0 / PHIBAR_GRID as f64;
    let (best_j, _) = (0..PHIBAR_GRID)
        .map(|j| (j, target(-0.5 + (j as f64 + 0.5) * step)))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (j, v)| {
                if v > acc.1 {
                    (j, v)
                } else {
                    acc
                }
            },
        );
    let centre = -0.5 + (best_j as f64 + 0.5) * step;
    let lo = (centre - step).max(-0.5);
    let hi = (centre + step).min(0.5);
    let x = golden_section_max(target, lo, hi, 1e-10);
    let phibar = target(x).max(target(centre));
    let phibar_at = if target(x) >= target(centre) {
        x
    } else {
        centre
    };
    Ok(BasicFunction {
        beta,
        l,
        k,
        phibar,
        phibar_at: phibar_at.abs(),
        shrink: 1.0,
        derivs,
    })
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

impl BasicFunction {
    /// Returns a copy scaled by an extra factor in `(0, 1]`.
    pub fn with_shrink(&self, shrink: f64) -> Result<Self> {
        if !(shrink > 0.0 && shrink <= 1.0) {
            return Err(invalid("shrink", format!("{shrink} not in (0, 1]")));
        }
        Ok(Self {
            shrink,
            ..self.clone()
        })
    }

    #[inline]
    fn scale(&self) -> f64 {
        self.shrink * 0.5 * self.l / self.phibar
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() >= 0.5 {
            0.0
        } else {
            self.scale() * (4.0 / (4.0 * x * x - 1.0)).exp()
        }
    }

    pub fn derivative(&self, m: usize, x: f64) -> f64 {
        if m <= self.derivs.max_order() {
            self.scale() * self.derivs.eval(m, x)
        } else {
            self.scale() * phi0_derivative(m, x)
        }
    }

    /// `φ* = max φ = φ(0)`.
    pub fn peak(&self) -> f64 {
        self.eval(0.0)
    }

    /// `∫ |φ|^r` over the support.
    pub fn lr_norm_pow(&self, r: f64) -> f64 {
        midpoint_integral(
            |x| self.eval(x).abs().powf(r),
            -0.5,
            0.5,
            NORM_QUADRATURE_POINTS,
        )
    }

    pub fn l2_norm(&self) -> f64 {
        midpoint_integral(|x| self.eval(x).powi(2), -0.5, 0.5, NORM_QUADRATURE_POINTS).sqrt()
    }
}

/// Disjoint bumps `f_j(x) = δ^β φ((x − b_j)/δ)`, `b_j = (2j − 1)δ/2`,
/// `j = 1..=m`, `m = ⌊1/δ⌋`.
#[derive(Debug, Clone)]
pub struct BumpFamily {
    pub delta: f64,
    pub m: usize,
    amplitude: f64,
    basic: Arc<BasicFunction>,
}

/// `⌊1/δ⌋`, tolerant of `1/δ` landing a rounding error below an integer.
pub fn bump_count(delta: f64) -> usize {
    (1.0 / delta + 1e-9).floor() as usize
}

impl BumpFamily {
    pub fn new(delta: f64, basic: &BasicFunction) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(invalid("delta", format!("{delta} not in (0, 1]")));
        }
        Ok(Self {
            delta,
            m: bump_count(delta),
            amplitude: delta.powf(basic.beta),
            basic: Arc::new(basic.clone()),
        })
    }

    pub fn basic(&self) -> &BasicFunction {
        &self.basic
    }

    /// `δ^β`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn center(&self, j: usize) -> f64 {
        (2 * j - 1) as f64 * self.delta / 2.0
    }

    #[inline]
    pub fn bump(&self, j: usize, x: f64) -> f64 {
        self.amplitude * self.basic.eval((x - self.center(j)) / self.delta)
    }

    /// Index of the only bump whose support can contain `x`.
    #[inline]
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x > 0.0) {
            return None;
        }
        let j = (x / self.delta).floor() as usize + 1;
        (j <= self.m).then_some(j)
    }

    /// `Σ_j c_j f_j(x)`, touching only the bump under `x`.
    #[inline]
    pub fn combination(&self, bits: &[bool], x: f64) -> f64 {
        match self.locate(x) {
            Some(j) if bits[j - 1] => self.bump(j, x),
            _ => 0.0,
        }
    }
}

pub fn bump_function(j: usize, delta: f64, bf: &BasicFunction) -> Result<FunctionHandle> {
    let family = BumpFamily::new(delta, bf)?;
    if j == 0 || j > family.m {
        return Err(Error::IndexOutOfRange {
            index: j,
            max: family.m,
        });
    }
    let spec = HolderSpec::without_floor(bf.beta, bf.l / 2.0);
    Ok(FunctionHandle::new(
        format!("bump[j={j}, delta={delta}]"),
        spec,
        move |x| family.bump(j, x),
    ))
}

/// `g(x) = 1 − Σ_j w_j f_j(x)` for a codeword `w` of length `⌊1/δ⌋`.
pub fn hypothesis_function(
    codeword: &[bool],
    delta: f64,
    bf: &BasicFunction,
    h_floor: f64,
) -> Result<FunctionHandle> {
    let family = BumpFamily::new(delta, bf)?;
    if codeword.len() != family.m {
        return Err(Error::LengthMismatch {
            expected: family.m,
            actual: codeword.len(),
        });
    }
    if family.amplitude() * bf.peak() > 1.0 - h_floor {
        warn!(
            "hypothesis dips below the floor: δ^β φ* = {} > 1 − 𝔥 = {}",
            family.amplitude() * bf.peak(),
            1.0 - h_floor
        );
    }
    let spec = HolderSpec {
        beta: bf.beta,
        l: bf.l,
        h_floor,
    };
    let bits = codeword.to_vec();
    let label: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
    Ok(FunctionHandle::new(format!("g[{label}]"), spec, move |x| {
        1.0 - family.combination(&bits, x)
    }))
}

/// `ν₀ ≡ 1` followed by `ν_j = 1 − f_j`, `j = 1..=m`.
pub fn sup_norm_hypotheses(
    delta: f64,
    bf: &BasicFunction,
    h_floor: f64,
) -> Result<Vec<FunctionHandle>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("{delta} not in (0, 1)")));
    }
    let family = Arc::new(BumpFamily::new(delta, bf)?);
    let spec = HolderSpec {
        beta: bf.beta,
        l: bf.l,
        h_floor,
    };
    let mut out = Vec::with_capacity(family.m + 1);
    out.push(FunctionHandle::new("nu0", spec, |_| 1.0));
    for j in 1..=family.m {
        let fam = Arc::clone(&family);
        out.push(FunctionHandle::new(format!("nu{j}"), spec, move |x| {
            1.0 - fam.bump(j, x)
        }));
    }
    Ok(out)
}

/// Outcome of a finite-grid Hölder membership check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderReport {
    /// Derivative order checked (`k`).
    pub order: usize,
    /// `max |f^{(k)}(x) − f^{(k)}(y)| / |x − y|^{β−k}` over grid pairs.
    pub max_ratio: f64,
    pub bound: f64,
    pub holder_ok: bool,
    pub min_value: f64,
    pub max_value: f64,
    pub range_ok: bool,
}

impl HolderReport {
    pub fn passes(&self) -> bool {
        self.holder_ok && self.range_ok
    }
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn check_holder_membership(f: &FunctionHandle, grid_size: usize) -> Result<HolderReport> {
    if grid_size < 100 {
        return Err(invalid("grid_size", format!("{grid_size} < 100")));
    }
    let spec = f.spec;
    let k = spec.degree();
    let alpha = spec.beta - k as f64;
    let step = 1.0 / (grid_size - 1) as f64;
    let xs: Vec<f64> = (0..grid_size).map(|j| j as f64 * step).collect();
    let values: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
    let (min_value, max_value) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });

    // central k-th difference with spacing `step`; stencil stays in [0, 1]
    let coeffs: Vec<(f64, f64)> = (0..=k)
        .map(|r| {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            (sign * binomial(k, r), (k as f64 / 2.0 - r as f64) * step)
        })
        .collect();
    let margin = k.div_ceil(2);
    let inv = step.powi(k as i32).recip();
    let derivs: Vec<f64> = xs[margin..grid_size - margin]
        .iter()
        .map(|&x| {
            if k == 0 {
                f.eval(x)
            } else {
                coeffs
                    .iter()
                    .map(|&(c, off)| c * f.eval(x + off))
                    .sum::<f64>()
                    * inv
            }
        })
        .collect();
    let lag_pow: Vec<f64> = (0..derivs.len())
        .map(|d| (d as f64 * step).powf(alpha))
        .collect();
    let mut max_ratio: f64 = 0.0;
    for a in 0..derivs.len() {
        let da = derivs[a];
        for (b, &db) in derivs.iter().enumerate().skip(a + 1) {
            let r = (da - db).abs() / lag_pow[b - a];
            if r > max_ratio {
                max_ratio = r;
            }
        }
    }
    let bound = spec.l;
    Ok(HolderReport {
        order: k,
        max_ratio,
        bound,
        holder_ok: max_ratio <= bound * (1.0 + HOLDER_TOLERANCE),
        min_value,
        max_value,
        range_ok: min_value >= spec.h_floor && max_value <= 1.0,
    })
}
