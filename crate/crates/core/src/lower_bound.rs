//! Lower-bound apparatus: the separation scale `δ_n`, Gilbert–Varshamov
//! packings of the hypercube, the Gaussian likelihood ratio between the
//! constant hypothesis and a bumped one, and a Monte Carlo look at how often
//! that ratio clears `M^{−λ}`.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::holder::{
    bump_count, hypothesis_function, midpoint_integral, BasicFunction, BumpFamily, FunctionHandle,
};
use crate::noise::{derive_seed, fill_speckle, ObservationSet, StreamRng};
use rand::RngCore;

/// Candidate draws allowed in the randomised packing search.
pub const GV_ATTEMPT_BUDGET: u64 = 1_000_000;
/// Midpoint cells on `[0, 1]` for L₂ separations.
pub const SEPARATION_QUADRATURE_POINTS: usize = 1 << 16;
pub const SEPARATION_TOLERANCE: f64 = 0.02;
/// Target lower-tail probability in the likelihood-ratio diagnostic.
pub const LR_TARGET: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaChoice {
    pub delta: f64,
    /// `⌊1/δ⌋`
    pub m: usize,
}

impl DeltaChoice {
    fn from_delta(delta: f64) -> Self {
        Self {
            delta,
            m: bump_count(delta),
        }
    }
}

/// `δ = (max(1, σ⁴)/n)^{1/(2β+1)}`.
pub fn delta_l2(n: usize, sigma: f64, beta: f64) -> DeltaChoice {
    assert!(n >= 2, "delta_l2 needs n ≥ 2");
    let scale = sigma.powi(4).max(1.0);
    DeltaChoice::from_delta((scale / n as f64).powf(1.0 / (2.0 * beta + 1.0)))
}

/// `δ = (ln t / t)^{1/(2β+1)}` with `t = n/(1 + σ²)²`; requires `t > e`.
pub fn delta_sup(n: usize, sigma: f64, beta: f64) -> Result<DeltaChoice> {
    let t = n as f64 / (1.0 + sigma * sigma).powi(2);
    if !(t > std::f64::consts::E) {
        return Err(Error::Domain(format!(
            "n/(1+σ²)² = {t} must exceed e for the sup-norm separation"
        )));
    }
    Ok(DeltaChoice::from_delta(
        (t.ln() / t).powf(1.0 / (2.0 * beta + 1.0)),
    ))
}

fn serialize_words<S: Serializer>(
    words: &[Vec<bool>],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(words.iter().map(|w| codeword_string(w)))
}

pub fn codeword_string(w: &[bool]) -> String {
    w.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn weight(w: &[bool]) -> usize {
    w.iter().filter(|&&b| b).count()
}

/// Binary codewords with pairwise Hamming distance and weight bounded below.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingSet {
    pub m: usize,
    #[serde(serialize_with = "serialize_words")]
    pub codewords: Vec<Vec<bool>>,
    /// Smallest pairwise Hamming distance actually attained.
    pub min_distance: usize,
    /// Smallest codeword weight actually attained.
    pub min_weight: usize,
    /// `⌈m/16⌉`
    pub required_distance: usize,
    /// `⌈2^{m/8}⌉`
    pub required_size: usize,
}

/// Exhaustive re-check of a packing's guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PackingAudit {
    pub size_ok: bool,
    pub distance_ok: bool,
    pub weight_ok: bool,
    pub pairs_checked: usize,
}

impl PackingAudit {
    pub fn passes(&self) -> bool {
        self.size_ok && self.distance_ok && self.weight_ok
    }
}

pub fn required_size(m: usize) -> usize {
    2f64.powf(m as f64 / 8.0).ceil() as usize
}

pub fn required_distance(m: usize) -> usize {
    m.div_ceil(16)
}

impl PackingSet {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Recomputes distances and weights over all pairs.
    pub fn audit(&self) -> PackingAudit {
        let d = self.required_distance;
        let mut distance_ok = true;
        let mut pairs = 0;
        for (a, wa) in self.codewords.iter().enumerate() {
            for wb in &self.codewords[a + 1..] {
                pairs += 1;
                distance_ok &= hamming(wa, wb) >= d;
            }
        }
        PackingAudit {
            size_ok: self.codewords.len() >= self.required_size,
            distance_ok,
            weight_ok: self.codewords.iter().all(|w| weight(w) >= d),
            pairs_checked: pairs,
        }
    }
}

/// Randomised greedy packing: draw uniform words, keep those at distance
/// `≥ ⌈m/16⌉` from everything kept so far and with at least `⌈m/16⌉` ones,
/// stop at `⌈2^{m/8}⌉` words.
pub fn gilbert_varshamov(m: usize, seed: u64) -> Result<PackingSet> {
    if m < 8 {
        return Err(invalid("m", format!("code length {m} < 8")));
    }
    let target = required_size(m);
    let d = required_distance(m) as u32;
    let words = m.div_ceil(64);
    let tail_mask = if m % 64 == 0 {
        u64::MAX
    } else {
        (1u64 << (m % 64)) - 1
    };
    let mut rng = StreamRng::new(derive_seed(seed, m as u64));
    let mut accepted: Vec<Vec<u64>> = Vec::with_capacity(target);
    let mut attempts = 0u64;
    while accepted.len() < target {
        if attempts >= GV_ATTEMPT_BUDGET {
            return Err(Error::SearchExhausted {
                attempts,
                found: accepted.len(),
                target,
            });
        }
        attempts += 1;
        let mut cand: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
        *cand.last_mut().unwrap() &= tail_mask;
        let wt: u32 = cand.iter().map(|w| w.count_ones()).sum();
        if wt < d {
            continue;
        }
        let far = accepted.iter().all(|other| {
            other
                .iter()
                .zip(&cand)
                .map(|(a, b)| (a ^ b).count_ones())
                .sum::<u32>()
                >= d
        });
        if far {
            accepted.push(cand);
        }
    }
    let codewords: Vec<Vec<bool>> = accepted
        .iter()
        .map(|w| (0..m).map(|j| (w[j / 64] >> (j % 64)) & 1 == 1).collect())
        .collect();
    let mut min_distance = usize::MAX;
    for (a, wa) in codewords.iter().enumerate() {
        for wb in &codewords[a + 1..] {
            min_distance = min_distance.min(hamming(wa, wb));
        }
    }
    let min_weight = codewords.iter().map(|w| weight(w)).min().unwrap_or(0);
    Ok(PackingSet {
        m,
        codewords,
        min_distance,
        min_weight,
        required_distance: d as usize,
        required_size: target,
    })
}

/// Closed-form `log Λ(ν₀, ν)` with `ν₀ ≡ 1`, from `ν(i/n)` and the data.
pub fn log_likelihood_ratio_values(nu_values: &[f64], ys: &[f64], sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let null_var = 1.0 + s2;
    nu_values
        .iter()
        .zip(ys)
        .map(|(&nu, &y)| {
            let alt_var = s2 + nu * nu;
            0.5 * y * y * (1.0 / alt_var - 1.0 / null_var) + 0.5 * (alt_var / null_var).ln()
        })
        .sum()
}

/// `log Λ(ν₀, ν_l) = Σ_i [ (y_i²/2)(1/(σ²+ν_l²) − 1/(1+σ²)) + ½ log((σ²+ν_l²)/(1+σ²)) ]`,
/// the log density ratio of the data under `ν₀ ≡ 1` against `ν_l`.
pub fn log_likelihood_ratio(
    nu0: &FunctionHandle,
    nul: &FunctionHandle,
    obs: &ObservationSet,
) -> Result<f64> {
    if let Some(x) = obs.xs.iter().find(|&&x| nu0.eval(x) != 1.0) {
        return Err(invalid(
            "nu0",
            format!("closed form needs ν₀ ≡ 1, got ν₀({x}) = {}", nu0.eval(*x)),
        ));
    }
    let nu: Vec<f64> = obs.xs.iter().map(|&x| nul.eval(x)).collect();
    Ok(log_likelihood_ratio_values(&nu, &obs.ys, obs.sigma))
}

/// Inputs of [`lr_lemma_diagnostic`].
#[derive(Debug, Clone, Copy)]
pub struct LrCheck<'a> {
    pub packing: &'a PackingSet,
    pub basic: &'a BasicFunction,
    /// `0` selects the all-zero codeword (`ν₀` itself); `l ≥ 1` selects
    /// `packing.codewords[l − 1]`.
    pub l: usize,
    pub n: usize,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub h_floor: f64,
    /// Replaces `λ_l = √(C_l/2)` when set.
    pub lambda_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrDiagnostic {
    pub l: usize,
    pub lambda_l: f64,
    #[serde(rename = "M")]
    pub packing_size: usize,
    pub trials: usize,
    pub hits: usize,
    pub hit_rate: f64,
    /// 95% Wilson interval for the hit probability.
    pub ci_low: f64,
    pub ci_high: f64,
    pub target: f64,
    pub threshold: f64,
    pub mean_log_lr: f64,
    pub delta: f64,
    pub phi_l2_norm: f64,
    /// `‖φ‖₂ < 1/10`
    pub l2_smallness_ok: bool,
    /// `‖φ‖₂ < 1/(4√(2β+1))`
    pub sup_smallness_ok: bool,
}

pub fn wilson_interval(hits: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Samples `trials` data sets under `ν_l` and counts how often
/// `log Λ(ν₀, ν_l) > −λ_l log M`.
pub fn lr_lemma_diagnostic(check: &LrCheck<'_>) -> Result<LrDiagnostic> {
    let beta = check.basic.beta;
    let DeltaChoice { delta, m } = delta_l2(check.n, check.sigma, beta);
    if m != check.packing.m {
        return Err(invalid(
            "packing",
            format!(
                "code length {} but δ = {delta} implies m = {m}",
                check.packing.m
            ),
        ));
    }
    if check.l > check.packing.len() {
        return Err(Error::IndexOutOfRange {
            index: check.l,
            max: check.packing.len(),
        });
    }
    let word = if check.l == 0 {
        vec![false; m]
    } else {
        check.packing.codewords[check.l - 1].clone()
    };
    let nu = hypothesis_function(&word, delta, check.basic, check.h_floor)?;
    let nu_values = nu.on_design(check.n);
    let c_l = weight(&word) as f64 / m as f64;
    let lambda_l = check.lambda_override.unwrap_or((c_l / 2.0).sqrt());
    let packing_size = check.packing.len();
    let threshold = -lambda_l * (packing_size as f64).ln();

    let outcomes: Vec<f64> = (0..check.trials as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; check.n],
            |ys, t| {
                fill_speckle(&nu_values, 1.0, check.sigma, derive_seed(check.seed, t), ys);
                log_likelihood_ratio_values(&nu_values, ys, check.sigma)
            },
        )
        .collect();
    let hits = outcomes.iter().filter(|&&v| v > threshold).count();
    let mean_log_lr = outcomes.iter().sum::<f64>() / outcomes.len().max(1) as f64;
    let (ci_low, ci_high) = wilson_interval(hits, check.trials, 1.959_963_984_540_054);
    let phi_l2_norm = check.basic.l2_norm();
    Ok(LrDiagnostic {
        l: check.l,
        lambda_l,
        packing_size,
        trials: check.trials,
        hits,
        hit_rate: hits as f64 / check.trials.max(1) as f64,
        ci_low,
        ci_high,
        target: LR_TARGET,
        threshold,
        mean_log_lr,
        delta,
        phi_l2_norm,
        l2_smallness_ok: phi_l2_norm < 0.1,
        sup_smallness_ok: phi_l2_norm < 1.0 / (4.0 * (2.0 * beta + 1.0).sqrt()),
    })
}

/// Direct midpoint-rule `‖f − g‖₂` on `[0, 1]`.
pub fn l2_distance(f: &FunctionHandle, g: &FunctionHandle, points: usize) -> f64 {
    midpoint_integral(|x| (f.eval(x) - g.eval(x)).powi(2), 0.0, 1.0, points).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationAudit {
    pub delta: f64,
    /// Smallest `‖ν_a − ν_b‖₂` over all pairs, `ν₀ ≡ 1` included.
    pub min_separation: f64,
    /// `√(m/16) δ^{β+½} ‖φ‖₂`
    pub bound: f64,
    /// Largest relative gap between a bump's quadrature norm² and
    /// `δ^{2β+1} ‖φ‖₂²`.
    pub pythagoras_rel_error: f64,
    pub passes: bool,
}

/// Per-bump quadrature `∫ f_j²` on the shared midpoint grid.
fn bump_square_masses(family: &BumpFamily, points: usize) -> Vec<f64> {
    let dx = 1.0 / points as f64;
    let mut mass = vec![0.0; family.m];
    for c in 0..points {
        let x = (c as f64 + 0.5) * dx;
        if let Some(j) = family.locate(x) {
            mass[j - 1] += family.bump(j, x).powi(2) * dx;
        }
    }
    mass
}

/// L₂ separations of the hypotheses `1 − Σ_j w_j f_j` indexed by the packing.
///
/// Each midpoint cell lies in at most one bump support, so the grid
/// quadrature of `(ν_a − ν_b)²` is the sum of per-bump quadratures over the
/// positions where the words differ.
pub fn packing_l2_separation(
    packing: &PackingSet,
    delta: f64,
    bf: &BasicFunction,
) -> Result<SeparationAudit> {
    let family = BumpFamily::new(delta, bf)?;
    if family.m < packing.m {
        return Err(invalid(
            "delta",
            format!("δ·m = {} exceeds 1", delta * packing.m as f64),
        ));
    }
    let mass = bump_square_masses(&family, SEPARATION_QUADRATURE_POINTS);
    let phi_l2 = bf.l2_norm();
    let exact = delta.powf(2.0 * bf.beta + 1.0) * phi_l2 * phi_l2;
    let pythagoras_rel_error = mass[..packing.m]
        .iter()
        .map(|q| (q - exact).abs() / exact)
        .fold(0.0, f64::max);

    let zero = vec![false; packing.m];
    let words: Vec<&Vec<bool>> = std::iter::once(&zero).chain(&packing.codewords).collect();
    let mut min_sq = f64::INFINITY;
    for (a, wa) in words.iter().enumerate() {
        for wb in &words[a + 1..] {
            let d2: f64 = (0..packing.m)
                .filter(|&j| wa[j] != wb[j])
                .map(|j| mass[j])
                .sum();
            min_sq = min_sq.min(d2);
        }
    }
    let min_separation = min_sq.sqrt();
    let bound = (packing.m as f64 / 16.0).sqrt() * delta.powf(bf.beta + 0.5) * phi_l2;
    Ok(SeparationAudit {
        delta,
        min_separation,
        bound,
        pythagoras_rel_error,
        passes: min_separation >= bound * (1.0 - SEPARATION_TOLERANCE),
    })
}
