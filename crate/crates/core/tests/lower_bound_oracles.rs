use despeckle::holder::{build_basic_function, hypothesis_function, midpoint_integral};
use despeckle::holder::{FunctionHandle, HolderSpec};
use despeckle::lower_bound::{
    gilbert_varshamov, hamming, log_likelihood_ratio, log_likelihood_ratio_values,
    packing_l2_separation, required_distance, required_size, weight,
};
use despeckle::noise::sample_speckle;
use proptest::prelude::*;
use statrs::distribution::{Continuous, Normal};

/// `Σ_i [log N(y_i; 0, 1+σ²) − log N(y_i; 0, σ²+ν_i²)]` from statrs densities.
fn density_oracle(nu: &[f64], ys: &[f64], sigma: f64) -> f64 {
    let null = Normal::new(0.0, (1.0 + sigma * sigma).sqrt()).unwrap();
    nu.iter()
        .zip(ys)
        .map(|(&v, &y)| {
            let alt = Normal::new(0.0, (sigma * sigma + v * v).sqrt()).unwrap();
            null.ln_pdf(y) - alt.ln_pdf(y)
        })
        .sum()
}

proptest! {
    #[test]
    fn closed_form_matches_density_sum(
        nu in prop::collection::vec(0.05f64..1.0, 1..100),
        sigma in 0.0f64..3.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let ys: Vec<f64> = nu.iter().map(|_| rng.random_range(-4.0..4.0)).collect();
        let a = log_likelihood_ratio_values(&nu, &ys, sigma);
        let b = density_oracle(&nu, &ys, sigma);
        prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn packings_hold_exhaustively(m in 8usize..=40, seed in any::<u64>()) {
        let p = gilbert_varshamov(m, seed).unwrap();
        prop_assert!(p.len() >= required_size(m));
        let d = required_distance(m);
        for (a, wa) in p.codewords.iter().enumerate() {
            prop_assert_eq!(wa.len(), m);
            prop_assert!(weight(wa) >= d);
            for wb in &p.codewords[a + 1..] {
                prop_assert!(hamming(wa, wb) >= d);
            }
        }
        prop_assert!(p.audit().passes());
        prop_assert_eq!(&p, &gilbert_varshamov(m, seed).unwrap());
    }
}

#[test]
fn handle_form_agrees_with_values_form() {
    let bf = build_basic_function(1.0, 1.0).unwrap();
    let p = gilbert_varshamov(16, 3).unwrap();
    let delta = 1.0 / 16.0;
    let nu = hypothesis_function(&p.codewords[0], delta, &bf, 0.1).unwrap();
    let nu0 = FunctionHandle::constant(1.0, nu.spec);
    let obs = sample_speckle(&nu, 300, 0.8, 17);
    let direct = log_likelihood_ratio(&nu0, &nu, &obs).unwrap();
    let oracle = density_oracle(&nu.on_design(300), &obs.ys, 0.8);
    assert!((direct - oracle).abs() <= 1e-8 * oracle.abs());
    let wrong = FunctionHandle::constant(0.9, HolderSpec::new(1.0, 1.0, 0.1).unwrap());
    assert!(log_likelihood_ratio(&wrong, &nu, &obs).is_err());
}

#[test]
fn norms_match_dense_quadrature() {
    for (beta, l) in [(1.0, 1.0), (2.0, 3.0), (2.5, 0.7)] {
        let bf = build_basic_function(beta, l).unwrap();
        for r in [1.0, 2.0, 3.0] {
            let dense = midpoint_integral(|x| bf.eval(x).abs().powf(r), -0.5, 0.5, 1 << 20);
            let rel = (bf.lr_norm_pow(r) - dense).abs() / dense;
            assert!(rel < 1e-4, "β={beta} r={r}: {rel}");
        }
    }
}

#[test]
fn separation_against_direct_quadrature() {
    let bf = build_basic_function(2.0, 1.0).unwrap();
    let p = gilbert_varshamov(16, 8).unwrap();
    let delta = 1.0 / 16.0;
    let audit = packing_l2_separation(&p, delta, &bf).unwrap();
    let hyps: Vec<FunctionHandle> = std::iter::once(vec![false; 16])
        .chain(p.codewords.iter().cloned())
        .map(|w| hypothesis_function(&w, delta, &bf, 0.0).unwrap())
        .collect();
    let mut min_direct = f64::INFINITY;
    for a in 0..hyps.len() {
        for b in a + 1..hyps.len() {
            min_direct = min_direct.min(despeckle::lower_bound::l2_distance(
                &hyps[a],
                &hyps[b],
                1 << 16,
            ));
        }
    }
    assert!((audit.min_separation - min_direct).abs() / min_direct < 1e-9);
    assert!(audit.passes);
}
