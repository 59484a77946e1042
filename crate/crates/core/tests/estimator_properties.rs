use despeckle::estimators::{midpoint_grid, root_clamp, Smoother};
use despeckle::holder::{FunctionHandle, HolderSpec};
use despeckle::noise::{fill_speckle, sample_speckle};
use proptest::prelude::*;

proptest! {
    #[test]
    fn clamp_is_monotone(a in -2.0f64..3.0, b in -2.0f64..3.0, floor in 0.01f64..0.99) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(root_clamp(lo, floor) <= root_clamp(hi, floor));
        let v = root_clamp(a, floor);
        prop_assert!(v >= floor && v <= 1.0);
    }

    #[test]
    fn risk_transfer(seed in any::<u64>(), floor in 0.05f64..0.6, sigma in 0.0f64..2.0, amp in 0.0f64..1.0) {
        // ‖f̂ − f‖₂ ≤ ‖ĝ − f²‖₂ / 𝔥 for f ≥ 𝔥
        let spec = HolderSpec::new(2.0, 50.0, floor).unwrap();
        let f = FunctionHandle::new("f", spec, move |x| floor + (1.0 - floor) * amp * x * x);
        let n = 400;
        let obs = sample_speckle(&f, n, sigma, seed);
        let grid = midpoint_grid(128);
        let sm = Smoother::new(&grid, spec, n, sigma, 0.2).unwrap();
        let curve = sm.despeckle(&obs.ys).unwrap();
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for ((&x, &fh), &g) in grid.iter().zip(&curve.values).zip(&curve.gsq_values) {
            lhs += (fh - f.eval(x)).powi(2);
            rhs += (g - f.eval(x).powi(2)).powi(2);
        }
        prop_assert!(lhs.sqrt() <= rhs.sqrt() / floor + 1e-12);
    }

    #[test]
    fn despeckle_values_follow_gsq(seed in any::<u64>()) {
        let spec = HolderSpec::new(1.0, 1.0, 0.2).unwrap();
        let grid = midpoint_grid(64);
        let sm = Smoother::new(&grid, spec, 200, 0.5, 0.3).unwrap();
        let fv = vec![0.6; 200];
        let mut ys = vec![0.0; 200];
        fill_speckle(&fv, 1.0, 0.5, seed, &mut ys);
        let c = sm.despeckle(&ys).unwrap();
        for (v, g) in c.values.iter().zip(&c.gsq_values) {
            prop_assert_eq!(*v, root_clamp(*g, 0.2));
        }
    }
}
