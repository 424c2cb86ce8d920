//! Randomized invariants over the special functions, sampling, and the
//! quote screens.

use num_complex::Complex64;
use proptest::prelude::*;

use rouvol::special::{char_exponent, erfc_complex};
use rouvol::{
    filter_convex, filter_monotonic, lhs_sample, FilterMode, ParameterBox, Quote,
    SubordinatorParams,
};

fn quote(strike: f64, mid_put: f64) -> Quote {
    Quote {
        strike,
        maturity_days: 48,
        ttm_years: 48.0 / 365.0,
        iv_call: 0.0,
        volume_call: 0.0,
        mid_call: 0.0,
        iv_put: 0.0,
        volume_put: 0.0,
        mid_put,
        spot: 0.1793,
        bid_call: 0.0,
        ask_call: 1.0,
        bid_put: 0.0,
        ask_put: 1.0,
    }
}

fn sorted_strikes(report_kept: &[Quote]) -> Vec<(u64, u64)> {
    let mut v: Vec<(u64, u64)> = report_kept
        .iter()
        .map(|q| (q.strike.to_bits(), q.mid_put.to_bits()))
        .collect();
    v.sort_unstable();
    v
}

proptest! {
    #[test]
    fn erfc_reflection(re in -8.0f64..8.0, im in -8.0f64..8.0) {
        let z = Complex64::new(re, im);
        let sum = erfc_complex(z) + erfc_complex(-z);
        let scale = erfc_complex(z).norm().max(1.0);
        prop_assert!((sum - Complex64::new(2.0, 0.0)).norm() <= 1e-12 * scale.max(2.0));
    }

    #[test]
    fn char_exponent_conjugate_symmetry(
        l in 0.01f64..100.0,
        a in 0.01f64..5.0,
        b in 0.05f64..5.0,
        c in 0.05f64..0.95,
    ) {
        let p = SubordinatorParams::new(a, b, c).unwrap();
        let plus = char_exponent(l, &p).unwrap();
        let minus = char_exponent(-l, &p).unwrap();
        prop_assert!((plus - minus.conj()).norm() <= 1e-13 * plus.norm().max(1.0));
        prop_assert!(plus.re <= 1e-12, "Re psi = {}", plus.re);
    }

    #[test]
    fn lhs_one_sample_per_stratum(n in 1usize..200, seed in 0u64..1000) {
        let pbox = ParameterBox::default();
        let samples = lhs_sample(n, &pbox, seed).unwrap();
        let (lo, hi) = pbox.a;
        let mut hit = vec![false; n];
        for s in &samples {
            let stratum = ((((s.a - lo) / (hi - lo)) * n as f64) as usize).min(n - 1);
            prop_assert!(!hit[stratum]);
            hit[stratum] = true;
        }
    }

    #[test]
    fn monotonicity_filter_is_idempotent(mids in prop::collection::vec(0.001f64..0.5, 2..40)) {
        let quotes: Vec<Quote> = mids
            .iter()
            .enumerate()
            .map(|(i, m)| quote(0.05 + 0.01 * i as f64, *m))
            .collect();
        let once = filter_monotonic(&quotes);
        let twice = filter_monotonic(&once.kept);
        prop_assert!(twice.dropped.is_empty());
        prop_assert_eq!(sorted_strikes(&once.kept), sorted_strikes(&twice.kept));
        // kept mids are non-decreasing in strike
        for w in once.kept.windows(2) {
            prop_assert!(w[1].mid_put >= w[0].mid_put);
        }
    }

    #[test]
    fn convexity_fixpoint_is_idempotent_and_order_insensitive(
        mids in prop::collection::vec(0.001f64..0.5, 3..30),
        seed in 0u64..100,
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        // feed an already-monotone panel, as the pipeline does
        let mut level = 0.0;
        let quotes: Vec<Quote> = mids
            .iter()
            .enumerate()
            .map(|(i, m)| {
                level += m;
                quote(0.05 + 0.01 * i as f64, level)
            })
            .collect();
        let once = filter_convex(&quotes, FilterMode::Fixpoint);
        let twice = filter_convex(&once.kept, FilterMode::Fixpoint);
        prop_assert!(twice.dropped.is_empty());
        let mut shuffled = quotes.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        shuffled.shuffle(&mut rng);
        let reordered = filter_convex(&shuffled, FilterMode::Fixpoint);
        prop_assert_eq!(sorted_strikes(&once.kept), sorted_strikes(&reordered.kept));
    }
}
