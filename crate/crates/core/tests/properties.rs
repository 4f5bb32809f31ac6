use proptest::prelude::*;

use bayescp::belief::{DiscountedBelief, ExactBelief, QuantizedBelief, Schedule};
use bayescp::{Algorithm, Predictor, PredictorConfig, Prior};

fn configs() -> Vec<PredictorConfig> {
    let mut q = PredictorConfig::new(Algorithm::Quantized);
    q.grid_size = Some(17);
    let mut d = PredictorConfig::new(Algorithm::Discounted);
    d.grid_size = Some(23);
    d.beta = Some(0.8);
    vec![
        PredictorConfig::new(Algorithm::Bayesian),
        q,
        d,
        PredictorConfig::new(Algorithm::Erm),
        PredictorConfig::new(Algorithm::MultiOgd),
    ]
}

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// What was asked in earlier rounds does not change later thresholds.
    #[test]
    fn thresholds_ignore_query_history(
        xs in scores(),
        asked in prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 0..4), 60),
        probe in 0.0..=1.0f64,
    ) {
        for cfg in configs() {
            let mut quiet = cfg.build(None).unwrap();
            let mut chatty = cfg.build(None).unwrap();
            for (t, &x) in xs.iter().enumerate() {
                for &a in &asked[t] {
                    chatty.predict(a).unwrap();
                }
                prop_assert_eq!(
                    quiet.threshold(probe).unwrap().to_bits(),
                    chatty.threshold(probe).unwrap().to_bits()
                );
                quiet.update(x).unwrap();
                chatty.update(x).unwrap();
            }
        }
    }

    #[test]
    fn thresholds_monotone_in_level(xs in scores(), mut levels in prop::collection::vec(0.0..=1.0f64, 2..12)) {
        levels.sort_by(f64::total_cmp);
        for cfg in configs().into_iter().filter(|c| c.algorithm != Algorithm::MultiOgd) {
            let mut p = cfg.build(None).unwrap();
            for &x in &xs {
                let th: Vec<f64> = levels.iter().map(|&a| p.threshold(a).unwrap()).collect();
                prop_assert!(th.windows(2).all(|w| w[0] <= w[1]), "{} {:?}", cfg.label(), th);
                p.update(x).unwrap();
            }
        }
    }

    /// ERM is the zero-step-size member of the Bayesian family once data exists.
    #[test]
    fn erm_is_bayesian_with_zero_step(xs in scores(), alpha in 0.0..=1.0f64) {
        let mut erm = PredictorConfig::new(Algorithm::Erm).build(None).unwrap();
        let mut zero = PredictorConfig::new(Algorithm::Bayesian);
        zero.schedule = Some(Schedule::Constant(0.0));
        let mut zero = zero.build(None).unwrap();
        for &x in &xs {
            erm.update(x).unwrap();
            zero.update(x).unwrap();
            prop_assert_eq!(erm.threshold(alpha).unwrap(), zero.threshold(alpha).unwrap());
        }
    }

    /// The quantile is the smallest point where the mixture CDF reaches alpha.
    #[test]
    fn quantile_is_minimal_crossing(
        xs in scores(),
        lambda in 0.0..=1.0f64,
        alpha in 0.001..0.999f64,
        knot in 0.1..0.9f64,
        mass in 0.1..0.9f64,
    ) {
        let prior = Prior::from_knots(vec![(0.0, 0.0), (knot, mass), (1.0, 1.0)]).unwrap();
        let mut e = ExactBelief::new(prior);
        for &x in &xs {
            e.observe(x).unwrap();
        }
        let q = e.quantile(lambda, alpha);
        prop_assert!(e.cdf(lambda, q) >= alpha - 1e-12);
        let below = q - 1e-9;
        if below >= 0.0 {
            prop_assert!(e.cdf(lambda, below) < alpha + 1e-12);
        }
    }

    #[test]
    fn mixture_cdf_matches_direct_count(xs in scores(), lambda in 0.0..=1.0f64, r in 0.0..=1.0f64) {
        let mut e = ExactBelief::new(Prior::uniform(1.0).unwrap());
        for &x in &xs {
            e.observe(x).unwrap();
        }
        let k = xs.iter().filter(|&&x| x <= r).count() as f64;
        let direct = lambda * r + (1.0 - lambda) * k / xs.len() as f64;
        prop_assert!((e.cdf(lambda, r) - direct).abs() < 1e-12);
    }

    #[test]
    fn engines_are_permutation_invariant(xs in scores(), seed in any::<u64>(), alpha in 0.0..=1.0f64) {
        let mut ys = xs.clone();
        // Fisher-Yates driven by a splitmix sequence
        let mut s = seed;
        for i in (1..ys.len()).rev() {
            s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            ys.swap(i, (z ^ (z >> 31)) as usize % (i + 1));
        }
        let prior = Prior::uniform(1.0).unwrap();
        let lambda = 0.3;
        let (mut a, mut b) = (ExactBelief::new(prior.clone()), ExactBelief::new(prior.clone()));
        let (mut qa, mut qb) = (
            QuantizedBelief::new(prior.clone(), 13).unwrap(),
            QuantizedBelief::new(prior, 13).unwrap(),
        );
        for (&x, &y) in xs.iter().zip(&ys) {
            a.observe(x).unwrap();
            b.observe(y).unwrap();
            qa.observe(x).unwrap();
            qb.observe(y).unwrap();
        }
        prop_assert_eq!(a.quantile(lambda, alpha).to_bits(), b.quantile(lambda, alpha).to_bits());
        prop_assert_eq!(qa.quantile(lambda, alpha).to_bits(), qb.quantile(lambda, alpha).to_bits());
    }

    /// Discounted belief with beta near 0 keeps only the last score (plus the prior).
    #[test]
    fn tiny_discount_forgets(xs in scores(), alpha in 0.01..0.99f64) {
        let prior = Prior::uniform(1.0).unwrap();
        let mut d = DiscountedBelief::new(prior.clone(), 101, 1e-9).unwrap();
        for &x in &xs {
            d.observe(x).unwrap();
        }
        let mut last = QuantizedBelief::new(prior, 101).unwrap();
        last.observe(*xs.last().unwrap()).unwrap();
        let lambda = 0.4;
        prop_assert!((d.quantile(lambda, alpha) - last.quantile(lambda, alpha)).abs() < 1e-6);
    }
}

#[test]
fn snapshot_midway_matches_uninterrupted_run() {
    let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
    for cfg in configs() {
        let mut whole = cfg.build(None).unwrap();
        let mut first = cfg.build(None).unwrap();
        for &x in &xs[..100] {
            whole.predict(0.7).unwrap();
            first.predict(0.7).unwrap();
            whole.update(x).unwrap();
            first.update(x).unwrap();
        }
        let mut resumed = Predictor::from_snapshot(&first.to_snapshot().unwrap()).unwrap();
        for &x in &xs[100..] {
            let a = whole.predict(0.7).unwrap();
            let b = resumed.predict(0.7).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "{}", cfg.label());
            assert_eq!(whole.update(x).unwrap(), resumed.update(x).unwrap());
        }
    }
}
