//! Randomized invariant checks across module boundaries.

use proptest::prelude::*;

use sparsejl::data_io::dispersion_of;
use sparsejl::embedding::{project_streaming, sample_matrix, EmbeddingHeader, Variant};
use sparsejl::moment_engine::{ratio, sum_moments};
use sparsejl::oracle::{self, robin_hood_transfer, sum_moment_by_enumeration, wilson_interval};
use sparsejl::rng;
use sparsejl::row_bound::{row_moment_bound_np, BoundParams};
use sparsejl::tail_bounds::{epsilon_bound, Mode, DEFAULT_D_MAX};
use sparsejl::Rational;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moment_pipeline_matches_enumeration(
        count in 1u64..=5,
        num in 1i64..=4,
        den in 8i64..=16,
        half_j in 1usize..=3,
    ) {
        let p = ratio(num, den);
        let j = 2 * half_j;
        let fast = sum_moments(&p, count, j).unwrap().moment(j).clone();
        let slow = sum_moment_by_enumeration(&p, count as usize, j).unwrap();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn row_bound_d2_is_4p(
        n in 2u64..=100_000,
        num in 1i64..=8,
        den in 16i64..=64,
        vq in 0.0f64..=1.0,
    ) {
        let p = ratio(num, den);
        let lo = 1.0 / (n as f64).sqrt();
        let v = lo + (1.0 - lo) * vq;
        let t = row_moment_bound_np(n, &p, v, 2).unwrap();
        let expect = 4.0 * num as f64 / den as f64;
        prop_assert!((t - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn apply_is_linear_and_streaming_matches(
        seed in any::<u64>(),
        n in 2usize..=24,
        m in 4usize..=16,
        s_off in 0usize..=3,
    ) {
        let s = 1 + s_off.min(m / 2 - 1);
        let e = sample_matrix(n, m, s, Variant::ColumnWor, seed).unwrap();
        let mut state = rng::SplitMix64::new(seed ^ 0x9e37);
        let x: Vec<f64> = (0..n).map(|_| state.next_f64() - 0.5).collect();
        let y: Vec<f64> = (0..n).map(|_| state.next_f64() - 0.5).collect();
        let a = 1.0 + state.next_f64();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + yi).collect();
        let left = e.apply(&combo).unwrap();
        let ax = e.apply(&x).unwrap();
        let ay = e.apply(&y).unwrap();
        for r in 0..m {
            prop_assert!((left[r] - (a * ax[r] + ay[r])).abs() < 1e-9);
        }
        // The streaming path reproduces sample-then-apply bit for bit.
        let streamed = project_streaming(n, m, s, seed, &x);
        prop_assert_eq!(streamed, ax);
    }

    #[test]
    fn header_round_trip(
        seed in any::<u64>(),
        n in 2usize..=40,
        m in 4usize..=20,
        variant_ix in 0usize..3,
    ) {
        let variant = [Variant::ColumnWor, Variant::RowWor, Variant::WithReplacement][variant_ix];
        let n = if variant == Variant::RowWor { n.max(3) } else { n };
        let s = 2.min(m / 2).max(1).min(n);
        let e = sample_matrix(n, m, s, variant, seed).unwrap();
        let json = serde_json::to_string(&e.header()).unwrap();
        let h: EmbeddingHeader = serde_json::from_str(&json).unwrap();
        let e2 = sparsejl::embedding::SparseEmbedding::from_header(&h).unwrap();
        for i in 0..n {
            prop_assert_eq!(e.column(i), e2.column(i));
        }
    }

    #[test]
    fn dispersion_in_range(diff in prop::collection::vec(-100.0f64..100.0, 1..20)) {
        prop_assume!(diff.iter().any(|d| *d != 0.0));
        let v = dispersion_of(&diff).unwrap();
        let n = diff.len() as f64;
        prop_assert!(v >= 1.0 / n.sqrt() - 1e-12 && v <= 1.0 + 1e-12);
    }

    #[test]
    fn robin_hood_preserves_sum_and_order(
        seed in any::<u64>(),
        ks in prop::collection::vec(1i64..=9, 2..=6),
    ) {
        let total: i64 = ks.iter().sum();
        let u: Vec<Rational> = ks.iter().map(|&k| ratio(k, total)).collect();
        let mut r = rng::SplitMix64::new(seed);
        let flat = robin_hood_transfer(&u, &mut r);
        let sum: Rational = flat.iter().cloned().sum();
        prop_assert_eq!(sum, ratio(1, 1));
        prop_assert!(oracle::majorizes(
            &oracle::rational_to_f64_vec(&u),
            &oracle::rational_to_f64_vec(&flat),
        ).unwrap());
    }

    #[test]
    fn floyd_sample_is_a_subset(seed in any::<u64>(), m in 1u64..=64, s_q in 0.0f64..=1.0) {
        let s = ((s_q * m as f64) as u64).clamp(1, m);
        let mut r = rng::SplitMix64::new(seed);
        let picks = rng::floyd_sample(&mut r, m, s);
        prop_assert_eq!(picks.len(), s as usize);
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), s as usize);
        prop_assert!(picks.iter().all(|&i| i < m as u32));
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate(
        successes in 0u64..=1000,
        extra in 0u64..=1000,
    ) {
        let trials = successes + extra.max(1);
        let (lo, hi) = wilson_interval(successes, trials, 2.5758293035489004);
        let phat = successes as f64 / trials as f64;
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!((0.0..=1.0).contains(&hi));
        prop_assert!(lo <= phat + 1e-12 && hi >= phat - 1e-12);
    }

    #[test]
    fn optimized_epsilon_never_worse(
        m in 20u64..=2000,
        s_q in 0.0f64..=0.5,
        delta in 1e-8f64..0.9,
        vq in 0.0f64..=1.0,
    ) {
        let s = ((s_q * m as f64) as u64).clamp(1, m / 2);
        let n = 10_000u64;
        let lo = 1.0 / (n as f64).sqrt();
        let v = lo + (1.0 - lo) * vq;
        let params = BoundParams::new(n, m, s, v).unwrap();
        let cor = epsilon_bound(&params, delta, Mode::Corollary, DEFAULT_D_MAX).unwrap();
        let opt = epsilon_bound(&params, delta, Mode::Optimized, DEFAULT_D_MAX).unwrap();
        prop_assert!(opt.epsilon <= cor.epsilon * (1.0 + 1e-12));
        // Markov at the returned order reproduces a failure bound <= delta.
        let markov = (opt.q / (params.s() as f64 * opt.epsilon)).powi(opt.d as i32);
        prop_assert!(markov <= delta * (1.0 + 1e-9));
    }
}
