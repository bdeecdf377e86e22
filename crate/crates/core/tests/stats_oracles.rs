use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use taxsim::experiments::{aggregate, mann_whitney_u, mann_whitney_u_with, MannWhitney, PValueMethod};

/// U of `a` by direct pair counting: wins count 1, ties 1/2.
fn pair_count_u(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }))
        .sum()
}

/// Two-sided exact p: relabel the pooled values every possible way (one
/// bitmask per labeling) and count labelings at least as far from the
/// null mean as the observed U.
fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let mean = (a.len() * b.len()) as f64 / 2.0;
    let observed = (pair_count_u(a, b) - mean).abs();
    let (mut extreme, mut total) = (0u32, 0u32);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let (x, y): (Vec<_>, Vec<_>) = (0..n).partition(|&i| mask & (1 << i) != 0);
        let xs: Vec<f64> = x.iter().map(|&i| pooled[i]).collect();
        let ys: Vec<f64> = y.iter().map(|&i| pooled[i]).collect();
        total += 1;
        if (pair_count_u(&xs, &ys) - mean).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    f64::from(extreme) / f64::from(total)
}

#[test]
fn exact_branch_matches_enumeration_for_all_small_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for na in 1..=6 {
        for nb in 1..=6 {
            for trial in 0..4 {
                // coarse values so some trials contain ties
                let draw = |rng: &mut ChaCha8Rng| {
                    if trial % 2 == 0 { f64::from(rng.random_range(0..5u8)) } else { rng.random::<f64>() }
                };
                let a: Vec<f64> = (0..na).map(|_| draw(&mut rng)).collect();
                let b: Vec<f64> = (0..nb).map(|_| draw(&mut rng)).collect();
                let r = mann_whitney_u(&a, &b).unwrap();
                assert_eq!(r.method, PValueMethod::Exact);
                assert!((r.u_a - pair_count_u(&a, &b)).abs() < 1e-12, "{a:?} {b:?}");
                assert!((r.p - brute_force_p(&a, &b)).abs() < 1e-12, "{a:?} {b:?}: {} vs {}", r.p, brute_force_p(&a, &b));
            }
        }
    }
}

#[test]
fn textbook_examples() {
    // Tortoise and hare finishing order T H H H H H T T T T T H: the
    // tortoises beat the hares 11 times.
    let tortoise = [1.0, 7.0, 8.0, 9.0, 10.0, 11.0];
    let hare = [2.0, 3.0, 4.0, 5.0, 6.0, 12.0];
    let r = mann_whitney_u(&tortoise, &hare).unwrap();
    assert_eq!(r.u_b, 11.0);
    assert_eq!(r.u_a, 25.0);

    // Five against four: U = 17 of 20, exact two-sided p = 14/126.
    let r = mann_whitney_u(&[19.0, 22.0, 16.0, 29.0, 24.0], &[20.0, 11.0, 17.0, 12.0]).unwrap();
    assert_eq!(r.u_a, 17.0);
    assert!((r.p - 14.0 / 126.0).abs() < 1e-12);
}

#[test]
fn normal_branch_agrees_with_exact_at_the_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let shift = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..200 {
        let delta: f64 = rng.random_range(0.0..2.0);
        let a: Vec<f64> = (0..8).map(|_| shift.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..8).map(|_| shift.sample(&mut rng) + delta).collect();
        let exact = mann_whitney_u_with(&a, &b, PValueMethod::Exact).unwrap();
        let normal = mann_whitney_u_with(&a, &b, PValueMethod::Normal).unwrap();
        assert!((exact.p - normal.p).abs() <= 0.02, "{} vs {}", exact.p, normal.p);
    }
}

#[test]
fn large_samples_use_normal_approximation() {
    let a: Vec<f64> = (0..30).map(f64::from).collect();
    let b: Vec<f64> = (0..30).map(|i| f64::from(i) + 100.0).collect();
    let MannWhitney { u_a, p, method, .. } = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(method, PValueMethod::Normal);
    assert_eq!(u_a, 0.0);
    assert!(p < 1e-9);
}

#[test]
fn aggregate_recovers_normal_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mu, sigma) = (3.0, 2.0);
    let dist = Normal::new(mu, sigma).unwrap();
    let se_mean = sigma / 10.0;
    let se_std = sigma / (2.0 * 99.0_f64).sqrt();
    // Each batch of 100 lands within 3 standard errors with probability
    // about 0.995; allow for the odd heavy-tailed batch among 20.
    let mut within = 0;
    for _ in 0..20 {
        let v: Vec<f64> = (0..100).map(|_| dist.sample(&mut rng)).collect();
        let a = aggregate(&v).unwrap();
        assert!(a.p5 <= a.p50 && a.p50 <= a.p95);
        if (a.mean - mu).abs() < 3.0 * se_mean && (a.std - sigma).abs() < 3.0 * se_std {
            within += 1;
        }
    }
    assert!(within >= 18, "{within} of 20 batches within 3 standard errors");
}

proptest! {
    #[test]
    fn aggregate_is_order_independent(v in prop::collection::vec(-1e6..1e6f64, 1..60), seed in any::<u64>()) {
        let mut shuffled = v.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(aggregate(&v).unwrap(), aggregate(&shuffled).unwrap());
    }

    #[test]
    fn u_statistics_sum_to_product(a in prop::collection::vec(0..10u8, 1..15), b in prop::collection::vec(0..10u8, 1..15)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        prop_assert!((r.u_a + r.u_b - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!((r.u_a - pair_count_u(&a, &b)).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&r.p));
    }
}
