mod common;

use common::*;
use lnsum::montecarlo::{default_grid, simulate_cdf, simulated_quantiles, SumSampler};
use lnsum::normal;
use lnsum::report::PROBABILITY_COLUMNS;
use lnsum::{CdfGrid, SimConfig, SumSpec};

fn config(n: u64, threads: usize) -> SimConfig {
    SimConfig {
        sample_size: n,
        seed: 20240601,
        threads,
    }
}

#[test]
fn single_term_cdf_matches_closed_form() {
    let spec = SumSpec::single(1.5, 0.4, 1.0).unwrap();
    let (mu, s) = normal_params(&spec);
    let sigma = s[(0, 0)].sqrt();
    let n = 1_000_000u64;
    let grid = simulate_cdf(&spec, &default_grid(4.0, 400).unwrap(), &config(n, 0)).unwrap();
    for (x, p) in grid.iter() {
        let exact = normal::cdf(((x.ln() / THETA) - mu[0]) / sigma);
        let se = (exact * (1.0 - exact) / n as f64)
            .sqrt()
            .max(1.0 / n as f64);
        assert!(
            (p - exact).abs() <= 4.0 * se + 1e-12,
            "s={x}: {p} vs {exact}"
        );
    }
}

#[test]
fn single_term_median() {
    let spec = SumSpec::single(2.0, 1.0, 1.0).unwrap();
    let (mu, _) = normal_params(&spec);
    let q = simulated_quantiles(&spec, &[0.5], &config(1_000_000, 0)).unwrap()[0];
    let median = (THETA * mu[0]).exp();
    assert!(rel(q, median) < 5e-3, "{q} vs {median}");
}

#[test]
fn sample_moments_within_standard_errors() {
    let spec = finance(0.5);
    let sampler = SumSampler::new(&spec).unwrap();
    let (e, v) = lnsum::moments::sum_mean_var(&spec);
    let (mut n, mut s1, mut s2) = (0u64, 0.0f64, 0.0f64);
    for (block, len) in SumSampler::blocks(2_000_000) {
        sampler.for_each_in_block(5, block, len, |x| {
            n += 1;
            s1 += x;
            s2 += x * x;
        });
    }
    assert_eq!(n, 2_000_000);
    let mean = s1 / n as f64;
    let var = s2 / n as f64 - mean * mean;
    assert!((mean - e).abs() < 5.0 * (v / n as f64).sqrt());
    // variance of the sample variance is roughly 2v²/n for near-normal data
    assert!(
        (var - v).abs() < 5.0 * v * (3.0 / n as f64).sqrt(),
        "{var} vs {v}"
    );
}

#[test]
fn identical_across_thread_counts() {
    let spec = finance(0.75);
    let domain = default_grid(3.0, 300).unwrap();
    let runs: Vec<CdfGrid> = [1, 2, 8]
        .iter()
        .map(|&t| simulate_cdf(&spec, &domain, &config(300_000, t)).unwrap())
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn seed_changes_the_draws() {
    let spec = finance(0.5);
    let domain = default_grid(3.0, 300).unwrap();
    let a = simulate_cdf(&spec, &domain, &config(100_000, 0)).unwrap();
    let mut other = config(100_000, 0);
    other.seed += 1;
    let b = simulate_cdf(&spec, &domain, &other).unwrap();
    assert_ne!(a, b);
}

#[test]
fn cdf_is_monotone_and_bounded() {
    let spec = worked_example();
    let grid = simulate_cdf(
        &spec,
        &default_grid(30.0, 3000).unwrap(),
        &config(200_000, 0),
    )
    .unwrap();
    assert_eq!(grid.len(), 3000);
    assert!(grid.probabilities.windows(2).all(|w| w[0] <= w[1]));
    assert!(grid.probabilities.iter().all(|&p| (0.0..=1.0).contains(&p)));
}

#[test]
fn portfolio_quantiles_near_reference_at_moderate_n() {
    // 10⁶ draws: binomial error is a few 1e-4 in s at these probabilities
    let spec = finance(0.25);
    let q = simulated_quantiles(&spec, &PROBABILITY_COLUMNS, &config(1_000_000, 0)).unwrap();
    for (got, want) in q.iter().zip(SIMULATION[0]) {
        assert!((got - want).abs() < 0.006, "{got} vs {want}");
    }
}
