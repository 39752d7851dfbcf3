use lsbec::sample_realization;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

const SEEDS: u64 = 20_000;

#[test]
fn counts_follow_the_poisson_law() {
    let (length, nu) = (5.0, 1.2);
    let mean = nu * length;
    let mut hist = vec![0u64; 16];
    for s in 0..SEEDS {
        let m = sample_realization(length, nu, 11, s).unwrap().atom_count();
        hist[m.min(15)] += 1;
    }
    let law = Poisson::new(mean).unwrap();
    let mut probs: Vec<f64> = (0..15).map(|m| law.pmf(m)).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let chi2: f64 = hist
        .iter()
        .zip(&probs)
        .map(|(&o, &p)| {
            let e = p * SEEDS as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new((hist.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 = {chi2}, critical = {critical}");
}

#[test]
fn disjoint_halves_are_uncorrelated() {
    let (length, nu) = (10.0, 1.0);
    let pairs: Vec<(f64, f64)> = (0..SEEDS)
        .map(|s| {
            let c = sample_realization(length, nu, 12, s).unwrap();
            let left = c.atoms().iter().filter(|&&x| x < 0.0).count() as f64;
            (left, c.atom_count() as f64 - left)
        })
        .collect();
    let n = pairs.len() as f64;
    let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / n;
    let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / n;
    let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / n;
    let corr = cov / (va * vb).sqrt();
    assert!(corr.abs() < 0.05, "correlation {corr}");
}

#[test]
fn empty_box_frequency_matches_exp_minus_one() {
    let n = 100_000u64;
    let empty = (0..n).filter(|&s| sample_realization(1.0, 1.0, 13, s).unwrap().atom_count() == 0).count() as f64;
    let p = (-1.0f64).exp();
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((empty / n as f64 - p).abs() < 3.0 * sigma);
}
