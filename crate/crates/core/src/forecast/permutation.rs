//! Two-sample permutation test on the difference in means.

use rand::seq::SliceRandom;

use super::{ForecastError, Result};
use crate::rng;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Two-sided p-value of `|mean(a) - mean(b)|` under random relabelling,
/// smoothed as `(1 + hits) / (n_perm + 1)`.
///
/// The pooled sample is sorted before shuffling and the smaller group is
/// always drawn first, so `p(a, b) == p(b, a)` for the same seed.
pub fn permutation_test(a: &[f64], b: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(ForecastError::EmptySample);
    }
    if n_perm == 0 {
        return Err(ForecastError::InvalidOption(
            "n_perm must be at least 1".into(),
        ));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(ForecastError::NonFiniteScore);
    }

    let observed = (mean(a) - mean(b)).abs();
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let total: f64 = pooled.iter().sum();
    let m = a.len().min(b.len());
    let n = pooled.len() - m;
    // Absorbs summation-order rounding when the permuted split equals the
    // observed one.
    let slack = 1e-12 * pooled.iter().fold(1.0_f64, |s, x| s.max(x.abs()));

    let mut rng = rng::seeded(seed);
    let mut hits = 0usize;
    for _ in 0..n_perm {
        let (head, _) = pooled.partial_shuffle(&mut rng, m);
        let sum_m: f64 = head.iter().sum();
        let delta = (sum_m / m as f64 - (total - sum_m) / n as f64).abs();
        if delta >= observed - slack {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (n_perm + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_one() {
        let a = [0.0, 1.0, 0.0, 2.0, 1.0];
        assert_eq!(permutation_test(&a, &a, 999, 1).unwrap(), 1.0);
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = [0.0, 1.0, 0.0, 2.0, 1.0, 0.0];
        let b = [1.0, 3.0, 2.0];
        for seed in 0..5 {
            assert_eq!(
                permutation_test(&a, &b, 500, seed).unwrap(),
                permutation_test(&b, &a, 500, seed).unwrap()
            );
        }
    }

    #[test]
    fn always_in_unit_interval() {
        let p = permutation_test(&[0.0], &[5.0], 10, 3).unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(
            permutation_test(&[], &[1.0], 10, 0),
            Err(ForecastError::EmptySample)
        ));
    }
}
