use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::util;

fn mean_diff(diffs: &[f64], flips: impl Fn(usize) -> bool) -> f64 {
    let sum: f64 = diffs.iter().enumerate().map(|(i, &d)| if flips(i) { -d } else { d }).sum();
    (sum / diffs.len() as f64).abs()
}

/// Two-sided paired randomization test on per-query scores.
///
/// Each iteration swaps every query's `(a_i, b_i)` with probability 1/2 and
/// recomputes `|mean(a) - mean(b)|`; the p-value is
/// `(#{permuted >= observed} + 1) / (iterations + 1)`. Iteration `k` draws
/// from substream `k` of `seed`.
pub fn randomization_test(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Data(format!(
            "randomization test needs equal nonempty inputs, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if iterations == 0 {
        return Err(Error::Config("randomization test needs at least one iteration".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = mean_diff(&diffs, |_| false);
    // Permuted statistics that equal the observed one up to rounding count as ties.
    let threshold = observed - 1e-12 * observed.max(f64::MIN_POSITIVE);
    let count: usize = (0..iterations)
        .into_par_iter()
        .map(|k| {
            let mut rng = util::substream(seed, k as u64);
            let flips: Vec<bool> = (0..diffs.len()).map(|_| rng.random()).collect();
            usize::from(mean_diff(&diffs, |i| flips[i]) >= threshold)
        })
        .sum();
    Ok((count + 1) as f64 / (iterations + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_runs_give_one() {
        let a = [0.3, 0.5, 0.9];
        assert_eq!(randomization_test(&a, &a, 1000, 1).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(randomization_test(&[1.0], &[1.0, 2.0], 10, 1).is_err());
        assert!(randomization_test(&[], &[], 10, 1).is_err());
    }

    #[test]
    fn clear_difference_is_significant() {
        let a: Vec<f64> = (0..30).map(|i| 0.8 + 0.001 * i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| 0.5 + 0.002 * i as f64).collect();
        assert!(randomization_test(&a, &b, 2000, 7).unwrap() < 0.01);
    }
}
