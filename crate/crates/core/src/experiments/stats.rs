//! Rank statistics: ROC AUC, Wilcoxon signed-rank test, Spearman correlation.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::{Error, Result};

/// Largest sample size for which the Wilcoxon p-value is computed exactly.
pub const WILCOXON_EXACT_MAX: usize = 12;

/// 1-based ranks with ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `None` when either class is absent.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels must pair up");
    let positives = labels.iter().filter(|&&l| l != 0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l != 0).map(|(r, _)| r).sum();
    let p = positives as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Pairs with a non-zero difference.
    pub n: usize,
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank test of paired samples.
///
/// Zero differences are dropped and tied magnitudes share midranks. Exact for
/// `n <= 12`; otherwise a normal approximation with tie and continuity
/// correction. All-zero differences give `p = 1`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            n: 0,
            exact: true,
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&magnitudes);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);

    if n <= WILCOXON_EXACT_MAX {
        // Doubled midranks are integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut counts = vec![0u64; max_sum + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=max_sum).rev() {
                counts[s] += counts[s - r];
            }
        }
        let limit = (w * 2.0).round() as usize;
        let tail: u64 = counts[..=limit].iter().sum();
        let p = 2.0 * tail as f64 / (1u64 << n) as f64;
        return Ok(WilcoxonResult {
            statistic: w,
            p_value: p.min(1.0),
            n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(WilcoxonResult {
        statistic: w,
        p_value: (2.0 * (1.0 - normal.cdf(z))).min(1.0),
        n,
        exact: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Spearman's rank correlation with a two-sided Student-t p-value.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Undefined(format!(
            "spearman correlation needs at least 3 points, got {n}"
        )));
    }
    let rx = midranks(x);
    let ry = midranks(y);
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("spearman correlation of a constant sample".into()));
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = n as f64 - 2.0;
    let p_value = if rho.abs() == 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * (1.0 - dist.cdf(t.abs()))).min(1.0)
    };
    Ok(Correlation { rho, p_value, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_extremes() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]), Some(1.0));
        assert_eq!(roc_auc(&[0.2, 0.8], &[1, 0]), Some(0.0));
        assert_eq!(roc_auc(&[0.5, 0.5], &[1, 0]), Some(0.5));
        assert_eq!(roc_auc(&[0.1, 0.2], &[1, 1]), None);
    }

    #[test]
    fn wilcoxon_identical_samples() {
        let a = [0.3, 0.5, 0.9];
        let r = wilcoxon_signed_rank(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.n, 0);
    }

    #[test]
    fn wilcoxon_constant_shift_ten() {
        let b: Vec<f64> = (0..10).map(|i| i as f64 * 0.37).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 0.25).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        // All ten magnitudes tie: only the all-positive and all-negative sign
        // patterns reach W = 0.
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_length_mismatch() {
        assert!(wilcoxon_signed_rank(&[1.0], &[]).is_err());
    }

    #[test]
    fn spearman_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 8.0, 16.0, 32.0];
        assert_eq!(spearman_rho(&x, &y).unwrap().rho, 1.0);
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        assert_eq!(spearman_rho(&x, &rev).unwrap().rho, -1.0);
        assert!(matches!(spearman_rho(&x, &[1.0; 5]), Err(Error::Undefined(_))));
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
