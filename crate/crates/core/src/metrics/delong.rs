use serde::{Deserialize, Serialize};

use super::ScoredSet;
use crate::error::{Error, Result};

/// Outcome of DeLong's test for two correlated AUCs on the same samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeLongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    /// Estimated variance of `auc_a - auc_b`.
    pub variance: f64,
    pub z: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Standard normal CDF, `Φ(x) = erfc(-x/√2) / 2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// 1-based ranks with ties sharing their average rank.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean of (i+1..=j)
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Per-positive (`V10`) and per-negative (`V01`) structural components:
/// the mean of `ψ(x, y)` (1 if `x > y`, ½ if equal, 0 otherwise) against
/// every sample of the other class. Computed from midranks in O(N log N).
pub fn structural_components(set: &ScoredSet) -> Result<(Vec<f64>, Vec<f64>)> {
    set.require_both_classes("structural components")?;
    let pos: Vec<f64> = set.scores().iter().zip(set.labels()).filter(|(_, &y)| y).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = set.scores().iter().zip(set.labels()).filter(|(_, &y)| !y).map(|(&s, _)| s).collect();
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let combined: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    let rz = midranks(&combined);
    let rx = midranks(&pos);
    let ry = midranks(&neg);
    let v10 = (0..pos.len()).map(|i| (rz[i] - rx[i]) / n).collect();
    let v01 = (0..neg.len()).map(|j| 1.0 - (rz[pos.len() + j] - ry[j]) / m).collect();
    Ok((v10, v01))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample covariance (divisor `len - 1`).
fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0)
}

/// DeLong's nonparametric test of `H0: AUC_a = AUC_b` for two score vectors
/// over the same labelled samples.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<DeLongResult> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::Shape("DeLong: score vectors differ in length".into()));
    }
    let a = ScoredSet::new(scores_a.to_vec(), labels.to_vec())?;
    let b = ScoredSet::new(scores_b.to_vec(), labels.to_vec())?;
    let (v10a, v01a) = structural_components(&a)?;
    let (v10b, v01b) = structural_components(&b)?;
    let auc_a = super::auc(&a)?;
    let auc_b = super::auc(&b)?;
    let (m, n) = (v10a.len(), v01a.len());

    let identical = || DeLongResult { auc_a, auc_b, variance: 0.0, z: 0.0, p_value: 1.0 };
    if m < 2 || n < 2 {
        return if auc_a == auc_b { Ok(identical()) } else { Err(Error::DegenerateVariance { auc_a, auc_b }) };
    }
    let s10 = covariance(&v10a, &v10a) + covariance(&v10b, &v10b) - 2.0 * covariance(&v10a, &v10b);
    let s01 = covariance(&v01a, &v01a) + covariance(&v01b, &v01b) - 2.0 * covariance(&v01a, &v01b);
    let variance = (s10 / m as f64 + s01 / n as f64).max(0.0);
    if variance == 0.0 {
        return if auc_a == auc_b { Ok(identical()) } else { Err(Error::DegenerateVariance { auc_a, auc_b }) };
    }
    let z = (auc_a - auc_b) / variance.sqrt();
    let p_value = libm::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(DeLongResult { auc_a, auc_b, variance, z, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_scores_give_p_one() {
        let s = [0.1, 0.4, 0.35, 0.8, 0.2];
        let y = [false, true, false, true, false];
        let r = delong_test(&s, &s, &y).unwrap();
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn single_pair_is_degenerate() {
        let r = delong_test(&[0.9, 0.1], &[0.1, 0.9], &[true, false]);
        assert!(matches!(r, Err(Error::DegenerateVariance { .. })));
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-12);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
