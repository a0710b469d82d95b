//! Friedman rank sum test over a methods × datasets accuracy matrix.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    /// `accuracy[method][dataset]`
    pub accuracy: Vec<Vec<f64>>,
    /// `ranks[method][dataset]`, 1 = best, midranks on ties.
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
}

/// Midranks of `values` with rank 1 for the largest.
pub fn descending_midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman statistic with the tie-corrected denominator and its chi-squared
/// p-value on k−1 degrees of freedom. `accuracy` is indexed `[method][dataset]`.
pub fn friedman(accuracy: &[Vec<f64>]) -> Result<RankTable> {
    let k = accuracy.len();
    if k < 2 {
        return Err(Error::Invalid(format!("Friedman test needs >= 2 methods, got {k}")));
    }
    let n = accuracy[0].len();
    if n < 2 {
        return Err(Error::Invalid(format!("Friedman test needs >= 2 datasets, got {n}")));
    }
    if accuracy.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("ragged accuracy matrix".into()));
    }
    if accuracy.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite accuracy".into()));
    }
    let mut ranks = vec![vec![0.0; n]; k];
    let mut tie_sum = 0.0;
    for d in 0..n {
        let column: Vec<f64> = accuracy.iter().map(|row| row[d]).collect();
        let r = descending_midranks(&column);
        for (m, v) in r.iter().enumerate() {
            ranks[m][d] = *v;
        }
        let mut sorted = column;
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < k {
            let mut j = i;
            while j + 1 < k && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_sum += t * t * t - t;
            i = j + 1;
        }
    }
    let (kf, nf) = (k as f64, n as f64);
    let rank_sums: Vec<f64> = ranks.iter().map(|r| r.iter().sum()).collect();
    let expected = nf * (kf + 1.0) / 2.0;
    let numerator = 12.0 * rank_sums.iter().map(|r| (r - expected).powi(2)).sum::<f64>();
    let denominator = nf * kf * (kf + 1.0) - tie_sum / (kf - 1.0);
    let (statistic, p_value) = if numerator == 0.0 || denominator <= 0.0 {
        (0.0, 1.0)
    } else {
        let s = numerator / denominator;
        let chi = ChiSquared::new(kf - 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
        (s, chi.sf(s))
    };
    Ok(RankTable {
        accuracy: accuracy.to_vec(),
        mean_ranks: rank_sums.iter().map(|r| r / nf).collect(),
        ranks,
        statistic,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks() {
        assert_eq!(descending_midranks(&[0.9, 0.8, 0.7]), vec![1.0, 2.0, 3.0]);
        assert_eq!(descending_midranks(&[0.5, 0.9, 0.5]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn constant_matrix_gives_zero() {
        let t = friedman(&vec![vec![0.8; 6]; 5]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        for d in 0..6 {
            let s: f64 = t.ranks.iter().map(|r| r[d]).sum();
            assert_eq!(s, 15.0);
        }
    }

    #[test]
    fn dominant_method() {
        // method 0 always best, method 2 always worst, n = 4
        let acc = vec![vec![0.9, 0.95, 0.8, 0.85], vec![0.8, 0.9, 0.7, 0.8], vec![0.7, 0.6, 0.5, 0.6]];
        let t = friedman(&acc).unwrap();
        assert_eq!(t.mean_ranks, vec![1.0, 2.0, 3.0]);
        // 12n/(k(k+1)) * sum (Rbar - 2)^2 = 12*4/12 * 2 = 8
        assert!((t.statistic - 8.0).abs() < 1e-12);
        assert!((t.p_value - (-4.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_or_ragged() {
        assert!(friedman(&[vec![0.1, 0.2]]).is_err());
        assert!(friedman(&[vec![0.1], vec![0.2]]).is_err());
        assert!(friedman(&[vec![0.1, 0.2], vec![0.2]]).is_err());
    }
}
