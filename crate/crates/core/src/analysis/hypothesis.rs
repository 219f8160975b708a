use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::stats::descending_ranks;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub p_value: f64,
    /// Mean within-block rank per treatment, 1 = best.
    pub mean_ranks: Vec<f64>,
    pub n_blocks: usize,
    pub k: usize,
}

/// Friedman test over `blocks[block][treatment]`; higher values rank
/// better and ties share average ranks.
pub fn friedman_test(blocks: &[Vec<f64>]) -> Result<FriedmanResult> {
    let n = blocks.len();
    if n < 2 {
        return Err(Error::Analysis(format!(
            "friedman test needs at least 2 blocks, have {n}"
        )));
    }
    let k = blocks[0].len();
    if k < 2 {
        return Err(Error::Analysis(format!(
            "friedman test needs at least 2 treatments, have {k}"
        )));
    }
    if let Some(b) = blocks.iter().position(|b| b.len() != k) {
        return Err(Error::Analysis(format!("block {b} has a missing cell")));
    }
    if blocks.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Analysis("friedman test needs finite values".into()));
    }
    let mut sums = vec![0.0; k];
    for b in blocks {
        for (s, r) in sums.iter_mut().zip(descending_ranks(b)) {
            *s += r;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let mean_ranks: Vec<f64> = sums.iter().map(|s| s / nf).collect();
    let sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let chi2 = (12.0 * nf / (kf * (kf + 1.0)) * sq - 3.0 * nf * (kf + 1.0)).max(0.0);
    let dist = ChiSquared::new(kf - 1.0).map_err(|e| Error::Analysis(e.to_string()))?;
    Ok(FriedmanResult {
        chi2,
        p_value: dist.sf(chi2).clamp(0.0, 1.0),
        mean_ranks,
        n_blocks: n,
        k,
    })
}

// two-tailed studentized range quantiles divided by sqrt(2), k = 2..=10
const Q_05: [f64; 9] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
];
const Q_10: [f64; 9] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920,
];

/// Nemenyi critical difference for `k` treatments over `n` blocks.
pub fn critical_difference(k: usize, n: usize, alpha: f64) -> Result<f64> {
    let table = if alpha == 0.05 {
        &Q_05
    } else if alpha == 0.10 {
        &Q_10
    } else {
        return Err(Error::Analysis(format!(
            "unsupported alpha {alpha} (expected 0.05 or 0.1)"
        )));
    };
    if !(2..=10).contains(&k) {
        return Err(Error::Analysis(format!(
            "unsupported k {k} (expected 2..=10)"
        )));
    }
    if n == 0 {
        return Err(Error::Analysis("n must be positive".into()));
    }
    let (kf, nf) = (k as f64, n as f64);
    Ok(table[k - 2] * (kf * (kf + 1.0) / (6.0 * nf)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    pub w_plus: f64,
    pub w_minus: f64,
    /// min(W+, W-).
    pub statistic: f64,
    /// Non-zero differences.
    pub n: usize,
    pub p_two_sided: f64,
    /// One-sided p for a > b.
    pub p_greater: f64,
    pub exact: bool,
}

pub const WILCOXON_MIN_N: usize = 5;
const EXACT_MAX_N: usize = 25;

/// Paired signed-rank test on `a - b`. Zero differences are dropped and
/// tied magnitudes share average ranks. Exact null distribution up to 25
/// pairs, normal approximation with continuity correction beyond.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Analysis(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|v| *v != 0.0)
        .collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Analysis("wilcoxon test needs finite values".into()));
    }
    let n = d.len();
    if n == 0 {
        return Err(Error::Analysis("all paired differences are zero".into()));
    }
    if n < WILCOXON_MIN_N {
        return Err(Error::Analysis(format!(
            "wilcoxon test needs at least {WILCOXON_MIN_N} non-zero differences, have {n}"
        )));
    }
    // ranks of |d| ascending, doubled so tied averages stay integral
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut rank2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        let r2 = (i + j + 2) as u64;
        for &o in &order[i..=j] {
            rank2[o] = r2;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let wp2: u64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| rank2[i]).sum();
    let total2: u64 = rank2.iter().sum();
    let w_plus = wp2 as f64 / 2.0;
    let w_minus = (total2 - wp2) as f64 / 2.0;

    let (p_greater, p_less, exact) = if n <= EXACT_MAX_N {
        let counts = signed_rank_counts(&rank2);
        let all: f64 = counts.iter().sum();
        let ge: f64 = counts[wp2 as usize..].iter().sum();
        let le: f64 = counts[..=wp2 as usize].iter().sum();
        (ge / all, le / all, true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let sd = var.sqrt();
        let z = Normal::standard();
        (
            z.sf((w_plus - mean - 0.5) / sd),
            z.cdf((w_plus - mean + 0.5) / sd),
            false,
        )
    };
    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        n,
        p_two_sided: (2.0 * p_greater.min(p_less)).min(1.0),
        p_greater,
        exact,
    })
}

/// Number of sign assignments giving each doubled positive rank sum.
fn signed_rank_counts(rank2: &[u64]) -> Vec<f64> {
    let total: usize = rank2.iter().sum::<u64>() as usize;
    let mut c = vec![0.0; total + 1];
    c[0] = 1.0;
    let mut reach = 0;
    for &r in rank2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if c[s] != 0.0 {
                c[s + r] += c[s];
            }
        }
        reach += r;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Rank sums by pairwise counting, then the rank-sum form of the statistic.
    fn friedman_oracle(blocks: &[Vec<f64>]) -> f64 {
        let n = blocks.len() as f64;
        let k = blocks[0].len();
        let mut r = vec![0.0; k];
        for b in blocks {
            for j in 0..k {
                let greater = b.iter().filter(|v| **v > b[j]).count() as f64;
                let equal = b.iter().filter(|v| **v == b[j]).count() as f64 - 1.0;
                r[j] += 1.0 + greater + equal / 2.0;
            }
        }
        let kf = k as f64;
        12.0 / (n * kf * (kf + 1.0)) * r.iter().map(|x| x * x).sum::<f64>() - 3.0 * n * (kf + 1.0)
    }

    /// Tail probabilities by enumerating every sign assignment of the ranks.
    fn wilcoxon_oracle(d: &[f64]) -> (f64, f64) {
        let n = d.len();
        let mut ranks = vec![0.0; n];
        for i in 0..n {
            let less = d.iter().filter(|v| v.abs() < d[i].abs()).count() as f64;
            let eq = d.iter().filter(|v| v.abs() == d[i].abs()).count() as f64;
            ranks[i] = less + (eq + 1.0) / 2.0;
        }
        let obs: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
        let (mut ge, mut le) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            let s: f64 = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| ranks[i])
                .sum();
            if s >= obs - 1e-9 {
                ge += 1;
            }
            if s <= obs + 1e-9 {
                le += 1;
            }
        }
        let all = (1u64 << n) as f64;
        (ge as f64 / all, (2.0 * (ge.min(le) as f64) / all).min(1.0))
    }

    #[test]
    fn identical_treatments_give_zero() {
        let blocks = vec![vec![0.5; 4]; 6];
        let f = friedman_test(&blocks).unwrap();
        assert_eq!(f.chi2, 0.0);
        assert_abs_diff_eq!(f.p_value, 1.0, epsilon = 1e-12);
        assert_eq!(f.mean_ranks, vec![2.5; 4]);
    }

    #[test]
    fn dominant_treatment_matches_hand_ranks() {
        // treatment 0 always best, 1 second, 2 last: R = (10, 20, 30)
        let blocks: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![0.9 - i as f64 * 0.01, 0.5, 0.1])
            .collect();
        let f = friedman_test(&blocks).unwrap();
        let hand = 12.0 / (10.0 * 3.0 * 4.0) * (100.0 + 400.0 + 900.0) - 3.0 * 10.0 * 4.0;
        assert_abs_diff_eq!(f.chi2, hand, epsilon = 1e-9);
        assert_abs_diff_eq!(f.chi2, 20.0, epsilon = 1e-9);
        assert_eq!(f.mean_ranks, vec![1.0, 2.0, 3.0]);
        assert!(f.p_value < 1e-4);
    }

    #[test]
    fn friedman_matches_oracle_on_random_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let blocks: Vec<Vec<f64>> = (0..10)
                .map(|_| {
                    (0..4)
                        .map(|_| (rng.random_range(0..6) as f64) / 5.0)
                        .collect()
                })
                .collect();
            let f = friedman_test(&blocks).unwrap();
            assert_abs_diff_eq!(f.chi2, friedman_oracle(&blocks).max(0.0), epsilon = 1e-9);
        }
    }

    #[test]
    fn friedman_rejects_ragged_blocks() {
        assert!(friedman_test(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(friedman_test(&[vec![1.0, 2.0]]).is_err());
        assert!(friedman_test(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn critical_difference_values() {
        assert_abs_diff_eq!(
            critical_difference(2, 4, 0.05).unwrap(),
            1.960 * 0.5,
            epsilon = 1e-12
        );
        let cd = critical_difference(6, 9, 0.05).unwrap();
        assert_abs_diff_eq!(cd, 2.850 * (42.0f64 / 54.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(cd, 2.513, epsilon = 1e-3);
        assert!(((cd - 2.53) / 2.53).abs() < 0.01);
        assert!(critical_difference(11, 9, 0.05).is_err());
        assert!(critical_difference(6, 9, 0.01).is_err());
        assert!(critical_difference(6, 0, 0.05).is_err());
    }

    #[test]
    fn wilcoxon_six_differences() {
        let d = [1.0, -2.0, 3.0, -4.0, 5.0, 6.0];
        let zeros = [0.0; 6];
        let w = wilcoxon_signed_rank(&d, &zeros).unwrap();
        assert_eq!(w.w_plus, 15.0);
        assert_eq!(w.w_minus, 6.0);
        assert_eq!(w.statistic, 6.0);
        let (pg, p2) = wilcoxon_oracle(&d);
        assert_abs_diff_eq!(w.p_greater, pg, epsilon = 1e-12);
        assert_abs_diff_eq!(w.p_two_sided, p2, epsilon = 1e-12);
    }

    #[test]
    fn wilcoxon_shift_is_minimal() {
        let a = [0.1, 0.4, 0.3, 0.8, 0.5, 0.2, 0.9];
        let b: Vec<f64> = a.iter().map(|v| v + 0.25).collect();
        let w = wilcoxon_signed_rank(&b, &a).unwrap();
        assert_eq!(w.w_minus, 0.0);
        assert_abs_diff_eq!(w.p_greater, 1.0 / 128.0, epsilon = 1e-15);
        let s = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(s.statistic, w.statistic);
        assert_eq!(s.p_two_sided, w.p_two_sided);
    }

    #[test]
    fn wilcoxon_errors() {
        assert!(wilcoxon_signed_rank(&[1.0; 6], &[1.0; 6]).is_err());
        assert!(wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).is_err());
        assert!(wilcoxon_signed_rank(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn wilcoxon_normal_branch_is_close_to_exact_scale() {
        let a: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..40)
            .map(|i| (i as f64 * 0.37).sin() - 0.05 + (i % 7) as f64 * 0.02)
            .collect();
        let w = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!w.exact);
        assert!((0.0..=1.0).contains(&w.p_two_sided));
        assert_eq!(w.w_plus + w.w_minus, 40.0 * 41.0 / 2.0);
    }

    proptest! {
        #[test]
        fn wilcoxon_matches_enumeration(d in prop::collection::vec(
            (-6i32..=6).prop_filter("non-zero", |v| *v != 0), 5..=12)
        ) {
            let d: Vec<f64> = d.into_iter().map(f64::from).collect();
            let zeros = vec![0.0; d.len()];
            let w = wilcoxon_signed_rank(&d, &zeros).unwrap();
            let (pg, p2) = wilcoxon_oracle(&d);
            prop_assert!((w.p_greater - pg).abs() < 1e-9);
            prop_assert!((w.p_two_sided - p2).abs() < 1e-9);
            let back = wilcoxon_signed_rank(&zeros, &d).unwrap();
            prop_assert_eq!(back.statistic, w.statistic);
        }

        #[test]
        fn friedman_is_rank_based(
            blocks in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 2..8)
        ) {
            let f = friedman_test(&blocks).unwrap();
            let warped: Vec<Vec<f64>> = blocks.iter().map(|b| b.iter().map(|v| v.powi(3) * 5.0 - 2.0).collect()).collect();
            let g = friedman_test(&warped).unwrap();
            prop_assert!((f.chi2 - g.chi2).abs() < 1e-9);
            prop_assert!((f.chi2 - friedman_oracle(&blocks).max(0.0)).abs() < 1e-9);
        }
    }
}
