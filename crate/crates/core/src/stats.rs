//! Wilcoxon signed-rank test for paired samples.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero differences handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// Number of non-zero differences.
    pub n: usize,
    /// Sum of the ranks of the positive differences `a - b`.
    pub w_plus: f64,
    pub p_two_sided: f64,
    /// Alternative: `a` tends to exceed `b`.
    pub p_greater: f64,
    pub exact: bool,
}

/// Average ranks (1-based) of `|d|`, ties sharing the mean of their positions.
fn signed_ranks(d: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0.0; d.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && d[order[end]].abs() == d[order[start]].abs() {
            end += 1;
        }
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Null counts of the doubled statistic `2 W+` over all `2^n` sign patterns.
fn exact_counts(doubled: &[usize]) -> Vec<f64> {
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Paired Wilcoxon signed-rank test of `a` against `b`.
///
/// Zero differences are dropped, ties get average ranks. Up to
/// [`EXACT_MAX_N`] non-zero pairs the p-value comes from the exact null
/// distribution; beyond that from the normal approximation with continuity
/// and tie corrections. The two-sided value is twice the smaller tail, capped at 1.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<Wilcoxon> {
    if a.len() != b.len() {
        return Err(Error::contract(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("non-finite paired difference"));
    }
    let n = d.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "{n} non-zero paired differences, the signed-rank test needs at least 5"
        )));
    }
    let (ranks, ties) = signed_ranks(&d);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();

    if n <= EXACT_MAX_N {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let counts = exact_counts(&doubled);
        let obs = (2.0 * w_plus).round() as usize;
        let total = (n as f64).exp2();
        let le: f64 = counts[..=obs].iter().sum();
        let ge: f64 = counts[obs..].iter().sum();
        let (lower, upper) = (le / total, ge / total);
        return Ok(Wilcoxon {
            n,
            w_plus,
            p_two_sided: (2.0 * lower.min(upper)).min(1.0),
            p_greater: upper,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    let normal = Normal::standard();
    let z_two = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
    let z_upper = (w_plus - mean - 0.5) / sd;
    Ok(Wilcoxon {
        n,
        w_plus,
        p_two_sided: (2.0 * normal.sf(z_two)).min(1.0),
        p_greater: normal.sf(z_upper),
        exact: false,
    })
}

/// Exact two-sided p by enumerating all `2^n` sign patterns of `ranks`.
/// Independent of the dynamic programme; used as a test oracle.
pub fn enumerate_two_sided(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= w_plus + 1e-9 {
            le += 1;
        }
        if w >= w_plus - 1e-9 {
            ge += 1;
        }
    }
    let total = (n as f64).exp2();
    (2.0 * (le as f64 / total).min(ge as f64 / total)).min(1.0)
}

/// Average ranks of the non-zero differences `a - b`, in input order.
pub fn difference_ranks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    signed_ranks(&d).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn all_positive_six() {
        let a = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let b = [1.0; 6];
        let w = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(w.n, 6);
        assert_eq!(w.w_plus, 21.0);
        assert_eq!(w.p_two_sided, 0.03125);
        assert_eq!(w.p_greater, 1.0 / 64.0);
        assert!(w.exact);
    }

    #[test]
    fn known_small_tables() {
        // n = 8, W+ = 3: lower tail count 5 of 256
        let d = [-1.0, -2.0, 3.0, -4.0, -5.0, -6.0, -7.0, -8.0];
        let w = wilcoxon_signed_rank(&d, &[0.0; 8]).unwrap();
        assert_eq!(w.w_plus, 3.0);
        assert_eq!(w.p_two_sided, 10.0 / 256.0);
        // symmetric statistic gives p = 1
        let d = [1.0, -2.0, -3.0, 4.0, 5.0, -6.0, -7.0, 8.0];
        let w = wilcoxon_signed_rank(&d, &[0.0; 8]).unwrap();
        assert_eq!(w.w_plus, 18.0);
        assert_eq!(w.p_two_sided, 1.0);
    }

    #[test]
    fn matches_enumeration_with_ties() {
        let mut rng = Rng::new(11);
        for _ in 0..400 {
            let n = 5 + rng.below(6);
            let a: Vec<f64> = (0..n).map(|_| rng.below(7) as f64).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.below(7) as f64).collect();
            let Ok(w) = wilcoxon_signed_rank(&a, &b) else { continue };
            let ranks = difference_ranks(&a, &b);
            assert_eq!(w.p_two_sided.to_bits(), enumerate_two_sided(&ranks, w.w_plus).to_bits());
        }
    }

    #[test]
    fn zeros_dropped_and_too_few() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let w = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(w.n, 5);
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn swapping_samples_keeps_two_sided() {
        let mut rng = Rng::new(5);
        for n in [6, 12, 13, 30] {
            let a: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.normal() + 0.3).collect();
            let ab = wilcoxon_signed_rank(&a, &b).unwrap();
            let ba = wilcoxon_signed_rank(&b, &a).unwrap();
            assert!((ab.p_two_sided - ba.p_two_sided).abs() < 1e-12);
            assert!(ab.p_two_sided > 0.0 && ab.p_two_sided <= 1.0);
            assert_eq!(ab.exact, n <= EXACT_MAX_N);
        }
    }

    #[test]
    fn normal_approximation_near_exact() {
        // just past the exact range, the approximation tracks the exact tail
        let mut rng = Rng::new(2);
        for _ in 0..50 {
            let d: Vec<f64> = (0..13).map(|i| (i + 1) as f64 * if rng.coin() { 1.0 } else { -1.0 }).collect();
            let w = wilcoxon_signed_rank(&d, &[0.0; 13]).unwrap();
            let ranks: Vec<f64> = (1..=13).map(|r| r as f64).collect();
            let exact = enumerate_two_sided(&ranks, w.w_plus);
            assert!((w.p_two_sided - exact).abs() < 0.02, "{} vs {exact}", w.p_two_sided);
        }
    }
}
