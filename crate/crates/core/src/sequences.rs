//! Length-`n` sequences over a finite alphabet, addressed by index.
//!
//! Sequence `s = (s_0, .., s_{n-1})` over an alphabet of size `k` has index
//! `Σ s_i · k^{n-1-i}`, so the first symbol is the most significant digit and
//! index order is lexicographic order.

use crate::error::{Error, Result};

/// `k^n`, saturating.
pub fn count(k: usize, n: usize) -> u128 {
    (k as u128).saturating_pow(n.min(u32::MAX as usize) as u32)
}

/// `k^n` as a `usize`, or `SizeBudgetExceeded` when it is above `budget`.
pub fn checked_count(what: &'static str, k: usize, n: usize, budget: usize) -> Result<usize> {
    let required = count(k, n);
    if required > budget as u128 {
        return Err(Error::SizeBudgetExceeded {
            what,
            required,
            budget: budget as u128,
        });
    }
    Ok(required as usize)
}

pub fn digits(mut index: usize, k: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = index % k;
        index /= k;
    }
    out
}

pub fn index_of(seq: &[usize], k: usize) -> usize {
    seq.iter().fold(0, |acc, &s| acc * k + s)
}

/// Kronecker product of per-position vectors: entry `index_of(s)` is
/// `Π factors[i][s_i]`. All factors must have the same length.
pub fn kronecker(factors: &[&[f64]]) -> Vec<f64> {
    let mut acc = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(acc.len() * f.len());
        for &a in &acc {
            next.extend(f.iter().map(|&b| a * b));
        }
        acc = next;
    }
    acc
}

/// `P^{⊗n}` over all sequences.
pub fn power(p: &[f64], n: usize) -> Vec<f64> {
    kronecker(&vec![p; n])
}

/// Shannon entropy in bits of a vector of nonnegative weights summing to 1.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| q * q.log2())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_symbol_is_most_significant() {
        assert_eq!(digits(6, 2, 3), vec![1, 1, 0]);
        assert_eq!(index_of(&[1, 1, 0], 2), 6);
        assert_eq!(digits(5, 3, 2), vec![1, 2]);
    }

    #[test]
    fn kronecker_matches_direct_products() {
        let a = [0.25, 0.75];
        let b = [0.5, 0.1, 0.4];
        let k = kronecker(&[&a, &b]);
        assert_eq!(k.len(), 6);
        for (i, v) in k.iter().enumerate() {
            assert!((v - a[i / 3] * b[i % 3]).abs() < 1e-15);
        }
    }

    #[test]
    fn budget_is_enforced() {
        assert_eq!(checked_count("x", 2, 10, 1024).unwrap(), 1024);
        assert!(matches!(
            checked_count("x", 2, 11, 1024),
            Err(Error::SizeBudgetExceeded { required: 2048, .. })
        ));
        assert_eq!(count(4, 200), u128::MAX);
    }

    proptest! {
        #[test]
        fn digits_round_trip(k in 1usize..5, n in 1usize..7, seed in 0usize..10_000) {
            let total = k.pow(n as u32);
            let i = seed % total;
            prop_assert_eq!(index_of(&digits(i, k, n), k), i);
        }

        #[test]
        fn power_is_normalized_with_additive_entropy(
            w in prop::collection::vec(0.01f64..1.0, 1..4),
            n in 1usize..6,
        ) {
            let s: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / s).collect();
            let pn = power(&p, n);
            prop_assert!((pn.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((entropy_bits(&pn) - n as f64 * entropy_bits(&p)).abs() < 1e-9);
        }
    }
}
