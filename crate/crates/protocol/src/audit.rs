// SPDX-License-Identifier: Apache-2.0

//! Probability that a mini-batch carries few matched rows.
//!
//! A batch of `s` rows drawn from `n` rows of which `M` are matches contains
//! `X ~ Hypergeometric(n, M, s)` matches. Few matches in a batch make the
//! decrypted gradient close to a per-example quantity.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use vfl_he::encoding::exact_to_f64;

use crate::error::{ProtocolError, Result};

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `P[X ≤ k]` as an exact fraction `(numerator, C(n, s))`.
pub fn hypergeometric_cdf_exact(n: u64, m: u64, s: u64, k: u64) -> Result<(BigUint, BigUint)> {
    if m > n || s == 0 || s > n {
        return Err(ProtocolError::Config(format!("need 0 <= M <= n and 0 < s <= n, got n={n} M={m} s={s}")));
    }
    let lo = s.saturating_sub(n - m);
    let hi = k.min(m).min(s);
    let mut num = BigUint::zero();
    for x in lo..=hi {
        num += binomial(m, x) * binomial(n - m, s - x);
    }
    Ok((num, binomial(n, s)))
}

/// Nearest binary64 to `num / den` (within one unit in the last place).
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = (den.bits() + 66).saturating_sub(num.bits());
    let q = (num << shift) / den;
    exact_to_f64(&BigInt::from(q), -i128::from(shift)).expect("ratio of bounded integers is finite")
}

/// `P[X ≤ k]` for `X ~ Hypergeometric(n, M, s)`.
pub fn audit_batch_leakage(n: u64, m: u64, s: u64, k: u64) -> Result<f64> {
    let (num, den) = hypergeometric_cdf_exact(n, m, s, k)?;
    Ok(ratio_to_f64(&num, &den))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts batches by brute force over all subsets of `n` rows, with the
    /// matches on rows `0..m`.
    fn enumerate(n: u32, m: u32, s: u32, k: u32) -> (u64, u64) {
        let matches = (1u64 << m) - 1;
        let (mut hit, mut total) = (0, 0);
        for set in 0u64..(1 << n) {
            if set.count_ones() == s {
                total += 1;
                if (set & matches).count_ones() <= k {
                    hit += 1;
                }
            }
        }
        (hit, total)
    }

    #[test]
    fn matches_enumeration_for_twenty_rows() {
        let (hit, total) = enumerate(20, 10, 5, 2);
        let (num, den) = hypergeometric_cdf_exact(20, 10, 5, 2).unwrap();
        assert_eq!(total, 15504);
        assert_eq!((num, den), (BigUint::from(hit), BigUint::from(total)));
        assert_eq!(audit_batch_leakage(20, 10, 5, 2).unwrap(), hit as f64 / total as f64);
    }

    #[test]
    fn small_grid_matches_enumeration() {
        for n in 1..=10 {
            for m in 0..=n {
                for s in 1..=n {
                    for k in 0..=s {
                        let (hit, total) = enumerate(n, m, s, k);
                        let (num, den) = hypergeometric_cdf_exact(n.into(), m.into(), s.into(), k.into()).unwrap();
                        assert_eq!(num * BigUint::from(total), den * BigUint::from(hit));
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_cases() {
        assert_eq!(audit_batch_leakage(50, 50, 8, 7).unwrap(), 0.0);
        assert_eq!(audit_batch_leakage(50, 0, 8, 0).unwrap(), 1.0);
        assert_eq!(audit_batch_leakage(50, 20, 8, 8).unwrap(), 1.0);
        assert!(audit_batch_leakage(5, 6, 1, 0).is_err());
        assert!(audit_batch_leakage(5, 2, 0, 0).is_err());
        assert!(audit_batch_leakage(5, 2, 6, 0).is_err());
    }

    #[test]
    fn large_population_is_finite_and_ordered() {
        let p0 = audit_batch_leakage(5000, 3000, 64, 0).unwrap();
        let p1 = audit_batch_leakage(5000, 3000, 64, 1).unwrap();
        assert!(p0 > 0.0 && p0 < p1 && p1 < 1e-20);
    }

    #[test]
    fn ratio_rounding() {
        assert_eq!(ratio_to_f64(&BigUint::from(1u32), &BigUint::from(3u32)), 1.0 / 3.0);
        assert_eq!(ratio_to_f64(&BigUint::from(2u32), &BigUint::from(7u32)), 2.0 / 7.0);
    }
}
