// SPDX-License-Identifier: Apache-2.0

//! Modular exponentiation backed by GMP.

use num_bigint::BigUint;
use rug::integer::Order;
use rug::Integer;

fn to_gmp(x: &BigUint) -> Integer {
    Integer::from_digits(&x.to_u64_digits(), Order::Lsf)
}

fn from_gmp(x: &Integer) -> BigUint {
    let words = x.to_digits::<u32>(Order::Lsf);
    BigUint::new(words)
}

/// `base^exp mod modulus` for a nonzero modulus.
pub(crate) fn pow_mod(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> BigUint {
    assert!(modulus.bits() > 0, "zero modulus");
    let m = to_gmp(modulus);
    let r = to_gmp(base).pow_mod(&to_gmp(exp), &m).expect("nonnegative exponent");
    from_gmp(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn agrees_with_num_bigint(b in any::<Vec<u32>>(), e in any::<Vec<u32>>(), m in any::<Vec<u32>>()) {
            let m = BigUint::new(m) + 1u32;
            let (b, e) = (BigUint::new(b), BigUint::new(e));
            prop_assert_eq!(pow_mod(&b, &e, &m), b.modpow(&e, &m));
        }
    }
}
