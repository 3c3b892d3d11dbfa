// SPDX-License-Identifier: Apache-2.0

//! Floating-point encoding on top of the Paillier plaintext space.
//!
//! A value is a pair `(s, e)` meaning `signed(s) * beta^e`, where `s` lives in
//! `Z_n`. Significands below `n/3` are positive, those above `n - n/3` are
//! negative (`s - n`), and the band in between signals overflow. The exponent
//! travels in clear next to the ciphertext.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{HeError, Result};
use crate::paillier::{Ciphertext, PrivateKey, PublicKey};

/// Explicit significand bits of a binary64 value.
const FRAC_BITS: i64 = 52;

/// Encoding base; always a power of two so scaling by `beta^k` is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Base {
    log2: u32,
}

impl Base {
    pub const DEFAULT: Base = Base { log2: 4 };

    pub fn new(beta: u64) -> Result<Self> {
        if beta < 2 || !beta.is_power_of_two() || beta > 1 << 16 {
            return Err(HeError::InvalidBase(beta));
        }
        Ok(Base { log2: beta.trailing_zeros() })
    }

    pub fn value(self) -> u64 {
        1u64 << self.log2
    }

    pub fn log2(self) -> u32 {
        self.log2
    }
}

impl Default for Base {
    fn default() -> Self {
        Base::DEFAULT
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedNumber {
    significand: BigUint,
    exponent: i64,
    base: Base,
}

impl EncodedNumber {
    /// Builds an encoding from raw parts; `significand` must already be in `Z_n`.
    pub fn from_parts(significand: BigUint, exponent: i64, base: Base) -> Self {
        EncodedNumber { significand, exponent, base }
    }

    pub fn significand(&self) -> &BigUint {
        &self.significand
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn base(&self) -> Base {
        self.base
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedNumber {
    ciphertext: Ciphertext,
    exponent: i64,
    base: Base,
}

impl EncryptedNumber {
    pub fn from_parts(ciphertext: Ciphertext, exponent: i64, base: Base) -> Self {
        EncryptedNumber { ciphertext, exponent, base }
    }

    pub fn ciphertext(&self) -> &Ciphertext {
        &self.ciphertext
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn base(&self) -> Base {
        self.base
    }
}

/// Largest magnitude a significand may carry in either signed region.
pub fn max_significand(pk: &PublicKey) -> BigUint {
    pk.n() / 3u32
}

/// Encodes a normal binary64 value exactly.
///
/// The exponent depends only on the binary exponent of `q`, so every value in
/// a binade shares the same public exponent.
pub fn encode(q: f64, pk: &PublicKey, base: Base) -> Result<EncodedNumber> {
    if !q.is_finite() {
        return Err(HeError::NotFinite(q));
    }
    if q == 0.0 {
        return Ok(EncodedNumber { significand: BigUint::zero(), exponent: 0, base });
    }
    if q.is_subnormal() {
        return Err(HeError::Subnormal(q));
    }
    let bits = q.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    let t = biased - 1023 - FRAC_BITS;
    let b = i64::from(base.log2);
    let exponent = t.div_euclid(b);
    let shift = (t - b * exponent) as u32;
    let magnitude = BigUint::from(mantissa) << shift;
    let signed = if q < 0.0 { -BigInt::from(magnitude) } else { BigInt::from(magnitude) };
    Ok(EncodedNumber { significand: to_residue(&signed, pk)?, exponent, base })
}

/// Encodes an integer at the fixed exponent 0.
///
/// Used where the exponent must not depend on the value (the linkage mask).
pub fn encode_integer(k: i64, pk: &PublicKey, base: Base) -> Result<EncodedNumber> {
    Ok(EncodedNumber { significand: to_residue(&BigInt::from(k), pk)?, exponent: 0, base })
}

/// Decodes to the nearest binary64 (exact when no rounding is needed).
pub fn decode(x: &EncodedNumber, pk: &PublicKey) -> Result<f64> {
    let v = signed_significand(&x.significand, pk)?;
    let exp2 = i128::from(x.exponent) * i128::from(x.base.log2);
    exact_to_f64(&v, exp2)
}

/// Signed value of a significand, rejecting the reserved overflow band.
pub fn signed_significand(s: &BigUint, pk: &PublicKey) -> Result<BigInt> {
    let max = max_significand(pk);
    if *s <= max {
        Ok(BigInt::from(s.clone()))
    } else if *s >= pk.n() - &max {
        Ok(-BigInt::from(pk.n() - s))
    } else {
        Err(HeError::Overflow)
    }
}

fn to_residue(v: &BigInt, pk: &PublicKey) -> Result<BigUint> {
    let max = max_significand(pk);
    if *v.magnitude() > max {
        return Err(HeError::Overflow);
    }
    Ok(match v.sign() {
        Sign::Minus => pk.n() - v.magnitude(),
        _ => v.magnitude().clone(),
    })
}

/// Rounds `v * 2^exp2` to the nearest binary64, ties to even.
pub fn exact_to_f64(v: &BigInt, exp2: i128) -> Result<f64> {
    let mag = v.magnitude();
    if mag.is_zero() {
        return Ok(0.0);
    }
    let nbits = mag.bits() as i128;
    // Position of the leading bit: value lies in [2^top, 2^(top+1)).
    let top = nbits - 1 + exp2;
    if top > 1023 {
        return Err(HeError::Unrepresentable);
    }
    // Number of significant bits the result can hold at this magnitude.
    let keep = if top >= -1022 { 53 } else { 53 - (-1022 - top) };
    if keep < 0 {
        return Ok(signed_zero(v));
    }
    let drop = nbits - keep;
    let (mut m, scale) = if drop > 0 {
        let drop_u = drop as u64;
        let q = mag >> drop_u;
        let rem = mag - (&q << drop_u);
        let half = BigUint::one() << (drop_u - 1);
        let round_up = rem > half || (rem == half && q.bit(0));
        (if round_up { q + 1u32 } else { q }, exp2 + drop)
    } else {
        (mag.clone(), exp2)
    };
    // m < 2^54 now; shrink to keep the integer conversion exact.
    let mut scale = scale;
    while m.bits() > 53 {
        debug_assert!(!m.bit(0));
        m >>= 1u32;
        scale += 1;
    }
    let m = u64::try_from(&m).expect("rounded mantissa fits in 53 bits") as f64;
    let magnitude = mul_pow2(m, scale);
    if magnitude.is_infinite() {
        return Err(HeError::Unrepresentable);
    }
    Ok(if v.is_negative() { -magnitude } else { magnitude })
}

fn signed_zero(v: &BigInt) -> f64 {
    if v.is_negative() {
        -0.0
    } else {
        0.0
    }
}

/// `x * 2^k` for an integer-valued `x < 2^53` where the result is known to be
/// representable; each partial product is exact.
fn mul_pow2(mut x: f64, mut k: i128) -> f64 {
    while k > 1000 {
        x *= pow2(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= pow2(-1000);
        k += 1000;
    }
    x * pow2(k as i32)
}

fn pow2(k: i32) -> f64 {
    debug_assert!((-1074..=1023).contains(&k));
    if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (k + 1074))
    }
}

pub fn encrypt(pk: &PublicKey, x: &EncodedNumber) -> Result<EncryptedNumber> {
    Ok(EncryptedNumber { ciphertext: pk.encrypt(&x.significand)?, exponent: x.exponent, base: x.base })
}

pub fn encrypt_f64(pk: &PublicKey, q: f64, base: Base) -> Result<EncryptedNumber> {
    encrypt(pk, &encode(q, pk, base)?)
}

pub fn decrypt(sk: &PrivateKey, x: &EncryptedNumber) -> Result<EncodedNumber> {
    Ok(EncodedNumber { significand: sk.decrypt(&x.ciphertext)?, exponent: x.exponent, base: x.base })
}

pub fn decrypt_f64(sk: &PrivateKey, x: &EncryptedNumber) -> Result<f64> {
    decode(&decrypt(sk, x)?, sk.public_key())
}

/// `beta^gap` as a power of two, refusing factors that reach the modulus.
fn scale_factor(gap: i128, base: Base, pk: &PublicKey) -> Result<BigUint> {
    debug_assert!(gap >= 0);
    let bits = gap * i128::from(base.log2);
    if bits >= i128::from(pk.bits()) {
        return Err(HeError::ExponentGap { gap: gap as u64 });
    }
    Ok(BigUint::one() << (bits as u64))
}

/// Homomorphic addition; the result carries `min(e, f)`.
///
/// The operand with the larger exponent is scaled by a public power of the
/// base. No blinding is needed since the sum of two ciphertexts is already a
/// fresh-looking ciphertext whenever either input is.
pub fn add_encrypted(pk: &PublicKey, a: &EncryptedNumber, b: &EncryptedNumber) -> Result<EncryptedNumber> {
    if a.base != b.base {
        return Err(HeError::BaseMismatch);
    }
    let (lo, hi) = if a.exponent <= b.exponent { (a, b) } else { (b, a) };
    let gap = i128::from(hi.exponent) - i128::from(lo.exponent);
    let hi_ct = if gap == 0 {
        hi.ciphertext.clone()
    } else {
        let factor = scale_factor(gap, a.base, pk)?;
        pk.check(&hi.ciphertext)?;
        pk.pow_signed_raw(&hi.ciphertext, &BigInt::from(factor))
    };
    Ok(EncryptedNumber { ciphertext: pk.add(&lo.ciphertext, &hi_ct)?, exponent: lo.exponent, base: a.base })
}

/// Adds a plaintext encoding to an encrypted number.
pub fn add_plain(pk: &PublicKey, a: &EncryptedNumber, k: &EncodedNumber) -> Result<EncryptedNumber> {
    add_encrypted(pk, a, &encrypt(pk, k)?)
}

/// Multiplication by a plaintext encoding; exponents add and the result is
/// re-randomized.
pub fn mul_plain_encrypted(pk: &PublicKey, a: &EncryptedNumber, k: &EncodedNumber) -> Result<EncryptedNumber> {
    if a.base != k.base {
        return Err(HeError::BaseMismatch);
    }
    Ok(EncryptedNumber {
        ciphertext: pk.mul_plain(&a.ciphertext, &k.significand)?,
        exponent: a.exponent.checked_add(k.exponent).ok_or(HeError::Overflow)?,
        base: a.base,
    })
}

/// `sum_i enc_i * plain_i` aligned to the smallest term exponent, blinded once.
pub fn dot_plain(pk: &PublicKey, enc: &[EncryptedNumber], plain: &[EncodedNumber]) -> Result<EncryptedNumber> {
    let raw = dot_plain_unblinded(pk, enc, plain)?;
    Ok(EncryptedNumber { ciphertext: pk.rerandomize_raw(&raw.ciphertext), ..raw })
}

fn dot_plain_unblinded(pk: &PublicKey, enc: &[EncryptedNumber], plain: &[EncodedNumber]) -> Result<EncryptedNumber> {
    if enc.len() != plain.len() {
        return Err(HeError::Dimension(format!(
            "{} encrypted terms against {} plaintext terms",
            enc.len(),
            plain.len()
        )));
    }
    let base = match (enc.first(), plain.first()) {
        (Some(e), _) => e.base,
        (None, Some(p)) => p.base,
        (None, None) => Base::default(),
    };
    if enc.iter().any(|e| e.base != base) || plain.iter().any(|p| p.base != base) {
        return Err(HeError::BaseMismatch);
    }
    let exps: Vec<i128> = enc.iter().zip(plain).map(|(e, p)| i128::from(e.exponent) + i128::from(p.exponent)).collect();
    let target = exps.iter().copied().min().unwrap_or(0);
    let exponent = i64::try_from(target).map_err(|_| HeError::Overflow)?;
    let scalars: Vec<BigInt> = plain
        .par_iter()
        .zip(exps.par_iter())
        .map(|(p, &x)| {
            let s = signed_significand(&p.significand, pk)?;
            Ok(s * BigInt::from(scale_factor(x - target, base, pk)?))
        })
        .collect::<Result<_>>()?;
    let cts: Vec<Ciphertext> = enc.iter().map(|e| e.ciphertext.clone()).collect();
    Ok(EncryptedNumber { ciphertext: pk.dot_signed_raw(&cts, &scalars)?, exponent, base })
}

/// Sum of encrypted numbers.
pub fn sum_encrypted(pk: &PublicKey, xs: &[EncryptedNumber]) -> Result<EncryptedNumber> {
    let mut iter = xs.iter();
    let first = iter.next().ok_or_else(|| HeError::Dimension("empty sum".into()))?.clone();
    iter.try_fold(first, |acc, x| add_encrypted(pk, &acc, x))
}

/// Fresh blinding of an encrypted number (multiplication by `Enc(0)`).
pub fn rerandomize(pk: &PublicKey, a: &EncryptedNumber) -> Result<EncryptedNumber> {
    Ok(EncryptedNumber { ciphertext: pk.rerandomize(&a.ciphertext)?, ..a.clone() })
}

/// Public magnitude bracket `[2^c, 2^c * beta)` of a fresh nonzero encoding,
/// readable from the exponent alone.
pub fn leakage_range(a: &EncryptedNumber) -> (f64, f64) {
    leakage_range_product(a, 1)
}

/// Bracket for a product of `factors` fresh encodings: `[2^c, 2^c * beta^factors)`
/// with `c = e * log2(beta) + 52 * factors`.
pub fn leakage_range_product(a: &EncryptedNumber, factors: u32) -> (f64, f64) {
    let b = f64::from(a.base.log2);
    let c = a.exponent as f64 * b + FRAC_BITS as f64 * f64::from(factors);
    (c.exp2(), (c + b * f64::from(factors)).exp2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paillier::keygen_insecure_with_rng;
    use num_bigint::RandBigInt;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::sync::OnceLock;

    fn keys() -> &'static (PublicKey, PrivateKey) {
        static KEYS: OnceLock<(PublicKey, PrivateKey)> = OnceLock::new();
        KEYS.get_or_init(|| keygen_insecure_with_rng(512, &mut ChaCha20Rng::seed_from_u64(21)).unwrap())
    }

    fn b16() -> Base {
        Base::DEFAULT
    }

    /// Exact decimal expansion of `m * 2^k`, parsed by the standard library's
    /// correctly rounded float parser.
    fn oracle_f64(m: &BigInt, k: i64) -> f64 {
        let text = if k >= 0 {
            (m << (k as u64)).to_string()
        } else {
            let digits = m.magnitude() * num_bigint::BigUint::from(5u32).pow((-k) as u32);
            let s = format!("{digits}");
            let sign = if m.is_negative() { "-" } else { "" };
            format!("{sign}{s}e{k}")
        };
        text.parse().unwrap()
    }

    fn random_normal(rng: &mut impl Rng) -> f64 {
        loop {
            let q = f64::from_bits(rng.gen());
            if q.is_normal() {
                return q;
            }
        }
    }

    #[test]
    fn zero_encodes_to_zero_pair() {
        let (pk, _) = keys();
        for z in [0.0, -0.0] {
            let x = encode(z, pk, b16()).unwrap();
            assert!(x.significand().is_zero());
            assert_eq!(x.exponent(), 0);
        }
        assert_eq!(decode(&EncodedNumber::from_parts(BigUint::zero(), 0, b16()), pk).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_finite_and_subnormal() {
        let (pk, _) = keys();
        assert!(matches!(encode(f64::NAN, pk, b16()), Err(HeError::NotFinite(_))));
        assert!(matches!(encode(f64::INFINITY, pk, b16()), Err(HeError::NotFinite(_))));
        assert!(matches!(encode(f64::MIN_POSITIVE / 2.0, pk, b16()), Err(HeError::Subnormal(_))));
        assert!(encode(f64::MIN_POSITIVE, pk, b16()).is_ok());
    }

    #[test]
    fn negation_is_residue_complement() {
        let (pk, _) = keys();
        for q in [1.0, 3.25, 1e-300, 7.5e200] {
            let pos = encode(q, pk, b16()).unwrap();
            let neg = encode(-q, pk, b16()).unwrap();
            assert_eq!(neg.exponent(), pos.exponent());
            assert_eq!(*neg.significand(), pk.n() - pos.significand());
            assert_eq!(decode(&neg, pk).unwrap(), -q);
        }
    }

    /// Every value of the binade [2^eps, 2^(eps+1)) has an integral
    /// significand at exponent `e` iff 2^(eps-52) is a multiple of beta^e.
    fn binade_integral_at(eps: i64, e: i64, log2b: i64) -> bool {
        eps - 52 - e * log2b >= 0
    }

    #[test]
    fn exponent_is_largest_integral_choice() {
        let (pk, _) = keys();
        for beta in [2u64, 4, 16, 256] {
            let base = Base::new(beta).unwrap();
            let lb = i64::from(base.log2());
            for q in [1.0, 1.5, 1e-10, 3e10, -2.0, 0.1, f64::MAX, f64::MIN_POSITIVE] {
                let x = encode(q, pk, base).unwrap();
                let eps = ((q.abs().to_bits() >> 52) as i64) - 1023;
                let best = (-2000..2000).filter(|&e| binade_integral_at(eps, e, lb)).max().unwrap();
                assert_eq!(x.exponent(), best, "q = {q}, beta = {beta}");
                // The significand times beta^e reproduces q exactly.
                assert_eq!(decode(&x, pk).unwrap(), q);
            }
        }
        let one = encode(1.0, pk, b16()).unwrap();
        assert_eq!(one.exponent(), -13);
        assert_eq!(*one.significand(), BigUint::one() << 52u32);
    }

    #[test]
    fn significand_above_half_decodes_negative() {
        let (pk, _) = keys();
        let x = encode(-0.75, pk, b16()).unwrap();
        assert!(*x.significand() > (pk.n() >> 1u32));
        let expected =
            -((pk.n() - x.significand()).to_string().parse::<f64>().unwrap()) * 16f64.powi(x.exponent() as i32);
        assert_eq!(decode(&x, pk).unwrap(), expected);
        assert_eq!(expected, -0.75);
    }

    #[test]
    fn overflow_band_is_rejected() {
        let (pk, _) = keys();
        let mid = EncodedNumber::from_parts(pk.n() >> 1u32, 0, b16());
        assert_eq!(decode(&mid, pk).unwrap_err(), HeError::Overflow);
        let edge = EncodedNumber::from_parts(max_significand(pk), 0, b16());
        assert!(decode(&edge, pk).is_ok());
        let past = EncodedNumber::from_parts(max_significand(pk) + 1u32, 0, b16());
        assert_eq!(decode(&past, pk).unwrap_err(), HeError::Overflow);
    }

    #[test]
    fn exact_rounding_matches_decimal_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..3000 {
            let bits = rng.gen_range(1..400u64);
            let m = BigInt::from(rng.gen_biguint(bits)) * if rng.gen() { 1 } else { -1 };
            let k = rng.gen_range(-1400i64..800);
            let expected = oracle_f64(&m, k);
            match exact_to_f64(&m, k as i128) {
                Ok(got) => assert_eq!(got.to_bits(), expected.to_bits(), "m = {m}, k = {k}"),
                Err(_) => assert!(expected.is_infinite(), "m = {m}, k = {k}"),
            }
        }
    }

    #[test]
    fn rounding_edge_cases() {
        let one = BigInt::one();
        // Ties to even at 2^53 + 1.
        let tie = (BigInt::one() << 53u32) + 1;
        assert_eq!(exact_to_f64(&tie, 0).unwrap(), 9007199254740992.0);
        let tie_up = (BigInt::one() << 53u32) + 3;
        assert_eq!(exact_to_f64(&tie_up, 0).unwrap(), 9007199254740996.0);
        // Smallest subnormal and the halfway point below it.
        assert_eq!(exact_to_f64(&one, -1074).unwrap(), f64::from_bits(1));
        assert_eq!(exact_to_f64(&one, -1075).unwrap(), 0.0);
        assert_eq!(exact_to_f64(&BigInt::from(3), -1076).unwrap(), f64::from_bits(1));
        assert_eq!(exact_to_f64(&one, 1023).unwrap(), 2f64.powi(1023));
        assert!(exact_to_f64(&one, 1024).is_err());
    }

    #[test]
    fn encrypted_addition_examples() {
        let (pk, sk) = keys();
        let e = |q| encrypt_f64(pk, q, b16()).unwrap();
        let d = |x: &EncryptedNumber| decrypt_f64(sk, x).unwrap();
        assert_eq!(d(&add_encrypted(pk, &e(1.5), &e(2.5)).unwrap()), 4.0);
        let x = 123.456;
        let s = add_encrypted(pk, &e(x), &e(0.0)).unwrap();
        assert_eq!(d(&s), x);
        assert_eq!(s.exponent(), e(x).exponent().min(0));
    }

    #[test]
    fn encrypted_addition_matches_exact_sum() {
        let (pk, sk) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = rng.gen_range(-1e6..1e6) * 2f64.powi(rng.gen_range(-30..30));
            let b = rng.gen_range(-1e6..1e6) * 2f64.powi(rng.gen_range(-30..30));
            let ea = encrypt_f64(pk, a, b16()).unwrap();
            let eb = encrypt_f64(pk, b, b16()).unwrap();
            let sum = add_encrypted(pk, &ea, &eb).unwrap();
            assert_eq!(sum.exponent(), ea.exponent().min(eb.exponent()));
            // Oracle: exact rational sum rounded once.
            let (ma, ka) = exact_parts(a);
            let (mb, kb) = exact_parts(b);
            let k = ka.min(kb);
            let m = (ma << ((ka - k) as u64)) + (mb << ((kb - k) as u64));
            assert_eq!(decrypt_f64(sk, &sum).unwrap(), oracle_f64(&m, k));
        }
    }

    fn exact_parts(q: f64) -> (BigInt, i64) {
        if q == 0.0 {
            return (BigInt::zero(), 0);
        }
        let bits = q.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let m = (bits & ((1 << 52) - 1)) | (1 << 52);
        let m = BigInt::from(m) * if q < 0.0 { -1 } else { 1 };
        (m, biased - 1075)
    }

    #[test]
    fn exponent_gap_overflow() {
        let (pk, _) = keys();
        let a = encrypt_f64(pk, 1e-300, b16()).unwrap();
        let b = encrypt_f64(pk, 1e300, b16()).unwrap();
        assert!(matches!(add_encrypted(pk, &a, &b), Err(HeError::ExponentGap { .. })));
    }

    #[test]
    fn encrypted_multiplication_examples() {
        let (pk, sk) = keys();
        let enc2 = encrypt_f64(pk, 2.0, b16()).unwrap();
        let three = encode(3.0, pk, b16()).unwrap();
        let prod = mul_plain_encrypted(pk, &enc2, &three).unwrap();
        assert_eq!(prod.exponent(), enc2.exponent() + three.exponent());
        assert_eq!(decrypt_f64(sk, &prod).unwrap(), 6.0);
        let x = -0.1;
        let ex = encrypt_f64(pk, x, b16()).unwrap();
        let one = encode(1.0, pk, b16()).unwrap();
        assert_eq!(decrypt_f64(sk, &mul_plain_encrypted(pk, &ex, &one).unwrap()).unwrap(), x);
    }

    #[test]
    fn dot_plain_matches_oracle() {
        let (pk, sk) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..20 {
            let len = rng.gen_range(1..10);
            let xs: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let ws: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let enc: Vec<_> = xs.iter().map(|&x| encrypt_f64(pk, x, b16()).unwrap()).collect();
            let plain: Vec<_> = ws.iter().map(|&w| encode(w, pk, b16()).unwrap()).collect();
            let got = decrypt_f64(sk, &dot_plain(pk, &enc, &plain).unwrap()).unwrap();
            let terms: Vec<(BigInt, i64)> = xs
                .iter()
                .zip(&ws)
                .map(|(&x, &w)| {
                    let (mx, kx) = exact_parts(x);
                    let (mw, kw) = exact_parts(w);
                    (mx * mw, kx + kw)
                })
                .collect();
            let k = terms.iter().map(|t| t.1).min().unwrap();
            let m = terms.iter().fold(BigInt::zero(), |acc, (m, kt)| acc + (m << ((kt - k) as u64)));
            assert_eq!(got, oracle_f64(&m, k));
        }
    }

    #[test]
    fn mask_style_integers_share_one_exponent() {
        let (pk, sk) = keys();
        let zero = encode_integer(0, pk, b16()).unwrap();
        let one = encode_integer(1, pk, b16()).unwrap();
        assert_eq!(zero.exponent(), one.exponent());
        let c = encrypt(pk, &one).unwrap();
        assert_eq!(decrypt_f64(sk, &c).unwrap(), 1.0);
    }

    #[test]
    fn leakage_bracket_examples() {
        let (pk, _) = keys();
        let x = EncryptedNumber::from_parts(pk.encrypt(&BigUint::one()).unwrap(), 0, b16());
        let (lo, hi) = leakage_range(&x);
        assert_eq!(lo, 2f64.powi(52));
        assert_eq!(hi / lo, 16.0);

        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for _ in 0..200 {
            let q = random_normal(&mut rng);
            let e = encrypt_f64(pk, q, b16()).unwrap();
            let (lo, hi) = leakage_range(&e);
            assert!(lo <= q.abs() && q.abs() < hi, "q = {q}, [{lo}, {hi})");
        }

        let a = rng.gen_range(1.0..1e3);
        let k = rng.gen_range(1.0..1e3);
        let prod =
            mul_plain_encrypted(pk, &encrypt_f64(pk, a, b16()).unwrap(), &encode(k, pk, b16()).unwrap()).unwrap();
        let (lo, hi) = leakage_range_product(&prod, 2);
        assert_eq!(hi / lo, 256.0);
        assert!(lo <= a * k && a * k < hi);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(bits in any::<u64>()) {
            let (pk, _) = keys();
            let q = f64::from_bits(bits);
            prop_assume!(q.is_normal() || q == 0.0);
            for beta in [2u64, 16, 1024] {
                let x = encode(q, pk, Base::new(beta).unwrap()).unwrap();
                prop_assert_eq!(decode(&x, pk).unwrap().to_bits(), if q == 0.0 { 0 } else { q.to_bits() });
            }
        }

        #[test]
        fn product_exponent_is_public(a in -1e9f64..1e9, k in -1e9f64..1e9) {
            let (pk, sk) = keys();
            prop_assume!(a != 0.0 && k != 0.0);
            let ea = encrypt_f64(pk, a, b16()).unwrap();
            let ek = encode(k, pk, b16()).unwrap();
            let prod = mul_plain_encrypted(pk, &ea, &ek).unwrap();
            prop_assert_eq!(prod.exponent(), ea.exponent() + ek.exponent());
            let (ma, ka) = exact_parts(a);
            let (mk, kk) = exact_parts(k);
            prop_assert_eq!(decrypt_f64(sk, &prod).unwrap(), oracle_f64(&(ma * mk), ka + kk));
        }
    }
}
