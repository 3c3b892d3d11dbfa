// SPDX-License-Identifier: Apache-2.0

//! Paillier cryptosystem with generator g = n + 1.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use rayon::prelude::*;

use crate::error::{HeError, Result};
use crate::modexp::pow_mod;
use crate::prime::gen_prime;

/// Smallest key size accepted by [`keygen`].
pub const MIN_SECURE_BITS: u64 = 1024;
/// Smallest key size accepted by [`keygen_insecure`].
pub const MIN_INSECURE_BITS: u64 = 64;

#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_sq: BigUint,
    half_n: BigUint,
    fingerprint: u64,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicKey")
            .field("bits", &self.bits())
            .field("fingerprint", &format_args!("{:016x}", self.fingerprint))
            .finish()
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Ciphertext {
    value: BigUint,
    key: u64,
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext({} bits)", self.value.bits())
    }
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    /// Fingerprint of the public key this ciphertext belongs to.
    pub fn key_fingerprint(&self) -> u64 {
        self.key
    }
}

#[derive(Clone)]
pub struct PrivateKey {
    public: PublicKey,
    p: BigUint,
    q: BigUint,
    p_sq: BigUint,
    q_sq: BigUint,
    p_minus_1: BigUint,
    q_minus_1: BigUint,
    hp: BigUint,
    hq: BigUint,
    q_inv_p: BigUint,
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrivateKey").field("public", &self.public).finish_non_exhaustive()
    }
}

/// Generates a keypair with a modulus of exactly `bits` bits (at least 1024).
pub fn keygen(bits: u64) -> Result<(PublicKey, PrivateKey)> {
    keygen_with_rng(bits, &mut rand::thread_rng())
}

pub fn keygen_with_rng<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<(PublicKey, PrivateKey)> {
    if bits < MIN_SECURE_BITS {
        return Err(HeError::KeyTooSmall { bits, min: MIN_SECURE_BITS });
    }
    generate(bits, rng)
}

/// Like [`keygen`] but accepts moduli down to 64 bits. Such keys offer no
/// security and are flagged by [`PublicKey::is_insecure`].
pub fn keygen_insecure(bits: u64) -> Result<(PublicKey, PrivateKey)> {
    keygen_insecure_with_rng(bits, &mut rand::thread_rng())
}

pub fn keygen_insecure_with_rng<R: RngCore + CryptoRng + ?Sized>(
    bits: u64,
    rng: &mut R,
) -> Result<(PublicKey, PrivateKey)> {
    if bits < MIN_INSECURE_BITS {
        return Err(HeError::KeyTooSmall { bits, min: MIN_INSECURE_BITS });
    }
    generate(bits, rng)
}

fn generate<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<(PublicKey, PrivateKey)> {
    const RETRIES: usize = 16;
    for _ in 0..RETRIES {
        let p = gen_prime(bits - bits / 2, rng)?;
        let q = gen_prime(bits / 2, rng)?;
        if p == q {
            continue;
        }
        let sk = PrivateKey::from_primes(p, q)?;
        if sk.public.bits() == bits {
            return Ok((sk.public.clone(), sk));
        }
    }
    Err(HeError::PrimeGeneration { attempts: RETRIES })
}

impl PublicKey {
    /// Rebuilds a public key from its modulus.
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        if n.bits() < MIN_INSECURE_BITS {
            return Err(HeError::KeyTooSmall { bits: n.bits(), min: MIN_INSECURE_BITS });
        }
        if n.is_even() {
            return Err(HeError::Wire("modulus must be odd"));
        }
        let mut h = DefaultHasher::new();
        n.hash(&mut h);
        Ok(PublicKey { n_sq: &n * &n, half_n: &n >> 1, fingerprint: h.finish(), n })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_sq
    }

    /// The generator, always n + 1.
    pub fn g(&self) -> BigUint {
        &self.n + 1u32
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    pub fn is_insecure(&self) -> bool {
        self.bits() < MIN_SECURE_BITS
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Wraps a raw group element, checking it belongs to this key's group.
    pub fn ciphertext_from_value(&self, value: BigUint) -> Result<Ciphertext> {
        if value.is_zero() || value >= self.n_sq || !value.gcd(&self.n).is_one() {
            return Err(HeError::InvalidCiphertext);
        }
        Ok(Ciphertext { value, key: self.fingerprint })
    }

    pub fn encrypt(&self, x: &BigUint) -> Result<Ciphertext> {
        self.encrypt_with_rng(x, &mut rand::thread_rng())
    }

    pub fn encrypt_with_rng<R: RngCore + CryptoRng + ?Sized>(&self, x: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        if *x >= self.n {
            return Err(HeError::PlaintextRange);
        }
        let noise = self.random_noise(rng);
        Ok(self.wrap((self.g_pow(x) * noise) % &self.n_sq))
    }

    /// Encryption with caller-chosen randomness `r`. Test builds only.
    #[cfg(any(test, feature = "test-hooks"))]
    pub fn encrypt_with_r(&self, x: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        if *x >= self.n {
            return Err(HeError::PlaintextRange);
        }
        let noise = pow_mod(r, &self.n, &self.n_sq);
        Ok(self.wrap((self.g_pow(x) * noise) % &self.n_sq))
    }

    /// Homomorphic addition.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul_raw(a, b))
    }

    /// Multiplies the plaintext of `a` by `k` and re-randomizes the result.
    pub fn mul_plain(&self, a: &Ciphertext, k: &BigUint) -> Result<Ciphertext> {
        let raw = self.mul_plain_unblinded_inner(a, k)?;
        Ok(self.rerandomize_raw(&raw))
    }

    /// Scalar multiplication without the blinding step. Test builds only.
    #[cfg(any(test, feature = "test-hooks"))]
    pub fn mul_plain_unblinded(&self, a: &Ciphertext, k: &BigUint) -> Result<Ciphertext> {
        self.mul_plain_unblinded_inner(a, k)
    }

    fn mul_plain_unblinded_inner(&self, a: &Ciphertext, k: &BigUint) -> Result<Ciphertext> {
        self.check(a)?;
        if *k >= self.n {
            return Err(HeError::PlaintextRange);
        }
        Ok(self.pow_signed_raw(a, &self.centered(k)))
    }

    /// Multiplies `a` by `Enc(0)`.
    pub fn rerandomize(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.check(a)?;
        Ok(self.rerandomize_raw(a))
    }

    /// Encryption of the inner product of the plaintexts of `enc` with `plain`.
    pub fn dot_encrypted(&self, enc: &[Ciphertext], plain: &[BigUint]) -> Result<Ciphertext> {
        if enc.len() != plain.len() {
            return Err(HeError::Dimension(format!("{} ciphertexts against {} scalars", enc.len(), plain.len())));
        }
        for k in plain {
            if *k >= self.n {
                return Err(HeError::PlaintextRange);
            }
        }
        let scalars: Vec<BigInt> = plain.iter().map(|k| self.centered(k)).collect();
        let raw = self.dot_signed_raw(enc, &scalars)?;
        Ok(self.rerandomize_raw(&raw))
    }

    /// `A · Enc(B)` for a plaintext `r × k` matrix and an encrypted `k × c` matrix.
    pub fn mat_mul(&self, a: &[Vec<BigUint>], b: &[Vec<Ciphertext>]) -> Result<Vec<Vec<Ciphertext>>> {
        let inner = b.len();
        let cols = b.first().map_or(0, Vec::len);
        if b.iter().any(|row| row.len() != cols) {
            return Err(HeError::Dimension("ragged encrypted matrix".into()));
        }
        if a.iter().any(|row| row.len() != inner) {
            return Err(HeError::Dimension(format!("left rows must have length {inner}")));
        }
        let columns: Vec<Vec<Ciphertext>> = (0..cols).map(|j| b.iter().map(|row| row[j].clone()).collect()).collect();
        a.iter().map(|row| columns.iter().map(|col| self.dot_encrypted(col, row)).collect()).collect()
    }

    /// `A · Enc(v)` for a plaintext matrix and an encrypted vector.
    pub fn mat_vec(&self, a: &[Vec<BigUint>], v: &[Ciphertext]) -> Result<Vec<Ciphertext>> {
        a.iter().map(|row| self.dot_encrypted(v, row)).collect()
    }

    // ---- crate-internal building blocks (no blinding) ----

    pub(crate) fn check(&self, a: &Ciphertext) -> Result<()> {
        if a.key != self.fingerprint {
            return Err(HeError::KeyMismatch);
        }
        Ok(())
    }

    pub(crate) fn wrap(&self, value: BigUint) -> Ciphertext {
        Ciphertext { value, key: self.fingerprint }
    }

    /// Maps k in Z_n to the representative in (-n/2, n/2].
    pub(crate) fn centered(&self, k: &BigUint) -> BigInt {
        if *k > self.half_n {
            -BigInt::from(&self.n - k)
        } else {
            BigInt::from(k.clone())
        }
    }

    pub(crate) fn mul_raw(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        self.wrap((&a.value * &b.value) % &self.n_sq)
    }

    /// `a^k` for a signed exponent, using the group inverse for k < 0.
    pub(crate) fn pow_signed_raw(&self, a: &Ciphertext, k: &BigInt) -> Ciphertext {
        let (sign, mag) = (k.sign(), k.magnitude());
        match sign {
            Sign::NoSign => self.wrap(BigUint::one()),
            Sign::Plus => self.wrap(pow_mod(&a.value, mag, &self.n_sq)),
            Sign::Minus => {
                let inv = a.value.modinv(&self.n_sq).expect("ciphertexts are units modulo n^2");
                self.wrap(pow_mod(&inv, mag, &self.n_sq))
            }
        }
    }

    /// `prod a_i^{k_i}` for signed exponents; one group inversion at most.
    pub(crate) fn dot_signed_raw(&self, enc: &[Ciphertext], k: &[BigInt]) -> Result<Ciphertext> {
        if enc.len() != k.len() {
            return Err(HeError::Dimension(format!("{} ciphertexts against {} scalars", enc.len(), k.len())));
        }
        for c in enc {
            self.check(c)?;
        }
        let one = BigUint::one;
        let (pos, neg) = enc
            .par_iter()
            .zip(k.par_iter())
            .map(|(c, k)| match k.sign() {
                Sign::NoSign => (one(), one()),
                Sign::Plus => (pow_mod(&c.value, k.magnitude(), &self.n_sq), one()),
                Sign::Minus => (one(), pow_mod(&c.value, k.magnitude(), &self.n_sq)),
            })
            .reduce(|| (one(), one()), |(p1, n1), (p2, n2)| ((p1 * p2) % &self.n_sq, (n1 * n2) % &self.n_sq));
        let value = if neg.is_one() {
            pos
        } else {
            let inv = neg.modinv(&self.n_sq).expect("ciphertexts are units modulo n^2");
            (pos * inv) % &self.n_sq
        };
        Ok(self.wrap(value))
    }

    pub(crate) fn rerandomize_raw(&self, a: &Ciphertext) -> Ciphertext {
        let noise = self.random_noise(&mut rand::thread_rng());
        self.wrap((&a.value * noise) % &self.n_sq)
    }

    /// g^x mod n^2 = 1 + x n for g = n + 1.
    fn g_pow(&self, x: &BigUint) -> BigUint {
        (x * &self.n + 1u32) % &self.n_sq
    }

    /// r^n mod n^2 for uniform r in Z_n^*.
    fn random_noise<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_below(&self.n);
            if !r.is_zero() && r.gcd(&self.n).is_one() {
                return pow_mod(&r, &self.n, &self.n_sq);
            }
        }
    }
}

impl PrivateKey {
    /// Builds a keypair from two distinct odd primes.
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self> {
        if p == q || p.is_even() || q.is_even() {
            return Err(HeError::PrimeGeneration { attempts: 0 });
        }
        let n = &p * &q;
        let phi = (&p - 1u32) * (&q - 1u32);
        if !n.gcd(&phi).is_one() {
            return Err(HeError::PrimeGeneration { attempts: 0 });
        }
        let public = PublicKey::from_modulus(n)?;
        let g = public.g();
        let p_sq = &p * &p;
        let q_sq = &q * &q;
        let p_minus_1 = &p - 1u32;
        let q_minus_1 = &q - 1u32;
        let hp =
            l_fn(&pow_mod(&g, &p_minus_1, &p_sq), &p).modinv(&p).ok_or(HeError::PrimeGeneration { attempts: 0 })?;
        let hq =
            l_fn(&pow_mod(&g, &q_minus_1, &q_sq), &q).modinv(&q).ok_or(HeError::PrimeGeneration { attempts: 0 })?;
        let q_inv_p = q.modinv(&p).ok_or(HeError::PrimeGeneration { attempts: 0 })?;
        Ok(PrivateKey { public, p, q, p_sq, q_sq, p_minus_1, q_minus_1, hp, hq, q_inv_p })
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    /// CRT decryption.
    pub fn decrypt(&self, a: &Ciphertext) -> Result<BigUint> {
        self.public.check(a)?;
        let c = &a.value;
        if c.is_zero() || *c >= self.public.n_sq || !c.gcd(&self.public.n).is_one() {
            return Err(HeError::InvalidCiphertext);
        }
        let mp = (l_fn(&pow_mod(c, &self.p_minus_1, &self.p_sq), &self.p) * &self.hp) % &self.p;
        let mq = (l_fn(&pow_mod(c, &self.q_minus_1, &self.q_sq), &self.q) * &self.hq) % &self.q;
        let diff = (&mp + &self.p - (&mq % &self.p)) % &self.p;
        Ok(mq + &self.q * ((diff * &self.q_inv_p) % &self.p))
    }
}

/// L(u) = (u - 1) / p.
fn l_fn(u: &BigUint, p: &BigUint) -> BigUint {
    (u - 1u32) / p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::OnceLock;

    fn small_keys() -> &'static (PublicKey, PrivateKey) {
        static KEYS: OnceLock<(PublicKey, PrivateKey)> = OnceLock::new();
        KEYS.get_or_init(|| keygen_insecure_with_rng(256, &mut ChaCha20Rng::seed_from_u64(7)).unwrap())
    }

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn keygen_1024_round_trips() {
        let (pk, sk) = keygen(1024).unwrap();
        assert_eq!(pk.bits(), 1024);
        assert!(!pk.is_insecure());
        assert_eq!(sk.p() * sk.q(), *pk.n());
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..5 {
            let x = rng.gen_biguint_below(pk.n());
            assert_eq!(sk.decrypt(&pk.encrypt(&x).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn keygen_refuses_small_keys() {
        assert!(matches!(keygen(512), Err(HeError::KeyTooSmall { .. })));
        assert!(matches!(keygen_insecure(32), Err(HeError::KeyTooSmall { .. })));
    }

    #[test]
    fn tiny_key_exhaustive_round_trip() {
        let (pk, sk) = keygen_insecure_with_rng(64, &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        assert!(pk.is_insecure());
        assert_eq!(pk.bits(), 64);
        for x in 0..(1u64 << 16) {
            let c = pk.encrypt(&big(x)).unwrap();
            assert_eq!(sk.decrypt(&c).unwrap(), big(x));
        }
    }

    #[test]
    fn encryption_is_probabilistic() {
        let (pk, sk) = small_keys();
        let a = pk.encrypt(&big(0)).unwrap();
        let b = pk.encrypt(&big(0)).unwrap();
        assert_ne!(a, b);
        assert!(!a.value().is_one());
        assert_eq!(sk.decrypt(&a).unwrap(), big(0));
        assert_eq!(sk.decrypt(&b).unwrap(), big(0));

        let x = big(12345);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..1000 {
            assert!(seen.insert(pk.encrypt(&x).unwrap().value().clone()));
        }
    }

    #[test]
    fn boundary_plaintexts() {
        let (pk, sk) = small_keys();
        let top = pk.n() - 1u32;
        assert_eq!(sk.decrypt(&pk.encrypt(&top).unwrap()).unwrap(), top);
        assert_eq!(pk.encrypt(pk.n()).unwrap_err(), HeError::PlaintextRange);
    }

    #[test]
    fn fixed_randomness_matches_direct_exponentiation() {
        let (pk, _) = small_keys();
        let c = pk.encrypt_with_r(&big(5), &big(1)).unwrap();
        let expected = pk.g().modpow(&big(5), pk.n_squared());
        assert_eq!(*c.value(), expected);
    }

    #[test]
    fn addition_examples() {
        let (pk, sk) = small_keys();
        let enc = |x: &BigUint| pk.encrypt(x).unwrap();
        let dec = |c: &Ciphertext| sk.decrypt(c).unwrap();
        assert_eq!(dec(&pk.add(&enc(&big(2)), &enc(&big(3))).unwrap()), big(5));

        let x = enc(&big(77));
        let y = pk.add(&x, &enc(&big(0))).unwrap();
        assert_eq!(dec(&y), big(77));
        assert_ne!(x, y);

        let top = pk.n() - 1u32;
        assert_eq!(dec(&pk.add(&enc(&top), &enc(&big(1))).unwrap()), big(0));
    }

    #[test]
    fn key_mismatch_is_detected() {
        let (pk, _) = small_keys();
        let (other, other_sk) = keygen_insecure_with_rng(256, &mut ChaCha20Rng::seed_from_u64(8)).unwrap();
        let a = pk.encrypt(&big(1)).unwrap();
        let b = other.encrypt(&big(1)).unwrap();
        assert_eq!(pk.add(&a, &b).unwrap_err(), HeError::KeyMismatch);
        assert_eq!(other_sk.decrypt(&a).unwrap_err(), HeError::KeyMismatch);
    }

    #[test]
    fn scalar_examples() {
        let (pk, sk) = small_keys();
        let x = pk.encrypt(&big(7)).unwrap();
        assert_eq!(sk.decrypt(&pk.mul_plain(&x, &big(3)).unwrap()).unwrap(), big(21));
        assert_eq!(sk.decrypt(&pk.mul_plain(&x, &big(0)).unwrap()).unwrap(), big(0));
        let same = pk.mul_plain(&x, &big(1)).unwrap();
        assert_eq!(sk.decrypt(&same).unwrap(), big(7));
        assert_ne!(same, x);
        // k just above n/2 takes the inverse path.
        let k = pk.n() - 2u32;
        let expected = (big(7) * &k) % pk.n();
        assert_eq!(sk.decrypt(&pk.mul_plain(&x, &k).unwrap()).unwrap(), expected);
    }

    #[test]
    fn scalar_output_differs_from_unblinded_path() {
        let (pk, sk) = small_keys();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = pk.encrypt(&rng.gen_biguint_below(pk.n())).unwrap();
            let k = rng.gen_biguint_below(pk.n());
            let blinded = pk.mul_plain(&x, &k).unwrap();
            let naive = pk.mul_plain_unblinded(&x, &k).unwrap();
            assert_ne!(blinded, naive);
            assert_eq!(sk.decrypt(&blinded).unwrap(), sk.decrypt(&naive).unwrap());
        }
    }

    #[test]
    fn dot_product_examples() {
        let (pk, sk) = small_keys();
        let enc: Vec<_> = [1u64, 2, 3].iter().map(|&x| pk.encrypt(&big(x)).unwrap()).collect();
        let ones = vec![big(1); 3];
        assert_eq!(sk.decrypt(&pk.dot_encrypted(&enc, &ones).unwrap()).unwrap(), big(6));
        let zeros = vec![big(0); 3];
        assert_eq!(sk.decrypt(&pk.dot_encrypted(&enc, &zeros).unwrap()).unwrap(), big(0));
        assert!(matches!(pk.dot_encrypted(&enc, &ones[..2]), Err(HeError::Dimension(_))));
    }

    #[test]
    fn dot_product_matches_plaintext_oracle() {
        let (pk, sk) = small_keys();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for _ in 0..10 {
            let v: Vec<BigUint> = (0..8).map(|_| rng.gen_biguint_below(pk.n())).collect();
            let w: Vec<BigUint> = (0..8).map(|_| rng.gen_biguint_below(pk.n())).collect();
            let enc: Vec<_> = v.iter().map(|x| pk.encrypt(x).unwrap()).collect();
            let expected = v.iter().zip(&w).fold(BigUint::zero(), |acc, (a, b)| acc + a * b) % pk.n();
            assert_eq!(sk.decrypt(&pk.dot_encrypted(&enc, &w).unwrap()).unwrap(), expected);
        }
    }

    #[test]
    fn matrix_extension_matches_plaintext_oracle() {
        let (pk, sk) = small_keys();
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let (r, k, c) = (3, 4, 2);
        let a: Vec<Vec<BigUint>> = (0..r).map(|_| (0..k).map(|_| rng.gen_biguint_below(pk.n())).collect()).collect();
        let b: Vec<Vec<BigUint>> = (0..k).map(|_| (0..c).map(|_| rng.gen_biguint(40)).collect()).collect();
        let b_enc: Vec<Vec<Ciphertext>> =
            b.iter().map(|row| row.iter().map(|x| pk.encrypt(x).unwrap()).collect()).collect();
        let prod = pk.mat_mul(&a, &b_enc).unwrap();
        for i in 0..r {
            for j in 0..c {
                let expected = (0..k).fold(BigUint::zero(), |acc, t| acc + &a[i][t] * &b[t][j]) % pk.n();
                assert_eq!(sk.decrypt(&prod[i][j]).unwrap(), expected);
            }
        }
        let col: Vec<Ciphertext> = b_enc.iter().map(|row| row[0].clone()).collect();
        let mv = pk.mat_vec(&a, &col).unwrap();
        for i in 0..r {
            assert_eq!(sk.decrypt(&mv[i]).unwrap(), sk.decrypt(&prod[i][0]).unwrap());
        }
    }

    #[test]
    fn invalid_ciphertexts_are_rejected() {
        let (pk, _) = small_keys();
        assert!(pk.ciphertext_from_value(BigUint::zero()).is_err());
        assert!(pk.ciphertext_from_value(pk.n_squared().clone()).is_err());
        assert!(pk.ciphertext_from_value(pk.n().clone()).is_err());
        assert!(pk.ciphertext_from_value(big(2)).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn homomorphic_addition(a in any::<[u64; 4]>(), b in any::<[u64; 4]>()) {
            let (pk, sk) = small_keys();
            let x = BigUint::from_slice(&to_limbs(&a)) % pk.n();
            let y = BigUint::from_slice(&to_limbs(&b)) % pk.n();
            let sum = pk.add(&pk.encrypt(&x).unwrap(), &pk.encrypt(&y).unwrap()).unwrap();
            prop_assert_eq!(sk.decrypt(&sum).unwrap(), (x + y) % pk.n());
        }

        #[test]
        fn scalar_law(a in any::<[u64; 4]>(), k in any::<[u64; 4]>()) {
            let (pk, sk) = small_keys();
            let x = BigUint::from_slice(&to_limbs(&a)) % pk.n();
            let k = BigUint::from_slice(&to_limbs(&k)) % pk.n();
            let prod = pk.mul_plain(&pk.encrypt(&x).unwrap(), &k).unwrap();
            prop_assert_eq!(sk.decrypt(&prod).unwrap(), (x * k) % pk.n());
        }
    }

    fn to_limbs(words: &[u64; 4]) -> Vec<u32> {
        words.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect()
    }
}
