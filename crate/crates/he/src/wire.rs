// SPDX-License-Identifier: Apache-2.0

//! Byte encodings: big-endian magnitudes with 4-byte big-endian length
//! prefixes.

use num_bigint::BigUint;

use crate::encoding::{Base, EncryptedNumber};
use crate::error::{HeError, Result};
use crate::paillier::{Ciphertext, PrivateKey, PublicKey};

/// Cursor over a received byte buffer.
#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(HeError::Wire("truncated input"));
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn len_prefixed(&mut self) -> Result<&'a [u8]> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn biguint(&mut self) -> Result<BigUint> {
        Ok(BigUint::from_bytes_be(self.len_prefixed()?))
    }

    /// Fails unless the whole buffer was consumed.
    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(HeError::Wire("trailing bytes"));
        }
        Ok(())
    }
}

pub fn put_len_prefixed(out: &mut Vec<u8>, bytes: &[u8]) {
    let len = u32::try_from(bytes.len()).expect("field longer than 4 GiB");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(bytes);
}

pub fn put_biguint(out: &mut Vec<u8>, x: &BigUint) {
    put_len_prefixed(out, &x.to_bytes_be());
}

impl PublicKey {
    /// The modulus, length-prefixed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_biguint(&mut out, self.n());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let n = r.biguint()?;
        r.finish()?;
        PublicKey::from_modulus(n)
    }
}

impl PrivateKey {
    /// Both primes, each length-prefixed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_biguint(&mut out, self.p());
        put_biguint(&mut out, self.q());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let p = r.biguint()?;
        let q = r.biguint()?;
        r.finish()?;
        PrivateKey::from_primes(p, q)
    }
}

impl Ciphertext {
    pub fn write_to(&self, out: &mut Vec<u8>) {
        put_biguint(out, self.value());
    }

    pub fn read_from(pk: &PublicKey, r: &mut Reader<'_>) -> Result<Self> {
        pk.ciphertext_from_value(r.biguint()?)
    }
}

impl EncryptedNumber {
    /// Ciphertext followed by the exponent as 8-byte big-endian two's complement.
    pub fn write_to(&self, out: &mut Vec<u8>) {
        self.ciphertext().write_to(out);
        out.extend_from_slice(&self.exponent().to_be_bytes());
    }

    pub fn read_from(pk: &PublicKey, base: Base, r: &mut Reader<'_>) -> Result<Self> {
        let ct = Ciphertext::read_from(pk, r)?;
        Ok(EncryptedNumber::from_parts(ct, r.i64()?, base))
    }
}
