// SPDX-License-Identifier: Apache-2.0

//! Message kinds, payload schemas and frame layout.
//!
//! A frame is a 4-byte big-endian length of everything after it, a 1-byte
//! kind, an 8-byte big-endian session id, an 8-byte big-endian sequence number
//! and the payload. Vectors of encrypted numbers are a 4-byte count followed
//! by the elements.

use vfl_he::wire::{put_len_prefixed, Reader};
use vfl_he::{Base, EncryptedNumber, PublicKey};

use crate::error::{ProtocolError, Result};

pub const HEADER_LEN: usize = 4 + 1 + 8 + 8;
/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    PublicKey = 1,
    EncMask = 2,
    HoldoutInit = 3,
    ModelBroadcast = 4,
    EncPartialU = 5,
    EncWZ = 6,
    EncGradParts = 7,
    EncLoss = 8,
    Abort = 9,
}

impl Kind {
    pub fn from_u8(v: u8) -> Result<Kind> {
        Ok(match v {
            1 => Kind::PublicKey,
            2 => Kind::EncMask,
            3 => Kind::HoldoutInit,
            4 => Kind::ModelBroadcast,
            5 => Kind::EncPartialU,
            6 => Kind::EncWZ,
            7 => Kind::EncGradParts,
            8 => Kind::EncLoss,
            9 => Kind::Abort,
            other => return Err(ProtocolError::Malformed(format!("unknown message kind {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: Kind,
    pub session: u64,
    pub seq: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn to_bytes(&self) -> Vec<u8> {
        let body = 1 + 8 + 8 + self.payload.len();
        let mut out = Vec::with_capacity(4 + body);
        out.extend_from_slice(&u32::try_from(body).expect("frame under 4 GiB").to_be_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.session.to_be_bytes());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < HEADER_LEN {
            return Err(ProtocolError::Malformed("short frame".into()));
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
        if len != bytes.len() - 4 {
            return Err(ProtocolError::Malformed(format!("frame length {len} but {} bytes follow", bytes.len() - 4)));
        }
        Ok(Frame {
            kind: Kind::from_u8(bytes[4])?,
            session: u64::from_be_bytes(bytes[5..13].try_into().expect("8 bytes")),
            seq: u64::from_be_bytes(bytes[13..21].try_into().expect("8 bytes")),
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }
}

/// What the coordinator asks for with a model broadcast.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Gradient = 0,
    Loss = 1,
    Stop = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    PublicKey {
        key: PublicKey,
        base: Base,
    },
    EncMask(Vec<EncryptedNumber>),
    /// Hold-out rows, A's half of the encrypted mean operator and `<m ∘ y>_H`.
    HoldoutInit {
        holdout: Vec<u64>,
        mu_a: Vec<EncryptedNumber>,
        my: Vec<EncryptedNumber>,
    },
    ModelBroadcast {
        purpose: Purpose,
        batch: u64,
        theta: Vec<f64>,
    },
    EncPartialU {
        theta: Vec<f64>,
        rows: Vec<u64>,
        u: Vec<EncryptedNumber>,
    },
    EncWZ {
        w: Vec<EncryptedNumber>,
        z: Vec<EncryptedNumber>,
    },
    EncGradParts {
        batch: u64,
        len: u64,
        z_a: Vec<EncryptedNumber>,
        z_b: Vec<EncryptedNumber>,
    },
    /// Phase 0, A to B: model, `<m ∘ u>_H` and A's quadratic term.
    EncLossPartial {
        theta: Vec<f64>,
        mu: Vec<EncryptedNumber>,
        quad: EncryptedNumber,
    },
    /// Phase 1, B to C: the encrypted loss.
    EncLossTotal(EncryptedNumber),
    Abort(String),
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    out.extend_from_slice(&u32::try_from(v.len()).expect("short vector").to_be_bytes());
    for x in v {
        out.extend_from_slice(&x.to_bits().to_be_bytes());
    }
}

fn put_u64s(out: &mut Vec<u8>, v: &[u64]) {
    out.extend_from_slice(&u32::try_from(v.len()).expect("short vector").to_be_bytes());
    for x in v {
        out.extend_from_slice(&x.to_be_bytes());
    }
}

fn put_encrypted(out: &mut Vec<u8>, v: &[EncryptedNumber]) {
    out.extend_from_slice(&u32::try_from(v.len()).expect("short vector").to_be_bytes());
    for x in v {
        x.write_to(out);
    }
}

fn count(r: &mut Reader<'_>, elem_min: usize) -> Result<usize> {
    let n = r.u32()? as usize;
    if n.saturating_mul(elem_min) > r.remaining() {
        return Err(ProtocolError::Malformed("vector count exceeds payload".into()));
    }
    Ok(n)
}

fn get_f64s(r: &mut Reader<'_>) -> Result<Vec<f64>> {
    let n = count(r, 8)?;
    (0..n).map(|_| Ok(r.f64()?)).collect()
}

fn get_u64s(r: &mut Reader<'_>) -> Result<Vec<u64>> {
    let n = count(r, 8)?;
    (0..n).map(|_| Ok(r.u64()?)).collect()
}

fn get_encrypted(r: &mut Reader<'_>, pk: &PublicKey, base: Base) -> Result<Vec<EncryptedNumber>> {
    let n = count(r, 12)?;
    (0..n).map(|_| Ok(EncryptedNumber::read_from(pk, base, r)?)).collect()
}

impl Message {
    pub fn kind(&self) -> Kind {
        match self {
            Message::PublicKey { .. } => Kind::PublicKey,
            Message::EncMask(_) => Kind::EncMask,
            Message::HoldoutInit { .. } => Kind::HoldoutInit,
            Message::ModelBroadcast { .. } => Kind::ModelBroadcast,
            Message::EncPartialU { .. } => Kind::EncPartialU,
            Message::EncWZ { .. } => Kind::EncWZ,
            Message::EncGradParts { .. } => Kind::EncGradParts,
            Message::EncLossPartial { .. } | Message::EncLossTotal(_) => Kind::EncLoss,
            Message::Abort(_) => Kind::Abort,
        }
    }

    /// Number of ciphertexts carried.
    pub fn ciphertexts(&self) -> usize {
        match self {
            Message::PublicKey { .. } | Message::ModelBroadcast { .. } | Message::Abort(_) => 0,
            Message::EncMask(v) => v.len(),
            Message::HoldoutInit { mu_a, my, .. } => mu_a.len() + my.len(),
            Message::EncPartialU { u, .. } => u.len(),
            Message::EncWZ { w, z } => w.len() + z.len(),
            Message::EncGradParts { z_a, z_b, .. } => z_a.len() + z_b.len(),
            Message::EncLossPartial { mu, .. } => mu.len() + 1,
            Message::EncLossTotal(_) => 1,
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::PublicKey { key, base } => {
                put_len_prefixed(&mut out, &key.to_bytes());
                out.extend_from_slice(&base.value().to_be_bytes());
            }
            Message::EncMask(v) => put_encrypted(&mut out, v),
            Message::HoldoutInit { holdout, mu_a, my } => {
                put_u64s(&mut out, holdout);
                put_encrypted(&mut out, mu_a);
                put_encrypted(&mut out, my);
            }
            Message::ModelBroadcast { purpose, batch, theta } => {
                out.push(*purpose as u8);
                out.extend_from_slice(&batch.to_be_bytes());
                put_f64s(&mut out, theta);
            }
            Message::EncPartialU { theta, rows, u } => {
                put_f64s(&mut out, theta);
                put_u64s(&mut out, rows);
                put_encrypted(&mut out, u);
            }
            Message::EncWZ { w, z } => {
                put_encrypted(&mut out, w);
                put_encrypted(&mut out, z);
            }
            Message::EncGradParts { batch, len, z_a, z_b } => {
                out.extend_from_slice(&batch.to_be_bytes());
                out.extend_from_slice(&len.to_be_bytes());
                put_encrypted(&mut out, z_a);
                put_encrypted(&mut out, z_b);
            }
            Message::EncLossPartial { theta, mu, quad } => {
                out.push(0);
                put_f64s(&mut out, theta);
                put_encrypted(&mut out, mu);
                quad.write_to(&mut out);
            }
            Message::EncLossTotal(loss) => {
                out.push(1);
                loss.write_to(&mut out);
            }
            Message::Abort(reason) => out.extend_from_slice(reason.as_bytes()),
        }
        out
    }

    /// Parses a payload. Every kind except `PublicKey` and `Abort` needs the
    /// session key to validate ciphertexts.
    pub fn decode(kind: Kind, payload: &[u8], key: Option<(&PublicKey, Base)>) -> Result<Message> {
        let mut r = Reader::new(payload);
        let need_key = || key.ok_or_else(|| ProtocolError::Malformed(format!("{kind:?} before the public key")));
        let msg = match kind {
            Kind::PublicKey => {
                let key = PublicKey::from_bytes(r.len_prefixed()?)?;
                let base = Base::new(r.u64()?)?;
                Message::PublicKey { key, base }
            }
            Kind::Abort => {
                let reason = String::from_utf8(payload.to_vec())
                    .map_err(|_| ProtocolError::Malformed("abort reason is not UTF-8".into()))?;
                return Ok(Message::Abort(reason));
            }
            Kind::ModelBroadcast => {
                let purpose = match r.u8()? {
                    0 => Purpose::Gradient,
                    1 => Purpose::Loss,
                    2 => Purpose::Stop,
                    p => return Err(ProtocolError::Malformed(format!("unknown broadcast purpose {p}"))),
                };
                Message::ModelBroadcast { purpose, batch: r.u64()?, theta: get_f64s(&mut r)? }
            }
            Kind::EncMask => {
                let (pk, base) = need_key()?;
                Message::EncMask(get_encrypted(&mut r, pk, base)?)
            }
            Kind::HoldoutInit => {
                let (pk, base) = need_key()?;
                Message::HoldoutInit {
                    holdout: get_u64s(&mut r)?,
                    mu_a: get_encrypted(&mut r, pk, base)?,
                    my: get_encrypted(&mut r, pk, base)?,
                }
            }
            Kind::EncPartialU => {
                let (pk, base) = need_key()?;
                Message::EncPartialU {
                    theta: get_f64s(&mut r)?,
                    rows: get_u64s(&mut r)?,
                    u: get_encrypted(&mut r, pk, base)?,
                }
            }
            Kind::EncWZ => {
                let (pk, base) = need_key()?;
                Message::EncWZ { w: get_encrypted(&mut r, pk, base)?, z: get_encrypted(&mut r, pk, base)? }
            }
            Kind::EncGradParts => {
                let (pk, base) = need_key()?;
                Message::EncGradParts {
                    batch: r.u64()?,
                    len: r.u64()?,
                    z_a: get_encrypted(&mut r, pk, base)?,
                    z_b: get_encrypted(&mut r, pk, base)?,
                }
            }
            Kind::EncLoss => {
                let (pk, base) = need_key()?;
                match r.u8()? {
                    0 => Message::EncLossPartial {
                        theta: get_f64s(&mut r)?,
                        mu: get_encrypted(&mut r, pk, base)?,
                        quad: EncryptedNumber::read_from(pk, base, &mut r)?,
                    },
                    1 => Message::EncLossTotal(EncryptedNumber::read_from(pk, base, &mut r)?),
                    p => return Err(ProtocolError::Malformed(format!("unknown loss phase {p}"))),
                }
            }
        };
        r.finish()?;
        Ok(msg)
    }
}
