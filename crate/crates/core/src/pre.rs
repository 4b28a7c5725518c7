//! Proxy re-encryption over an asymmetric pairing.
//!
//! Keys are `sk = (s1, s2)` with `pk = (gt^s1, h2^s2)`. A level-2 ciphertext
//! `(g1^r, m * pkT^r)` is turned into a level-1 ciphertext for a delegatee by
//! pairing its first component with `rk = pk2_u^{s1_o}`; the second component
//! passes through unchanged. Only `s1` of the owner and `s2` of the user take
//! part in the algebra; the other halves are kept so published keys have the
//! full two-component shape.

use rand::RngCore;
use thiserror::Error;

use crate::codec::{tag, CodecError, Decoder, Encoder};
use crate::pairing::{Engine, GroupCtx, GroupError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("secret exponent must be nonzero")]
    ZeroSecret,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SecretKey<E: Engine> {
    pub s1: E::Scalar,
    pub s2: E::Scalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PublicKey<E: Engine> {
    /// `gt^s1`
    pub pk_t: E::Gt,
    /// `h2^s2`
    pub pk2: E::G2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyPair<E: Engine> {
    pub sk: SecretKey<E>,
    pub pk: PublicKey<E>,
}

/// Owner-encrypted payload `(g1^r, m * pkT^r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Level2Ciphertext<E: Engine> {
    pub c1: E::G1,
    pub c2: E::Gt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReKey<E: Engine> {
    pub rk: E::G2,
}

/// Re-encrypted payload `(e(c1, rk), c2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Level1Ciphertext<E: Engine> {
    pub c1p: E::Gt,
    pub c2p: E::Gt,
}

pub fn keygen<E: Engine, R: RngCore + ?Sized>(ctx: &GroupCtx<E>, rng: &mut R) -> KeyPair<E> {
    let s1 = ctx.engine.random_nonzero_scalar(rng);
    let s2 = ctx.engine.random_nonzero_scalar(rng);
    keypair_from_secret(ctx, s1, s2).expect("nonzero by construction")
}

pub fn keypair_from_secret<E: Engine>(
    ctx: &GroupCtx<E>,
    s1: E::Scalar,
    s2: E::Scalar,
) -> Result<KeyPair<E>, PreError> {
    if ctx.engine.scalar_is_zero(&s1) || ctx.engine.scalar_is_zero(&s2) {
        return Err(PreError::ZeroSecret);
    }
    let pk = PublicKey { pk_t: ctx.gt_pow(&s1), pk2: ctx.h2_pow(&s2) };
    Ok(KeyPair { sk: SecretKey { s1, s2 }, pk })
}

pub fn enc<E: Engine, R: RngCore + ?Sized>(
    ctx: &GroupCtx<E>,
    pk_o: &PublicKey<E>,
    m: &E::Gt,
    rng: &mut R,
) -> Level2Ciphertext<E> {
    let r = ctx.engine.random_scalar(rng);
    enc_inner(ctx, pk_o, m, &r)
}

/// [`enc`] with a caller-chosen exponent, for reproducible worked examples.
#[cfg(any(test, feature = "test-hooks"))]
pub fn enc_with_r<E: Engine>(
    ctx: &GroupCtx<E>,
    pk_o: &PublicKey<E>,
    m: &E::Gt,
    r: &E::Scalar,
) -> Level2Ciphertext<E> {
    enc_inner(ctx, pk_o, m, r)
}

fn enc_inner<E: Engine>(
    ctx: &GroupCtx<E>,
    pk_o: &PublicKey<E>,
    m: &E::Gt,
    r: &E::Scalar,
) -> Level2Ciphertext<E> {
    let e = &ctx.engine;
    Level2Ciphertext { c1: ctx.g1_pow(r), c2: e.gt_mul(m, &e.gt_pow(&pk_o.pk_t, r)) }
}

/// `m = c2 / e(c1, h2)^{s1}`
pub fn dec_owner<E: Engine>(ctx: &GroupCtx<E>, sk_o: &SecretKey<E>, c: &Level2Ciphertext<E>) -> E::Gt {
    let e = &ctx.engine;
    let mask = e.gt_pow(&ctx.pairing(&c.c1, &ctx.h2), &sk_o.s1);
    e.gt_mul(&c.c2, &e.gt_inverse(&mask))
}

/// `rk = pk2_u^{s1_o}`
pub fn rekeygen<E: Engine>(ctx: &GroupCtx<E>, sk_o: &SecretKey<E>, pk_u: &PublicKey<E>) -> ReKey<E> {
    ReKey { rk: ctx.engine.g2_mul(&pk_u.pk2, &sk_o.s1) }
}

/// Takes only the re-key and the ciphertext: no secret key or payload is
/// reachable from here.
pub fn reenc<E: Engine>(ctx: &GroupCtx<E>, rk: &ReKey<E>, c: &Level2Ciphertext<E>) -> Level1Ciphertext<E> {
    Level1Ciphertext { c1p: ctx.pairing(&c.c1, &rk.rk), c2p: c.c2 }
}

/// `m = c2p * c1p^{-1/s2_u}`
pub fn dec_user<E: Engine>(
    ctx: &GroupCtx<E>,
    sk_u: &SecretKey<E>,
    c: &Level1Ciphertext<E>,
) -> Result<E::Gt, PreError> {
    let e = &ctx.engine;
    let inv = ctx.scalar_inverse(&sk_u.s2)?;
    Ok(e.gt_mul(&c.c2p, &e.gt_pow(&c.c1p, &e.scalar_neg(&inv))))
}

impl<E: Engine> PublicKey<E> {
    pub fn to_bytes(&self, e: &E) -> Vec<u8> {
        Encoder::new(tag::PUBLIC_KEY).field(&e.gt_to_bytes(&self.pk_t)).field(&e.g2_to_bytes(&self.pk2)).finish()
    }

    pub fn from_bytes(e: &E, bytes: &[u8]) -> Result<Self, PreError> {
        let mut d = Decoder::new(bytes, tag::PUBLIC_KEY)?;
        let pk_t = e.gt_from_bytes(d.field()?)?;
        let pk2 = e.g2_from_bytes(d.field()?)?;
        d.finish()?;
        Ok(PublicKey { pk_t, pk2 })
    }
}

impl<E: Engine> SecretKey<E> {
    pub fn to_bytes(&self, e: &E) -> Vec<u8> {
        Encoder::new(tag::SECRET_KEY)
            .field(&e.scalar_to_bytes(&self.s1))
            .field(&e.scalar_to_bytes(&self.s2))
            .finish()
    }

    pub fn from_bytes(e: &E, bytes: &[u8]) -> Result<Self, PreError> {
        let mut d = Decoder::new(bytes, tag::SECRET_KEY)?;
        let s1 = e.scalar_from_bytes(d.field()?)?;
        let s2 = e.scalar_from_bytes(d.field()?)?;
        d.finish()?;
        Ok(SecretKey { s1, s2 })
    }
}

impl<E: Engine> KeyPair<E> {
    /// Rebuilds the key pair from its secret half, recomputing the public key.
    pub fn from_secret_bytes(ctx: &GroupCtx<E>, bytes: &[u8]) -> Result<Self, PreError> {
        let sk = SecretKey::from_bytes(&ctx.engine, bytes)?;
        keypair_from_secret(ctx, sk.s1, sk.s2)
    }
}

impl<E: Engine> Level2Ciphertext<E> {
    pub fn to_bytes(&self, e: &E) -> Vec<u8> {
        Encoder::new(tag::LEVEL2_CIPHERTEXT).field(&e.g1_to_bytes(&self.c1)).field(&e.gt_to_bytes(&self.c2)).finish()
    }

    pub fn from_bytes(e: &E, bytes: &[u8]) -> Result<Self, PreError> {
        let mut d = Decoder::new(bytes, tag::LEVEL2_CIPHERTEXT)?;
        let c1 = e.g1_from_bytes(d.field()?)?;
        let c2 = e.gt_from_bytes(d.field()?)?;
        d.finish()?;
        Ok(Level2Ciphertext { c1, c2 })
    }
}

impl<E: Engine> Level1Ciphertext<E> {
    pub fn to_bytes(&self, e: &E) -> Vec<u8> {
        Encoder::new(tag::LEVEL1_CIPHERTEXT).field(&e.gt_to_bytes(&self.c1p)).field(&e.gt_to_bytes(&self.c2p)).finish()
    }

    pub fn from_bytes(e: &E, bytes: &[u8]) -> Result<Self, PreError> {
        let mut d = Decoder::new(bytes, tag::LEVEL1_CIPHERTEXT)?;
        let c1p = e.gt_from_bytes(d.field()?)?;
        let c2p = e.gt_from_bytes(d.field()?)?;
        d.finish()?;
        Ok(Level1Ciphertext { c1p, c2p })
    }
}

impl<E: Engine> ReKey<E> {
    pub fn to_bytes(&self, e: &E) -> Vec<u8> {
        Encoder::new(tag::REKEY).field(&e.g2_to_bytes(&self.rk)).finish()
    }

    pub fn from_bytes(e: &E, bytes: &[u8]) -> Result<Self, PreError> {
        let mut d = Decoder::new(bytes, tag::REKEY)?;
        let rk = e.g2_from_bytes(d.field()?)?;
        d.finish()?;
        Ok(ReKey { rk })
    }
}
