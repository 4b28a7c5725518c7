//! Non-interactive proof of re-encryption correctness.
//!
//! Statement `(c, c')`, witness `rk` with `e(c1, rk) = c1'` and `c2' = c2`.
//! The prover commits `A = e(c1, h2^s)`, derives
//! `ch = H("FAITH-PRE-v1" || c' || c || A)` and answers `z = h2^s * rk^ch`.
//! The verifier checks `e(c1, z) = A * c1'^ch` and `c2' = c2`, which is one
//! pairing and one target-group exponentiation.
//!
//! This proves knowledge of *some* `rk` consistent with the ciphertexts. It
//! does not tie `rk` to the owner's and user's public keys; that relation is
//! not checkable from public data with a pairing over these groups.

use rand::RngCore;

use super::{ProofError, PROOF_VERSION};
use crate::codec::{tag, Decoder, Encoder};
use crate::pairing::{hash_to_scalar, Engine, GroupCtx};
use crate::pre::{Level1Ciphertext, Level2Ciphertext, ReKey};

pub const PRE_DOMAIN: &[u8] = b"FAITH-PRE-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReEncStatement<E: Engine> {
    pub c: Level2Ciphertext<E>,
    pub cp: Level1Ciphertext<E>,
}

impl<E: Engine> ReEncStatement<E> {
    /// `ser(c') || ser(c)`
    pub fn to_bytes(&self, e: &E) -> Vec<u8> {
        let mut out = self.cp.to_bytes(e);
        out.extend(self.c.to_bytes(e));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReEncProof<E: Engine> {
    pub a: E::Gt,
    pub z: E::G2,
}

/// An interactive transcript `(A, ch, z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transcript<E: Engine> {
    pub a: E::Gt,
    pub ch: E::Scalar,
    pub z: E::G2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReencRejection {
    /// `c2' != c2`
    C2Mismatch,
    /// `e(c1, z) != A * c1'^ch`
    Equation,
}

pub fn challenge<E: Engine>(ctx: &GroupCtx<E>, stmt: &ReEncStatement<E>, a: &E::Gt) -> E::Scalar {
    let e = &ctx.engine;
    hash_to_scalar(e, &[PRE_DOMAIN, &stmt.to_bytes(e), &e.gt_to_bytes(a)])
}

pub fn prove_reenc<E: Engine, R: RngCore + ?Sized>(
    ctx: &GroupCtx<E>,
    stmt: &ReEncStatement<E>,
    rk: &ReKey<E>,
    rng: &mut R,
) -> Result<ReEncProof<E>, ProofError> {
    let s = ctx.engine.random_scalar(rng);
    prove_inner(ctx, stmt, rk, &s)
}

/// [`prove_reenc`] with a caller-chosen commitment exponent.
#[cfg(any(test, feature = "test-hooks"))]
pub fn prove_reenc_with_nonce<E: Engine>(
    ctx: &GroupCtx<E>,
    stmt: &ReEncStatement<E>,
    rk: &ReKey<E>,
    s: &E::Scalar,
) -> Result<ReEncProof<E>, ProofError> {
    prove_inner(ctx, stmt, rk, s)
}

fn prove_inner<E: Engine>(
    ctx: &GroupCtx<E>,
    stmt: &ReEncStatement<E>,
    rk: &ReKey<E>,
    s: &E::Scalar,
) -> Result<ReEncProof<E>, ProofError> {
    let e = &ctx.engine;
    if stmt.cp.c2p != stmt.c.c2 || ctx.pairing(&stmt.c.c1, &rk.rk) != stmt.cp.c1p {
        return Err(ProofError::WitnessMismatch);
    }
    let t = ctx.h2_pow(s);
    let a = ctx.pairing(&stmt.c.c1, &t);
    let ch = challenge(ctx, stmt, &a);
    let z = e.g2_add(&t, &e.g2_mul(&rk.rk, &ch));
    Ok(ReEncProof { a, z })
}

pub(crate) fn verify_counted<E: Engine>(
    ctx: &GroupCtx<E>,
    stmt: &ReEncStatement<E>,
    proof: &ReEncProof<E>,
    pairings: &mut u32,
) -> Result<(), ReencRejection> {
    if stmt.cp.c2p != stmt.c.c2 {
        return Err(ReencRejection::C2Mismatch);
    }
    let ch = challenge(ctx, stmt, &proof.a);
    let t = Transcript { a: proof.a, ch, z: proof.z };
    *pairings += 1;
    if transcript_holds(ctx, stmt, &t) {
        Ok(())
    } else {
        Err(ReencRejection::Equation)
    }
}

pub fn verify_reenc<E: Engine>(
    ctx: &GroupCtx<E>,
    stmt: &ReEncStatement<E>,
    proof: &ReEncProof<E>,
) -> Result<(), ReencRejection> {
    verify_counted(ctx, stmt, proof, &mut 0)
}

fn transcript_holds<E: Engine>(ctx: &GroupCtx<E>, stmt: &ReEncStatement<E>, t: &Transcript<E>) -> bool {
    let e = &ctx.engine;
    ctx.pairing(&stmt.c.c1, &t.z) == e.gt_mul(&t.a, &e.gt_pow(&stmt.cp.c1p, &t.ch))
}

/// Checks an interactive transcript: the verifier equation with a given challenge.
pub fn verify_transcript<E: Engine>(ctx: &GroupCtx<E>, stmt: &ReEncStatement<E>, t: &Transcript<E>) -> bool {
    stmt.cp.c2p == stmt.c.c2 && transcript_holds(ctx, stmt, t)
}

/// Produces an accepting transcript without the witness by picking `z` and
/// `ch` first and solving for `A = e(c1, z) * c1'^-ch`.
pub fn simulate_transcript<E: Engine, R: RngCore + ?Sized>(
    ctx: &GroupCtx<E>,
    stmt: &ReEncStatement<E>,
    rng: &mut R,
) -> Transcript<E> {
    let e = &ctx.engine;
    let z = ctx.h2_pow(&e.random_scalar(rng));
    let ch = e.random_scalar(rng);
    let a = e.gt_mul(&ctx.pairing(&stmt.c.c1, &z), &e.gt_inverse(&e.gt_pow(&stmt.cp.c1p, &ch)));
    Transcript { a, ch, z }
}

impl<E: Engine> ReEncProof<E> {
    pub fn to_bytes(&self, e: &E) -> Vec<u8> {
        Encoder::new(tag::REENC_PROOF)
            .u8(PROOF_VERSION)
            .field(&e.gt_to_bytes(&self.a))
            .field(&e.g2_to_bytes(&self.z))
            .finish()
    }

    pub fn from_bytes(e: &E, bytes: &[u8]) -> Result<Self, ProofError> {
        let mut d = Decoder::new(bytes, tag::REENC_PROOF)?;
        if d.u8("version")? != PROOF_VERSION {
            return Err(ProofError::Malformed("re-encryption proof version".into()));
        }
        let a = e.gt_from_bytes(d.field()?)?;
        let z = e.g2_from_bytes(d.field()?)?;
        d.finish()?;
        Ok(ReEncProof { a, z })
    }
}

/// Verifying key of the re-encryption proof (`vrk_pre`): the group and
/// generators the equation is evaluated in, and the challenge domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReencVk {
    bytes: Vec<u8>,
}

impl ReencVk {
    pub fn for_ctx<E: Engine>(ctx: &GroupCtx<E>) -> Self {
        let e = &ctx.engine;
        let bytes = Encoder::new(tag::REENC_VK)
            .u8(PROOF_VERSION)
            .field(PRE_DOMAIN)
            .field(e.id().as_bytes())
            .field(&e.g1_to_bytes(&ctx.g1))
            .field(&e.g2_to_bytes(&ctx.h2))
            .finish();
        ReencVk { bytes }
    }

    /// Accepts only the key that `ctx` itself would publish.
    pub fn from_bytes<E: Engine>(ctx: &GroupCtx<E>, bytes: &[u8]) -> Result<Self, ProofError> {
        let mine = Self::for_ctx(ctx);
        if mine.bytes != bytes {
            Decoder::new(bytes, tag::REENC_VK)?;
            return Err(ProofError::Malformed("re-encryption vk is for a different group or domain".into()));
        }
        Ok(mine)
    }

    pub fn to_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn digest(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        Sha256::digest(&self.bytes).into()
    }
}
