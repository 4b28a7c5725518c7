//! Pairing-group arithmetic.
//!
//! The protocol is written against an asymmetric pairing `e: G1 x G2 -> GT`.
//! Two engines implement it:
//!
//! - [`Bls12`], backed by BLS12-381.
//! - [`ToyEngine`], where every group element is represented by its discrete
//!   logarithm modulo a small prime and the pairing multiplies exponents. It
//!   exists only to cross-check the production arithmetic by hand-computable
//!   exponents.
//!
//! [`GroupCtx`] fixes the generators `g1`, `h2` and `gt = e(g1, h2)`.

use std::fmt::Debug;

use ark_bls12_381::{Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, PrimeGroup};
use ark_ff::{BigInteger, Field, PrimeField, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::RngCore;
use sha2::{Digest, Sha512};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("invalid {0} encoding")]
    InvalidEncoding(&'static str),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("modulus {0} is not a prime below 2^16")]
    InvalidModulus(u64),
}

/// Arithmetic over a pairing-friendly group triple with scalar field `Z_p`.
///
/// Group operations are written multiplicatively in the documentation
/// (`a^x`, `a * b`) regardless of how the backend represents them.
pub trait Engine: Clone + Copy + Send + Sync + Debug + 'static {
    type Scalar: Copy + Eq + Debug + Send + Sync;
    type G1: Copy + Eq + Debug + Send + Sync;
    type G2: Copy + Eq + Debug + Send + Sync;
    type Gt: Copy + Eq + Debug + Send + Sync;

    /// Stable name of the group instantiation, part of published keys.
    fn id(&self) -> String;

    fn scalar_from_u64(&self, v: u64) -> Self::Scalar;
    fn scalar_add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_neg(&self, a: &Self::Scalar) -> Self::Scalar;
    fn scalar_is_zero(&self, a: &Self::Scalar) -> bool;
    /// `None` for zero.
    fn scalar_inverse(&self, a: &Self::Scalar) -> Option<Self::Scalar>;
    /// Uniform in `[0, p)`.
    fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self::Scalar;
    /// Reduces a wide digest modulo `p`.
    fn scalar_from_digest(&self, digest: &[u8]) -> Self::Scalar;

    fn g1_generator(&self) -> Self::G1;
    fn g1_mul(&self, a: &Self::G1, s: &Self::Scalar) -> Self::G1;

    fn g2_generator(&self) -> Self::G2;
    fn g2_mul(&self, a: &Self::G2, s: &Self::Scalar) -> Self::G2;
    fn g2_add(&self, a: &Self::G2, b: &Self::G2) -> Self::G2;

    fn gt_identity(&self) -> Self::Gt;
    fn gt_mul(&self, a: &Self::Gt, b: &Self::Gt) -> Self::Gt;
    fn gt_pow(&self, a: &Self::Gt, s: &Self::Scalar) -> Self::Gt;
    fn gt_inverse(&self, a: &Self::Gt) -> Self::Gt;

    fn pairing(&self, a: &Self::G1, b: &Self::G2) -> Self::Gt;

    fn scalar_to_bytes(&self, s: &Self::Scalar) -> Vec<u8>;
    fn scalar_from_bytes(&self, bytes: &[u8]) -> Result<Self::Scalar, GroupError>;
    fn g1_to_bytes(&self, a: &Self::G1) -> Vec<u8>;
    fn g1_from_bytes(&self, bytes: &[u8]) -> Result<Self::G1, GroupError>;
    fn g2_to_bytes(&self, a: &Self::G2) -> Vec<u8>;
    fn g2_from_bytes(&self, bytes: &[u8]) -> Result<Self::G2, GroupError>;
    fn gt_to_bytes(&self, a: &Self::Gt) -> Vec<u8>;
    fn gt_from_bytes(&self, bytes: &[u8]) -> Result<Self::Gt, GroupError>;

    fn random_nonzero_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self::Scalar {
        loop {
            let s = self.random_scalar(rng);
            if !self.scalar_is_zero(&s) {
                return s;
            }
        }
    }
}

/// Group context: an engine plus the fixed generators.
#[derive(Clone, Debug)]
pub struct GroupCtx<E: Engine> {
    pub engine: E,
    pub g1: E::G1,
    pub h2: E::G2,
    /// `e(g1, h2)`.
    pub gt: E::Gt,
}

impl<E: Engine> GroupCtx<E> {
    pub fn new(engine: E) -> Self {
        let g1 = engine.g1_generator();
        let h2 = engine.g2_generator();
        let gt = engine.pairing(&g1, &h2);
        GroupCtx { engine, g1, h2, gt }
    }

    pub fn pairing(&self, a: &E::G1, b: &E::G2) -> E::Gt {
        self.engine.pairing(a, b)
    }

    pub fn scalar(&self, v: u64) -> E::Scalar {
        self.engine.scalar_from_u64(v)
    }

    pub fn scalar_inverse(&self, s: &E::Scalar) -> Result<E::Scalar, GroupError> {
        self.engine.scalar_inverse(s).ok_or(GroupError::ZeroInverse)
    }

    /// `g1^s`
    pub fn g1_pow(&self, s: &E::Scalar) -> E::G1 {
        self.engine.g1_mul(&self.g1, s)
    }

    /// `h2^s`
    pub fn h2_pow(&self, s: &E::Scalar) -> E::G2 {
        self.engine.g2_mul(&self.h2, s)
    }

    /// `gt^s`
    pub fn gt_pow(&self, s: &E::Scalar) -> E::Gt {
        self.engine.gt_pow(&self.gt, s)
    }
}

impl GroupCtx<Bls12> {
    pub fn bls12_381() -> Self {
        GroupCtx::new(Bls12)
    }
}

/// Builds the exponent-arithmetic oracle context over `Z_p_small`.
pub fn toy_oracle_ctx(p_small: u64) -> Result<GroupCtx<ToyEngine>, GroupError> {
    Ok(GroupCtx::new(ToyEngine::new(p_small)?))
}

/// BLS12-381 with canonical compressed encodings.
///
/// Encodings: scalars 32 bytes big-endian; G1 48 bytes and G2 96 bytes
/// compressed; GT 576 bytes (arkworks canonical form of the `Fq12` element).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Bls12;

pub type BlsGt = PairingOutput<Bls12_381>;

impl Bls12 {
    pub const SCALAR_BYTES: usize = 32;
    pub const G1_BYTES: usize = 48;
    pub const G2_BYTES: usize = 96;
    pub const GT_BYTES: usize = 576;
}

fn ark_to_bytes<T: CanonicalSerialize>(v: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.compressed_size());
    v.serialize_compressed(&mut out).expect("writing to a Vec cannot fail");
    out
}

impl Engine for Bls12 {
    type Scalar = Fr;
    type G1 = G1Projective;
    type G2 = G2Projective;
    type Gt = BlsGt;

    fn id(&self) -> String {
        "bls12-381".into()
    }

    fn scalar_from_u64(&self, v: u64) -> Fr {
        Fr::from(v)
    }
    fn scalar_add(&self, a: &Fr, b: &Fr) -> Fr {
        *a + b
    }
    fn scalar_mul(&self, a: &Fr, b: &Fr) -> Fr {
        *a * b
    }
    fn scalar_neg(&self, a: &Fr) -> Fr {
        -*a
    }
    fn scalar_is_zero(&self, a: &Fr) -> bool {
        a.is_zero()
    }
    fn scalar_inverse(&self, a: &Fr) -> Option<Fr> {
        a.inverse()
    }
    fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Fr {
        let mut seed = [0u8; 64];
        rng.fill_bytes(&mut seed);
        Fr::from_le_bytes_mod_order(&seed)
    }
    fn scalar_from_digest(&self, digest: &[u8]) -> Fr {
        Fr::from_be_bytes_mod_order(digest)
    }

    fn g1_generator(&self) -> G1Projective {
        G1Projective::generator()
    }
    fn g1_mul(&self, a: &G1Projective, s: &Fr) -> G1Projective {
        *a * s
    }
    fn g2_generator(&self) -> G2Projective {
        G2Projective::generator()
    }
    fn g2_mul(&self, a: &G2Projective, s: &Fr) -> G2Projective {
        *a * s
    }
    fn g2_add(&self, a: &G2Projective, b: &G2Projective) -> G2Projective {
        *a + b
    }

    fn gt_identity(&self) -> BlsGt {
        BlsGt::zero()
    }
    fn gt_mul(&self, a: &BlsGt, b: &BlsGt) -> BlsGt {
        *a + b
    }
    fn gt_pow(&self, a: &BlsGt, s: &Fr) -> BlsGt {
        *a * s
    }
    fn gt_inverse(&self, a: &BlsGt) -> BlsGt {
        -*a
    }

    fn pairing(&self, a: &G1Projective, b: &G2Projective) -> BlsGt {
        Bls12_381::pairing(*a, *b)
    }

    fn scalar_to_bytes(&self, s: &Fr) -> Vec<u8> {
        s.into_bigint().to_bytes_be()
    }
    fn scalar_from_bytes(&self, bytes: &[u8]) -> Result<Fr, GroupError> {
        if bytes.len() != Self::SCALAR_BYTES {
            return Err(GroupError::InvalidEncoding("scalar"));
        }
        let mut le = bytes.to_vec();
        le.reverse();
        let repr = <Fr as PrimeField>::BigInt::deserialize_uncompressed(&le[..])
            .map_err(|_| GroupError::InvalidEncoding("scalar"))?;
        Fr::from_bigint(repr).ok_or(GroupError::InvalidEncoding("scalar"))
    }
    fn g1_to_bytes(&self, a: &G1Projective) -> Vec<u8> {
        ark_to_bytes(&a.into_affine())
    }
    fn g1_from_bytes(&self, bytes: &[u8]) -> Result<G1Projective, GroupError> {
        if bytes.len() != Self::G1_BYTES {
            return Err(GroupError::InvalidEncoding("G1"));
        }
        G1Affine::deserialize_compressed(bytes)
            .map(Into::into)
            .map_err(|_| GroupError::InvalidEncoding("G1"))
    }
    fn g2_to_bytes(&self, a: &G2Projective) -> Vec<u8> {
        ark_to_bytes(&a.into_affine())
    }
    fn g2_from_bytes(&self, bytes: &[u8]) -> Result<G2Projective, GroupError> {
        if bytes.len() != Self::G2_BYTES {
            return Err(GroupError::InvalidEncoding("G2"));
        }
        G2Affine::deserialize_compressed(bytes)
            .map(Into::into)
            .map_err(|_| GroupError::InvalidEncoding("G2"))
    }
    fn gt_to_bytes(&self, a: &BlsGt) -> Vec<u8> {
        ark_to_bytes(a)
    }
    fn gt_from_bytes(&self, bytes: &[u8]) -> Result<BlsGt, GroupError> {
        if bytes.len() != Self::GT_BYTES {
            return Err(GroupError::InvalidEncoding("GT"));
        }
        // Validation checks membership in the order-p subgroup.
        BlsGt::deserialize_compressed(bytes).map_err(|_| GroupError::InvalidEncoding("GT"))
    }
}

/// Exponent-arithmetic pairing oracle over a small prime `p`.
///
/// `G1`, `G2` and `GT` elements are stored as their exponents with respect to
/// the generators, so `e(g1^a, h2^b) = gt^(ab mod p)` is literally one
/// multiplication. Not a cryptographic group: discrete logs are the encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyEngine {
    p: u64,
}

macro_rules! toy_elem {
    ($name:ident) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub struct $name(pub u64);
    };
}
toy_elem!(ToyScalar);
toy_elem!(ToyG1);
toy_elem!(ToyG2);
toy_elem!(ToyGt);

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

impl ToyEngine {
    pub fn new(p: u64) -> Result<Self, GroupError> {
        if p >= 1 << 16 || !is_prime(p) {
            return Err(GroupError::InvalidModulus(p));
        }
        Ok(ToyEngine { p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.p
    }

    fn add(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.p
    }

    fn neg(&self, a: u64) -> u64 {
        (self.p - a % self.p) % self.p
    }

    fn decode(&self, bytes: &[u8], what: &'static str) -> Result<u64, GroupError> {
        let raw: [u8; 8] = bytes.try_into().map_err(|_| GroupError::InvalidEncoding(what))?;
        let v = u64::from_be_bytes(raw);
        if v >= self.p {
            return Err(GroupError::InvalidEncoding(what));
        }
        Ok(v)
    }
}

impl Engine for ToyEngine {
    type Scalar = ToyScalar;
    type G1 = ToyG1;
    type G2 = ToyG2;
    type Gt = ToyGt;

    fn id(&self) -> String {
        format!("toy-{}", self.p)
    }

    fn scalar_from_u64(&self, v: u64) -> ToyScalar {
        ToyScalar(v % self.p)
    }
    fn scalar_add(&self, a: &ToyScalar, b: &ToyScalar) -> ToyScalar {
        ToyScalar(self.add(a.0, b.0))
    }
    fn scalar_mul(&self, a: &ToyScalar, b: &ToyScalar) -> ToyScalar {
        ToyScalar(self.mul(a.0, b.0))
    }
    fn scalar_neg(&self, a: &ToyScalar) -> ToyScalar {
        ToyScalar(self.neg(a.0))
    }
    fn scalar_is_zero(&self, a: &ToyScalar) -> bool {
        a.0 == 0
    }
    fn scalar_inverse(&self, a: &ToyScalar) -> Option<ToyScalar> {
        // Extended Euclid over i64; p < 2^16 keeps everything small.
        if a.0 == 0 {
            return None;
        }
        let (mut old_r, mut r) = (a.0 as i64, self.p as i64);
        let (mut old_s, mut s) = (1i64, 0i64);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        Some(ToyScalar(old_s.rem_euclid(self.p as i64) as u64))
    }
    fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> ToyScalar {
        ToyScalar(rng.next_u64() % self.p)
    }
    fn scalar_from_digest(&self, digest: &[u8]) -> ToyScalar {
        let v = digest.iter().fold(0u64, |acc, b| (acc * 256 + u64::from(*b)) % self.p);
        ToyScalar(v)
    }

    fn g1_generator(&self) -> ToyG1 {
        ToyG1(1)
    }
    fn g1_mul(&self, a: &ToyG1, s: &ToyScalar) -> ToyG1 {
        ToyG1(self.mul(a.0, s.0))
    }
    fn g2_generator(&self) -> ToyG2 {
        ToyG2(1)
    }
    fn g2_mul(&self, a: &ToyG2, s: &ToyScalar) -> ToyG2 {
        ToyG2(self.mul(a.0, s.0))
    }
    fn g2_add(&self, a: &ToyG2, b: &ToyG2) -> ToyG2 {
        ToyG2(self.add(a.0, b.0))
    }

    fn gt_identity(&self) -> ToyGt {
        ToyGt(0)
    }
    fn gt_mul(&self, a: &ToyGt, b: &ToyGt) -> ToyGt {
        ToyGt(self.add(a.0, b.0))
    }
    fn gt_pow(&self, a: &ToyGt, s: &ToyScalar) -> ToyGt {
        ToyGt(self.mul(a.0, s.0))
    }
    fn gt_inverse(&self, a: &ToyGt) -> ToyGt {
        ToyGt(self.neg(a.0))
    }

    fn pairing(&self, a: &ToyG1, b: &ToyG2) -> ToyGt {
        ToyGt(self.mul(a.0, b.0))
    }

    fn scalar_to_bytes(&self, s: &ToyScalar) -> Vec<u8> {
        s.0.to_be_bytes().to_vec()
    }
    fn scalar_from_bytes(&self, bytes: &[u8]) -> Result<ToyScalar, GroupError> {
        self.decode(bytes, "scalar").map(ToyScalar)
    }
    fn g1_to_bytes(&self, a: &ToyG1) -> Vec<u8> {
        a.0.to_be_bytes().to_vec()
    }
    fn g1_from_bytes(&self, bytes: &[u8]) -> Result<ToyG1, GroupError> {
        self.decode(bytes, "G1").map(ToyG1)
    }
    fn g2_to_bytes(&self, a: &ToyG2) -> Vec<u8> {
        a.0.to_be_bytes().to_vec()
    }
    fn g2_from_bytes(&self, bytes: &[u8]) -> Result<ToyG2, GroupError> {
        self.decode(bytes, "G2").map(ToyG2)
    }
    fn gt_to_bytes(&self, a: &ToyGt) -> Vec<u8> {
        a.0.to_be_bytes().to_vec()
    }
    fn gt_from_bytes(&self, bytes: &[u8]) -> Result<ToyGt, GroupError> {
        self.decode(bytes, "GT").map(ToyGt)
    }
}

/// SHA-512 of the concatenated parts, reduced into the scalar field.
pub fn hash_to_scalar<E: Engine>(engine: &E, parts: &[&[u8]]) -> E::Scalar {
    let mut h = Sha512::new();
    for p in parts {
        h.update(p);
    }
    engine.scalar_from_digest(&h.finalize())
}

/// Uniformly random `GT` element, `gt^x` for random `x`.
pub fn random_gt<E: Engine, R: RngCore + ?Sized>(ctx: &GroupCtx<E>, rng: &mut R) -> E::Gt {
    let x = ctx.engine.random_scalar(rng);
    ctx.gt_pow(&x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn toy_pairing_examples() {
        let ctx = toy_oracle_ctx(101).unwrap();
        assert_eq!(ctx.pairing(&ctx.g1, &ctx.h2), ctx.gt);
        let zero = ctx.scalar(0);
        assert_eq!(ctx.pairing(&ctx.g1_pow(&zero), &ctx.h2), ctx.engine.gt_identity());
        let a = ctx.g1_pow(&ctx.scalar(13));
        let b = ctx.h2_pow(&ctx.scalar(33));
        assert_eq!(ctx.pairing(&a, &b), ctx.gt_pow(&ctx.scalar(25)));
        assert_eq!(ctx.gt_pow(&ctx.scalar(101)), ctx.engine.gt_identity());
    }

    #[test]
    fn toy_bilinearity_exhaustive() {
        let ctx = toy_oracle_ctx(101).unwrap();
        for a in 0..101u64 {
            for b in 0..101u64 {
                let lhs = ctx.pairing(&ctx.g1_pow(&ctx.scalar(a)), &ctx.h2_pow(&ctx.scalar(b)));
                assert_eq!(lhs, ToyGt(a * b % 101));
            }
        }
    }

    #[test]
    fn toy_rejects_bad_modulus() {
        assert_eq!(toy_oracle_ctx(100).unwrap_err(), GroupError::InvalidModulus(100));
        assert!(toy_oracle_ctx(65537).is_err());
        assert!(toy_oracle_ctx(1).is_err());
        assert!(toy_oracle_ctx(65521).is_ok());
    }

    #[test]
    fn scalar_inverse_examples() {
        let toy = toy_oracle_ctx(101).unwrap();
        assert_eq!(toy.scalar_inverse(&toy.scalar(1)).unwrap(), toy.scalar(1));
        assert_eq!(toy.scalar_inverse(&toy.scalar(11)).unwrap(), toy.scalar(46));
        assert_eq!(toy.scalar_inverse(&toy.scalar(0)), Err(GroupError::ZeroInverse));

        let ctx = GroupCtx::bls12_381();
        assert_eq!(ctx.scalar_inverse(&ctx.scalar(0)), Err(GroupError::ZeroInverse));
        assert_eq!(ctx.scalar_inverse(&ctx.scalar(1)).unwrap(), ctx.scalar(1));
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..1000 {
            let s = ctx.engine.random_nonzero_scalar(&mut rng);
            let inv = ctx.scalar_inverse(&s).unwrap();
            assert_eq!(s * inv, ctx.scalar(1));
        }
    }

    #[test]
    fn toy_inverse_matches_brute_force() {
        let toy = toy_oracle_ctx(101).unwrap();
        for s in 1..101u64 {
            let brute = (1..101u64).find(|t| s * t % 101 == 1).unwrap();
            assert_eq!(toy.scalar_inverse(&toy.scalar(s)).unwrap().0, brute);
        }
    }

    #[test]
    fn bls_generators_and_degenerate_pairing() {
        let ctx = GroupCtx::bls12_381();
        assert_ne!(ctx.gt, ctx.engine.gt_identity());
        assert_eq!(ctx.pairing(&ctx.g1, &ctx.h2), ctx.gt);
        let zero = ctx.scalar(0);
        assert_eq!(ctx.pairing(&ctx.g1_pow(&zero), &ctx.h2), ctx.engine.gt_identity());
    }

    #[test]
    fn bls_bilinearity_random_pairs() {
        let ctx = GroupCtx::bls12_381();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let x = ctx.engine.random_scalar(&mut rng);
            let y = ctx.engine.random_scalar(&mut rng);
            let lhs = ctx.pairing(&ctx.g1_pow(&x), &ctx.h2_pow(&y));
            assert_eq!(lhs, ctx.gt_pow(&(x * y)));
        }
    }

    #[test]
    fn bls_exponent_laws() {
        let ctx = GroupCtx::bls12_381();
        let e = &ctx.engine;
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..20 {
            let x = e.random_scalar(&mut rng);
            let y = e.random_scalar(&mut rng);
            let a = ctx.gt_pow(&e.random_scalar(&mut rng));
            assert_eq!(e.gt_pow(&e.gt_pow(&a, &x), &y), e.gt_pow(&a, &(x * y)));
            assert_eq!(e.gt_mul(&e.gt_pow(&a, &x), &e.gt_pow(&a, &y)), e.gt_pow(&a, &(x + y)));
            let b = ctx.h2_pow(&x);
            assert_eq!(e.g2_add(&e.g2_mul(&b, &x), &e.g2_mul(&b, &y)), e.g2_mul(&b, &(x + y)));
        }
    }

    #[test]
    fn bls_serialization_round_trip() {
        let ctx = GroupCtx::bls12_381();
        let e = &ctx.engine;
        let mut rng = StdRng::seed_from_u64(9);
        for i in 0..1000 {
            let s = e.random_scalar(&mut rng);
            let sb = e.scalar_to_bytes(&s);
            assert_eq!(sb.len(), Bls12::SCALAR_BYTES);
            assert_eq!(e.scalar_from_bytes(&sb).unwrap(), s);
            let a = ctx.g1_pow(&s);
            assert_eq!(e.g1_from_bytes(&e.g1_to_bytes(&a)).unwrap(), a);
            let b = ctx.h2_pow(&s);
            assert_eq!(e.g2_from_bytes(&e.g2_to_bytes(&b)).unwrap(), b);
            // GT exponentiation is the slow part; a tenth of the samples suffices
            // to exercise the encoding, the pairing tests cover the rest.
            if i % 10 == 0 {
                let t = ctx.gt_pow(&s);
                assert_eq!(e.gt_from_bytes(&e.gt_to_bytes(&t)).unwrap(), t);
            }
        }
    }

    #[test]
    fn bls_rejects_malformed_encodings() {
        let ctx = GroupCtx::bls12_381();
        let e = &ctx.engine;
        assert!(e.scalar_from_bytes(&[0xff; 32]).is_err());
        assert!(e.scalar_from_bytes(&[0; 31]).is_err());
        assert!(e.g1_from_bytes(&[0x12; 48]).is_err());
        assert!(e.g2_from_bytes(&[0x12; 96]).is_err());
        let mut gt = e.gt_to_bytes(&ctx.gt);
        gt[5] ^= 1;
        assert!(e.gt_from_bytes(&gt).is_err());
    }

    #[test]
    fn scalar_encoding_is_big_endian() {
        let ctx = GroupCtx::bls12_381();
        let bytes = ctx.engine.scalar_to_bytes(&ctx.scalar(258));
        assert_eq!(&bytes[30..], &[1, 2]);
        assert!(bytes[..30].iter().all(|b| *b == 0));
    }
}
