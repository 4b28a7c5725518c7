//! The aggregated proof checked by a data user.
//!
//! It bundles the root integrity proof, one re-encryption proof per file and a
//! binding digest `SHA-256("FAITH-AGG-v1" || x_agg)` with
//! `x_agg = h || ser(c') || ser(c)`. For several files the statements are
//! concatenated in order and the root proofs are merged: each file root is
//! first raised to the deepest file's level by self-pairing, then the raised
//! roots are aggregated with the same node circuits. The result is then
//! self-paired up to [`IntegrityVk::final_level`] if it sits below it, which
//! gives every aggregated proof the same size.
//!
//! Verification order is fixed: structure, integrity, binding, re-encryption.
//! Its cost is one recursive-proof verification plus one pairing per file,
//! independent of file size.

use std::sync::Arc;

use sha2::{Digest as _, Sha256};

use super::integrity::{aggregate_tree, lift, verify_integrity, IntegrityProof, IntegrityProver, IntegrityVk, TreeStats};
use super::reenc::{verify_counted, ReEncProof, ReEncStatement, ReencRejection, ReencVk};
use super::{CircuitId, ProofError, Reason, PROOF_VERSION};
use crate::codec::{tag, Decoder, Encoder};
use crate::commitment::{hash_node, merkle_root, tree_depth, Digest, HashAlg};
use crate::pairing::{Engine, GroupCtx};
use crate::pre::{Level1Ciphertext, Level2Ciphertext};

pub const AGG_DOMAIN: &[u8] = b"FAITH-AGG-v1";

/// One file's public statement: ledger digest and both key ciphertexts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FileStatement<E: Engine> {
    pub h: Digest,
    pub c: Level2Ciphertext<E>,
    pub cp: Level1Ciphertext<E>,
}

impl<E: Engine> FileStatement<E> {
    /// `h || ser(c') || ser(c)`
    pub fn x_agg(&self, e: &E) -> Vec<u8> {
        let mut out = self.h.0.to_vec();
        out.extend(self.cp.to_bytes(e));
        out.extend(self.c.to_bytes(e));
        out
    }

    pub fn reenc(&self) -> ReEncStatement<E> {
        ReEncStatement { c: self.c, cp: self.cp }
    }
}

pub fn binding_digest<E: Engine>(e: &E, stmts: &[FileStatement<E>]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(AGG_DOMAIN);
    for s in stmts {
        h.update(s.x_agg(e));
    }
    h.finalize().into()
}

/// Verifying key of the aggregated proof (`vrk_agg`): commits to the two
/// component keys. Its digest is the parameter digest carried by proofs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggVk {
    pub int_digest: [u8; 32],
    pub pre_digest: [u8; 32],
}

impl AggVk {
    pub fn new(int: &IntegrityVk, pre: &ReencVk) -> Self {
        AggVk { int_digest: int.digest(), pre_digest: pre.digest() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        Encoder::new(tag::AGG_VK).u8(PROOF_VERSION).field(&self.int_digest).field(&self.pre_digest).finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProofError> {
        let mut d = Decoder::new(bytes, tag::AGG_VK)?;
        if d.u8("version")? != PROOF_VERSION {
            return Err(ProofError::Malformed("aggregate vk version".into()));
        }
        let int_digest = d.array("int digest")?;
        let pre_digest = d.array("pre digest")?;
        d.finish()?;
        Ok(AggVk { int_digest, pre_digest })
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

/// Everything a verifier needs.
#[derive(Clone, Debug)]
pub struct VerifierKeys<E: Engine> {
    pub ctx: GroupCtx<E>,
    pub int: Arc<IntegrityVk>,
    pub pre: ReencVk,
    pub agg: AggVk,
}

impl<E: Engine> VerifierKeys<E> {
    pub fn new(ctx: GroupCtx<E>, int: Arc<IntegrityVk>) -> Self {
        let pre = ReencVk::for_ctx(&ctx);
        let agg = AggVk::new(&int, &pre);
        VerifierKeys { ctx, int, pre, agg }
    }

    /// Checks that the published aggregate key commits to the other two.
    pub fn check(&self) -> Result<(), ProofError> {
        if self.agg != AggVk::new(&self.int, &self.pre) {
            return Err(ProofError::Malformed("aggregate vk does not match component keys".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AggregatedProof<E: Engine> {
    /// Digest of the aggregate verifying key the proof was made for.
    pub params_digest: [u8; 32],
    /// Chunk count of each file, in statement order.
    pub files: Vec<u64>,
    pub root: IntegrityProof,
    pub reenc: Vec<ReEncProof<E>>,
    pub binding: [u8; 32],
}

fn self_pair(h: Digest, from: u32, to: u32) -> Digest {
    (from..to).fold(h, |x, _| hash_node(HashAlg::Poseidon, &x, &x))
}

/// Level and digest of the final root over several file roots, padded to
/// at least `floor`.
///
/// A single file is its own root at level `ceil(log2 n)` before padding.
pub fn combined_root(files: &[(Digest, u64)], floor: u32) -> (Digest, u32) {
    let top = files.iter().map(|(_, n)| tree_depth(*n)).max().expect("at least one file");
    let (root, level) = if files.len() == 1 {
        (files[0].0, top)
    } else {
        let lifted: Vec<Digest> = files.iter().map(|(h, n)| self_pair(*h, tree_depth(*n), top)).collect();
        (merkle_root(HashAlg::Poseidon, &lifted).unwrap(), top + tree_depth(files.len() as u64))
    };
    (self_pair(root, level, floor), level.max(floor))
}

/// Builds the aggregated proof for one or more files.
///
/// `roots[i]` must attest `stmts[i].h` and `reenc[i]` must verify against
/// `(stmts[i].c, stmts[i].cp)`.
pub fn aggregate_final<E: Engine>(
    ctx: &GroupCtx<E>,
    prk: &IntegrityProver,
    agg_vk: &AggVk,
    roots: Vec<IntegrityProof>,
    reenc: Vec<ReEncProof<E>>,
    stmts: &[FileStatement<E>],
) -> Result<(AggregatedProof<E>, TreeStats), ProofError> {
    let mismatch = |m: String| ProofError::StatementMismatch(m);
    if stmts.is_empty() || roots.len() != stmts.len() || reenc.len() != stmts.len() {
        return Err(mismatch("need one root proof and one re-encryption proof per statement".into()));
    }
    let floor = prk.vk().final_level();
    for (i, (r, s)) in roots.iter().zip(stmts).enumerate() {
        // A lone root may arrive already padded.
        let padded = roots.len() == 1 && r.level == floor && tree_depth(r.n) < floor;
        let (h, level) = if padded { combined_root(&[(s.h, r.n)], floor) } else { (s.h, tree_depth(r.n)) };
        if r.digest() != h {
            return Err(mismatch(format!("file {i}: root proof does not attest h")));
        }
        if r.level != level {
            return Err(mismatch(format!("file {i}: root proof level {} for {} chunks", r.level, r.n)));
        }
    }
    for (i, (p, s)) in reenc.iter().zip(stmts).enumerate() {
        verify_counted(ctx, &s.reenc(), p, &mut 0)
            .map_err(|_| mismatch(format!("file {i}: re-encryption proof does not match (c, c')")))?;
    }
    let files: Vec<u64> = roots.iter().map(|r| r.n).collect();
    let mut stats = TreeStats::default();
    let root = if roots.len() == 1 {
        roots.into_iter().next().unwrap()
    } else {
        let top = roots.iter().map(|r| r.level).max().unwrap();
        let mut lifted = Vec::with_capacity(roots.len());
        for r in roots {
            lifted.push(lift(prk, r, top, &mut stats)?);
        }
        let (root, s) = aggregate_tree(prk, lifted)?;
        stats.pair_steps += s.pair_steps;
        stats.duplicate_steps += s.duplicate_steps;
        stats.depth = s.depth;
        root
    };
    let root = lift(prk, root, prk.vk().final_level(), &mut stats)?;
    let proof = AggregatedProof {
        params_digest: agg_vk.digest(),
        files,
        root,
        reenc,
        binding: binding_digest(&ctx.engine, stmts),
    };
    Ok((proof, stats))
}

/// Work done by one verification.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyStats {
    pub backend_verifications: u32,
    pub pairings: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejected {
    pub reason: Reason,
    pub detail: String,
}

impl std::fmt::Display for Rejected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed ({}): {}", self.reason, self.detail)
    }
}

impl std::error::Error for Rejected {}

fn reject(reason: Reason, detail: impl Into<String>) -> Rejected {
    Rejected { reason, detail: detail.into() }
}

pub fn verify_aggregated<E: Engine>(
    keys: &VerifierKeys<E>,
    stmts: &[FileStatement<E>],
    proof: &AggregatedProof<E>,
) -> Result<VerifyStats, Rejected> {
    let mut stats = VerifyStats::default();

    if proof.params_digest != keys.agg.digest() {
        return Err(reject(Reason::Malformed, "proof made for different parameters"));
    }
    if stmts.is_empty() || proof.files.len() != stmts.len() || proof.reenc.len() != stmts.len() {
        return Err(reject(Reason::Malformed, "statement count does not match the proof"));
    }
    if proof.files.contains(&0) {
        return Err(reject(Reason::Malformed, "zero chunk count"));
    }
    let files: Vec<(Digest, u64)> = stmts.iter().zip(&proof.files).map(|(s, n)| (s.h, *n)).collect();
    let deepest = proof.files.iter().map(|n| tree_depth(*n)).max().unwrap();
    if deepest + tree_depth(files.len() as u64) > keys.int.max_depth() {
        return Err(reject(Reason::Malformed, "tree deeper than the verifying key supports"));
    }

    let (root, level) = combined_root(&files, keys.int.final_level());
    stats.backend_verifications += 1;
    verify_integrity(&keys.int, &proof.root, &root, level).map_err(|e| reject(Reason::Integrity, e.to_string()))?;

    if binding_digest(&keys.ctx.engine, stmts) != proof.binding {
        return Err(reject(Reason::Binding, "binding digest does not match x_agg"));
    }

    for (i, (s, p)) in stmts.iter().zip(&proof.reenc).enumerate() {
        verify_counted(&keys.ctx, &s.reenc(), p, &mut stats.pairings).map_err(|r| {
            let what = match r {
                ReencRejection::C2Mismatch => "c2' differs from c2",
                ReencRejection::Equation => "verifier equation fails",
            };
            reject(Reason::Reenc, format!("file {i}: {what}"))
        })?;
    }
    Ok(stats)
}

impl<E: Engine> AggregatedProof<E> {
    pub fn to_bytes(&self, e: &E, int: &IntegrityVk) -> Vec<u8> {
        let mut enc = Encoder::new(tag::AGGREGATED_PROOF);
        enc.u8(PROOF_VERSION).u8(CircuitId::Agg as u8).field(&self.params_digest).u64(self.files.len() as u64);
        for n in &self.files {
            enc.u64(*n);
        }
        enc.field(&self.root.to_bytes(int));
        for p in &self.reenc {
            enc.field(&p.to_bytes(e));
        }
        enc.field(&self.binding);
        enc.finish()
    }

    pub fn from_bytes(keys: &VerifierKeys<E>, bytes: &[u8]) -> Result<Self, ProofError> {
        let bad = |m: &str| ProofError::Malformed(format!("aggregated proof: {m}"));
        let mut d = Decoder::new(bytes, tag::AGGREGATED_PROOF)?;
        if d.u8("version")? != PROOF_VERSION {
            return Err(bad("version"));
        }
        if d.u8("circuit id")? != CircuitId::Agg as u8 {
            return Err(bad("circuit id"));
        }
        let params_digest = d.array::<32>("params digest")?;
        if params_digest != keys.agg.digest() {
            return Err(bad("parameter digest mismatch"));
        }
        let count = d.u64("file count")?;
        if count == 0 || count > 1 << keys.int.max_depth().min(20) {
            return Err(bad("file count"));
        }
        let files = (0..count).map(|_| d.u64("chunk count")).collect::<Result<Vec<_>, _>>()?;
        let root = IntegrityProof::from_bytes(&keys.int, d.field()?)?;
        let reenc = (0..count)
            .map(|_| ReEncProof::from_bytes(&keys.ctx.engine, d.field()?))
            .collect::<Result<Vec<_>, _>>()?;
        let binding = d.array::<32>("binding")?;
        d.finish()?;
        Ok(AggregatedProof { params_digest, files, root, reenc, binding })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commitment::{commit_body, hash_chunk};
    use crate::pairing::random_gt;
    use crate::pre::{enc, keygen, reenc, rekeygen, ReKey};
    use crate::proofs::integrity::{prove_leaves, setup_integrity};
    use crate::proofs::reenc::prove_reenc;
    use crate::proofs::IntegrityParams;
    use crate::Bls12;
    use rand::rngs::StdRng;
    use rand::{RngCore, SeedableRng};

    struct Fixture {
        keys: VerifierKeys<Bls12>,
        prk: IntegrityProver,
    }

    fn fixture() -> Fixture {
        let k = setup_integrity(&IntegrityParams::new(4096, 4)).unwrap();
        Fixture { keys: VerifierKeys::new(GroupCtx::bls12_381(), k.vk), prk: k.prover }
    }

    fn file(f: &Fixture, rng: &mut StdRng, len: usize) -> (FileStatement<Bls12>, IntegrityProof, ReKey<Bls12>) {
        let ctx = &f.keys.ctx;
        let mut body = vec![0u8; len];
        rng.fill_bytes(&mut body);
        let (commit, _) = commit_body(HashAlg::Poseidon, 4096, &body).unwrap();
        let chunks: Vec<Vec<u8>> = body.chunks(4112).map(<[u8]>::to_vec).collect();
        let chunks = if chunks.is_empty() { vec![Vec::new()] } else { chunks };
        let (root, _) = aggregate_tree(&f.prk, prove_leaves(&f.prk, &chunks).unwrap()).unwrap();
        let o = keygen(ctx, rng);
        let u = keygen(ctx, rng);
        let c = enc(ctx, &o.pk, &random_gt(ctx, rng), rng);
        let rk = rekeygen(ctx, &o.sk, &u.pk);
        (FileStatement { h: commit.root, c, cp: reenc(ctx, &rk, &c) }, root, rk)
    }

    #[test]
    fn single_file_round_trip_and_reasons() {
        let f = fixture();
        let ctx = &f.keys.ctx;
        let mut rng = StdRng::seed_from_u64(1);
        let (stmt, root, rk) = file(&f, &mut rng, 3 * 4112);
        let pre = prove_reenc(ctx, &stmt.reenc(), &rk, &mut rng).unwrap();
        let (proof, _) = aggregate_final(ctx, &f.prk, &f.keys.agg, vec![root.clone()], vec![pre], &[stmt]).unwrap();
        let stats = verify_aggregated(&f.keys, &[stmt], &proof).unwrap();
        assert_eq!(stats, VerifyStats { backend_verifications: 1, pairings: 1 });

        let bytes = proof.to_bytes(&ctx.engine, &f.keys.int);
        let back = AggregatedProof::from_bytes(&f.keys, &bytes).unwrap();
        verify_aggregated(&f.keys, &[stmt], &back).unwrap();

        let mut wrong_h = stmt;
        wrong_h.h = hash_chunk(HashAlg::Poseidon, b"other", 4112).unwrap();
        assert_eq!(verify_aggregated(&f.keys, &[wrong_h], &proof).unwrap_err().reason, Reason::Integrity);
        assert!(matches!(
            aggregate_final(ctx, &f.prk, &f.keys.agg, vec![root], vec![pre], &[wrong_h]),
            Err(ProofError::StatementMismatch(_))
        ));

        let mut wrong_c = stmt;
        wrong_c.c.c2 = ctx.engine.gt_mul(&stmt.c.c2, &ctx.gt);
        assert_eq!(verify_aggregated(&f.keys, &[wrong_c], &proof).unwrap_err().reason, Reason::Binding);

        let mut bad_pre = proof.clone();
        bad_pre.reenc[0].a = ctx.engine.gt_mul(&bad_pre.reenc[0].a, &ctx.gt);
        assert_eq!(verify_aggregated(&f.keys, &[stmt], &bad_pre).unwrap_err().reason, Reason::Reenc);

        let mut bad_params = proof.clone();
        bad_params.params_digest[0] ^= 1;
        assert_eq!(verify_aggregated(&f.keys, &[stmt], &bad_params).unwrap_err().reason, Reason::Malformed);
        let mut bad_n = proof.clone();
        bad_n.files[0] = 9;
        assert_eq!(verify_aggregated(&f.keys, &[stmt], &bad_n).unwrap_err().reason, Reason::Integrity);
    }

    #[test]
    fn shallow_roots_are_padded_to_one_size() {
        let f = fixture();
        let ctx = &f.keys.ctx;
        let floor = f.keys.int.final_level();
        // Levels 2 and up share one circuit shape with these settings.
        assert_eq!(floor, 2);
        let mut rng = StdRng::seed_from_u64(3);
        let mut sizes = Vec::new();
        for (len, pads) in [(100usize, 2u64), (4112 + 1, 1), (3 * 4112, 0)] {
            let (stmt, root, rk) = file(&f, &mut rng, len);
            let pre = prove_reenc(ctx, &stmt.reenc(), &rk, &mut rng).unwrap();
            let (proof, stats) = aggregate_final(ctx, &f.prk, &f.keys.agg, vec![root], vec![pre], &[stmt]).unwrap();
            assert_eq!(stats.duplicate_steps, pads);
            assert_eq!(proof.root.level, floor);
            let (h, _) = combined_root(&[(stmt.h, proof.files[0])], floor);
            assert_eq!(proof.root.digest(), h);
            verify_aggregated(&f.keys, &[stmt], &proof).unwrap();
            // Feeding the padded root back in needs no further node proofs.
            let (again, stats) =
                aggregate_final(ctx, &f.prk, &f.keys.agg, vec![proof.root.clone()], vec![pre], &[stmt]).unwrap();
            assert_eq!(stats.duplicate_steps, 0);
            verify_aggregated(&f.keys, &[stmt], &again).unwrap();
            sizes.push(proof.to_bytes(&ctx.engine, &f.keys.int).len());
        }
        assert!(sizes.iter().all(|s| *s == sizes[0]), "{sizes:?}");
    }

    #[test]
    fn three_files_one_proof() {
        let f = fixture();
        let ctx = &f.keys.ctx;
        let mut rng = StdRng::seed_from_u64(2);
        let files: Vec<_> = [100usize, 2 * 4112, 3 * 4112].iter().map(|n| file(&f, &mut rng, *n)).collect();
        let stmts: Vec<_> = files.iter().map(|x| x.0).collect();
        let roots: Vec<_> = files.iter().map(|x| x.1.clone()).collect();
        let pres: Vec<_> = files.iter().map(|x| prove_reenc(ctx, &x.0.reenc(), &x.2, &mut rng).unwrap()).collect();
        let (proof, stats) = aggregate_final(ctx, &f.prk, &f.keys.agg, roots, pres, &stmts).unwrap();
        // Depths 0, 1, 2 lift to 2 with three self-pairs, then three roots merge.
        assert_eq!(stats, TreeStats { pair_steps: 2, duplicate_steps: 4, depth: 2 });
        assert_eq!(proof.root.level, 4);

        // Independent recomputation of the merged root.
        let lift = |h: Digest, k: u32| (0..k).fold(h, |x, _| hash_node(HashAlg::Poseidon, &x, &x));
        let a = lift(stmts[0].h, 2);
        let b = lift(stmts[1].h, 1);
        let c = stmts[2].h;
        let top = hash_node(HashAlg::Poseidon, &hash_node(HashAlg::Poseidon, &a, &b), &hash_node(HashAlg::Poseidon, &c, &c));
        assert_eq!(proof.root.digest(), top);

        let stats = verify_aggregated(&f.keys, &stmts, &proof).unwrap();
        assert_eq!(stats.backend_verifications, 1);
        let mut swapped = stmts.clone();
        swapped.swap(0, 1);
        assert!(verify_aggregated(&f.keys, &swapped, &proof).is_err());
    }
}
