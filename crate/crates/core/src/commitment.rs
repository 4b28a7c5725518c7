//! File commitment: the digest `h` published on the ledger.
//!
//! The sealed envelope body is split into leaves of one sealed chunk each
//! (`chunk_size + 16` bytes, the last one shorter). A leaf is packed into
//! Goldilocks elements, 7 little-endian bytes per element, followed by a
//! `0x01` marker, zero padding to the fixed leaf capacity and a final element
//! holding the true byte length. Leaves hash with Poseidon under domain tag 0,
//! inner nodes as `hash(1 || left || right)`; an odd level duplicates its last
//! node and a single leaf is its own root.
//!
//! A SHA-256 variant with the same tree shape and tags exists for baseline
//! comparisons, along with a flat SHA-256 over the whole stream.

use std::fmt;
use std::io::{self, Read};

use plonky2::field::goldilocks_field::GoldilocksField;
use plonky2::field::types::{Field, Field64, PrimeField64};
use plonky2::hash::hash_types::HashOut;
use plonky2::hash::poseidon::PoseidonHash;
use plonky2::plonk::config::Hasher;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::envelope::TAG_LEN;

pub type F = GoldilocksField;

/// Bytes per packed field element: `floor((64 - 1) / 8)`.
pub const BYTES_PER_ELEM: usize = 7;
pub const LEAF_TAG: u64 = 0;
pub const NODE_TAG: u64 = 1;

#[derive(Debug, Error)]
pub enum CommitmentError {
    #[error("leaf of {len} bytes exceeds capacity {cap}")]
    LeafTooLong { len: usize, cap: usize },
    #[error("empty leaf list")]
    NoLeaves,
    #[error("malformed commitment sidecar: {0}")]
    Sidecar(String),
    #[error("unknown hash algorithm id {0}")]
    UnknownAlg(u8),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashAlg {
    /// Poseidon over Goldilocks (width 12); the provable variant.
    Poseidon,
    /// SHA-256 with the same tree shape; baseline only.
    Sha256,
}

impl HashAlg {
    pub fn id(self) -> u8 {
        match self {
            HashAlg::Poseidon => 1,
            HashAlg::Sha256 => 2,
        }
    }

    pub fn from_id(id: u8) -> Result<Self, CommitmentError> {
        match id {
            1 => Ok(HashAlg::Poseidon),
            2 => Ok(HashAlg::Sha256),
            other => Err(CommitmentError::UnknownAlg(other)),
        }
    }
}

/// A 32-byte digest. For Poseidon this is the four output elements, each as a
/// little-endian `u64`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn from_elements(e: [F; 4]) -> Self {
        let mut out = [0u8; 32];
        for (dst, v) in out.chunks_exact_mut(8).zip(e) {
            dst.copy_from_slice(&v.to_canonical_u64().to_le_bytes());
        }
        Digest(out)
    }

    /// Interprets the bytes as four field elements. `None` if any word is not
    /// a canonical Goldilocks value.
    pub fn to_elements(&self) -> Option<[F; 4]> {
        let mut out = [F::ZERO; 4];
        for (dst, src) in out.iter_mut().zip(self.0.chunks_exact(8)) {
            let v = u64::from_le_bytes(src.try_into().unwrap());
            if v >= F::ORDER {
                return None;
            }
            *dst = F::from_canonical_u64(v);
        }
        Some(out)
    }

    pub fn hash_out(&self) -> Option<HashOut<F>> {
        self.to_elements().map(|elements| HashOut { elements })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        hex::decode(s).ok()?.try_into().ok().map(Digest)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Leaf capacity in bytes for an envelope chunk size: one sealed chunk.
pub fn leaf_capacity(chunk_size: u32) -> usize {
    chunk_size as usize + TAG_LEN
}

/// Number of field elements a packed leaf of capacity `cap` occupies.
pub fn packed_len(cap: usize) -> usize {
    (cap + 1).div_ceil(BYTES_PER_ELEM) + 1
}

/// Packs `bytes` into exactly `packed_len(cap)` elements.
pub fn pack_chunk(bytes: &[u8], cap: usize) -> Result<Vec<F>, CommitmentError> {
    if bytes.len() > cap {
        return Err(CommitmentError::LeafTooLong { len: bytes.len(), cap });
    }
    let n = packed_len(cap);
    let mut out = Vec::with_capacity(n);
    let mut groups = bytes.chunks_exact(BYTES_PER_ELEM);
    for g in &mut groups {
        out.push(F::from_canonical_u64(le_word(g)));
    }
    let mut tail = groups.remainder().to_vec();
    tail.push(0x01);
    out.push(F::from_canonical_u64(le_word(&tail)));
    out.resize(n - 1, F::ZERO);
    out.push(F::from_canonical_u64(bytes.len() as u64));
    Ok(out)
}

fn le_word(b: &[u8]) -> u64 {
    b.iter().rev().fold(0u64, |acc, x| (acc << 8) | u64::from(*x))
}

pub fn poseidon_leaf(elems: &[F]) -> Digest {
    let mut input = Vec::with_capacity(elems.len() + 1);
    input.push(F::from_canonical_u64(LEAF_TAG));
    input.extend_from_slice(elems);
    Digest::from_elements(PoseidonHash::hash_no_pad(&input).elements)
}

pub fn poseidon_node(l: &Digest, r: &Digest) -> Digest {
    let mut input = Vec::with_capacity(9);
    input.push(F::from_canonical_u64(NODE_TAG));
    input.extend(l.to_elements().expect("canonical digest"));
    input.extend(r.to_elements().expect("canonical digest"));
    Digest::from_elements(PoseidonHash::hash_no_pad(&input).elements)
}

/// Leaf digest of a sealed chunk. The chunk index is not an input: equal
/// chunks at different positions share a digest.
pub fn hash_chunk(alg: HashAlg, bytes: &[u8], cap: usize) -> Result<Digest, CommitmentError> {
    match alg {
        HashAlg::Poseidon => Ok(poseidon_leaf(&pack_chunk(bytes, cap)?)),
        HashAlg::Sha256 => {
            if bytes.len() > cap {
                return Err(CommitmentError::LeafTooLong { len: bytes.len(), cap });
            }
            Ok(Digest(Sha256::new().chain_update([LEAF_TAG as u8]).chain_update(bytes).finalize().into()))
        }
    }
}

pub fn hash_node(alg: HashAlg, l: &Digest, r: &Digest) -> Digest {
    match alg {
        HashAlg::Poseidon => poseidon_node(l, r),
        HashAlg::Sha256 => {
            Digest(Sha256::new().chain_update([NODE_TAG as u8]).chain_update(l.0).chain_update(r.0).finalize().into())
        }
    }
}

/// All tree levels, leaves first, root last.
pub fn merkle_levels(alg: HashAlg, leaves: &[Digest]) -> Result<Vec<Vec<Digest>>, CommitmentError> {
    if leaves.is_empty() {
        return Err(CommitmentError::NoLeaves);
    }
    let mut levels = vec![leaves.to_vec()];
    while levels.last().unwrap().len() > 1 {
        let cur = levels.last().unwrap();
        let next = cur
            .chunks(2)
            .map(|p| hash_node(alg, &p[0], p.get(1).unwrap_or(&p[0])))
            .collect();
        levels.push(next);
    }
    Ok(levels)
}

pub fn merkle_root(alg: HashAlg, leaves: &[Digest]) -> Result<Digest, CommitmentError> {
    Ok(merkle_levels(alg, leaves)?.pop().unwrap()[0])
}

/// `ceil(log2 n)`, the height of a tree over `n >= 1` leaves.
pub fn tree_depth(n: u64) -> u32 {
    assert!(n >= 1);
    u64::BITS - (n - 1).leading_zeros()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileCommitment {
    pub root: Digest,
    pub n: u64,
    pub chunk_size: u32,
    pub alg: HashAlg,
}

/// Accumulates leaf digests while an envelope body streams past.
#[derive(Debug)]
pub struct CommitmentBuilder {
    alg: HashAlg,
    chunk_size: u32,
    leaves: Vec<Digest>,
}

impl CommitmentBuilder {
    pub fn new(alg: HashAlg, chunk_size: u32) -> Self {
        CommitmentBuilder { alg, chunk_size, leaves: Vec::new() }
    }

    pub fn push(&mut self, sealed_chunk: &[u8]) -> Result<(), CommitmentError> {
        self.leaves.push(hash_chunk(self.alg, sealed_chunk, leaf_capacity(self.chunk_size))?);
        Ok(())
    }

    /// An empty body commits as a single empty leaf.
    pub fn finish(mut self) -> (FileCommitment, Vec<Digest>) {
        if self.leaves.is_empty() {
            self.leaves.push(hash_chunk(self.alg, &[], leaf_capacity(self.chunk_size)).unwrap());
        }
        let root = merkle_root(self.alg, &self.leaves).unwrap();
        let c = FileCommitment { root, n: self.leaves.len() as u64, chunk_size: self.chunk_size, alg: self.alg };
        (c, self.leaves)
    }
}

/// Commits to an in-memory envelope body.
pub fn commit_body(alg: HashAlg, chunk_size: u32, body: &[u8]) -> Result<(FileCommitment, Vec<Digest>), CommitmentError> {
    let mut b = CommitmentBuilder::new(alg, chunk_size);
    for c in body.chunks(leaf_capacity(chunk_size)) {
        b.push(c)?;
    }
    Ok(b.finish())
}

/// SHA-256 over the whole stream, the conventional re-computation a client
/// would do without proofs.
pub fn flat_hash_baseline<R: Read + ?Sized>(src: &mut R) -> io::Result<[u8; 32]> {
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        match src.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => h.update(&buf[..n]),
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(h.finalize().into())
}

/// Canonical JSON form of a [`FileCommitment`]. Fields are declared in sorted
/// order so serde emits them sorted.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    alg: HashAlg,
    alg_id: u8,
    chunk_size: u32,
    n: u64,
    root: Vec<String>,
}

impl FileCommitment {
    /// Poseidon roots render as four `0x`-prefixed 16-digit field elements,
    /// SHA-256 roots as one 64-digit hex string.
    pub fn root_hex(&self) -> Vec<String> {
        match self.alg {
            HashAlg::Poseidon => self
                .root
                .to_elements()
                .expect("canonical digest")
                .iter()
                .map(|e| format!("0x{:016x}", e.to_canonical_u64()))
                .collect(),
            HashAlg::Sha256 => vec![self.root.to_hex()],
        }
    }

    pub fn to_json(&self) -> String {
        let s = Sidecar {
            alg: self.alg,
            alg_id: self.alg.id(),
            chunk_size: self.chunk_size,
            n: self.n,
            root: self.root_hex(),
        };
        serde_json::to_string(&s).expect("plain struct serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CommitmentError> {
        let bad = |m: &str| CommitmentError::Sidecar(m.to_string());
        let sc: Sidecar = serde_json::from_str(s).map_err(|e| CommitmentError::Sidecar(e.to_string()))?;
        if HashAlg::from_id(sc.alg_id)? != sc.alg {
            return Err(bad("alg and alg_id disagree"));
        }
        let root = match sc.alg {
            HashAlg::Poseidon => {
                if sc.root.len() != 4 {
                    return Err(bad("poseidon root needs four elements"));
                }
                let mut e = [F::ZERO; 4];
                for (dst, s) in e.iter_mut().zip(&sc.root) {
                    let hex = s.strip_prefix("0x").filter(|h| h.len() == 16).ok_or_else(|| bad("element format"))?;
                    let v = u64::from_str_radix(hex, 16).map_err(|_| bad("element format"))?;
                    if v >= F::ORDER {
                        return Err(bad("element out of range"));
                    }
                    *dst = F::from_canonical_u64(v);
                }
                Digest::from_elements(e)
            }
            HashAlg::Sha256 => match sc.root.as_slice() {
                [h] => Digest::from_hex(h).ok_or_else(|| bad("sha256 root"))?,
                _ => return Err(bad("sha256 root needs one string")),
            },
        };
        if sc.n == 0 {
            return Err(bad("n must be at least 1"));
        }
        let c = FileCommitment { root, n: sc.n, chunk_size: sc.chunk_size, alg: sc.alg };
        if c.to_json() != s {
            return Err(bad("not in canonical form"));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, RngCore, SeedableRng};

    const CAP: usize = 65536 + 16;

    #[test]
    fn pack_empty_chunk() {
        let p = pack_chunk(&[], CAP).unwrap();
        assert_eq!(p.len(), packed_len(CAP));
        assert_eq!(p[0], F::ONE);
        assert!(p[1..p.len() - 1].iter().all(|e| *e == F::ZERO));
        assert_eq!(*p.last().unwrap(), F::ZERO);
    }

    #[test]
    fn pack_little_endian() {
        let mut c = [0u8; BYTES_PER_ELEM];
        c[BYTES_PER_ELEM - 1] = 1;
        let p = pack_chunk(&c, CAP).unwrap();
        assert_eq!(p[0], F::from_canonical_u64(1 << 48));
        assert_eq!(p[1], F::ONE);
        assert_eq!(*p.last().unwrap(), F::from_canonical_u64(7));

        let p = pack_chunk(&[0xaa, 0xbb], 16).unwrap();
        assert_eq!(p[0], F::from_canonical_u64(0x01bbaa));
        assert_eq!(p.len(), 17usize.div_ceil(7) + 1);
    }

    #[test]
    fn pack_is_injective_across_lengths() {
        let cap = 64;
        let mut seen = std::collections::HashSet::new();
        for len in 0..=cap {
            assert!(seen.insert(pack_chunk(&vec![0u8; len], cap).unwrap()), "len {len}");
        }
        // Trailing 0x01 byte must not collide with the padding marker.
        assert_ne!(pack_chunk(&[1], cap).unwrap(), pack_chunk(&[], cap).unwrap());
        assert!(pack_chunk(&[0; 65], cap).is_err());
    }

    #[test]
    fn packed_length_at_default_capacity() {
        assert_eq!(packed_len(CAP), 9366);
    }

    // Frozen from a reference evaluation of the Poseidon permutation.
    const ZERO_CHUNK_64K_DIGEST: &str = "5e83876e659838cc98efa3561fa4af1ab6ca40b9e4aceb305a820271d3c0e4e5";
    const EMPTY_LEAF_64K_DIGEST: &str = "4c231faba7fa8199f1886a5f5e8d9281d363861c04f4e91643c8aa19e3205fdd";

    #[test]
    fn poseidon_known_answers() {
        let zero = hash_chunk(HashAlg::Poseidon, &vec![0u8; 65536], CAP).unwrap();
        assert_eq!(zero.to_hex(), ZERO_CHUNK_64K_DIGEST);
        let empty = hash_chunk(HashAlg::Poseidon, &[], CAP).unwrap();
        assert_eq!(empty.to_hex(), EMPTY_LEAF_64K_DIGEST);
    }

    #[test]
    fn leaf_sensitivity_and_position_independence() {
        let mut rng = StdRng::seed_from_u64(1);
        let mut a = vec![0u8; 4096];
        rng.fill_bytes(&mut a);
        let mut b = a.clone();
        b[1234] ^= 4;
        for alg in [HashAlg::Poseidon, HashAlg::Sha256] {
            let da = hash_chunk(alg, &a, 4112).unwrap();
            assert_ne!(da, hash_chunk(alg, &b, 4112).unwrap());
            let leaves = [da, da];
            assert_eq!(merkle_levels(alg, &leaves).unwrap()[0][1], da);
        }
    }

    #[test]
    fn small_trees() {
        let mut rng = StdRng::seed_from_u64(2);
        let leaf = |rng: &mut StdRng| {
            let mut b = [0u8; 32];
            rng.fill_bytes(&mut b);
            hash_chunk(HashAlg::Poseidon, &b, 64).unwrap()
        };
        let d = leaf(&mut rng);
        assert_eq!(merkle_root(HashAlg::Poseidon, &[d]).unwrap(), d);
        assert_eq!(merkle_root(HashAlg::Poseidon, &[d, d]).unwrap(), poseidon_node(&d, &d));
        let (a, b, c) = (leaf(&mut rng), leaf(&mut rng), leaf(&mut rng));
        let levels = merkle_levels(HashAlg::Poseidon, &[a, b, c]).unwrap();
        assert_eq!(levels.len() - 1, 2);
        let expect = poseidon_node(&poseidon_node(&a, &b), &poseidon_node(&c, &c));
        assert_eq!(levels[2][0], expect);
        assert!(matches!(merkle_root(HashAlg::Poseidon, &[]), Err(CommitmentError::NoLeaves)));
    }

    /// Position-indexed recursive formulation of the same tree, independent
    /// of the level-by-level loop.
    fn oracle_root(alg: HashAlg, leaves: &[Digest]) -> (Digest, u32) {
        fn width(n: usize, level: u32) -> usize {
            (0..level).fold(n, |w, _| w.div_ceil(2))
        }
        fn node(alg: HashAlg, leaves: &[Digest], level: u32, i: usize) -> Digest {
            if level == 0 {
                return leaves[i];
            }
            let below = width(leaves.len(), level - 1);
            let l = node(alg, leaves, level - 1, 2 * i);
            let r = node(alg, leaves, level - 1, (2 * i + 1).min(below - 1));
            hash_node(alg, &l, &r)
        }
        let mut depth = 0;
        while width(leaves.len(), depth) > 1 {
            depth += 1;
        }
        (node(alg, leaves, depth, 0), depth)
    }

    #[test]
    fn tree_matches_oracle() {
        let mut rng = StdRng::seed_from_u64(3);
        for alg in [HashAlg::Poseidon, HashAlg::Sha256] {
            for n in 1..=33usize {
                let leaves: Vec<Digest> = (0..n)
                    .map(|_| hash_chunk(alg, &rng.gen::<[u8; 8]>(), 16).unwrap())
                    .collect();
                let levels = merkle_levels(alg, &leaves).unwrap();
                let (root, depth) = oracle_root(alg, &leaves);
                assert_eq!(levels.last().unwrap()[0], root, "n={n}");
                assert_eq!(levels.len() as u32 - 1, depth);
                assert_eq!(tree_depth(n as u64), depth);
            }
        }
    }

    #[test]
    fn tree_depth_values() {
        assert_eq!(tree_depth(1), 0);
        assert_eq!(tree_depth(2), 1);
        assert_eq!(tree_depth(3), 2);
        assert_eq!(tree_depth(8), 3);
        assert_eq!(tree_depth(9), 4);
        assert_eq!(tree_depth(160), 8);
    }

    #[test]
    fn empty_body_commits_to_one_leaf() {
        let (c, leaves) = commit_body(HashAlg::Poseidon, 65536, &[]).unwrap();
        assert_eq!(c.n, 1);
        assert_eq!(leaves.len(), 1);
        assert_eq!(c.root, hash_chunk(HashAlg::Poseidon, &[], CAP).unwrap());
    }

    #[test]
    fn flat_hash_empty_and_reference() {
        assert_eq!(
            hex::encode(flat_hash_baseline(&mut &[][..]).unwrap()),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            hex::encode(flat_hash_baseline(&mut &b"abc"[..]).unwrap()),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sidecar_round_trip_and_canonicality() {
        let mut rng = StdRng::seed_from_u64(4);
        let mut body = vec![0u8; 3 * 4112 + 5];
        rng.fill_bytes(&mut body);
        for alg in [HashAlg::Poseidon, HashAlg::Sha256] {
            let (c, _) = commit_body(alg, 4096, &body).unwrap();
            let json = c.to_json();
            assert_eq!(FileCommitment::from_json(&json).unwrap(), c);
            let spaced = json.replace(",", ", ");
            assert!(FileCommitment::from_json(&spaced).is_err());
        }
        let (c, _) = commit_body(HashAlg::Poseidon, 4096, &body).unwrap();
        let json = c.to_json();
        assert!(json.starts_with("{\"alg\":\"poseidon\",\"alg_id\":1,\"chunk_size\":4096,\"n\":4,\"root\":[\"0x"));
    }

    #[test]
    fn digest_element_conversion() {
        let d = Digest([0xff; 32]);
        assert!(d.to_elements().is_none());
        let e = [F::from_canonical_u64(1), F::from_canonical_u64(2), F::NEG_ONE, F::ZERO];
        assert_eq!(Digest::from_elements(e).to_elements().unwrap(), e);
    }
}
