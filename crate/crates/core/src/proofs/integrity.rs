//! Recursive integrity proofs over the commitment tree.
//!
//! Level 0 is the leaf circuit: private packed chunk elements, public
//! `poseidon(0 || elems)`. Level `k >= 1` verifies two level-`k-1` proofs
//! against that level's verifier data (a circuit constant) and publishes
//! `poseidon(1 || left || right)`. An odd level is closed by proving a node
//! over the same child twice, which mirrors the duplicate-last tree rule.
//!
//! The verifying key holds per-level verifier data for every level up to
//! `max_depth`; common circuit data is stored once per distinct shape.
//! Prover circuits are large (~150 MB per level), so they are built on demand
//! from the verifying key and kept in a small process-wide cache.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock};

use parking_lot::Mutex;
use plonky2::field::types::Field;
use plonky2::hash::poseidon::PoseidonHash;
use plonky2::iop::target::Target;
use plonky2::iop::witness::{PartialWitness, WitnessWrite};
use plonky2::plonk::circuit_builder::CircuitBuilder;
use plonky2::plonk::circuit_data::{
    CircuitConfig, CircuitData, CommonCircuitData, VerifierCircuitData, VerifierOnlyCircuitData,
};
use plonky2::plonk::config::PoseidonGoldilocksConfig;
use plonky2::plonk::proof::{ProofWithPublicInputs, ProofWithPublicInputsTarget};
use plonky2::util::serialization::DefaultGateSerializer;
use rayon::prelude::*;
use sha2::{Digest as _, Sha256};

use super::{backend, CircuitId, IntegrityParams, ProofError, PROOF_VERSION};
use crate::codec::{tag, Decoder, Encoder};
use crate::commitment::{leaf_capacity, pack_chunk, packed_len, tree_depth, Digest, HashAlg, F, LEAF_TAG, NODE_TAG};

pub type C = PoseidonGoldilocksConfig;
pub const D: usize = 2;
pub type Proof = ProofWithPublicInputs<F, C, D>;

/// FRI Merkle cap height. Lower than the recursion default so the per-level
/// verifier data stays small.
pub const CAP_HEIGHT: usize = 2;

/// Prover circuits kept alive at once (leaf and node circuits together).
const CIRCUIT_CACHE_SLOTS: usize = 4;

fn circuit_config() -> CircuitConfig {
    let mut c = CircuitConfig::standard_recursion_config();
    c.fri_config.cap_height = CAP_HEIGHT;
    c
}

enum Circuit {
    Leaf { data: CircuitData<F, C, D>, inputs: Vec<Target> },
    Node { data: CircuitData<F, C, D>, left: ProofWithPublicInputsTarget<D>, right: ProofWithPublicInputsTarget<D> },
}

impl Circuit {
    fn data(&self) -> &CircuitData<F, C, D> {
        match self {
            Circuit::Leaf { data, .. } | Circuit::Node { data, .. } => data,
        }
    }
}

fn build_leaf(params: &IntegrityParams) -> Circuit {
    let mut b = CircuitBuilder::<F, D>::new(circuit_config());
    let inputs = b.add_virtual_targets(packed_len(leaf_capacity(params.chunk_size)));
    let mut msg = vec![b.constant(F::from_canonical_u64(LEAF_TAG))];
    msg.extend(&inputs);
    let h = b.hash_n_to_hash_no_pad::<PoseidonHash>(msg);
    b.register_public_inputs(&h.elements);
    Circuit::Leaf { data: b.build(), inputs }
}

fn build_node(child_vo: &VerifierOnlyCircuitData<C, D>, child_common: &CommonCircuitData<F, D>) -> Circuit {
    let mut b = CircuitBuilder::<F, D>::new(circuit_config());
    let vd = b.constant_verifier_data(child_vo);
    let left = b.add_virtual_proof_with_pis(child_common);
    let right = b.add_virtual_proof_with_pis(child_common);
    b.verify_proof::<C>(&left, &vd, child_common);
    b.verify_proof::<C>(&right, &vd, child_common);
    let mut msg = vec![b.constant(F::from_canonical_u64(NODE_TAG))];
    msg.extend(&left.public_inputs);
    msg.extend(&right.public_inputs);
    let h = b.hash_n_to_hash_no_pad::<PoseidonHash>(msg);
    b.register_public_inputs(&h.elements);
    Circuit::Node { data: b.build(), left, right }
}

struct LevelVk {
    verifier_only: VerifierOnlyCircuitData<C, D>,
    common: usize,
}

/// Verifying key of the integrity circuits (`vrk_int`).
pub struct IntegrityVk {
    pub params: IntegrityParams,
    commons: Vec<CommonCircuitData<F, D>>,
    levels: Vec<LevelVk>,
    bytes: Vec<u8>,
    digest: [u8; 32],
}

impl std::fmt::Debug for IntegrityVk {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegrityVk")
            .field("params", &self.params)
            .field("digest", &hex::encode(self.digest))
            .field("bytes", &self.bytes.len())
            .finish()
    }
}

impl PartialEq for IntegrityVk {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl IntegrityVk {
    fn assemble(params: IntegrityParams, levels: Vec<(VerifierOnlyCircuitData<C, D>, CommonCircuitData<F, D>)>) -> Self {
        let mut commons: Vec<CommonCircuitData<F, D>> = Vec::new();
        let mut lv = Vec::with_capacity(levels.len());
        for (vo, common) in levels {
            let idx = match commons.iter().position(|c| *c == common) {
                Some(i) => i,
                None => {
                    commons.push(common);
                    commons.len() - 1
                }
            };
            lv.push(LevelVk { verifier_only: vo, common: idx });
        }
        let bytes = encode_vk(&params, &commons, &lv);
        let digest = Sha256::digest(&bytes).into();
        IntegrityVk { params, commons, levels: lv, bytes, digest }
    }

    pub fn to_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn digest(&self) -> [u8; 32] {
        self.digest
    }

    pub fn max_depth(&self) -> u32 {
        self.params.max_depth
    }

    /// Lowest level whose circuit has the same shape as the top level.
    ///
    /// Node circuits stop changing after a couple of levels; aggregated
    /// roots are padded up to this level so every final proof has one size.
    pub fn final_level(&self) -> u32 {
        let top = self.levels.last().expect("at least the leaf level").common;
        self.levels.iter().position(|l| l.common == top).unwrap() as u32
    }

    pub fn common(&self, level: u32) -> &CommonCircuitData<F, D> {
        &self.commons[self.levels[level as usize].common]
    }

    pub fn verifier_data(&self, level: u32) -> VerifierCircuitData<F, C, D> {
        let l = &self.levels[level as usize];
        VerifierCircuitData { verifier_only: l.verifier_only.clone(), common: self.commons[l.common].clone() }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProofError> {
        let bad = |m: &str| ProofError::Malformed(format!("integrity vk: {m}"));
        let mut d = Decoder::new(bytes, tag::INTEGRITY_VK)?;
        if d.u8("version")? != PROOF_VERSION {
            return Err(bad("version"));
        }
        let chunk_size = u32::try_from(d.u64("chunk_size")?).map_err(|_| bad("chunk_size"))?;
        let alg = HashAlg::from_id(d.u8("alg")?).map_err(|_| bad("alg"))?;
        let max_depth = u32::try_from(d.u64("max_depth")?).map_err(|_| bad("max_depth"))?;
        let params = IntegrityParams { chunk_size, alg, max_depth };
        params.validate()?;
        if d.u64("cap_height")? != CAP_HEIGHT as u64 {
            return Err(bad("cap height"));
        }
        let gates = DefaultGateSerializer;
        let n_commons = d.u64("commons")?;
        if n_commons == 0 || n_commons > u64::from(max_depth) + 1 {
            return Err(bad("common count"));
        }
        let mut commons = Vec::new();
        for _ in 0..n_commons {
            commons.push(CommonCircuitData::from_bytes(d.field()?.to_vec(), &gates).map_err(|_| bad("common data"))?);
        }
        if d.u64("levels")? != u64::from(max_depth) + 1 {
            return Err(bad("level count"));
        }
        let mut levels = Vec::new();
        for _ in 0..=max_depth {
            let common = d.u64("common index")? as usize;
            if common >= commons.len() {
                return Err(bad("common index"));
            }
            let verifier_only = VerifierOnlyCircuitData::from_bytes(d.field()?.to_vec()).map_err(|_| bad("verifier data"))?;
            levels.push(LevelVk { verifier_only, common });
        }
        d.finish()?;
        let digest = Sha256::digest(bytes).into();
        Ok(IntegrityVk { params, commons, levels, bytes: bytes.to_vec(), digest })
    }
}

fn encode_vk(params: &IntegrityParams, commons: &[CommonCircuitData<F, D>], levels: &[LevelVk]) -> Vec<u8> {
    let gates = DefaultGateSerializer;
    let mut e = Encoder::new(tag::INTEGRITY_VK);
    e.u8(PROOF_VERSION)
        .u64(u64::from(params.chunk_size))
        .u8(params.alg.id())
        .u64(u64::from(params.max_depth))
        .u64(CAP_HEIGHT as u64)
        .u64(commons.len() as u64);
    for c in commons {
        e.field(&c.to_bytes(&gates).expect("default gates serialize"));
    }
    e.u64(levels.len() as u64);
    for l in levels {
        e.u64(l.common as u64).field(&l.verifier_only.to_bytes().expect("verifier data serializes"));
    }
    e.finish()
}

type CacheKey = ([u8; 32], u32);

struct CircuitCache {
    slots: Vec<(CacheKey, Arc<Circuit>)>,
}

static CIRCUITS: LazyLock<Mutex<CircuitCache>> = LazyLock::new(|| Mutex::new(CircuitCache { slots: Vec::new() }));
static KEYS: LazyLock<Mutex<HashMap<IntegrityParams, IntegrityKeys>>> = LazyLock::new(|| Mutex::new(HashMap::new()));

impl CircuitCache {
    fn get(&mut self, key: CacheKey) -> Option<Arc<Circuit>> {
        let i = self.slots.iter().position(|(k, _)| *k == key)?;
        let entry = self.slots.remove(i);
        let c = entry.1.clone();
        self.slots.push(entry);
        Some(c)
    }

    fn put(&mut self, key: CacheKey, c: Arc<Circuit>) {
        self.slots.retain(|(k, _)| *k != key);
        if self.slots.len() >= CIRCUIT_CACHE_SLOTS {
            self.slots.remove(0);
        }
        self.slots.push((key, c));
    }
}

/// Proving handle (`prk_int`): the verifying key plus on-demand circuits.
#[derive(Clone)]
pub struct IntegrityProver {
    vk: Arc<IntegrityVk>,
    /// Serializes circuit construction so concurrent provers at the same level
    /// share one build.
    build_lock: Arc<Mutex<()>>,
}

impl std::fmt::Debug for IntegrityProver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegrityProver").field("vk", &self.vk).finish()
    }
}

#[derive(Clone, Debug)]
pub struct IntegrityKeys {
    pub prover: IntegrityProver,
    pub vk: Arc<IntegrityVk>,
}

static BUILD_LOCK: LazyLock<Arc<Mutex<()>>> = LazyLock::new(|| Arc::new(Mutex::new(())));

impl IntegrityProver {
    /// Prover for a published verifying key. Circuits are rebuilt lazily and
    /// checked against the key.
    pub fn from_vk(vk: Arc<IntegrityVk>) -> Self {
        IntegrityProver { vk, build_lock: BUILD_LOCK.clone() }
    }

    pub fn vk(&self) -> &Arc<IntegrityVk> {
        &self.vk
    }

    pub fn params(&self) -> &IntegrityParams {
        &self.vk.params
    }

    fn circuit(&self, level: u32) -> Result<Arc<Circuit>, ProofError> {
        let key = (self.vk.digest, level);
        if let Some(c) = CIRCUITS.lock().get(key) {
            return Ok(c);
        }
        let _guard = self.build_lock.lock();
        if let Some(c) = CIRCUITS.lock().get(key) {
            return Ok(c);
        }
        let built = if level == 0 {
            build_leaf(&self.vk.params)
        } else {
            let child = &self.vk.levels[level as usize - 1];
            build_node(&child.verifier_only, &self.vk.commons[child.common])
        };
        let lv = &self.vk.levels[level as usize];
        if built.data().verifier_only != lv.verifier_only || built.data().common != self.vk.commons[lv.common] {
            return Err(ProofError::Malformed(format!("verifying key does not match the level-{level} circuit")));
        }
        let c = Arc::new(built);
        CIRCUITS.lock().put(key, c.clone());
        Ok(c)
    }
}

/// Builds every level's circuit once to derive the verifying key. Results are
/// cached per process by parameters.
pub fn setup_integrity(params: &IntegrityParams) -> Result<IntegrityKeys, ProofError> {
    params.validate()?;
    if let Some(k) = KEYS.lock().get(params) {
        return Ok(k.clone());
    }
    let keys = setup_integrity_uncached(params)?;
    KEYS.lock().insert(*params, keys.clone());
    Ok(keys)
}

/// [`setup_integrity`] bypassing the process cache.
pub fn setup_integrity_uncached(params: &IntegrityParams) -> Result<IntegrityKeys, ProofError> {
    params.validate()?;
    let mut levels = Vec::with_capacity(params.max_depth as usize + 1);
    // The lowest levels are the ones every proof needs; keep those warm.
    let mut built = Vec::new();
    let leaf = build_leaf(params);
    levels.push((leaf.data().verifier_only.clone(), leaf.data().common.clone()));
    built.push(Arc::new(leaf));
    for level in 1..=params.max_depth {
        let (vo, common) = levels.last().unwrap();
        let node = build_node(vo, common);
        levels.push((node.data().verifier_only.clone(), node.data().common.clone()));
        if built.len() < CIRCUIT_CACHE_SLOTS {
            built.push(Arc::new(node));
        }
        log::debug!("integrity setup: level {level} built");
    }
    let vk = Arc::new(IntegrityVk::assemble(*params, levels));
    let mut cache = CIRCUITS.lock();
    for (level, c) in built.into_iter().enumerate().rev() {
        cache.put((vk.digest, level as u32), c);
    }
    drop(cache);
    Ok(IntegrityKeys { prover: IntegrityProver::from_vk(vk.clone()), vk })
}

/// An integrity proof at some tree level, covering `n` leaves.
#[derive(Clone, Debug)]
pub struct IntegrityProof {
    pub level: u32,
    pub n: u64,
    pub proof: Proof,
}

impl IntegrityProof {
    /// The public digest this proof attests.
    pub fn digest(&self) -> Digest {
        let e: [F; 4] = self.proof.public_inputs[..4].try_into().expect("four public inputs");
        Digest::from_elements(e)
    }

    pub fn to_bytes(&self, vk: &IntegrityVk) -> Vec<u8> {
        Encoder::new(tag::INTEGRITY_PROOF)
            .u8(PROOF_VERSION)
            .u8(CircuitId::Int as u8)
            .field(&vk.digest)
            .u64(u64::from(self.level))
            .u64(self.n)
            .field(&self.proof.to_bytes())
            .finish()
    }

    pub fn from_bytes(vk: &IntegrityVk, bytes: &[u8]) -> Result<Self, ProofError> {
        let bad = |m: &str| ProofError::Malformed(format!("integrity proof: {m}"));
        let mut d = Decoder::new(bytes, tag::INTEGRITY_PROOF)?;
        if d.u8("version")? != PROOF_VERSION {
            return Err(bad("version"));
        }
        if d.u8("circuit id")? != CircuitId::Int as u8 {
            return Err(bad("circuit id"));
        }
        if d.array::<32>("vk digest")? != vk.digest {
            return Err(bad("parameter digest mismatch"));
        }
        let level = d.u64("level")?;
        if level > u64::from(vk.max_depth()) {
            return Err(bad("level exceeds key depth"));
        }
        let level = level as u32;
        let n = d.u64("n")?;
        let raw = d.field()?;
        d.finish()?;
        let proof = Proof::from_bytes(raw.to_vec(), vk.common(level)).map_err(|_| bad("proof body"))?;
        if proof.public_inputs.len() != 4 {
            return Err(bad("public inputs"));
        }
        Ok(IntegrityProof { level, n, proof })
    }
}

/// Proves knowledge of a chunk whose packed leaf digest is public.
pub fn prove_chunk(prk: &IntegrityProver, chunk: &[u8], index: u64) -> Result<IntegrityProof, ProofError> {
    let fail = |msg: String| ProofError::ChunkBackend { index, msg };
    let elems = pack_chunk(chunk, leaf_capacity(prk.params().chunk_size)).map_err(|e| fail(e.to_string()))?;
    let circuit = prk.circuit(0)?;
    let Circuit::Leaf { data, inputs } = &*circuit else { unreachable!("level 0 is the leaf circuit") };
    let mut pw = PartialWitness::new();
    for (t, v) in inputs.iter().zip(elems) {
        pw.set_target(*t, v).map_err(|e| fail(e.to_string()))?;
    }
    let proof = data.prove(pw).map_err(|e| fail(e.to_string()))?;
    Ok(IntegrityProof { level: 0, n: 1, proof })
}

fn check_child(vk: &IntegrityVk, p: &IntegrityProof) -> Result<(), ProofError> {
    vk.verifier_data(p.level)
        .verify(p.proof.clone())
        .map_err(|e| ProofError::ChildInvalid(format!("level {}: {e}", p.level)))
}

fn prove_node(prk: &IntegrityProver, l: &IntegrityProof, r: &IntegrityProof) -> Result<Proof, ProofError> {
    if l.level != r.level {
        return Err(ProofError::ChildInvalid(format!("children at levels {} and {}", l.level, r.level)));
    }
    let level = l.level + 1;
    if level > prk.params().max_depth {
        return Err(ProofError::TooDeep(level, prk.params().max_depth));
    }
    check_child(&prk.vk, l)?;
    if !std::ptr::eq(l, r) {
        check_child(&prk.vk, r)?;
    }
    let circuit = prk.circuit(level)?;
    let Circuit::Node { data, left, right } = &*circuit else { unreachable!("levels above 0 are node circuits") };
    let mut pw = PartialWitness::new();
    pw.set_proof_with_pis_target(left, &l.proof).map_err(backend)?;
    pw.set_proof_with_pis_target(right, &r.proof).map_err(backend)?;
    data.prove(pw).map_err(backend)
}

/// Proves the Merkle parent of two same-level proofs.
pub fn aggregate_pair(prk: &IntegrityProver, l: &IntegrityProof, r: &IntegrityProof) -> Result<IntegrityProof, ProofError> {
    let proof = prove_node(prk, l, r)?;
    Ok(IntegrityProof { level: l.level + 1, n: l.n + r.n, proof })
}

/// Closes an odd level: the parent of `x` and itself.
pub fn duplicate(prk: &IntegrityProver, x: &IntegrityProof) -> Result<IntegrityProof, ProofError> {
    let proof = prove_node(prk, x, x)?;
    Ok(IntegrityProof { level: x.level + 1, n: x.n, proof })
}

/// Raises a proof to `target` by repeated self-pairing.
pub fn lift(prk: &IntegrityProver, mut p: IntegrityProof, target: u32, stats: &mut TreeStats) -> Result<IntegrityProof, ProofError> {
    while p.level < target {
        p = duplicate(prk, &p)?;
        stats.duplicate_steps += 1;
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TreeStats {
    /// Node proofs over two distinct children.
    pub pair_steps: u64,
    /// Node proofs closing an odd level or lifting a root.
    pub duplicate_steps: u64,
    /// Levels added above the inputs.
    pub depth: u32,
}

/// Aggregates same-level proofs into one root proof, level by level.
pub fn aggregate_tree(prk: &IntegrityProver, nodes: Vec<IntegrityProof>) -> Result<(IntegrityProof, TreeStats), ProofError> {
    let mut stats = TreeStats::default();
    let first = nodes.first().ok_or_else(|| ProofError::StatementMismatch("no proofs to aggregate".into()))?;
    let base = first.level;
    if nodes.iter().any(|p| p.level != base) {
        return Err(ProofError::ChildInvalid("inputs at mixed levels".into()));
    }
    let depth = tree_depth(nodes.len() as u64);
    if base + depth > prk.params().max_depth {
        return Err(ProofError::TooDeep(base + depth, prk.params().max_depth));
    }
    let mut cur = nodes;
    while cur.len() > 1 {
        if cur.len() % 2 == 1 {
            stats.duplicate_steps += 1;
        }
        stats.pair_steps += (cur.len() / 2) as u64;
        // Build the level circuit before fanning out.
        prk.circuit(cur[0].level + 1)?;
        cur = cur
            .par_chunks(2)
            .map(|p| match p {
                [l, r] => aggregate_pair(prk, l, r),
                [x] => duplicate(prk, x),
                _ => unreachable!(),
            })
            .collect::<Result<Vec<_>, _>>()?;
        stats.depth += 1;
        log::debug!("aggregated level {}: {} nodes", cur[0].level, cur.len());
    }
    Ok((cur.pop().unwrap(), stats))
}

/// Proves every leaf of an envelope body. `chunks` yields sealed chunks in order.
pub fn prove_leaves(prk: &IntegrityProver, chunks: &[Vec<u8>]) -> Result<Vec<IntegrityProof>, ProofError> {
    prk.circuit(0)?;
    chunks.par_iter().enumerate().map(|(i, c)| prove_chunk(prk, c, i as u64)).collect()
}

/// Checks a proof against an expected digest at an expected level.
pub fn verify_integrity(vk: &IntegrityVk, p: &IntegrityProof, expected: &Digest, level: u32) -> Result<(), ProofError> {
    if p.level != level || level > vk.max_depth() {
        return Err(ProofError::StatementMismatch(format!("proof at level {}, expected {level}", p.level)));
    }
    if p.digest() != *expected {
        return Err(ProofError::StatementMismatch("public digest differs from the expected root".into()));
    }
    vk.verifier_data(level).verify(p.proof.clone()).map_err(|e| ProofError::ChildInvalid(e.to_string()))
}
