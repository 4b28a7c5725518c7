//! The four phases as in-process actors: trusted-authority setup, owner
//! upload, grant with SP re-encryption and proving, and user retrieval.
//!
//! The storage provider keeps everything on disk under its root:
//!
//! ```text
//! objects/<id>/envelope.bin      sealed file
//! objects/<id>/commitment.json   sidecar commitment
//! objects/<id>/key.ct            level-2 key ciphertext c
//! objects/<id>/owner             hex digest of the owner's public key
//! objects/<id>/proofs/leaf-<i>.bin, root.bin
//! grants/<grant id>.bin          tagged Grant record
//! ```

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Mutex, RwLock};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::codec::{tag, CodecError, Decoder, Encoder};
use crate::commitment::{hash_chunk, leaf_capacity, merkle_root, CommitmentBuilder, CommitmentError, FileCommitment, HashAlg};
use crate::envelope::{self, kem_derive, EnvelopeError, DEFAULT_CHUNK_SIZE, HEADER_LEN, TAG_LEN};
use crate::ledger::{HashRecord, Ledger, LedgerError, ProofRecord};
use crate::pairing::{random_gt, Engine, GroupCtx};
use crate::pre::{dec_user, enc, reenc, rekeygen, KeyPair, Level1Ciphertext, Level2Ciphertext, PreError, PublicKey, ReKey};
use crate::proofs::aggregate::{binding_digest, combined_root};
use crate::proofs::integrity::prove_leaves;
use crate::proofs::{
    aggregate_final, aggregate_tree, lift, prove_reenc, setup_integrity, AggVk, AggregatedProof, FileStatement,
    IntegrityParams, IntegrityProof, IntegrityProver, IntegrityVk, ProofError, ReencVk, Rejected,
    TreeStats, VerifierKeys, VerifyStats, DEFAULT_MAX_DEPTH,
};

pub const VRK_INT_FILE: &str = "vrk_int.bin";
pub const VRK_PRE_FILE: &str = "vrk_pre.bin";
pub const VRK_AGG_FILE: &str = "vrk_agg.bin";
pub const PARAMS_FILE: &str = "params.json";

const GRANT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid id {0:?}: use 1-64 of [A-Za-z0-9_-]")]
    BadId(String),
    #[error("unknown file {0:?}")]
    UnknownFile(String),
    #[error("file {0:?} already stored")]
    DuplicateFile(String),
    #[error("unknown grant {0:?}")]
    UnknownGrant(String),
    #[error("grant cannot move from {from} to {to}")]
    InvalidTransition { from: GrantStatus, to: GrantStatus },
    #[error("grant failed: {0}")]
    GrantFailed(String),
    #[error("stored object {0:?} does not match its commitment")]
    CommitmentMismatch(String),
    #[error(transparent)]
    VerificationFailed(#[from] Rejected),
    #[error("decryption failed: {0}")]
    Decrypt(EnvelopeError),
    #[error(transparent)]
    Envelope(EnvelopeError),
    #[error(transparent)]
    Commitment(#[from] CommitmentError),
    #[error(transparent)]
    Proof(#[from] ProofError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Pre(#[from] PreError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("params file: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<EnvelopeError> for ProtocolError {
    fn from(e: EnvelopeError) -> Self {
        ProtocolError::Envelope(e)
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ProtocolError + '_ {
    move |source| ProtocolError::Io { path: path.to_owned(), source }
}

fn read(path: &Path) -> Result<Vec<u8>, ProtocolError> {
    fs::read(path).map_err(io_err(path))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ProtocolError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn check_id(id: &str) -> Result<(), ProtocolError> {
    let ok = !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(ProtocolError::BadId(id.into()))
    }
}

pub fn new_id<R: RngCore + ?Sized>(rng: &mut R) -> String {
    let mut b = [0u8; 8];
    rng.fill_bytes(&mut b);
    hex::encode(b)
}

/// SHA-256 of a serialized public key; identifies owners on the ledger.
pub fn key_digest<E: Engine>(e: &E, pk: &PublicKey<E>) -> [u8; 32] {
    Sha256::digest(pk.to_bytes(e)).into()
}

// ---------------------------------------------------------------------------
// Setup

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetupConfig {
    pub chunk_size: u32,
    pub max_depth: u32,
    pub alg: HashAlg,
}

impl Default for SetupConfig {
    fn default() -> Self {
        SetupConfig { chunk_size: DEFAULT_CHUNK_SIZE, max_depth: DEFAULT_MAX_DEPTH, alg: HashAlg::Poseidon }
    }
}

impl SetupConfig {
    pub fn integrity_params(&self) -> IntegrityParams {
        IntegrityParams { chunk_size: self.chunk_size, alg: self.alg, max_depth: self.max_depth }
    }
}

/// Published system parameters. Verifier keys are all a data user needs; the
/// prover rebuilds circuits from the integrity key on demand.
#[derive(Clone, Debug)]
pub struct SystemParams<E: Engine> {
    pub config: SetupConfig,
    pub prover: IntegrityProver,
    pub keys: VerifierKeys<E>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    version: u8,
    curve: String,
    chunk_size: u32,
    max_depth: u32,
    alg: HashAlg,
    params_digest: String,
}

/// One-time setup. Transparent: the same config always yields the same keys.
pub fn ta_setup<E: Engine>(ctx: GroupCtx<E>, config: SetupConfig) -> Result<SystemParams<E>, ProtocolError> {
    let ip = config.integrity_params();
    ip.validate().map_err(|e| ProtocolError::Config(e.to_string()))?;
    let keys = setup_integrity(&ip)?;
    Ok(SystemParams { config, prover: keys.prover, keys: VerifierKeys::new(ctx, keys.vk) })
}

impl<E: Engine> SystemParams<E> {
    pub fn ctx(&self) -> &GroupCtx<E> {
        &self.keys.ctx
    }

    /// Digest of the aggregate verifying key, which commits to the others.
    pub fn digest(&self) -> [u8; 32] {
        self.keys.agg.digest()
    }

    pub fn publish(&self, dir: &Path) -> Result<(), ProtocolError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_atomic(&dir.join(VRK_INT_FILE), self.keys.int.to_bytes())?;
        write_atomic(&dir.join(VRK_PRE_FILE), self.keys.pre.to_bytes())?;
        write_atomic(&dir.join(VRK_AGG_FILE), &self.keys.agg.to_bytes())?;
        let pf = ParamsFile {
            version: 1,
            curve: self.ctx().engine.id(),
            chunk_size: self.config.chunk_size,
            max_depth: self.config.max_depth,
            alg: self.config.alg,
            params_digest: hex::encode(self.digest()),
        };
        let mut json = serde_json::to_string_pretty(&pf)?;
        json.push('\n');
        write_atomic(&dir.join(PARAMS_FILE), json.as_bytes())
    }

    pub fn load(ctx: GroupCtx<E>, dir: &Path) -> Result<Self, ProtocolError> {
        let pf: ParamsFile = serde_json::from_slice(&read(&dir.join(PARAMS_FILE))?)?;
        if pf.curve != ctx.engine.id() {
            return Err(ProtocolError::Config(format!("params are for {}, not {}", pf.curve, ctx.engine.id())));
        }
        let int = Arc::new(IntegrityVk::from_bytes(&read(&dir.join(VRK_INT_FILE))?)?);
        let pre = ReencVk::from_bytes(&ctx, &read(&dir.join(VRK_PRE_FILE))?)?;
        let agg = AggVk::from_bytes(&read(&dir.join(VRK_AGG_FILE))?)?;
        let config = SetupConfig { chunk_size: pf.chunk_size, max_depth: pf.max_depth, alg: pf.alg };
        if int.params != config.integrity_params() {
            return Err(ProtocolError::Config("integrity key does not match params.json".into()));
        }
        let keys = VerifierKeys { ctx, int: int.clone(), pre, agg };
        keys.check()?;
        if hex::encode(keys.agg.digest()) != pf.params_digest {
            return Err(ProtocolError::Config("params digest does not match the keys".into()));
        }
        Ok(SystemParams { config, prover: IntegrityProver::from_vk(int), keys })
    }
}

// ---------------------------------------------------------------------------
// Grants

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrantStatus {
    Requested = 0,
    Rekeyed = 1,
    Proven = 2,
    Published = 3,
    Served = 4,
    Verified = 5,
    Failed = 6,
}

impl GrantStatus {
    fn from_u8(v: u8) -> Option<Self> {
        use GrantStatus::*;
        [Requested, Rekeyed, Proven, Published, Served, Verified, Failed].get(v as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GrantStatus::Requested => "requested",
            GrantStatus::Rekeyed => "rekeyed",
            GrantStatus::Proven => "proven",
            GrantStatus::Published => "published",
            GrantStatus::Served => "served",
            GrantStatus::Verified => "verified",
            GrantStatus::Failed => "failed",
        }
    }
}

impl std::fmt::Display for GrantStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A data user's request for access, sent to the owner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrantRequest<E: Engine> {
    pub file_id: String,
    pub grantee: PublicKey<E>,
}

impl<E: Engine> GrantRequest<E> {
    pub fn to_bytes(&self, e: &E) -> Vec<u8> {
        Encoder::new(tag::GRANT_REQUEST)
            .u8(GRANT_VERSION)
            .field(self.file_id.as_bytes())
            .field(&self.grantee.to_bytes(e))
            .finish()
    }

    pub fn from_bytes(e: &E, bytes: &[u8]) -> Result<Self, ProtocolError> {
        let mut d = Decoder::new(bytes, tag::GRANT_REQUEST)?;
        if d.u8("version")? != GRANT_VERSION {
            return Err(CodecError::InvalidField("version").into());
        }
        let file_id = utf8(d.field()?)?;
        let grantee = PublicKey::from_bytes(e, d.field()?)?;
        d.finish()?;
        Ok(GrantRequest { file_id, grantee })
    }
}

fn utf8(b: &[u8]) -> Result<String, ProtocolError> {
    String::from_utf8(b.to_vec()).map_err(|_| CodecError::InvalidField("utf-8 string").into())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grant<E: Engine> {
    pub id: String,
    pub file_id: String,
    /// Key digest of the owner.
    pub owner: [u8; 32],
    pub grantee: PublicKey<E>,
    pub rk: ReKey<E>,
    /// `c'` as served by the SP.
    pub cp: Option<Level1Ciphertext<E>>,
    /// Serialized [`AggregatedProof`].
    pub proof: Option<Vec<u8>>,
    pub status: GrantStatus,
    pub cause: Option<String>,
}

impl<E: Engine> Grant<E> {
    /// Moves one step forward, or into `Failed`. Re-entering a state already
    /// passed is a no-op so a verified grant can be served again.
    pub fn advance(&mut self, to: GrantStatus) -> Result<(), ProtocolError> {
        let from = self.status;
        let ok = from != GrantStatus::Failed
            && (to == GrantStatus::Failed || to as u8 == from as u8 + 1 || (to <= from && to >= GrantStatus::Served));
        if !ok {
            return Err(ProtocolError::InvalidTransition { from, to });
        }
        if to > from {
            self.status = to;
        }
        Ok(())
    }

    pub fn fail(&mut self, cause: impl Into<String>) {
        if self.status != GrantStatus::Failed {
            self.status = GrantStatus::Failed;
            self.cause = Some(cause.into());
        }
    }

    pub fn to_bytes(&self, e: &E) -> Vec<u8> {
        let mut enc = Encoder::new(tag::GRANT);
        enc.u8(GRANT_VERSION)
            .field(self.id.as_bytes())
            .field(self.file_id.as_bytes())
            .field(&self.owner)
            .field(&self.grantee.to_bytes(e))
            .field(&self.rk.to_bytes(e))
            .field(&self.cp.map(|c| c.to_bytes(e)).unwrap_or_default())
            .field(self.proof.as_deref().unwrap_or_default())
            .u8(self.status as u8)
            .field(self.cause.as_deref().unwrap_or_default().as_bytes());
        enc.finish()
    }

    pub fn from_bytes(e: &E, bytes: &[u8]) -> Result<Self, ProtocolError> {
        let mut d = Decoder::new(bytes, tag::GRANT)?;
        if d.u8("version")? != GRANT_VERSION {
            return Err(CodecError::InvalidField("version").into());
        }
        let id = utf8(d.field()?)?;
        let file_id = utf8(d.field()?)?;
        let owner = d.array("owner digest")?;
        let grantee = PublicKey::from_bytes(e, d.field()?)?;
        let rk = ReKey::from_bytes(e, d.field()?)?;
        let cp = match d.field()? {
            [] => None,
            b => Some(Level1Ciphertext::from_bytes(e, b)?),
        };
        let proof = match d.field()? {
            [] => None,
            b => Some(b.to_vec()),
        };
        let status = GrantStatus::from_u8(d.u8("status")?).ok_or(CodecError::InvalidField("status"))?;
        let cause = match d.field()? {
            [] => None,
            b => Some(utf8(b)?),
        };
        d.finish()?;
        Ok(Grant { id, file_id, owner, grantee, rk, cp, proof, status, cause })
    }
}

// ---------------------------------------------------------------------------
// Storage provider

/// Misbehaviour a storage provider can be configured with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpFault {
    /// XOR `mask` into the stored envelope body at `offset % body_len`, then
    /// prove honestly over what is stored.
    CorruptData { offset: u64, mask: u8 },
    /// Serve `c1p * gt^delta` with the proof for the honest `c'`.
    CorruptReenc { delta: u64 },
    /// Publish a binding digest over a statement whose `c2` is `c2 * gt^delta`.
    StatementMismatch { delta: u64 },
    /// Reuse the root proof of another stored object, such as the version
    /// before an edit.
    StaleProof { source: String },
}

#[derive(Clone, Debug)]
pub struct StoredObject<E: Engine> {
    pub id: String,
    pub envelope: PathBuf,
    pub c: Level2Ciphertext<E>,
    pub commitment: FileCommitment,
    pub owner: [u8; 32],
    /// Leaf proofs currently cached.
    pub cached_leaves: u64,
}

/// What the SP hands a data user: `<id, C, c, c'>`. The proof itself comes
/// from the ledger.
#[derive(Clone, Debug)]
pub struct Served<E: Engine> {
    pub grant: Grant<E>,
    pub c: Level2Ciphertext<E>,
    pub cp: Level1Ciphertext<E>,
    pub envelope: PathBuf,
}

pub struct StorageProvider<E: Engine> {
    root: PathBuf,
    params: Arc<SystemParams<E>>,
    fault: RwLock<Option<SpFault>>,
    eager: bool,
    object_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    grant_lock: Mutex<()>,
}

impl<E: Engine> StorageProvider<E> {
    pub fn open(root: &Path, params: Arc<SystemParams<E>>) -> Result<Self, ProtocolError> {
        for d in ["objects", "grants"] {
            let p = root.join(d);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        Ok(StorageProvider {
            root: root.to_owned(),
            params,
            fault: RwLock::new(None),
            eager: true,
            object_locks: Mutex::new(HashMap::new()),
            grant_lock: Mutex::new(()),
        })
    }

    /// Skip leaf proving at ingest; leaves are then proven at first grant.
    pub fn lazy_leaves(mut self) -> Self {
        self.eager = false;
        self
    }

    pub fn set_fault(&self, fault: Option<SpFault>) {
        *self.fault.write() = fault;
    }

    pub fn params(&self) -> &Arc<SystemParams<E>> {
        &self.params
    }

    pub fn object_dir(&self, id: &str) -> Result<PathBuf, ProtocolError> {
        check_id(id)?;
        Ok(self.root.join("objects").join(id))
    }

    fn grant_path(&self, id: &str) -> Result<PathBuf, ProtocolError> {
        check_id(id)?;
        Ok(self.root.join("grants").join(format!("{id}.bin")))
    }

    fn object_lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.object_locks.lock().entry(id.to_owned()).or_default().clone()
    }

    pub fn has(&self, id: &str) -> bool {
        self.object_dir(id).is_ok_and(|d| d.join("key.ct").exists())
    }

    /// Path the owner streams a new envelope to before [`Self::ingest`].
    pub fn staging_path(&self, id: &str) -> Result<PathBuf, ProtocolError> {
        let dir = self.object_dir(id)?;
        if dir.join("key.ct").exists() {
            return Err(ProtocolError::DuplicateFile(id.into()));
        }
        fs::create_dir_all(dir.join("proofs")).map_err(io_err(&dir))?;
        Ok(dir.join("envelope.bin.tmp"))
    }

    /// Accepts `<id, C, c>`. With eager proving the SP proves every leaf and
    /// checks its own commitment against the owner's.
    pub fn ingest(
        &self,
        id: &str,
        c: &Level2Ciphertext<E>,
        commitment: &FileCommitment,
        owner: [u8; 32],
    ) -> Result<StoredObject<E>, ProtocolError> {
        let dir = self.object_dir(id)?;
        let e = &self.params.ctx().engine;
        let env = dir.join("envelope.bin");
        fs::rename(dir.join("envelope.bin.tmp"), &env).map_err(io_err(&env))?;
        write_atomic(&dir.join("commitment.json"), commitment.to_json().as_bytes())?;
        write_atomic(&dir.join("owner"), hex::encode(owner).as_bytes())?;
        if self.eager {
            let (got, _) = self.refresh_leaves(id, false)?;
            if got != *commitment {
                return Err(ProtocolError::CommitmentMismatch(id.into()));
            }
        }
        // Written last: its presence marks the object complete.
        write_atomic(&dir.join("key.ct"), &c.to_bytes(e))?;
        self.object(id)
    }

    pub fn object(&self, id: &str) -> Result<StoredObject<E>, ProtocolError> {
        let dir = self.object_dir(id)?;
        if !self.has(id) {
            return Err(ProtocolError::UnknownFile(id.into()));
        }
        let e = &self.params.ctx().engine;
        let c = Level2Ciphertext::from_bytes(e, &read(&dir.join("key.ct"))?)?;
        let json = String::from_utf8_lossy(&read(&dir.join("commitment.json"))?).into_owned();
        let commitment = FileCommitment::from_json(&json)?;
        let owner_hex = read(&dir.join("owner"))?;
        let owner = hex::decode(&owner_hex)
            .ok()
            .and_then(|v| <[u8; 32]>::try_from(v).ok())
            .ok_or(CodecError::InvalidField("owner digest"))?;
        let proofs = dir.join("proofs");
        let cached_leaves = fs::read_dir(&proofs)
            .map_err(io_err(&proofs))?
            .filter(|e| e.as_ref().is_ok_and(|e| e.file_name().to_string_lossy().starts_with("leaf-")))
            .count() as u64;
        Ok(StoredObject { id: id.into(), envelope: dir.join("envelope.bin"), c, commitment, owner, cached_leaves })
    }

    fn leaf_path(dir: &Path, i: u64) -> PathBuf {
        dir.join("proofs").join(format!("leaf-{i:08}.bin"))
    }

    /// Streams the stored envelope and proves, in batches, every leaf whose
    /// cached proof is missing or (with `revalidate`) no longer matches the
    /// stored chunk. Returns the commitment of what is stored and whether any
    /// leaf was (re)proven.
    fn refresh_leaves(&self, id: &str, revalidate: bool) -> Result<(FileCommitment, bool), ProtocolError> {
        let dir = self.object_dir(id)?;
        let env = dir.join("envelope.bin");
        let vk = &self.params.keys.int;
        let prk = &self.params.prover;
        let mut f = BufReader::new(File::open(&env).map_err(io_err(&env))?);
        let header = envelope::read_header(&mut f)?;
        if header.chunk_size != vk.params.chunk_size {
            return Err(ProtocolError::Config(format!(
                "object chunk size {} differs from system chunk size {}",
                header.chunk_size, vk.params.chunk_size
            )));
        }
        let cap = leaf_capacity(header.chunk_size);
        let batch = rayon::current_num_threads().max(1) * 2;
        let mut pending: Vec<(u64, Vec<u8>)> = Vec::new();
        let flush = |pending: &mut Vec<(u64, Vec<u8>)>| -> Result<(), ProtocolError> {
            let chunks: Vec<Vec<u8>> = pending.iter().map(|(_, c)| c.clone()).collect();
            let proofs = prove_leaves(prk, &chunks).map_err(|e| match e {
                ProofError::ChunkBackend { index, msg } => {
                    ProofError::ChunkBackend { index: pending[index as usize].0, msg }
                }
                e => e,
            })?;
            for ((i, _), p) in pending.iter().zip(proofs) {
                write_atomic(&Self::leaf_path(&dir, *i), &p.to_bytes(vk))?;
            }
            pending.clear();
            Ok(())
        };
        let mut leaves = Vec::new();
        let mut changed = false;
        for i in 0..header.chunk_count().max(1) {
            let len = if header.chunk_count() == 0 { 0 } else { header.chunk_len(i) + TAG_LEN };
            let mut buf = vec![0u8; len];
            f.read_exact(&mut buf).map_err(io_err(&env))?;
            let d = hash_chunk(vk.params.alg, &buf, cap)?;
            leaves.push(d);
            let path = Self::leaf_path(&dir, i);
            let fresh = match (path.exists(), revalidate) {
                (false, _) => false,
                (true, false) => true,
                (true, true) => IntegrityProof::from_bytes(vk, &read(&path)?).is_ok_and(|p| p.digest() == d),
            };
            if !fresh {
                changed = true;
                pending.push((i, buf));
                if pending.len() >= batch {
                    flush(&mut pending)?;
                }
            }
        }
        flush(&mut pending)?;
        let mut probe = [0u8; 1];
        if f.read(&mut probe).map_err(io_err(&env))? != 0 {
            return Err(EnvelopeError::TrailingData(1).into());
        }
        let commitment = FileCommitment {
            root: merkle_root(vk.params.alg, &leaves)?,
            n: leaves.len() as u64,
            chunk_size: header.chunk_size,
            alg: vk.params.alg,
        };
        Ok((commitment, changed))
    }

    /// Root integrity proof over the object as currently stored. Cached leaf
    /// proofs are checked against the stored chunks first; the root is
    /// aggregated on first use and cached until a leaf changes.
    pub fn root_proof(&self, id: &str) -> Result<(IntegrityProof, Option<TreeStats>), ProtocolError> {
        let lock = self.object_lock(id);
        let _g = lock.lock();
        let dir = self.object_dir(id)?;
        if !self.has(id) {
            return Err(ProtocolError::UnknownFile(id.into()));
        }
        let vk = &self.params.keys.int;
        let root_path = dir.join("proofs").join("root.bin");
        let (stored, changed) = self.refresh_leaves(id, true)?;
        if !changed && root_path.exists() {
            let root = IntegrityProof::from_bytes(vk, &read(&root_path)?)?;
            if root.digest() == stored.root && root.n == stored.n {
                return Ok((root, None));
            }
        }
        let leaves = (0..stored.n)
            .map(|i| Ok(IntegrityProof::from_bytes(vk, &read(&Self::leaf_path(&dir, i))?)?))
            .collect::<Result<Vec<_>, ProtocolError>>()?;
        let (root, stats) = aggregate_tree(&self.params.prover, leaves)?;
        write_atomic(&root_path, &root.to_bytes(vk))?;
        Ok((root, Some(stats)))
    }

    /// [`Self::root_proof`] self-paired up to the verifier's final level,
    /// which is what single-file aggregated proofs carry. Cached next to the
    /// root.
    pub fn final_root(&self, id: &str) -> Result<IntegrityProof, ProtocolError> {
        let (root, _) = self.root_proof(id)?;
        let floor = self.params.keys.int.final_level();
        if root.level >= floor {
            return Ok(root);
        }
        let lock = self.object_lock(id);
        let _g = lock.lock();
        let vk = &self.params.keys.int;
        let path = self.object_dir(id)?.join("proofs").join("final.bin");
        let (want, _) = combined_root(&[(root.digest(), root.n)], floor);
        if let Ok(b) = fs::read(&path) {
            if let Ok(p) = IntegrityProof::from_bytes(vk, &b) {
                if p.level == floor && p.n == root.n && p.digest() == want {
                    return Ok(p);
                }
            }
        }
        let p = lift(&self.params.prover, root, floor, &mut TreeStats::default())?;
        write_atomic(&path, &p.to_bytes(vk))?;
        Ok(p)
    }

    /// XORs `mask` into one body byte of the stored envelope.
    fn corrupt(&self, id: &str, offset: u64, mask: u8) -> Result<(), ProtocolError> {
        let env = self.object_dir(id)?.join("envelope.bin");
        let mut bytes = read(&env)?;
        let body = bytes.len() as u64 - HEADER_LEN as u64;
        if body == 0 {
            return Err(ProtocolError::Config("empty object has no body to corrupt".into()));
        }
        bytes[HEADER_LEN + (offset % body) as usize] ^= mask.max(1);
        write_atomic(&env, &bytes)
    }

    pub fn save_grant(&self, g: &Grant<E>) -> Result<(), ProtocolError> {
        write_atomic(&self.grant_path(&g.id)?, &g.to_bytes(&self.params.ctx().engine))
    }

    pub fn load_grant(&self, id: &str) -> Result<Grant<E>, ProtocolError> {
        let p = self.grant_path(id)?;
        match fs::read(&p) {
            Ok(b) => Grant::from_bytes(&self.params.ctx().engine, &b),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(ProtocolError::UnknownGrant(id.into())),
            Err(e) => Err(io_err(&p)(e)),
        }
    }

    /// Accepts a rekeyed grant from an owner.
    pub fn submit_grant(&self, g: &Grant<E>) -> Result<(), ProtocolError> {
        let _l = self.grant_lock.lock();
        if self.grant_path(&g.id)?.exists() {
            return Err(ProtocolError::Config(format!("grant {:?} already exists", g.id)));
        }
        if g.status != GrantStatus::Rekeyed {
            return Err(ProtocolError::InvalidTransition { from: g.status, to: GrantStatus::Rekeyed });
        }
        self.save_grant(g)
    }

    fn update_grant(&self, id: &str, f: impl FnOnce(&mut Grant<E>) -> Result<(), ProtocolError>) -> Result<Grant<E>, ProtocolError> {
        let _l = self.grant_lock.lock();
        let mut g = self.load_grant(id)?;
        let r = f(&mut g);
        self.save_grant(&g)?;
        r.map(|_| g)
    }

    /// Hands the stored tuple for a published grant to its user.
    pub fn serve(&self, grant_id: &str) -> Result<Served<E>, ProtocolError> {
        let g = self.update_grant(grant_id, |g| g.advance(GrantStatus::Served))?;
        let obj = self.object(&g.file_id)?;
        let cp = g.cp.ok_or_else(|| ProtocolError::GrantFailed("grant has no c'".into()))?;
        Ok(Served { c: obj.c, cp, envelope: obj.envelope, grant: g })
    }

    pub fn record_outcome(&self, grant_id: &str, outcome: Result<(), &str>) -> Result<Grant<E>, ProtocolError> {
        self.update_grant(grant_id, |g| match outcome {
            Ok(()) => g.advance(GrantStatus::Verified),
            Err(cause) => {
                g.fail(cause);
                Ok(())
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Owner

#[derive(Clone, Debug)]
pub struct UploadReceipt<E: Engine> {
    pub object: StoredObject<E>,
    pub record: HashRecord,
    pub height: u64,
}

/// Encrypts a file under a fresh KEM key and hands it to the SP, committing
/// to the envelope in the same pass and recording the root on the ledger.
pub fn do_upload<E: Engine, R: RngCore + CryptoRng>(
    params: &SystemParams<E>,
    owner: &KeyPair<E>,
    plaintext: &Path,
    file_id: Option<&str>,
    sp: &StorageProvider<E>,
    ledger: &Ledger,
    rng: &mut R,
) -> Result<UploadReceipt<E>, ProtocolError> {
    let ctx = params.ctx();
    let id = match file_id {
        Some(id) => id.to_owned(),
        None => new_id(rng),
    };
    let owner_digest = key_digest(&ctx.engine, &owner.pk);
    let staging = sp.staging_path(&id)?;

    let m = random_gt(ctx, rng);
    let key = kem_derive(&ctx.engine, &m);
    let c = enc(ctx, &owner.pk, &m, rng);

    let src = File::open(plaintext).map_err(io_err(plaintext))?;
    let len = src.metadata().map_err(io_err(plaintext))?.len();
    let mut src = BufReader::with_capacity(1 << 20, src);
    let mut dst = BufWriter::with_capacity(1 << 20, File::create(&staging).map_err(io_err(&staging))?);
    let mut builder = CommitmentBuilder::new(params.config.alg, params.config.chunk_size);
    let mut commit_err = None;
    envelope::seal(&key, &mut src, len, &mut dst, params.config.chunk_size, rng, |_, sealed| {
        if let Err(e) = builder.push(sealed) {
            commit_err.get_or_insert(e);
        }
    })?;
    dst.into_inner().map_err(|e| io_err(&staging)(e.into_error()))?.sync_all().map_err(io_err(&staging))?;
    if let Some(e) = commit_err {
        return Err(e.into());
    }
    let (commitment, _) = builder.finish();

    let rec = HashRecord {
        file_id: id.clone(),
        root: commitment.root.0,
        alg_id: commitment.alg.id(),
        owner: owner_digest,
        height: 0,
        timestamp_ms: 0,
    };
    let height = ledger.put_hash(rec)?;
    let object = sp.ingest(&id, &c, &commitment, owner_digest)?;
    let record = ledger.hash_record(&owner_digest, &id)?;
    Ok(UploadReceipt { object, record, height })
}

/// Optional owner-side check that the SP can prove what was uploaded.
pub fn do_check_upload<E: Engine>(
    params: &SystemParams<E>,
    sp: &StorageProvider<E>,
    ledger: &Ledger,
    owner: &PublicKey<E>,
    file_id: &str,
) -> Result<(), ProtocolError> {
    let rec = ledger.hash_record(&key_digest(&params.ctx().engine, owner), file_id)?;
    let (root, _) = sp.root_proof(file_id)?;
    let level = crate::commitment::tree_depth(root.n);
    crate::proofs::verify_integrity(&params.keys.int, &root, &crate::commitment::Digest(rec.root), level)?;
    Ok(())
}

/// One `rekeygen` and a message to the SP. The owner keeps nothing.
pub fn do_grant<E: Engine, R: RngCore + ?Sized>(
    params: &SystemParams<E>,
    owner: &KeyPair<E>,
    request: &GrantRequest<E>,
    sp: &StorageProvider<E>,
    rng: &mut R,
) -> Result<Grant<E>, ProtocolError> {
    let ctx = params.ctx();
    check_id(&request.file_id)?;
    let owner_digest = key_digest(&ctx.engine, &owner.pk);
    let obj = sp.object(&request.file_id)?;
    if obj.owner != owner_digest {
        return Err(ProtocolError::UnknownFile(request.file_id.clone()));
    }
    let mut g = Grant {
        id: new_id(rng),
        file_id: request.file_id.clone(),
        owner: owner_digest,
        grantee: request.grantee,
        rk: rekeygen(ctx, &owner.sk, &request.grantee),
        cp: None,
        proof: None,
        status: GrantStatus::Requested,
        cause: None,
    };
    g.advance(GrantStatus::Rekeyed)?;
    sp.submit_grant(&g)?;
    Ok(g)
}

// ---------------------------------------------------------------------------
// Storage provider: grant processing

/// Re-encrypts, proves and publishes. On error the grant is marked failed
/// with the cause.
pub fn sp_process_grant<E: Engine, R: RngCore + ?Sized>(
    sp: &StorageProvider<E>,
    grant_id: &str,
    ledger: &Ledger,
    rng: &mut R,
) -> Result<Grant<E>, ProtocolError> {
    let g = sp.load_grant(grant_id)?;
    if g.status != GrantStatus::Rekeyed {
        return Err(ProtocolError::InvalidTransition { from: g.status, to: GrantStatus::Proven });
    }
    match prove_grant(sp, g, ledger, rng) {
        Ok(g) => Ok(g),
        Err(e) => {
            let cause = e.to_string();
            sp.update_grant(grant_id, |g| {
                g.fail(cause.clone());
                Ok(())
            })?;
            Err(ProtocolError::GrantFailed(cause))
        }
    }
}

fn prove_grant<E: Engine, R: RngCore + ?Sized>(
    sp: &StorageProvider<E>,
    mut g: Grant<E>,
    ledger: &Ledger,
    rng: &mut R,
) -> Result<Grant<E>, ProtocolError> {
    let params = sp.params.clone();
    let ctx = params.ctx();
    let e = &ctx.engine;
    let obj = sp.object(&g.file_id)?;
    let h = crate::commitment::Digest(ledger.hash_record(&g.owner, &g.file_id)?.root);
    let cp = reenc(ctx, &g.rk, &obj.c);
    let stmt = FileStatement { h, c: obj.c, cp };
    let fault = sp.fault.read().clone();

    let root = match &fault {
        Some(SpFault::StaleProof { source }) => sp.final_root(source)?,
        Some(SpFault::CorruptData { offset, mask }) => {
            sp.corrupt(&g.file_id, *offset, *mask)?;
            sp.final_root(&g.file_id)?
        }
        _ => sp.final_root(&g.file_id)?,
    };
    let pre = prove_reenc(ctx, &stmt.reenc(), &g.rk, rng)?;
    g.advance(GrantStatus::Proven)?;

    let (served_cp, proof) = if fault.is_none() && root.digest() == combined_root(&[(h, root.n)], root.level).0 {
        (cp, aggregate_final(ctx, &params.prover, &params.keys.agg, vec![root], vec![pre], &[stmt])?.0)
    } else {
        if fault.is_none() {
            // Publish what is actually stored; verifiers will reject it.
            log::warn!("object {} no longer matches its ledger digest", g.file_id);
        }
        let mut bound = stmt;
        let mut served = cp;
        match &fault {
            Some(SpFault::CorruptReenc { delta }) => {
                served.c1p = e.gt_mul(&cp.c1p, &ctx.gt_pow(&ctx.scalar(*delta)));
                bound.cp = served;
            }
            Some(SpFault::StatementMismatch { delta }) => {
                bound.c.c2 = e.gt_mul(&stmt.c.c2, &ctx.gt_pow(&ctx.scalar(*delta)));
            }
            _ => {}
        }
        let proof = AggregatedProof {
            params_digest: params.keys.agg.digest(),
            files: vec![root.n],
            root,
            reenc: vec![pre],
            binding: binding_digest(e, &[bound]),
        };
        (served, proof)
    };
    let bytes = proof.to_bytes(e, &params.keys.int);
    ledger.put_proof(ProofRecord {
        file_id: g.file_id.clone(),
        owner: g.owner,
        grant_id: g.id.clone(),
        binding: proof.binding,
        proof: bytes.clone(),
        height: 0,
        timestamp_ms: 0,
    })?;
    g.cp = Some(served_cp);
    g.proof = Some(bytes);
    g.advance(GrantStatus::Published)?;
    sp.update_grant(&g.id, |stored| {
        *stored = g.clone();
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Data user

pub fn du_request<E: Engine>(user: &PublicKey<E>, file_id: &str) -> GrantRequest<E> {
    GrantRequest { file_id: file_id.into(), grantee: *user }
}

/// What a user has after fetching: the served tuple plus `h` and the proof
/// from the ledger.
#[derive(Clone, Debug)]
pub struct Fetched<E: Engine> {
    pub served: Served<E>,
    pub statement: FileStatement<E>,
    pub proof_bytes: Vec<u8>,
}

pub fn du_fetch<E: Engine>(sp: &StorageProvider<E>, ledger: &Ledger, grant_id: &str) -> Result<Fetched<E>, ProtocolError> {
    let served = sp.serve(grant_id)?;
    let g = &served.grant;
    let h = crate::commitment::Digest(ledger.hash_record(&g.owner, &g.file_id)?.root);
    let rec = ledger.proof_record(grant_id)?;
    let statement = FileStatement { h, c: served.c, cp: served.cp };
    Ok(Fetched { served, statement, proof_bytes: rec.proof })
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyReport {
    pub stats: VerifyStats,
    pub elapsed: Duration,
}

/// Verifies a fetched tuple against the ledger proof.
pub fn du_verify<E: Engine>(params: &SystemParams<E>, f: &Fetched<E>) -> Result<VerifyReport, Rejected> {
    let start = Instant::now();
    let proof = AggregatedProof::from_bytes(&params.keys, &f.proof_bytes).map_err(|e| Rejected {
        reason: crate::proofs::Reason::Malformed,
        detail: e.to_string(),
    })?;
    let stats = crate::proofs::verify_aggregated(&params.keys, &[f.statement], &proof)?;
    Ok(VerifyReport { stats, elapsed: start.elapsed() })
}

#[derive(Clone, Copy, Debug)]
pub struct RetrieveReport {
    pub bytes: u64,
    pub verify: VerifyReport,
}

/// Fetch, verify, then decrypt into `out`. Nothing is written to `out` unless
/// verification passes and every chunk authenticates.
pub fn du_retrieve<E: Engine>(
    params: &SystemParams<E>,
    user: &KeyPair<E>,
    sp: &StorageProvider<E>,
    ledger: &Ledger,
    grant_id: &str,
    out: &Path,
) -> Result<RetrieveReport, ProtocolError> {
    let fetched = du_fetch(sp, ledger, grant_id)?;
    let verify = match du_verify(params, &fetched) {
        Ok(v) => v,
        Err(r) => {
            sp.record_outcome(grant_id, Err(&r.to_string()))?;
            return Err(r.into());
        }
    };
    sp.record_outcome(grant_id, Ok(()))?;

    let ctx = params.ctx();
    let m = dec_user(ctx, &user.sk, &fetched.statement.cp)?;
    let key = kem_derive(&ctx.engine, &m);
    let tmp = out.with_file_name(format!(
        ".{}.part",
        out.file_name().map_or("out".into(), |n| n.to_string_lossy().into_owned())
    ));
    let env = &fetched.served.envelope;
    let result = (|| {
        let mut src = BufReader::with_capacity(1 << 20, File::open(env).map_err(io_err(env))?);
        let mut dst = BufWriter::with_capacity(1 << 20, File::create(&tmp).map_err(io_err(&tmp))?);
        let header = envelope::open(&key, &mut src, &mut dst).map_err(ProtocolError::Decrypt)?;
        dst.flush().map_err(io_err(&tmp))?;
        Ok::<_, ProtocolError>(header.plaintext_len)
    })();
    match result {
        Ok(bytes) => {
            fs::rename(&tmp, out).map_err(io_err(out))?;
            Ok(RetrieveReport { bytes, verify })
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}
