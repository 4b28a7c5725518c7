//! In-process stand-in for the consortium chain.
//!
//! Every append becomes one block holding one record. Blocks are chained by
//! SHA-256 digests and, when the ledger has a data directory, persisted as
//! JSON lines in `<dir>/blocks.jsonl`:
//!
//! ```text
//! {"height":1,"prev":"00..","timestamp_ms":..,"records":[{"kind":"hash",..}],"record_digests":[".."],"digest":".."}
//! ```
//!
//! Each line must be exactly the canonical serialization of its block, so
//! [`audit_file`] catches any byte edit: either the line stops parsing, stops
//! being canonical, or one of the digests stops matching.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const BLOCK_LOG: &str = "blocks.jsonl";

const RECORD_DOMAIN: &[u8] = b"FAITH-LEDGER-record-v1";
const BLOCK_DOMAIN: &[u8] = b"FAITH-LEDGER-block-v1";

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("file id {file_id:?} already recorded for this owner")]
    DuplicateId { file_id: String },
    #[error("grant id {0:?} already has a proof record")]
    DuplicateGrant(String),
    #[error("no hash record for file id {0:?}")]
    DanglingReference(String),
    #[error("no records for {0}")]
    NotFound(String),
    #[error("block log inconsistent at height {height}: {detail}")]
    Corrupt { height: u64, detail: String },
    #[error("ledger i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashRecord {
    pub file_id: String,
    #[serde(with = "hex::serde")]
    pub root: [u8; 32],
    pub alg_id: u8,
    /// SHA-256 of the owner's serialized public key.
    #[serde(with = "hex::serde")]
    pub owner: [u8; 32],
    pub height: u64,
    pub timestamp_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofRecord {
    pub file_id: String,
    #[serde(with = "hex::serde")]
    pub owner: [u8; 32],
    pub grant_id: String,
    #[serde(with = "hex::serde")]
    pub binding: [u8; 32],
    #[serde(with = "hex::serde")]
    pub proof: Vec<u8>,
    pub height: u64,
    pub timestamp_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Hash(HashRecord),
    Proof(ProofRecord),
}

impl Record {
    pub fn file_id(&self) -> &str {
        match self {
            Record::Hash(r) => &r.file_id,
            Record::Proof(r) => &r.file_id,
        }
    }

    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("records serialize");
        let mut h = Sha256::new();
        h.update(RECORD_DOMAIN);
        h.update(json);
        h.finalize().into()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    #[serde(with = "hex::serde")]
    pub prev: [u8; 32],
    pub timestamp_ms: u64,
    pub records: Vec<Record>,
    pub record_digests: Vec<HexDigest>,
    #[serde(with = "hex::serde")]
    pub digest: [u8; 32],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HexDigest(#[serde(with = "hex::serde")] pub [u8; 32]);

fn block_digest(height: u64, prev: &[u8; 32], timestamp_ms: u64, records: &[HexDigest]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(BLOCK_DOMAIN);
    h.update(height.to_be_bytes());
    h.update(prev);
    h.update(timestamp_ms.to_be_bytes());
    h.update((records.len() as u64).to_be_bytes());
    for r in records {
        h.update(r.0);
    }
    h.finalize().into()
}

impl Block {
    fn seal(height: u64, prev: [u8; 32], timestamp_ms: u64, records: Vec<Record>) -> Self {
        let record_digests: Vec<HexDigest> = records.iter().map(|r| HexDigest(r.digest())).collect();
        let digest = block_digest(height, &prev, timestamp_ms, &record_digests);
        Block { height, prev, timestamp_ms, records, record_digests, digest }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("blocks serialize")
    }

    /// Checks the block against its own digests and the expected position.
    fn check(&self, height: u64, prev: &[u8; 32]) -> Result<(), String> {
        if self.height != height {
            return Err(format!("height field {} at position {height}", self.height));
        }
        if &self.prev != prev {
            return Err("previous-block digest does not match".into());
        }
        if self.records.len() != self.record_digests.len() {
            return Err("record digest count".into());
        }
        for (r, d) in self.records.iter().zip(&self.record_digests) {
            if r.digest() != d.0 {
                return Err("record digest does not match record".into());
            }
            let h = match r {
                Record::Hash(x) => x.height,
                Record::Proof(x) => x.height,
            };
            if h != height {
                return Err("record height differs from block height".into());
            }
        }
        if block_digest(self.height, &self.prev, self.timestamp_ms, &self.record_digests) != self.digest {
            return Err("block digest does not match contents".into());
        }
        Ok(())
    }
}

/// Result of an audit. `first_bad` is `None` on a clean chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub blocks: u64,
    pub first_bad: Option<u64>,
    pub detail: Option<String>,
    #[serde(with = "hex::serde")]
    pub head: [u8; 32],
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.first_bad.is_none()
    }

    fn bad(blocks: u64, height: u64, detail: impl Into<String>) -> Self {
        AuditReport { blocks, first_bad: Some(height), detail: Some(detail.into()), head: [0; 32] }
    }
}

/// Audits a persisted block log. A missing file is an empty, clean chain.
pub fn audit_file(path: &Path) -> io::Result<AuditReport> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e),
    };
    Ok(audit_bytes(&bytes).0)
}

fn audit_bytes(bytes: &[u8]) -> (AuditReport, Vec<Block>) {
    let mut blocks = Vec::new();
    let mut prev = [0u8; 32];
    let mut rest = bytes;
    let mut height = 0u64;
    while !rest.is_empty() {
        height += 1;
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return (AuditReport::bad(height - 1, height, "unterminated line"), blocks);
        };
        let line = &rest[..end];
        rest = &rest[end + 1..];
        let block: Block = match serde_json::from_slice(line) {
            Ok(b) => b,
            Err(e) => return (AuditReport::bad(height - 1, height, format!("unparsable block: {e}")), blocks),
        };
        if block.to_line().as_bytes() != line {
            return (AuditReport::bad(height - 1, height, "line is not in canonical form"), blocks);
        }
        if let Err(d) = block.check(height, &prev) {
            return (AuditReport::bad(height - 1, height, d), blocks);
        }
        prev = block.digest;
        blocks.push(block);
    }
    (AuditReport { blocks: height, first_bad: None, detail: None, head: prev }, blocks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerOp {
    PutHash,
    PutProof,
    Get,
}

/// Per-operation latency and record size.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OpMetric {
    pub op: LedgerOp,
    #[serde(serialize_with = "ser_micros")]
    pub latency: Duration,
    pub bytes: usize,
}

fn ser_micros<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u128(d.as_micros())
}

pub enum Query<'a> {
    File(&'a str),
    Grant(&'a str),
}

#[derive(Default)]
struct State {
    blocks: Vec<Block>,
    by_file: HashMap<String, Vec<usize>>,
    by_grant: HashMap<String, Vec<usize>>,
    owned: HashSet<([u8; 32], String)>,
    log: Option<File>,
}

impl State {
    fn head(&self) -> [u8; 32] {
        self.blocks.last().map_or([0; 32], |b| b.digest)
    }

    fn index(&mut self, block: Block) {
        let i = self.blocks.len();
        for r in &block.records {
            self.by_file.entry(r.file_id().to_owned()).or_default().push(i);
            match r {
                Record::Hash(h) => {
                    self.owned.insert((h.owner, h.file_id.clone()));
                }
                Record::Proof(p) => self.by_grant.entry(p.grant_id.clone()).or_default().push(i),
            }
        }
        self.blocks.push(block);
    }
}

/// Thread-safe ledger handle. Appends are serialized by a write lock; reads
/// share a read lock.
pub struct Ledger {
    state: RwLock<State>,
    path: Option<PathBuf>,
    metrics: Mutex<Vec<OpMetric>>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Ledger {
    pub fn in_memory() -> Self {
        Ledger { state: RwLock::new(State::default()), path: None, metrics: Mutex::new(Vec::new()) }
    }

    /// Opens or creates `<dir>/blocks.jsonl`. Refuses a log that fails audit.
    pub fn open(dir: &Path) -> Result<Self, LedgerError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(BLOCK_LOG);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let (report, blocks) = audit_bytes(&bytes);
        if let Some(height) = report.first_bad {
            return Err(LedgerError::Corrupt { height, detail: report.detail.unwrap_or_default() });
        }
        let mut state = State::default();
        for b in blocks {
            state.index(b);
        }
        state.log = Some(OpenOptions::new().create(true).append(true).open(&path)?);
        Ok(Ledger { state: RwLock::new(state), path: Some(path), metrics: Mutex::new(Vec::new()) })
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn height(&self) -> u64 {
        self.state.read().blocks.len() as u64
    }

    fn append(&self, state: &mut State, record: Record) -> Result<u64, LedgerError> {
        let height = state.blocks.len() as u64 + 1;
        let block = Block::seal(height, state.head(), now_ms(), vec![record]);
        if let Some(f) = state.log.as_mut() {
            let mut line = block.to_line().into_bytes();
            line.push(b'\n');
            f.write_all(&line)?;
            f.flush()?;
        }
        state.index(block);
        Ok(height)
    }

    fn record_metric(&self, op: LedgerOp, start: Instant, bytes: usize) {
        self.metrics.lock().push(OpMetric { op, latency: start.elapsed(), bytes });
    }

    /// `height` and `timestamp_ms` of the argument are overwritten.
    pub fn put_hash(&self, mut rec: HashRecord) -> Result<u64, LedgerError> {
        let start = Instant::now();
        let mut st = self.state.write();
        if st.owned.contains(&(rec.owner, rec.file_id.clone())) {
            return Err(LedgerError::DuplicateId { file_id: rec.file_id });
        }
        rec.height = st.blocks.len() as u64 + 1;
        rec.timestamp_ms = now_ms();
        let height = self.append(&mut st, Record::Hash(rec))?;
        drop(st);
        self.record_metric(LedgerOp::PutHash, start, 32);
        Ok(height)
    }

    /// `height` and `timestamp_ms` of the argument are overwritten.
    pub fn put_proof(&self, mut rec: ProofRecord) -> Result<u64, LedgerError> {
        let start = Instant::now();
        let bytes = rec.proof.len();
        let mut st = self.state.write();
        if !st.owned.contains(&(rec.owner, rec.file_id.clone())) {
            return Err(LedgerError::DanglingReference(rec.file_id));
        }
        if st.by_grant.contains_key(&rec.grant_id) {
            return Err(LedgerError::DuplicateGrant(rec.grant_id));
        }
        rec.height = st.blocks.len() as u64 + 1;
        rec.timestamp_ms = now_ms();
        let height = self.append(&mut st, Record::Proof(rec))?;
        drop(st);
        self.record_metric(LedgerOp::PutProof, start, bytes);
        Ok(height)
    }

    /// All records matching the query, in append order.
    pub fn get(&self, q: Query<'_>) -> Result<Vec<Record>, LedgerError> {
        let start = Instant::now();
        let st = self.state.read();
        let (idx, what) = match q {
            Query::File(id) => (st.by_file.get(id), format!("file {id:?}")),
            Query::Grant(id) => (st.by_grant.get(id), format!("grant {id:?}")),
        };
        let Some(idx) = idx else {
            return Err(LedgerError::NotFound(what));
        };
        let out: Vec<Record> = idx
            .iter()
            .flat_map(|&i| st.blocks[i].records.iter())
            .filter(|r| match q {
                Query::File(id) => r.file_id() == id,
                Query::Grant(id) => matches!(r, Record::Proof(p) if p.grant_id == id),
            })
            .cloned()
            .collect();
        drop(st);
        let bytes = out
            .iter()
            .map(|r| match r {
                Record::Hash(_) => 32,
                Record::Proof(p) => p.proof.len(),
            })
            .sum();
        self.record_metric(LedgerOp::Get, start, bytes);
        Ok(out)
    }

    pub fn hash_record(&self, owner: &[u8; 32], file_id: &str) -> Result<HashRecord, LedgerError> {
        self.get(Query::File(file_id))?
            .into_iter()
            .find_map(|r| match r {
                Record::Hash(h) if &h.owner == owner => Some(h),
                _ => None,
            })
            .ok_or_else(|| LedgerError::NotFound(format!("hash record for {file_id:?}")))
    }

    pub fn proof_record(&self, grant_id: &str) -> Result<ProofRecord, LedgerError> {
        match self.get(Query::Grant(grant_id))?.into_iter().next() {
            Some(Record::Proof(p)) => Ok(p),
            _ => Err(LedgerError::NotFound(format!("grant {grant_id:?}"))),
        }
    }

    /// Recomputes the digest chain. For a persisted ledger this re-reads the
    /// log file, so edits made behind the handle's back are found.
    pub fn audit(&self) -> Result<AuditReport, LedgerError> {
        if let Some(p) = &self.path {
            return Ok(audit_file(p)?);
        }
        let st = self.state.read();
        let mut bytes = Vec::new();
        for b in &st.blocks {
            bytes.extend(b.to_line().into_bytes());
            bytes.push(b'\n');
        }
        Ok(audit_bytes(&bytes).0)
    }

    pub fn metrics(&self) -> Vec<OpMetric> {
        self.metrics.lock().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hash_rec(id: &str, owner: u8) -> HashRecord {
        HashRecord { file_id: id.into(), root: [7; 32], alg_id: 1, owner: [owner; 32], height: 0, timestamp_ms: 0 }
    }

    fn proof_rec(id: &str, grant: &str, owner: u8, proof: Vec<u8>) -> ProofRecord {
        ProofRecord {
            file_id: id.into(),
            owner: [owner; 32],
            grant_id: grant.into(),
            binding: [9; 32],
            proof,
            height: 0,
            timestamp_ms: 0,
        }
    }

    #[test]
    fn heights_and_duplicates() {
        let l = Ledger::in_memory();
        assert_eq!(l.put_hash(hash_rec("a", 1)).unwrap(), 1);
        assert!(matches!(l.put_hash(hash_rec("a", 1)), Err(LedgerError::DuplicateId { .. })));
        // Another owner may reuse the id.
        assert_eq!(l.put_hash(hash_rec("a", 2)).unwrap(), 2);
        let mut last = 2;
        for i in 0..1000 {
            let h = l.put_hash(hash_rec(&format!("f{i}"), 1)).unwrap();
            assert!(h > last);
            last = h;
        }
    }

    #[test]
    fn proof_records() {
        let l = Ledger::in_memory();
        assert!(matches!(l.put_proof(proof_rec("x", "g", 1, vec![1])), Err(LedgerError::DanglingReference(_))));
        l.put_hash(hash_rec("x", 1)).unwrap();
        assert!(matches!(l.put_proof(proof_rec("x", "g", 2, vec![1])), Err(LedgerError::DanglingReference(_))));
        let bytes: Vec<u8> = (0..=255).collect();
        l.put_proof(proof_rec("x", "g", 1, bytes.clone())).unwrap();
        assert!(matches!(l.put_proof(proof_rec("x", "g", 1, vec![])), Err(LedgerError::DuplicateGrant(_))));
        assert_eq!(l.proof_record("g").unwrap().proof, bytes);

        let recs = l.get(Query::File("x")).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(matches!(recs[0], Record::Hash(_)));
        assert!(matches!(recs[1], Record::Proof(_)));
        assert!(matches!(l.get(Query::File("nope")), Err(LedgerError::NotFound(_))));
        assert!(matches!(l.get(Query::Grant("nope")), Err(LedgerError::NotFound(_))));

        let m = l.metrics();
        assert!(m.iter().any(|x| x.op == LedgerOp::PutProof && x.bytes == 256));
    }

    #[test]
    fn persisted_round_trip_and_audit() {
        let dir = tempfile::tempdir().unwrap();
        assert!(audit_file(&dir.path().join(BLOCK_LOG)).unwrap().is_clean());
        {
            let l = Ledger::open(dir.path()).unwrap();
            assert!(l.audit().unwrap().is_clean());
            l.put_hash(hash_rec("a", 1)).unwrap();
            l.put_proof(proof_rec("a", "g", 1, vec![5; 100])).unwrap();
            l.put_hash(hash_rec("b", 1)).unwrap();
        }
        let l = Ledger::open(dir.path()).unwrap();
        assert_eq!(l.height(), 3);
        assert_eq!(l.proof_record("g").unwrap().proof, vec![5; 100]);
        assert_eq!(l.put_hash(hash_rec("c", 1)).unwrap(), 4);
        let report = l.audit().unwrap();
        assert!(report.is_clean());
        assert_eq!(report.blocks, 4);

        // Flip one byte on line 2.
        let path = dir.path().join(BLOCK_LOG);
        let mut bytes = fs::read(&path).unwrap();
        let second = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        bytes[second + 40] ^= 0x01;
        fs::write(&path, &bytes).unwrap();
        assert_eq!(l.audit().unwrap().first_bad, Some(2));
        assert!(matches!(Ledger::open(dir.path()), Err(LedgerError::Corrupt { height: 2, .. })));
    }

    #[test]
    fn mixed_appends_keep_chain_intact() {
        let l = Ledger::in_memory();
        for i in 0..10_000 {
            if i % 3 == 2 {
                l.put_proof(proof_rec(&format!("f{}", i - 1), &format!("g{i}"), 1, vec![i as u8; 8])).unwrap();
            } else {
                l.put_hash(hash_rec(&format!("f{i}"), 1)).unwrap();
            }
        }
        let r = l.audit().unwrap();
        assert!(r.is_clean());
        assert_eq!(r.blocks, 10_000);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn any_flipped_byte_is_found(pos in any::<prop::sample::Index>(), bit in 0u8..8) {
            let l = Ledger::in_memory();
            for i in 0..12 {
                l.put_hash(hash_rec(&format!("f{i}"), 3)).unwrap();
            }
            let mut bytes = Vec::new();
            for b in &l.state.read().blocks {
                bytes.extend(b.to_line().into_bytes());
                bytes.push(b'\n');
            }
            let i = pos.index(bytes.len());
            bytes[i] ^= 1 << bit;
            let line = bytes[..i].iter().filter(|&&b| b == b'\n').count() as u64 + 1;
            let (report, _) = audit_bytes(&bytes);
            let bad = report.first_bad.expect("flip must be detected");
            prop_assert!(bad <= line.min(12));
        }

        #[test]
        fn append_only(ids in prop::collection::vec("[a-z]{1,6}", 1..40)) {
            let l = Ledger::in_memory();
            let mut seen = HashSet::new();
            let mut snapshot: Vec<Block> = Vec::new();
            for id in ids {
                let r = l.put_hash(hash_rec(&id, 1));
                prop_assert_eq!(r.is_ok(), seen.insert(id));
                let now = l.state.read().blocks.clone();
                prop_assert_eq!(&now[..snapshot.len()], &snapshot[..]);
                snapshot = now;
            }
        }
    }
}
