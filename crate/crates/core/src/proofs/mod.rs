//! Proof artifacts.
//!
//! - [`integrity`]: a leaf circuit proving knowledge of a chunk hashing to a
//!   public leaf digest, and per-level node circuits that verify two proofs of
//!   the level below and expose their Merkle parent. The root proof attests
//!   the whole commitment.
//! - [`reenc`]: a Fiat-Shamir sigma proof that the re-encrypted key `c'` was
//!   obtained from `c` with some re-key `rk`.
//! - [`aggregate`]: the composite proof bound to `x_agg = h || c' || c`,
//!   verified in one call, optionally spanning several files.

pub mod aggregate;
pub mod integrity;
pub mod reenc;

use thiserror::Error;

use crate::codec::CodecError;
use crate::commitment::HashAlg;
use crate::envelope::validate_chunk_size;
use crate::pairing::GroupError;

pub use aggregate::{
    aggregate_final, verify_aggregated, AggVk, AggregatedProof, FileStatement, Rejected, VerifierKeys, VerifyStats,
};
pub use integrity::{
    aggregate_pair, aggregate_tree, duplicate, lift, prove_chunk, setup_integrity, verify_integrity, IntegrityKeys,
    IntegrityProof, IntegrityProver, IntegrityVk, TreeStats,
};
pub use reenc::{prove_reenc, simulate_transcript, verify_reenc, verify_transcript, ReEncProof, ReEncStatement, ReencVk};

/// Serialized proof format version.
pub const PROOF_VERSION: u8 = 1;

/// Upper bound on tree depth accepted anywhere.
pub const MAX_SUPPORTED_DEPTH: u32 = 32;
/// Default tree depth: `2^20` chunks, 64 GiB at the default chunk size.
pub const DEFAULT_MAX_DEPTH: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CircuitId {
    Int = 1,
    Pre = 2,
    Agg = 3,
}

/// Why a verification rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reason {
    /// The root integrity proof does not verify against the ledger digest.
    Integrity,
    /// The re-encryption proof does not verify against `(c, c')`.
    Reenc,
    /// The proof's binding digest does not match `x_agg`.
    Binding,
    /// Wrong format, version, parameter digest or shape.
    Malformed,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Integrity => "integrity",
            Reason::Reenc => "reenc",
            Reason::Binding => "binding",
            Reason::Malformed => "malformed",
        }
    }
}

impl std::fmt::Display for Reason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("unsupported parameters: {0}")]
    UnsupportedParams(String),
    #[error("proving chunk {index} failed: {msg}")]
    ChunkBackend { index: u64, msg: String },
    #[error("proving backend failed: {0}")]
    Backend(String),
    #[error("child proof does not verify: {0}")]
    ChildInvalid(String),
    #[error("statement mismatch: {0}")]
    StatementMismatch(String),
    #[error("witness does not satisfy the statement")]
    WitnessMismatch,
    #[error("tree of depth {0} exceeds the configured maximum {1}")]
    TooDeep(u32, u32),
    #[error("malformed proof data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// What fixes the integrity circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IntegrityParams {
    pub chunk_size: u32,
    pub alg: HashAlg,
    pub max_depth: u32,
}

impl IntegrityParams {
    pub fn new(chunk_size: u32, max_depth: u32) -> Self {
        IntegrityParams { chunk_size, alg: HashAlg::Poseidon, max_depth }
    }

    pub fn validate(&self) -> Result<(), ProofError> {
        validate_chunk_size(self.chunk_size).map_err(|e| ProofError::UnsupportedParams(e.to_string()))?;
        if self.alg != HashAlg::Poseidon {
            return Err(ProofError::UnsupportedParams(format!("{:?} commitments cannot be proven", self.alg)));
        }
        if !(1..=MAX_SUPPORTED_DEPTH).contains(&self.max_depth) {
            return Err(ProofError::UnsupportedParams(format!("max_depth {} not in [1, 32]", self.max_depth)));
        }
        Ok(())
    }
}

fn backend<E: std::fmt::Display>(e: E) -> ProofError {
    ProofError::Backend(e.to_string())
}
