//! Authenticated sharing of large encrypted files over hybrid storage.
//!
//! A data owner encrypts a file under a fresh symmetric key and wraps that key
//! with proxy re-encryption. The off-chain storage provider keeps the
//! ciphertext, re-encrypts the wrapped key for authorized users, and proves
//! with recursive zero-knowledge proofs that it still holds data matching the
//! digest anchored on the ledger. A user checks one aggregated proof instead of
//! re-hashing the whole file, then decrypts.
//!
//! Module map:
//!
//! - [`pairing`]: pairing-group arithmetic (BLS12-381) and a toy exponent oracle.
//! - [`pre`]: the five-algorithm proxy re-encryption suite.
//! - [`envelope`]: KEM bridge and the chunked AEAD file envelope.
//! - [`commitment`]: chunk packing, Poseidon leaf hashing and the Merkle root.
//! - [`proofs`]: integrity circuits, the re-encryption sigma proof and the
//!   aggregated proof.
//! - [`ledger`]: the append-only, hash-chained ledger mock.
//! - [`protocol`]: the actors and the four protocol phases.
//! - [`bench`]: benchmark harness with CSV and SVG output.

pub mod bench;
pub mod codec;
pub mod commitment;
pub mod envelope;
pub mod ledger;
pub mod pairing;
pub mod pre;
pub mod proofs;
pub mod protocol;

pub use pairing::{Bls12, Engine, GroupCtx, ToyEngine};
