//! File encryption: a KEM bridge from the PRE payload to a symmetric key, and
//! a streaming chunked AES-256-GCM envelope.
//!
//! Layout (all integers big-endian):
//!
//! ```text
//! magic      8  "FAITH1\0\0"
//! version    2  1
//! cipher     2  1 = AES-256-GCM
//! chunk_size 4  power of two in [4 KiB, 4 MiB]
//! length     8  plaintext byte length
//! nonce     16  file nonce
//! body          ceil(length / chunk_size) sealed chunks, each ciphertext || 16-byte tag
//! ```
//!
//! Chunk `i` uses the 96-bit nonce `nonce[0..4] || (nonce[4..12] xor i)` and
//! authenticates `header || i || last` as associated data, so chunks cannot be
//! reordered, moved between files or dropped from the tail.

use std::io::{self, Read, Write};

use aes_gcm::aead::{AeadInPlace, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce, Tag};
use hkdf::Hkdf;
use rand::RngCore;
use sha2::Sha256;
use thiserror::Error;

use crate::pairing::Engine;

pub const MAGIC: [u8; 8] = *b"FAITH1\0\0";
pub const FORMAT_VERSION: u16 = 1;
pub const CIPHER_AES_256_GCM: u16 = 1;
pub const HEADER_LEN: usize = 40;
pub const TAG_LEN: usize = 16;
pub const MIN_CHUNK_SIZE: u32 = 4 << 10;
pub const MAX_CHUNK_SIZE: u32 = 4 << 20;
pub const DEFAULT_CHUNK_SIZE: u32 = 64 << 10;

const KEM_INFO: &[u8] = b"FAITH-KEM-v1";

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("chunk {0} failed authentication")]
    AuthFailure(u64),
    #[error("body truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{0} unexpected bytes after the last chunk")]
    TrailingData(u64),
    #[error("invalid header: {0}")]
    BadHeader(&'static str),
    #[error("chunk size {0} is not a power of two in [4 KiB, 4 MiB]")]
    ChunkSize(u32),
    #[error("plaintext source ended at {found} bytes, {expected} announced")]
    LengthMismatch { expected: u64, found: u64 },
    #[error("I/O error at byte {offset}: {source}")]
    Io { offset: u64, source: io::Error },
}

/// 32-byte AES-256 key derived from a target-group payload.
#[derive(Clone, PartialEq, Eq)]
pub struct FileKey(pub [u8; 32]);

impl std::fmt::Debug for FileKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FileKey(..)")
    }
}

/// HKDF-SHA256 (no salt, info `FAITH-KEM-v1`) over the canonical encoding of `m`.
pub fn kem_derive<E: Engine>(engine: &E, m: &E::Gt) -> FileKey {
    kem_derive_bytes(&engine.gt_to_bytes(m))
}

pub fn kem_derive_bytes(ikm: &[u8]) -> FileKey {
    let mut out = [0u8; 32];
    Hkdf::<Sha256>::new(None, ikm).expand(KEM_INFO, &mut out).expect("32 bytes is a valid HKDF length");
    FileKey(out)
}

pub fn validate_chunk_size(chunk_size: u32) -> Result<(), EnvelopeError> {
    if chunk_size.is_power_of_two() && (MIN_CHUNK_SIZE..=MAX_CHUNK_SIZE).contains(&chunk_size) {
        Ok(())
    } else {
        Err(EnvelopeError::ChunkSize(chunk_size))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub version: u16,
    pub cipher: u16,
    pub chunk_size: u32,
    pub plaintext_len: u64,
    pub file_nonce: [u8; 16],
}

impl Header {
    pub fn new(chunk_size: u32, plaintext_len: u64, file_nonce: [u8; 16]) -> Result<Self, EnvelopeError> {
        validate_chunk_size(chunk_size)?;
        Ok(Header { version: FORMAT_VERSION, cipher: CIPHER_AES_256_GCM, chunk_size, plaintext_len, file_nonce })
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..8].copy_from_slice(&MAGIC);
        b[8..10].copy_from_slice(&self.version.to_be_bytes());
        b[10..12].copy_from_slice(&self.cipher.to_be_bytes());
        b[12..16].copy_from_slice(&self.chunk_size.to_be_bytes());
        b[16..24].copy_from_slice(&self.plaintext_len.to_be_bytes());
        b[24..40].copy_from_slice(&self.file_nonce);
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self, EnvelopeError> {
        if b[0..8] != MAGIC {
            return Err(EnvelopeError::BadHeader("magic"));
        }
        let version = u16::from_be_bytes([b[8], b[9]]);
        if version != FORMAT_VERSION {
            return Err(EnvelopeError::BadHeader("version"));
        }
        let cipher = u16::from_be_bytes([b[10], b[11]]);
        if cipher != CIPHER_AES_256_GCM {
            return Err(EnvelopeError::BadHeader("cipher id"));
        }
        let chunk_size = u32::from_be_bytes(b[12..16].try_into().unwrap());
        validate_chunk_size(chunk_size)?;
        Ok(Header {
            version,
            cipher,
            chunk_size,
            plaintext_len: u64::from_be_bytes(b[16..24].try_into().unwrap()),
            file_nonce: b[24..40].try_into().unwrap(),
        })
    }

    pub fn chunk_count(&self) -> u64 {
        self.plaintext_len.div_ceil(u64::from(self.chunk_size))
    }

    /// Plaintext length of chunk `i`.
    pub fn chunk_len(&self, i: u64) -> usize {
        let cs = u64::from(self.chunk_size);
        (self.plaintext_len - i * cs).min(cs) as usize
    }

    pub fn body_len(&self) -> u64 {
        self.plaintext_len + self.chunk_count() * TAG_LEN as u64
    }

    fn nonce(&self, i: u64) -> [u8; 12] {
        let mut n = [0u8; 12];
        n.copy_from_slice(&self.file_nonce[..12]);
        for (dst, src) in n[4..].iter_mut().zip(i.to_be_bytes()) {
            *dst ^= src;
        }
        n
    }

    fn aad(&self, i: u64) -> [u8; HEADER_LEN + 9] {
        let mut a = [0u8; HEADER_LEN + 9];
        a[..HEADER_LEN].copy_from_slice(&self.to_bytes());
        a[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&i.to_be_bytes());
        a[HEADER_LEN + 8] = u8::from(i + 1 == self.chunk_count());
        a
    }
}

/// Sealed body length for a plaintext of `len` bytes.
pub fn sealed_len(len: u64, chunk_size: u32) -> u64 {
    HEADER_LEN as u64 + len + len.div_ceil(u64::from(chunk_size)) * TAG_LEN as u64
}

fn io_at(offset: u64) -> impl FnOnce(io::Error) -> EnvelopeError {
    move |source| EnvelopeError::Io { offset, source }
}

/// Fills `buf` from `r`, returning how many bytes were read before EOF.
fn read_full<R: Read + ?Sized>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<usize, EnvelopeError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(io_at(offset + filled as u64)(e)),
        }
    }
    Ok(filled)
}

/// Encrypts exactly `plaintext_len` bytes from `src` into `dst`.
///
/// `on_chunk(i, sealed)` sees every sealed chunk (ciphertext and tag) in
/// order, letting callers commit to the body in the same pass. Memory use is
/// one chunk buffer.
pub fn seal<R, W, G, F>(
    key: &FileKey,
    src: &mut R,
    plaintext_len: u64,
    dst: &mut W,
    chunk_size: u32,
    rng: &mut G,
    mut on_chunk: F,
) -> Result<Header, EnvelopeError>
where
    R: Read + ?Sized,
    W: Write + ?Sized,
    G: RngCore + ?Sized,
    F: FnMut(u64, &[u8]),
{
    let mut file_nonce = [0u8; 16];
    rng.fill_bytes(&mut file_nonce);
    let header = Header::new(chunk_size, plaintext_len, file_nonce)?;
    dst.write_all(&header.to_bytes()).map_err(io_at(0))?;

    let cipher = Aes256Gcm::new((&key.0).into());
    let mut buf = vec![0u8; chunk_size as usize + TAG_LEN];
    let mut read_off = 0u64;
    let mut write_off = HEADER_LEN as u64;
    for i in 0..header.chunk_count() {
        let len = header.chunk_len(i);
        let got = read_full(src, &mut buf[..len], read_off)?;
        if got < len {
            return Err(EnvelopeError::LengthMismatch { expected: plaintext_len, found: read_off + got as u64 });
        }
        read_off += len as u64;
        let tag = cipher
            .encrypt_in_place_detached(Nonce::from_slice(&header.nonce(i)), &header.aad(i), &mut buf[..len])
            .expect("AES-GCM accepts chunks up to 4 MiB");
        buf[len..len + TAG_LEN].copy_from_slice(&tag);
        let sealed = &buf[..len + TAG_LEN];
        dst.write_all(sealed).map_err(io_at(write_off))?;
        write_off += sealed.len() as u64;
        on_chunk(i, sealed);
    }
    let mut probe = [0u8; 1];
    if read_full(src, &mut probe, read_off)? != 0 {
        return Err(EnvelopeError::LengthMismatch { expected: plaintext_len, found: read_off + 1 });
    }
    dst.flush().map_err(io_at(write_off))?;
    Ok(header)
}

/// Reads the header and hands every sealed chunk to `f` without decrypting.
///
/// Fails on a short body or trailing bytes.
pub fn for_each_sealed_chunk<R, F>(src: &mut R, mut f: F) -> Result<Header, EnvelopeError>
where
    R: Read + ?Sized,
    F: FnMut(&Header, u64, &[u8]) -> Result<(), EnvelopeError>,
{
    let header = read_header(src)?;
    let mut buf = vec![0u8; header.chunk_size as usize + TAG_LEN];
    let mut off = HEADER_LEN as u64;
    for i in 0..header.chunk_count() {
        let want = header.chunk_len(i) + TAG_LEN;
        let got = read_full(src, &mut buf[..want], off)?;
        if got < want {
            return Err(EnvelopeError::Truncated { expected: header.body_len(), found: off + got as u64 - HEADER_LEN as u64 });
        }
        off += want as u64;
        f(&header, i, &buf[..want])?;
    }
    let mut rest = 0u64;
    let mut probe = [0u8; 4096];
    loop {
        let n = read_full(src, &mut probe, off + rest)?;
        rest += n as u64;
        if n < probe.len() {
            break;
        }
    }
    if rest != 0 {
        return Err(EnvelopeError::TrailingData(rest));
    }
    Ok(header)
}

pub fn read_header<R: Read + ?Sized>(src: &mut R) -> Result<Header, EnvelopeError> {
    let mut hb = [0u8; HEADER_LEN];
    if read_full(src, &mut hb, 0)? < HEADER_LEN {
        return Err(EnvelopeError::BadHeader("short header"));
    }
    Header::from_bytes(&hb)
}

/// Decrypts an envelope from `src` into `dst`, chunk by chunk.
///
/// Plaintext of a chunk is written only after its tag verifies, but earlier
/// chunks may already be in `dst` when a later one fails; callers wanting
/// all-or-nothing output write to a temporary file.
pub fn open<R, W>(key: &FileKey, src: &mut R, dst: &mut W) -> Result<Header, EnvelopeError>
where
    R: Read + ?Sized,
    W: Write + ?Sized,
{
    let cipher = Aes256Gcm::new((&key.0).into());
    let mut out_off = 0u64;
    let mut plain = Vec::new();
    let header = for_each_sealed_chunk(src, |h, i, sealed| {
        let len = sealed.len() - TAG_LEN;
        plain.clear();
        plain.extend_from_slice(&sealed[..len]);
        cipher
            .decrypt_in_place_detached(
                Nonce::from_slice(&h.nonce(i)),
                &h.aad(i),
                &mut plain,
                Tag::from_slice(&sealed[len..]),
            )
            .map_err(|_| EnvelopeError::AuthFailure(i))?;
        dst.write_all(&plain).map_err(io_at(out_off))?;
        out_off += len as u64;
        Ok(())
    })?;
    dst.flush().map_err(io_at(out_off))?;
    Ok(header)
}
