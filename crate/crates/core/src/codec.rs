//! Tagged binary layout shared by every serialized protocol object.
//!
//! An object is a one-byte type tag followed by fields, each written as a
//! big-endian `u32` length and the raw field bytes. Decoding is strict: the tag
//! must match, every field must be present and no trailing bytes may remain.

use thiserror::Error;

/// Type tags of the serialized objects.
pub mod tag {
    pub const PUBLIC_KEY: u8 = 0x01;
    pub const LEVEL2_CIPHERTEXT: u8 = 0x02;
    pub const REKEY: u8 = 0x03;
    pub const LEVEL1_CIPHERTEXT: u8 = 0x04;
    pub const SECRET_KEY: u8 = 0x05;
    pub const REENC_PROOF: u8 = 0x10;
    pub const INTEGRITY_PROOF: u8 = 0x11;
    pub const AGGREGATED_PROOF: u8 = 0x12;
    pub const INTEGRITY_VK: u8 = 0x13;
    pub const REENC_VK: u8 = 0x14;
    pub const AGG_VK: u8 = 0x15;
    pub const GRANT: u8 = 0x20;
    pub const GRANT_REQUEST: u8 = 0x21;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("expected type tag {expected:#04x}, found {found:#04x}")]
    WrongTag { expected: u8, found: u8 },
    #[error("input truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after object")]
    TrailingBytes(usize),
    #[error("invalid field: {0}")]
    InvalidField(&'static str),
}

pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(tag: u8) -> Self {
        Encoder { buf: vec![tag] }
    }

    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        let len = u32::try_from(bytes.len()).expect("field longer than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.field(&v.to_be_bytes())
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.field(&[v])
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8], expected_tag: u8) -> Result<Self, CodecError> {
        let found = *buf.first().ok_or(CodecError::Truncated(0))?;
        if found != expected_tag {
            return Err(CodecError::WrongTag { expected: expected_tag, found });
        }
        Ok(Decoder { buf, pos: 1 })
    }

    pub fn field(&mut self) -> Result<&'a [u8], CodecError> {
        let len_end = self.pos + 4;
        let len_bytes = self.buf.get(self.pos..len_end).ok_or(CodecError::Truncated(self.pos))?;
        let len = u32::from_be_bytes(len_bytes.try_into().unwrap()) as usize;
        let end = len_end.checked_add(len).ok_or(CodecError::Truncated(len_end))?;
        let out = self.buf.get(len_end..end).ok_or(CodecError::Truncated(len_end))?;
        self.pos = end;
        Ok(out)
    }

    pub fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], CodecError> {
        self.field()?.try_into().map_err(|_| CodecError::InvalidField(what))
    }

    pub fn u64(&mut self, what: &'static str) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.array::<8>(what)?))
    }

    pub fn u8(&mut self, what: &'static str) -> Result<u8, CodecError> {
        Ok(self.array::<1>(what)?[0])
    }

    pub fn finish(self) -> Result<(), CodecError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}
