//! Shared plumbing for the binary artifact formats.
//!
//! Both artifact files follow the same envelope: a 4-byte ASCII magic, a
//! little-endian `u32` header length, a UTF-8 JSON header, then raw
//! little-endian payload. Headers are serialized with fixed field order so
//! identical inputs produce identical bytes.

use std::io::Read;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: not a {expected} file")]
    BadMagic { expected: &'static str },
    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("truncated payload: {context}")]
    TruncatedPayload { context: &'static str },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error(transparent)]
    Io(std::io::Error),
}

impl From<std::io::Error> for FormatError {
    fn from(e: std::io::Error) -> Self {
        FormatError::Io(e)
    }
}

pub(crate) fn read_exact(
    r: &mut impl Read,
    buf: &mut [u8],
    context: &'static str,
) -> Result<(), FormatError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            FormatError::TruncatedPayload { context }
        } else {
            FormatError::Io(e)
        }
    })
}

pub(crate) fn check_magic(
    r: &mut impl Read,
    magic: &'static [u8; 4],
    name: &'static str,
) -> Result<(), FormatError> {
    let mut got = [0u8; 4];
    read_exact(r, &mut got, "magic")?;
    if &got != magic {
        return Err(FormatError::BadMagic { expected: name });
    }
    Ok(())
}

pub(crate) fn read_u32(r: &mut impl Read, context: &'static str) -> Result<u32, FormatError> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, context)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_f32s(
    r: &mut impl Read,
    n: usize,
    context: &'static str,
) -> Result<Vec<f64>, FormatError> {
    let mut bytes = vec![0u8; n * 4];
    read_exact(r, &mut bytes, context)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

pub(crate) fn read_f64s(
    r: &mut impl Read,
    n: usize,
    context: &'static str,
) -> Result<Vec<f64>, FormatError> {
    let mut bytes = vec![0u8; n * 8];
    read_exact(r, &mut bytes, context)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
        .collect())
}
