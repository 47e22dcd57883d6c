//! Binary checkpoint format, all little-endian:
//!
//! ```text
//! magic "NDCK" | version u32 | tensor count u32
//! per tensor: name length u32 | name utf-8 | dtype u8 | rank u32 | dims u64 * rank | values
//! crc32 of everything above, u32
//! ```

use std::path::Path;

use thiserror::Error;

use super::tensor::{DType, ParameterStore, Tensor};

pub const MAGIC: &[u8; 4] = b"NDCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn to_bytes(store: &ParameterStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.dtype.code());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for d in &t.shape {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        match t.dtype {
            DType::F64 => t
                .data
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            DType::F32 => t
                .data
                .iter()
                .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| CheckpointError::CorruptFile("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ParameterStore, CheckpointError> {
    let corrupt = |m: &str| CheckpointError::CorruptFile(m.to_string());
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic or too short"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(corrupt("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let count = r.u32()?;
    let mut store = ParameterStore::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| corrupt("tensor name is not utf-8"))?
            .to_string();
        let dtype = DType::from_code(r.take(1)?[0]).ok_or_else(|| corrupt("unknown dtype"))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .ok_or_else(|| corrupt("shape overflow"))?;
        let width = if dtype == DType::F64 { 8 } else { 4 };
        let raw = r.take(
            n.checked_mul(width)
                .ok_or_else(|| corrupt("shape overflow"))?,
        )?;
        let data = match dtype {
            DType::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
            DType::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
        };
        let mut t = Tensor::new(shape, data).map_err(|e| corrupt(&e.to_string()))?;
        t.dtype = dtype;
        store.add(&name, t).map_err(|e| corrupt(&e.to_string()))?;
    }
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(store)
}

pub fn save_checkpoint(store: &ParameterStore, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, to_bytes(store))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ParameterStore, CheckpointError> {
    from_bytes(&std::fs::read(path)?)
}
