//! Binary weight blob.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic  b"EMBW"
//! u32    format version (1)
//! u32    tensor count
//! per tensor:
//!   u32 name length, name bytes (UTF-8)
//!   u32 rank, rank × u64 dims
//!   product(dims) × f64 values
//! ```

use std::path::Path;

use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

const MAGIC: &[u8; 4] = b"EMBW";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn encode(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + store.count(None) * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for p in store.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
        for d in &p.shape {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in &p.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint("weight blob is truncated".into())
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<NamedTensor>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Checkpoint("not an ember weight blob (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "weight blob version {version} is not supported (expected {VERSION})"
        )));
    }
    let count = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = cur.u32()? as usize;
        let shape = (0..rank).map(|_| cur.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = cur.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(NamedTensor { name, shape, values });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after weight blob".into()));
    }
    Ok(tensors)
}

pub fn write_blob(path: &Path, store: &ParamStore) -> Result<()> {
    write_atomic(path, &encode(store))
}

pub fn read_blob(path: &Path) -> Result<Vec<NamedTensor>> {
    let bytes = std::fs::read(path).map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    decode(&bytes)
}

/// Copies tensors into `store` by name. The blob must provide exactly the
/// store's tensors with matching shapes.
pub fn assign(store: &mut ParamStore, tensors: &[NamedTensor]) -> Result<()> {
    for t in tensors {
        let p = store
            .find_mut(&t.name)
            .ok_or_else(|| Error::Checkpoint(format!("weight blob has unexpected tensor '{}'", t.name)))?;
        if p.shape != t.shape {
            return Err(Error::Checkpoint(format!(
                "tensor '{}' has shape {:?}, expected {:?}",
                t.name, t.shape, p.shape
            )));
        }
        p.values.clone_from(&t.values);
    }
    let missing: Vec<&str> = store
        .iter()
        .filter(|p| !tensors.iter().any(|t| t.name == p.name))
        .map(|p| p.name.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Checkpoint(format!("weight blob is missing tensors: {}", missing.join(", "))));
    }
    Ok(())
}
