//! Named-tensor container used for weights and checkpoints.
//!
//! Layout, all integers little-endian `u32`: magic `MV3D`, version, tensor
//! count, then per tensor the name length, UTF-8 name, rank, dims, and the
//! raw `f32` values.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"MV3D";
pub const VERSION: u32 = 1;
const MAX_RANK: usize = 8;

pub type NamedTensors = Vec<(String, Tensor<f32>)>;

pub fn encode_weights(tensors: &[(String, Tensor<f32>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format("weights", format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn parse_weights(bytes: &[u8]) -> Result<NamedTensors> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format("weights", "bad magic, expected MV3D"));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format("weights", format!("unsupported version {version}")));
    }
    let count = r.u32("tensor count")? as usize;
    // Every tensor needs at least 8 header bytes.
    if count > r.remaining() / 8 {
        return Err(Error::format("weights", format!("tensor count {count} exceeds file size")));
    }
    let mut out = Vec::with_capacity(count);
    let mut seen = HashSet::new();
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::format("weights", "tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        if rank > MAX_RANK {
            return Err(Error::format("weights", format!("tensor {name:?} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut numel = 1usize;
        for _ in 0..rank {
            let d = r.u32("dimension")? as usize;
            numel = numel
                .checked_mul(d)
                .filter(|&n| n <= r.remaining() / 4)
                .ok_or_else(|| Error::format("weights", format!("tensor {name:?} larger than file")))?;
            shape.push(d);
        }
        let raw = r.take(numel * 4, "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if !seen.insert(name.clone()) {
            return Err(Error::format("weights", format!("duplicate tensor {name:?}")));
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    if r.remaining() != 0 {
        return Err(Error::format("weights", format!("{} trailing bytes", r.remaining())));
    }
    Ok(out)
}

pub fn save_weights(path: &Path, tensors: &[(String, Tensor<f32>)]) -> Result<()> {
    std::fs::write(path, encode_weights(tensors)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<NamedTensors> {
    parse_weights(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
