use super::{ParamStore, Tensor};
use crate::error::{format_err, Result};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EMOW";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialises parameters as
/// `EMOW | version | count | (name_len | name | ndim | dims.. | f32 data)*`,
/// little-endian.
pub fn checkpoint_bytes(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + store.num_scalars() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(path: &Path, store: &ParamStore) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(store))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(format_err("checkpoint truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<ParamStore> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(format_err("not an EMOW checkpoint"));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format_err(format!("unsupported checkpoint version {version}")));
    }
    let count = c.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?).map_err(|_| format_err("tensor name is not UTF-8"))?.to_string();
        let ndim = c.u32()? as usize;
        let dims: Vec<usize> = (0..ndim).map(|_| c.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let (rows, cols) = match dims.as_slice() {
            [n] => (1, *n),
            [r, k] => (*r, *k),
            _ => return Err(format_err(format!("{name}: unsupported rank {ndim}"))),
        };
        let data = c
            .take(rows * cols * 4)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        store.add(&name, Tensor::from_vec(rows, cols, data)?)?;
    }
    if c.pos != bytes.len() {
        return Err(format_err("trailing bytes after checkpoint"));
    }
    Ok(store)
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore> {
    parse_checkpoint(&std::fs::read(path)?)
}
