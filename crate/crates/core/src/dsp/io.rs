use super::{FeatureMatrix, StreamTag};
use crate::error::{format_err, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const FEATURE_MAGIC: &[u8; 4] = b"EMOF";
pub const FEATURE_VERSION: u32 = 1;

/// Writes `EMOF | version | T | D | frame_shift_ms | T*D f32`, little-endian.
pub fn write_feature_file(path: &Path, feats: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes())?;
    w.write_all(&(feats.frames() as u32).to_le_bytes())?;
    w.write_all(&(feats.dim() as u32).to_le_bytes())?;
    w.write_all(&(feats.frame_shift_ms as f32).to_le_bytes())?;
    for v in feats.values() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature file. The stream tag is not stored on disk, so the
/// caller names it.
pub fn read_feature_file(path: &Path, stream: StreamTag) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let ctx = || path.display().to_string();
    if bytes.len() < 20 || &bytes[..4] != FEATURE_MAGIC {
        return Err(format_err(format!("{}: not an EMOF feature file", ctx())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FEATURE_VERSION {
        return Err(format_err(format!("{}: unsupported version {version}", ctx())));
    }
    let (frames, dim) = (u32_at(8) as usize, u32_at(12) as usize);
    let shift = f32::from_le_bytes(bytes[16..20].try_into().unwrap()) as f64;
    let body = &bytes[20..];
    if body.len() != frames * dim * 4 {
        return Err(format_err(format!(
            "{}: header says {frames}x{dim} but body holds {} bytes",
            ctx(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FeatureMatrix::new(frames, dim, values, shift, stream)
}
