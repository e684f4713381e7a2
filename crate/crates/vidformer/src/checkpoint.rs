//! Checkpoint container: the canonical config text plus every named tensor,
//! guarded by the config fingerprint.
//!
//! Layout (little-endian): magic `VFCKPT01`, u64 fingerprint, u32 config
//! length + bytes, u32 tensor count, then per tensor: u32 name length, name
//! bytes, u32 rank, u64 dims, f64 data.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use autograd::Arr;
use ndarray::IxDyn;

use crate::config::ModelConfig;
use crate::params::ParamStore;
use crate::VidError;

const MAGIC: &[u8; 8] = b"VFCKPT01";

pub fn save(path: &Path, cfg: &ModelConfig, store: &ParamStore) -> Result<(), VidError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&cfg.fingerprint().to_le_bytes())?;
    let text = cfg.canonical_text();
    f.write_all(&(text.len() as u32).to_le_bytes())?;
    f.write_all(text.as_bytes())?;
    f.write_all(&(store.tensors().len() as u32).to_le_bytes())?;
    for (name, tensor) in store.tensors() {
        f.write_all(&(name.len() as u32).to_le_bytes())?;
        f.write_all(name.as_bytes())?;
        f.write_all(&(tensor.ndim() as u32).to_le_bytes())?;
        for d in tensor.shape() {
            f.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in tensor.iter() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(f: &mut impl Read) -> Result<u32, VidError> {
    let mut b = [0u8; 4];
    f.read_exact(&mut b)
        .map_err(|_| VidError::CorruptCheckpoint("unexpected end of file".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(f: &mut impl Read) -> Result<u64, VidError> {
    let mut b = [0u8; 8];
    f.read_exact(&mut b)
        .map_err(|_| VidError::CorruptCheckpoint("unexpected end of file".into()))?;
    Ok(u64::from_le_bytes(b))
}

/// Loads a checkpoint; when `expected` is given its fingerprint must match.
pub fn load(path: &Path, expected: Option<&ModelConfig>) -> Result<(ModelConfig, ParamStore), VidError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)
        .map_err(|_| VidError::CorruptCheckpoint("file shorter than header".into()))?;
    if &magic != MAGIC {
        return Err(VidError::CorruptCheckpoint("bad magic".into()));
    }
    let fingerprint = read_u64(&mut f)?;
    let cfg_len = read_u32(&mut f)? as usize;
    let mut cfg_bytes = vec![0u8; cfg_len];
    f.read_exact(&mut cfg_bytes)
        .map_err(|_| VidError::CorruptCheckpoint("truncated config".into()))?;
    let cfg_text = String::from_utf8(cfg_bytes)
        .map_err(|_| VidError::CorruptCheckpoint("config is not utf-8".into()))?;
    let cfg = ModelConfig::parse(&cfg_text)?;
    if cfg.fingerprint() != fingerprint {
        return Err(VidError::CorruptCheckpoint(
            "stored fingerprint does not match embedded config".into(),
        ));
    }
    if let Some(expected) = expected {
        if expected.fingerprint() != fingerprint {
            return Err(VidError::FingerprintMismatch {
                file: fingerprint,
                expected: expected.fingerprint(),
            });
        }
    }

    let n_tensors = read_u32(&mut f)? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..n_tensors {
        let name_len = read_u32(&mut f)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        f.read_exact(&mut name_bytes)
            .map_err(|_| VidError::CorruptCheckpoint("truncated tensor name".into()))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| VidError::CorruptCheckpoint("tensor name is not utf-8".into()))?;
        let rank = read_u32(&mut f)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u64(&mut f)? as usize);
        }
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            f.read_exact(&mut buf)
                .map_err(|_| VidError::CorruptCheckpoint("truncated tensor data".into()))?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.insert(
            name,
            Arr::from_shape_vec(IxDyn(&dims), data)
                .map_err(|e| VidError::CorruptCheckpoint(e.to_string()))?,
        );
    }
    Ok((cfg, ParamStore::from_tensors(tensors, fingerprint)))
}
