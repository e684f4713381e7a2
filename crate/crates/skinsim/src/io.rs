//! On-disk clip layout. Each clip directory holds:
//!
//! * `frames.bin` — magic `VFRAMES1`, then little-endian u32 T, H, W, C,
//!   f64 fps, then T·H·W·C bytes of 8-bit samples (frame-major, row-major,
//!   RGB interleaved).
//! * `gt.csv` — `time_s,bvp` rows at the clip frame rate.
//! * `meta.txt` — `key = value` lines describing the generating parameters.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array4;

use crate::SimError;

pub const FRAMES_FILE: &str = "frames.bin";
pub const GT_FILE: &str = "gt.csv";
pub const META_FILE: &str = "meta.txt";

const MAGIC: &[u8; 8] = b"VFRAMES1";

pub fn write_frames(path: &Path, frames: &Array4<u8>, fps: f64) -> Result<(), SimError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    for d in frames.shape() {
        f.write_all(&(*d as u32).to_le_bytes())?;
    }
    f.write_all(&fps.to_le_bytes())?;
    let std_order = frames.as_standard_layout();
    f.write_all(std_order.as_slice().unwrap())?;
    Ok(())
}

pub fn read_frames(path: &Path) -> Result<(Array4<u8>, f64), SimError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)
        .map_err(|_| SimError::CorruptFrames("file shorter than header".into()))?;
    if &magic != MAGIC {
        return Err(SimError::CorruptFrames(format!(
            "bad magic {:?} in {}",
            magic,
            path.display()
        )));
    }
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        let mut b = [0u8; 4];
        f.read_exact(&mut b)
            .map_err(|_| SimError::CorruptFrames("truncated dims".into()))?;
        *d = u32::from_le_bytes(b) as usize;
    }
    let mut b = [0u8; 8];
    f.read_exact(&mut b)
        .map_err(|_| SimError::CorruptFrames("truncated fps".into()))?;
    let fps = f64::from_le_bytes(b);
    if !(fps.is_finite() && fps > 0.0) {
        return Err(SimError::CorruptFrames(format!("invalid fps {fps}")));
    }
    let n: usize = dims.iter().product();
    let mut data = vec![0u8; n];
    f.read_exact(&mut data)
        .map_err(|_| SimError::CorruptFrames("truncated pixel data".into()))?;
    let arr = Array4::from_shape_vec((dims[0], dims[1], dims[2], dims[3]), data)
        .map_err(|e| SimError::CorruptFrames(e.to_string()))?;
    Ok((arr, fps))
}

pub fn write_meta(path: &Path, pairs: &[(&str, String)]) -> Result<(), SimError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (k, v) in pairs {
        writeln!(f, "{k} = {v}")?;
    }
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<Vec<(String, String)>, SimError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            if l.is_empty() {
                return None;
            }
            let (k, v) = l.split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect())
}
