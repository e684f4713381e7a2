//! A dual-branch spatiotemporal network reconstructing blood-volume-pulse
//! waveforms from facial video: a local 3-D convolution branch with global
//! spatial/temporal attention weighting, a global transformer branch over
//! video cube patches with parallel spatial and temporal self-attention,
//! per-stage bridges exchanging features between the branches, and twin
//! waveform heads trained with a negative-Pearson plus smooth-L1 objective.

pub mod assembly;
pub mod checkpoint;
pub mod config;
pub mod ctim;
pub mod global_branch;
pub mod gradcheck;
pub mod heads;
pub mod local_branch;
pub mod params;
pub mod reference;

pub use assembly::{hr_from_heads, HeadOutputs, VidFormer, VideoClip};
pub use config::{Ablation, ModelConfig};
pub use params::ParamStore;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VidError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint fingerprint mismatch: file {file:#018x}, expected {expected:#018x}")]
    FingerprintMismatch { file: u64, expected: u64 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// FNV-1a 64-bit hash; used for config fingerprints and per-parameter seeds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
