//! Synthetic facial-video generator built on an illumination × (specular +
//! diffuse) skin-reflection decomposition, where both reflection terms are
//! parameterized maps of the underlying blood-volume-pulse value. Produces
//! ground-truth-paired clips for training and evaluation at desk scale.

mod bvp;
mod dataset;
mod io;
mod scene;

pub use bvp::{synth_bvp, BvpSpec, HrProfile, HrvModulation, PulseShape, SynthBvp};
pub use dataset::{make_dataset, ClipMeta, DatasetRanges};
pub use io::{read_frames, read_meta, write_frames, FRAMES_FILE, GT_FILE, META_FILE};
pub use scene::{render_clip, GainField, Illumination, RenderedClip, SceneConfig, SkinMask};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("pixel gain overflow: {count} pixel(s) can leave [0,255], first offenders {first:?}")]
    GainOverflow { count: usize, first: Vec<(usize, usize)> },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt frames file: {0}")]
    CorruptFrames(String),
}
