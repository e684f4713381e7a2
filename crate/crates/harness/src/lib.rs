//! Experiment harness: dataset ingestion and windowing, preprocessing with a
//! pluggable region-of-interest provider, the training loop (decoupled
//! weight decay + cosine warm restarts), intra- and cross-dataset
//! evaluation with agreement statistics, and the structural ablation runner.

pub mod ablate;
pub mod dataset;
pub mod evaluate;
pub mod metrics;
pub mod preprocess;
pub mod train;

pub use ablate::{ablate, AblationRow};
pub use dataset::{ingest, window_clip, window_starts, ClipEntry, DatasetIndex};
pub use evaluate::{cross_evaluate, evaluate, stitch_windows, EvalSettings, MetricReport};
pub use metrics::{bland_altman_limits, mae, pearson, rmse, BlandAltman};
pub use preprocess::{preprocess, CenterCrop, MaskRoi, Rect, RoiProvider};
pub use train::{train, RunSettings, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code contract: 2 config, 3 data, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) | HarnessError::Io(_) => 3,
            HarnessError::Divergence { .. } => 4,
        }
    }
}

impl From<vidformer::VidError> for HarnessError {
    fn from(e: vidformer::VidError) -> Self {
        match e {
            vidformer::VidError::Config(m) => HarnessError::Config(m),
            other => HarnessError::Data(other.to_string()),
        }
    }
}

impl From<sigproc::SigError> for HarnessError {
    fn from(e: sigproc::SigError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<skinsim::SimError> for HarnessError {
    fn from(e: skinsim::SimError) -> Self {
        match e {
            skinsim::SimError::InvalidSpec(m) => HarnessError::Config(m),
            other => HarnessError::Data(other.to_string()),
        }
    }
}
