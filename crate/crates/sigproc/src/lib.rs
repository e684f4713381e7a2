//! Blood-volume-pulse post-processing and evaluation metrics: zero-phase
//! band-pass filtering, systolic peak detection, heart rate, spectral
//! heart-rate-variability attributes, respiratory frequency, SSIM, and a
//! green-channel baseline estimator.

mod baseline;
mod filter;
mod hrv;
mod peaks;
mod spectrum;
mod ssim;
mod waveform;

pub use baseline::green_baseline;
pub use filter::{bandpass, butter_bandpass_sos, sosfiltfilt, Biquad};
pub use hrv::{estimate_rf, hrv_metrics, HrvMetrics, RfEstimate};
pub use peaks::{detect_peaks, estimate_hr, IbiSeries};
pub use spectrum::{band_power, dominant_frequency, periodogram};
pub use ssim::ssim;
pub use waveform::Waveform;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SigError {
    #[error("invalid frequency band [{lo}, {hi}] Hz at rate {rate} Hz")]
    InvalidBand { lo: f64, hi: f64, rate: f64 },
    #[error("signal too short: need at least {need_s} s, got {got_s:.3} s")]
    TooShort { need_s: f64, got_s: f64 },
    #[error("peak detection failed: {0}")]
    DetectionFailure(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty mask")]
    EmptyMask,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed waveform csv: {0}")]
    MalformedCsv(String),
}
