//! Green-channel sanity baseline: per-frame mean of the green channel over a
//! mask, detrended by a 1 s moving average and band-passed to the heart-rate
//! band.

use ndarray::{Array2, ArrayView4};

use crate::peaks::{HR_BAND_LO_HZ, HR_BAND_HI_HZ};
use crate::{bandpass, SigError, Waveform};

/// `frames` is (T, H, W, 3) with 8-bit values; `mask` selects skin pixels
/// (None means every pixel).
pub fn green_baseline(
    frames: &ArrayView4<u8>,
    mask: Option<&Array2<bool>>,
    rate: f64,
) -> Result<Waveform, SigError> {
    let (t, h, w, c) = (
        frames.shape()[0],
        frames.shape()[1],
        frames.shape()[2],
        frames.shape()[3],
    );
    if c != 3 {
        return Err(SigError::ShapeMismatch(format!("expected 3 channels, got {c}")));
    }
    if let Some(m) = mask {
        if m.shape() != [h, w] {
            return Err(SigError::ShapeMismatch("mask/frame size mismatch".into()));
        }
        if !m.iter().any(|&v| v) {
            return Err(SigError::EmptyMask);
        }
    }
    let mut trace = Vec::with_capacity(t);
    for ti in 0..t {
        let mut acc = 0.0;
        let mut n = 0usize;
        for y in 0..h {
            for x in 0..w {
                if mask.map(|m| m[[y, x]]).unwrap_or(true) {
                    acc += frames[[ti, y, x, 1]] as f64;
                    n += 1;
                }
            }
        }
        trace.push(acc / n as f64);
    }
    let raw = Waveform::new(trace, rate);
    let detrended = raw.detrend_moving_average(1.0);
    bandpass(&detrended, HR_BAND_LO_HZ, HR_BAND_HI_HZ)
}
