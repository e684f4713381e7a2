//! Spectral heart-rate-variability attributes and respiratory frequency from
//! an inter-beat-interval series.
//!
//! The IBI series is resampled to a uniform 4 Hz grid by linear
//! interpolation, then analyzed with a Hann-windowed periodogram. LF and HF
//! are the band powers in [0.04, 0.15) and [0.15, 0.4) Hz expressed in
//! normalized units, so LF + HF = 1 by construction.

use crate::spectrum::{band_power, dominant_frequency, periodogram};
use crate::{IbiSeries, SigError};

pub const IBI_RESAMPLE_HZ: f64 = 4.0;
pub const LF_BAND: (f64, f64) = (0.04, 0.15);
pub const HF_BAND: (f64, f64) = (0.15, 0.4);
pub const RF_BAND: (f64, f64) = (0.1, 0.5);
const MIN_DURATION_S: f64 = 30.0;
const RF_PROMINENCE_MIN: f64 = 5.0;

#[derive(Clone, Copy, Debug)]
pub struct HrvMetrics {
    pub lf_nu: f64,
    pub hf_nu: f64,
    pub lf_hf_ratio: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RfEstimate {
    pub freq_hz: f64,
    /// Set when no clearly dominant in-band peak exists.
    pub low_confidence: bool,
}

/// Uniform 4 Hz resampling of interval durations; each interval is anchored
/// at the time of its closing peak.
fn interpolate_ibi(ibi: &IbiSeries) -> Result<(Vec<f64>, f64), SigError> {
    let t: Vec<f64> = ibi.peak_times_s[1..].to_vec();
    let v = &ibi.intervals_s;
    if ibi.duration_s() < MIN_DURATION_S {
        return Err(SigError::TooShort { need_s: MIN_DURATION_S, got_s: ibi.duration_s() });
    }
    let t0 = t[0];
    let t1 = *t.last().unwrap();
    let n = ((t1 - t0) * IBI_RESAMPLE_HZ).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0usize;
    for i in 0..n {
        let ti = t0 + i as f64 / IBI_RESAMPLE_HZ;
        while j + 1 < t.len() && t[j + 1] < ti {
            j += 1;
        }
        if j + 1 >= t.len() {
            out.push(v[t.len() - 1]);
        } else {
            let frac = ((ti - t[j]) / (t[j + 1] - t[j])).clamp(0.0, 1.0);
            out.push(v[j] * (1.0 - frac) + v[j + 1] * frac);
        }
    }
    Ok((out, IBI_RESAMPLE_HZ))
}

pub fn hrv_metrics(ibi: &IbiSeries) -> Result<HrvMetrics, SigError> {
    let (series, rate) = interpolate_ibi(ibi)?;
    let (freqs, power) = periodogram(&series, rate, 4);
    let lf = band_power(&freqs, &power, LF_BAND.0, LF_BAND.1);
    let hf = band_power(&freqs, &power, HF_BAND.0, HF_BAND.1);
    let total = lf + hf;
    if total <= 0.0 {
        // A perfectly regular IBI series has no in-band power; split evenly.
        return Ok(HrvMetrics { lf_nu: 0.5, hf_nu: 0.5, lf_hf_ratio: 1.0 });
    }
    Ok(HrvMetrics {
        lf_nu: lf / total,
        hf_nu: hf / total,
        lf_hf_ratio: if hf > 0.0 { lf / hf } else { f64::INFINITY },
    })
}

/// Respiratory frequency: location of the PSD maximum of the interpolated
/// IBI series within [0.1, 0.5) Hz.
pub fn estimate_rf(ibi: &IbiSeries) -> Result<RfEstimate, SigError> {
    let (series, rate) = interpolate_ibi(ibi)?;
    let (freqs, power) = periodogram(&series, rate, 4);
    let total = band_power(&freqs, &power, RF_BAND.0, RF_BAND.1);
    match dominant_frequency(&freqs, &power, RF_BAND.0, RF_BAND.1) {
        None => Err(SigError::DetectionFailure("empty RF band".into())),
        Some((f, prominence)) => Ok(RfEstimate {
            freq_hz: f,
            low_confidence: prominence < RF_PROMINENCE_MIN || total < 1e-18,
        }),
    }
}
