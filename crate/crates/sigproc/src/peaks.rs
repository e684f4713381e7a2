//! Systolic peak detection: band-pass to the plausible heart-rate band, then
//! local maxima above a rolling-mean threshold with a refractory minimum
//! distance, with parabolic sub-sample refinement of peak instants.

use crate::{bandpass, SigError, Waveform};

pub const HR_BAND_LO_HZ: f64 = 0.7;
pub const HR_BAND_HI_HZ: f64 = 3.0;
const MIN_PEAK_DISTANCE_S: f64 = 0.33;
const ROLLING_MEAN_S: f64 = 0.75;

/// Detected systolic peak times and the inter-beat intervals between them.
#[derive(Clone, Debug)]
pub struct IbiSeries {
    pub peak_times_s: Vec<f64>,
    pub intervals_s: Vec<f64>,
}

impl IbiSeries {
    pub fn from_peak_times(peak_times_s: Vec<f64>) -> Self {
        assert!(peak_times_s.len() >= 2, "need at least two peaks");
        let intervals_s = peak_times_s.windows(2).map(|w| w[1] - w[0]).collect();
        IbiSeries { peak_times_s, intervals_s }
    }

    pub fn mean_interval_s(&self) -> f64 {
        self.intervals_s.iter().sum::<f64>() / self.intervals_s.len() as f64
    }

    pub fn duration_s(&self) -> f64 {
        self.peak_times_s.last().unwrap() - self.peak_times_s[0]
    }
}

fn rolling_mean(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

pub fn detect_peaks(w: &Waveform) -> Result<IbiSeries, SigError> {
    if w.duration_s() < 2.0 {
        return Err(SigError::TooShort { need_s: 2.0, got_s: w.duration_s() });
    }
    let raw_scale = w.std() + w.mean().abs();
    let filtered = bandpass(w, HR_BAND_LO_HZ, HR_BAND_HI_HZ)?;
    let x = &filtered.samples;
    let fstd = filtered.std();
    if fstd <= 1e-12 * raw_scale {
        return Err(SigError::DetectionFailure("signal has no oscillatory content".into()));
    }

    let half = ((ROLLING_MEAN_S * w.rate / 2.0).round() as usize).max(1);
    let thresh = rolling_mean(x, half);
    let mut candidates: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > thresh[i])
        .collect();

    // Enforce the refractory distance, keeping the taller peak.
    let min_dist = (MIN_PEAK_DISTANCE_S * w.rate).round() as usize;
    candidates.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap().then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for &c in &candidates {
        if accepted.iter().all(|&a| a.abs_diff(c) >= min_dist) {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    if accepted.len() < 2 {
        return Err(SigError::DetectionFailure(format!(
            "found {} peak(s), need at least 2",
            accepted.len()
        )));
    }

    // Parabolic refinement around each sample-grid maximum.
    let times = accepted
        .iter()
        .map(|&i| {
            let mut t = i as f64;
            if i > 0 && i + 1 < x.len() {
                let denom = x[i - 1] - 2.0 * x[i] + x[i + 1];
                if denom.abs() > 1e-30 {
                    let delta = 0.5 * (x[i - 1] - x[i + 1]) / denom;
                    t += delta.clamp(-0.5, 0.5);
                }
            }
            t / w.rate
        })
        .collect();
    Ok(IbiSeries::from_peak_times(times))
}

/// Heart rate in beats per minute: `60 / mean(IBI)`.
pub fn estimate_hr(w: &Waveform) -> Result<f64, SigError> {
    let ibi = detect_peaks(w)?;
    Ok(60.0 / ibi.mean_interval_s())
}
