//! Windowed periodogram via a direct DFT (sequence lengths here are small).

/// Hann-windowed, zero-padded power spectral density.
/// Returns (frequencies, power) for the one-sided spectrum.
pub fn periodogram(x: &[f64], rate: f64, zero_pad_factor: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    assert!(n >= 2);
    let mean = x.iter().sum::<f64>() / n as f64;
    let windowed: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5
                * (1.0
                    - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos());
            (v - mean) * w
        })
        .collect();
    let m = n * zero_pad_factor.max(1);
    let half = m / 2;
    let mut freqs = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let omega = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &v) in windowed.iter().enumerate() {
            let ph = omega * i as f64;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        freqs.push(k as f64 * rate / m as f64);
        power.push(re * re + im * im);
    }
    (freqs, power)
}

/// Integrated power over `[lo, hi)` Hz.
pub fn band_power(freqs: &[f64], power: &[f64], lo: f64, hi: f64) -> f64 {
    freqs
        .iter()
        .zip(power.iter())
        .filter(|(f, _)| **f >= lo && **f < hi)
        .map(|(_, p)| *p)
        .sum()
}

/// Frequency of the largest spectral peak within `[lo, hi)` Hz, together with
/// its prominence ratio (peak power over median in-band power).
pub fn dominant_frequency(freqs: &[f64], power: &[f64], lo: f64, hi: f64) -> Option<(f64, f64)> {
    let band: Vec<(f64, f64)> = freqs
        .iter()
        .zip(power.iter())
        .filter(|(f, _)| **f >= lo && **f < hi)
        .map(|(f, p)| (*f, *p))
        .collect();
    if band.is_empty() {
        return None;
    }
    let (mut best_f, mut best_p) = band[0];
    for &(f, p) in &band {
        if p > best_p {
            best_f = f;
            best_p = p;
        }
    }
    let mut powers: Vec<f64> = band.iter().map(|(_, p)| *p).collect();
    powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = powers[powers.len() / 2];
    let prominence = if median > 0.0 { best_p / median } else { f64::INFINITY };
    Some((best_f, prominence))
}
