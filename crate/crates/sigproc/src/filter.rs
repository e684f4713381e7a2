//! Butterworth band-pass design (bilinear transform, second-order sections)
//! and zero-phase forward-backward filtering.

use num_complex::Complex64;

use crate::{SigError, Waveform};

/// One second-order section: `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Clone, Copy, Debug)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn filter_inplace(&self, x: &mut [f64]) {
        let mut z1 = 0.0;
        let mut z2 = 0.0;
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * out + z2;
            z2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }
}

/// Butterworth band-pass of order `2n` from an order-`n` low-pass prototype,
/// returned as `n` biquads (gain folded into the first section).
pub fn butter_bandpass_sos(n: usize, lo_hz: f64, hi_hz: f64, rate: f64) -> Result<Vec<Biquad>, SigError> {
    if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < rate / 2.0) {
        return Err(SigError::InvalidBand { lo: lo_hz, hi: hi_hz, rate });
    }
    let fs2 = 2.0 * rate;
    // Prewarped analog band edges.
    let w1 = fs2 * (std::f64::consts::PI * lo_hz / rate).tan();
    let w2 = fs2 * (std::f64::consts::PI * hi_hz / rate).tan();
    let w0sq = w1 * w2;
    let bw = w2 - w1;

    // Analog low-pass prototype poles on the unit circle's left half.
    let proto: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / (2.0 * n as f64)
                + std::f64::consts::FRAC_PI_2;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect();

    // Low-pass → band-pass: each prototype pole spawns a conjugate-related pair.
    let mut poles = Vec::with_capacity(2 * n);
    for p in &proto {
        let a = p * (bw / 2.0);
        let disc = (a * a - w0sq).sqrt();
        poles.push(a + disc);
        poles.push(a - disc);
    }
    // n analog zeros at s = 0; band-pass gain bw^n.
    let gain_analog = bw.powi(n as i32);

    // Bilinear transform of poles/zeros, tracking the gain.
    let mut gain = Complex64::new(gain_analog, 0.0);
    for _ in 0..n {
        // zeros at s=0 contribute (fs2 - 0) each.
        gain *= Complex64::new(fs2, 0.0);
    }
    let zpoles: Vec<Complex64> = poles
        .iter()
        .map(|p| {
            gain /= Complex64::new(fs2, 0.0) - p;
            (Complex64::new(fs2, 0.0) + p) / (Complex64::new(fs2, 0.0) - p)
        })
        .collect();
    let gain = gain.re;

    // Digital zeros: n at z=+1 (from s=0) and n at z=-1 (from infinity).
    // Pair the poles into conjugate pairs; give each section one (z-1)(z+1)
    // numerator, i.e. b = [1, 0, -1].
    let mut remaining = zpoles;
    let mut sections = Vec::with_capacity(n);
    while let Some(p) = remaining.pop() {
        // Find and remove the conjugate partner (closest match).
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, q) in remaining.iter().enumerate() {
            let d = (q - p.conj()).norm();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let q = remaining.swap_remove(best);
        let a1 = -(p + q).re;
        let a2 = (p * q).re;
        sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [a1, a2] });
    }
    if let Some(first) = sections.first_mut() {
        for b in first.b.iter_mut() {
            *b *= gain;
        }
    }
    Ok(sections)
}

/// Forward-backward (zero-phase) filtering through cascaded sections with
/// odd-reflection padding at both ends.
pub fn sosfiltfilt(sos: &[Biquad], x: &[f64], rate: f64, lo_hz: f64) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    // Enough padding to absorb transients at the lowest passband frequency.
    let pad = ((3.0 * rate / lo_hz).ceil() as usize).min(n - 1).max(1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    for s in sos {
        s.filter_inplace(&mut ext);
    }
    ext.reverse();
    for s in sos {
        s.filter_inplace(&mut ext);
    }
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Zero-phase Butterworth band-pass (order 4), length preserving. The mean
/// is removed first; DC is outside any valid band and would otherwise leave
/// a step transient at the edges.
pub fn bandpass(w: &Waveform, lo_hz: f64, hi_hz: f64) -> Result<Waveform, SigError> {
    let sos = butter_bandpass_sos(2, lo_hz, hi_hz, w.rate)?;
    let mean = w.mean();
    let centered: Vec<f64> = w.samples.iter().map(|v| v - mean).collect();
    Ok(Waveform::new(
        sosfiltfilt(&sos, &centered, w.rate, lo_hz),
        w.rate,
    ))
}
