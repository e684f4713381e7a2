//! Ground-truth blood-volume-pulse synthesis with controllable heart-rate
//! profile, pulse morphology and sinusoidal inter-beat-interval modulation.

use sigproc::Waveform;

use crate::SimError;

#[derive(Clone, Copy, Debug)]
pub enum HrProfile {
    ConstantBpm(f64),
    /// Linear-in-time ramp from the first to the second rate.
    RampBpm(f64, f64),
}

impl HrProfile {
    pub fn bpm_at(&self, t: f64, duration: f64) -> f64 {
        match *self {
            HrProfile::ConstantBpm(b) => b,
            HrProfile::RampBpm(a, b) => a + (b - a) * (t / duration).clamp(0.0, 1.0),
        }
    }

    pub fn mean_bpm(&self) -> f64 {
        match *self {
            HrProfile::ConstantBpm(b) => b,
            HrProfile::RampBpm(a, b) => 0.5 * (a + b),
        }
    }

    fn range(&self) -> (f64, f64) {
        match *self {
            HrProfile::ConstantBpm(b) => (b, b),
            HrProfile::RampBpm(a, b) => (a.min(b), a.max(b)),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum PulseShape {
    Sinusoid,
    /// Systolic peak plus a smaller dicrotic bump within each beat.
    TwoPeak { diastolic_ratio: f64 },
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HrvModulation {
    pub depth: f64,
    pub freq_hz: f64,
}

#[derive(Clone, Debug)]
pub struct BvpSpec {
    pub hr: HrProfile,
    pub shape: PulseShape,
    pub hrv: HrvModulation,
    pub rate: f64,
    pub duration_s: f64,
}

impl BvpSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let (lo, hi) = self.hr.range();
        if !(40.0..=180.0).contains(&lo) || !(40.0..=180.0).contains(&hi) {
            return Err(SimError::InvalidSpec(format!(
                "heart rate must stay within [40, 180] bpm, got [{lo}, {hi}]"
            )));
        }
        if self.hrv.depth < 0.0 || self.hrv.depth >= 0.2 {
            return Err(SimError::InvalidSpec(format!(
                "HRV modulation depth must be in [0, 0.2), got {}",
                self.hrv.depth
            )));
        }
        if self.rate <= 0.0 || self.duration_s <= 0.0 {
            return Err(SimError::InvalidSpec("rate and duration must be positive".into()));
        }
        Ok(())
    }
}

/// A synthesized waveform plus the systolic peak instants that generated it.
#[derive(Clone, Debug)]
pub struct SynthBvp {
    pub waveform: Waveform,
    pub peak_times_s: Vec<f64>,
}

// Within-beat template phase offsets.
const SYSTOLIC_PHASE: f64 = 0.15;
const DICROTIC_PHASE: f64 = 0.40;
const SYSTOLIC_WIDTH: f64 = 0.07;
const DICROTIC_WIDTH: f64 = 0.12;

fn template(shape: PulseShape, phase: f64) -> f64 {
    match shape {
        PulseShape::Sinusoid => (2.0 * std::f64::consts::PI * phase).cos(),
        PulseShape::TwoPeak { diastolic_ratio } => {
            let g = |center: f64, width: f64| {
                let mut d = (phase - center).abs();
                d = d.min(1.0 - d); // wrap within the beat
                (-0.5 * d * d / (width * width)).exp()
            };
            g(SYSTOLIC_PHASE, SYSTOLIC_WIDTH) + diastolic_ratio * g(DICROTIC_PHASE, DICROTIC_WIDTH)
        }
    }
}

fn systolic_offset(shape: PulseShape) -> f64 {
    match shape {
        PulseShape::Sinusoid => 0.0,
        PulseShape::TwoPeak { .. } => SYSTOLIC_PHASE,
    }
}

/// Deterministically synthesizes the waveform by phase accumulation over
/// beats: each beat length follows the heart-rate profile, scaled by the
/// sinusoidal interval modulation.
pub fn synth_bvp(spec: &BvpSpec) -> Result<SynthBvp, SimError> {
    spec.validate()?;
    let dur = spec.duration_s;

    // Beat onset times; extend one beat past the end so the last samples
    // have a complete interval.
    let mut onsets = vec![0.0f64];
    let mut t = 0.0;
    while t <= dur + 2.0 {
        let base = 60.0 / spec.hr.bpm_at(t, dur);
        let m = 1.0
            + spec.hrv.depth * (2.0 * std::f64::consts::PI * spec.hrv.freq_hz * t).sin();
        t += base * m;
        onsets.push(t);
    }

    let n = (spec.rate * dur).round() as usize;
    let mut samples = Vec::with_capacity(n);
    let mut beat = 0usize;
    for i in 0..n {
        let ti = i as f64 / spec.rate;
        while beat + 1 < onsets.len() - 1 && onsets[beat + 1] <= ti {
            beat += 1;
        }
        let phase = (ti - onsets[beat]) / (onsets[beat + 1] - onsets[beat]);
        samples.push(template(spec.shape, phase.clamp(0.0, 1.0)));
    }

    let offset = systolic_offset(spec.shape);
    let peak_times_s = onsets
        .windows(2)
        .map(|w| w[0] + offset * (w[1] - w[0]))
        .filter(|&p| p < dur)
        .collect();
    Ok(SynthBvp {
        waveform: Waveform::new(samples, spec.rate),
        peak_times_s,
    })
}
