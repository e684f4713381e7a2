use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::SigError;

/// A uniformly sampled real time series with its sampling rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub rate: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, rate: f64) -> Self {
        assert!(rate > 0.0, "sampling rate must be positive");
        Waveform { samples, rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn std(&self) -> f64 {
        if self.samples.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.samples.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.samples.len() as f64)
            .sqrt()
    }

    /// Linear resampling to `rate`, preserving the covered time span.
    pub fn resample(&self, rate: f64) -> Waveform {
        assert!(rate > 0.0);
        if (rate - self.rate).abs() < 1e-12 {
            return self.clone();
        }
        let n_out = ((self.samples.len() as f64) * rate / self.rate).round().max(1.0) as usize;
        let samples = (0..n_out)
            .map(|i| self.value_at(i as f64 / rate))
            .collect();
        Waveform { samples, rate }
    }

    /// Linear interpolation at time `t` seconds (clamped to the ends).
    pub fn value_at(&self, t: f64) -> f64 {
        let pos = t * self.rate;
        if pos <= 0.0 {
            return self.samples[0];
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.samples.len() {
            return *self.samples.last().unwrap();
        }
        let frac = pos - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// Subtracts a centered moving average (window in seconds, clamped at the
    /// edges).
    pub fn detrend_moving_average(&self, window_s: f64) -> Waveform {
        let half = ((window_s * self.rate / 2.0).round() as usize).max(1);
        let n = self.samples.len();
        let mut out = Vec::with_capacity(n);
        // Prefix sums for O(n) windowed means.
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        for &v in &self.samples {
            prefix.push(prefix.last().unwrap() + v);
        }
        for i in 0..n {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let mean = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
            out.push(self.samples[i] - mean);
        }
        Waveform::new(out, self.rate)
    }

    /// Writes `time_s,value` rows.
    pub fn write_csv(&self, path: &Path) -> Result<(), SigError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "time_s,value")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(f, "{},{}", i as f64 / self.rate, v)?;
        }
        Ok(())
    }

    /// Reads a `time_s,value` CSV; the rate is inferred from the time column.
    pub fn read_csv(path: &Path) -> Result<Waveform, SigError> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in f.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (ln == 0 && line.starts_with("time_s")) {
                continue;
            }
            let mut parts = line.split(',');
            let t: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| SigError::MalformedCsv(format!("line {}", ln + 1)))?;
            let v: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| SigError::MalformedCsv(format!("line {}", ln + 1)))?;
            times.push(t);
            values.push(v);
        }
        if values.len() < 2 {
            return Err(SigError::MalformedCsv("need at least 2 samples".into()));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if dt <= 0.0 {
            return Err(SigError::MalformedCsv("non-increasing time column".into()));
        }
        Ok(Waveform::new(values, 1.0 / dt))
    }
}
