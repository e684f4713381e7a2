//! Batch clip generation into the on-disk layout shared with the harness.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigproc::Waveform;

use crate::io::{write_frames, write_meta, FRAMES_FILE, GT_FILE, META_FILE};
use crate::{render_clip, synth_bvp, BvpSpec, HrProfile, HrvModulation, Illumination, PulseShape,
    SceneConfig, SimError};

/// Sampling ranges for one generated dataset.
#[derive(Clone, Debug)]
pub struct DatasetRanges {
    pub hr_bpm: (f64, f64),
    pub noise_sigma: f64,
    pub drift_amplitude: f64,
    pub jitter_max_px: usize,
    pub jitter_sigma: f64,
    pub hrv_depth_max: f64,
    pub two_peak_fraction: f64,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub duration_s: f64,
}

impl DatasetRanges {
    /// Test-profile clips: 32×32 at 10 fps, 15 s.
    pub fn test_profile(hr_bpm: (f64, f64)) -> Self {
        DatasetRanges {
            hr_bpm,
            noise_sigma: 0.0,
            drift_amplitude: 0.0,
            jitter_max_px: 0,
            jitter_sigma: 0.0,
            hrv_depth_max: 0.03,
            two_peak_fraction: 0.5,
            height: 32,
            width: 32,
            fps: 10.0,
            duration_s: 15.0,
        }
    }

    /// Moderate nuisance levels: sensor noise, illumination drift, jitter.
    pub fn with_moderate_noise(mut self) -> Self {
        self.noise_sigma = 2.0;
        self.drift_amplitude = 0.04;
        self.jitter_max_px = 1;
        self.jitter_sigma = 0.4;
        self
    }
}

#[derive(Clone, Debug)]
pub struct ClipMeta {
    pub path: PathBuf,
    pub hr_bpm: f64,
    pub seed: u64,
    pub noise_sigma: f64,
    pub fps: f64,
    pub frames: usize,
}

fn clip_seed(dataset_seed: u64, index: usize) -> u64 {
    // SplitMix64 over (seed, index) so clip streams are independent.
    let mut z = dataset_seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generates `n_clips` clips under `out_dir` (one directory per clip),
/// byte-reproducible for a given (ranges, seed).
pub fn make_dataset(
    out_dir: &Path,
    n_clips: usize,
    ranges: &DatasetRanges,
    seed: u64,
) -> Result<Vec<ClipMeta>, SimError> {
    std::fs::create_dir_all(out_dir)?;
    let mut metas = Vec::with_capacity(n_clips);
    for i in 0..n_clips {
        let cseed = clip_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(cseed);
        let hr = ranges.hr_bpm.0 + (ranges.hr_bpm.1 - ranges.hr_bpm.0) * rng.random::<f64>();
        let shape = if rng.random::<f64>() < ranges.two_peak_fraction {
            PulseShape::TwoPeak { diastolic_ratio: 0.18 + 0.07 * rng.random::<f64>() }
        } else {
            PulseShape::Sinusoid
        };
        let hrv = HrvModulation {
            depth: ranges.hrv_depth_max * rng.random::<f64>(),
            freq_hz: 0.1 + 0.2 * rng.random::<f64>(),
        };
        // Random phase offset so clips do not all start on a beat.
        let offset_s = rng.random::<f64>() * 60.0 / hr;
        let bvp_rate = (ranges.fps * 4.0).max(30.0);
        let spec = BvpSpec {
            hr: HrProfile::ConstantBpm(hr),
            shape,
            hrv,
            rate: bvp_rate,
            duration_s: ranges.duration_s + offset_s + 1.0,
        };
        let full = synth_bvp(&spec)?;
        let n_bvp = (ranges.duration_s * bvp_rate).round() as usize;
        let shifted = Waveform::new(
            (0..n_bvp)
                .map(|k| full.waveform.value_at(offset_s + k as f64 / bvp_rate))
                .collect(),
            bvp_rate,
        );

        let mut scene = SceneConfig::simple(
            ranges.height,
            ranges.width,
            ranges.fps,
            ranges.duration_s,
            cseed ^ 0x5eed,
        );
        scene.noise_sigma = ranges.noise_sigma;
        scene.jitter_max_px = ranges.jitter_max_px;
        scene.jitter_sigma = ranges.jitter_sigma;
        if ranges.drift_amplitude > 0.0 {
            scene.illumination = Illumination::Sinusoid {
                mean: 1.0,
                amplitude: ranges.drift_amplitude * rng.random::<f64>(),
                period_s: 3.0 + 5.0 * rng.random::<f64>(),
            };
        }

        let rendered = render_clip(&shifted, &scene)?;
        let dir = out_dir.join(format!("clip_{i:04}"));
        std::fs::create_dir_all(&dir)?;
        write_frames(&dir.join(FRAMES_FILE), &rendered.frames, rendered.fps)?;
        rendered
            .ground_truth
            .write_csv(&dir.join(GT_FILE))
            .map_err(|e| SimError::Io(std::io::Error::other(e.to_string())))?;
        let frames = rendered.frames.shape()[0];
        write_meta(
            &dir.join(META_FILE),
            &[
                ("clip", format!("{i}")),
                ("seed", format!("{cseed}")),
                ("hr_bpm", format!("{hr}")),
                ("noise_sigma", format!("{}", ranges.noise_sigma)),
                ("fps", format!("{}", ranges.fps)),
                ("frames", format!("{frames}")),
            ],
        )?;
        metas.push(ClipMeta {
            path: dir,
            hr_bpm: hr,
            seed: cseed,
            noise_sigma: ranges.noise_sigma,
            fps: ranges.fps,
            frames,
        });
    }
    Ok(metas)
}
