//! Evaluation protocol: per window, run the model and estimate the heart
//! rate as the mean of the two head estimates; per clip, average the window
//! rates; then report MAE / RMSE / Pearson r over clips, Bland–Altman
//! agreement, and (for long windows) spectral HRV attributes.

use std::io::Write;
use std::path::Path;

use sigproc::Waveform;
use vidformer::{hr_from_heads, HeadOutputs, ModelConfig, ParamStore, VidFormer};

use crate::dataset::{window_starts, DatasetIndex};
use crate::metrics::{bland_altman_limits, mae, pearson, rmse, BlandAltman};
use crate::preprocess::{preprocess, CenterCrop};
use crate::HarnessError;

#[derive(Clone, Debug)]
pub struct EvalSettings {
    pub window_stride: usize, // 0 → frames/5
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { window_stride: 0 }
    }
}

/// Per-attribute agreement over clips (HRV attributes and respiratory
/// frequency), reported as error STD, RMSE and Pearson r.
#[derive(Clone, Debug)]
pub struct AttrAgreement {
    pub name: String,
    pub std: f64,
    pub rmse: f64,
    pub r: f64,
}

#[derive(Clone, Debug)]
pub struct MetricReport {
    pub n_clips: usize,
    pub n_evaluated: usize,
    pub n_failures: usize,
    pub mae_bpm: f64,
    pub rmse_bpm: f64,
    pub pearson_r: f64,
    /// (gt, est) heart-rate pairs per evaluated clip.
    pub pairs: Vec<(f64, f64)>,
    pub bland_altman: BlandAltman,
    pub hrv: Vec<AttrAgreement>,
    pub eval_fingerprint: u64,
    pub train_fingerprint: Option<u64>,
    pub tag: String,
}

/// Averages overlapping per-window waveforms (each z-scored) into one
/// clip-length estimate.
pub fn stitch_windows(
    windows: &[(usize, Waveform)],
    total: usize,
    rate: f64,
) -> Waveform {
    let mut acc = vec![0.0f64; total];
    let mut count = vec![0.0f64; total];
    for (start, w) in windows {
        let n = w.len() as f64;
        let mean = w.samples.iter().sum::<f64>() / n;
        let std = (w.samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
            .sqrt()
            .max(1e-12);
        for (i, v) in w.samples.iter().enumerate() {
            acc[start + i] += (v - mean) / std;
            count[start + i] += 1.0;
        }
    }
    let samples = acc
        .iter()
        .zip(count.iter())
        .map(|(a, c)| if *c > 0.0 { a / c } else { 0.0 })
        .collect();
    Waveform::new(samples, rate)
}

fn attr_agreement(name: &str, pairs: &[(f64, f64)]) -> AttrAgreement {
    let errs: Vec<f64> = pairs.iter().map(|(gt, est)| est - gt).collect();
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let std = (errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n).sqrt();
    AttrAgreement { name: name.to_string(), std, rmse: rmse(pairs), r: pearson(pairs) }
}

pub fn evaluate(
    cfg: &ModelConfig,
    store: &ParamStore,
    index: &DatasetIndex,
    settings: &EvalSettings,
    train_fingerprint: Option<u64>,
    tag: &str,
) -> Result<MetricReport, HarnessError> {
    let model = VidFormer::bind(cfg, store, None)?;
    let stride = if settings.window_stride == 0 {
        (cfg.frames / 5).max(1)
    } else {
        settings.window_stride
    };

    let mut pairs = Vec::new();
    let mut failures = 0usize;
    let mut hrv_pairs: Vec<(String, Vec<(f64, f64)>)> = vec![
        ("lf_nu".into(), Vec::new()),
        ("hf_nu".into(), Vec::new()),
        ("lf_hf".into(), Vec::new()),
        ("rf_hz".into(), Vec::new()),
    ];

    for clip in &index.clips {
        let frames = clip.load_frames()?;
        let starts = window_starts(clip.frames, cfg.frames, stride);
        if starts.is_empty() {
            eprintln!(
                "warning: clip `{}` shorter than one window; skipped",
                clip.name
            );
            failures += 1;
            continue;
        }
        let tensor = preprocess(&frames, &CenterCrop, cfg.height, cfg.width)?;

        let mut window_rates = Vec::new();
        let mut est_windows: Vec<(usize, Waveform)> = Vec::new();
        for &start in &starts {
            let mut sliced = tensor
                .slice(ndarray::s![.., start..start + cfg.frames, .., ..])
                .to_owned()
                .into_dyn();
            crate::train::detrend_per_pixel(&mut sliced);
            let window = sliced.insert_axis(ndarray::Axis(0));
            let heads = model.forward(&window)?;
            let r1 = heads.r1.as_ref().map(|h| HeadOutputs::waveforms(h, clip.fps).remove(0));
            let r2 = heads.r2.as_ref().map(|h| HeadOutputs::waveforms(h, clip.fps).remove(0));
            match hr_from_heads(r1.as_ref(), r2.as_ref()) {
                Ok(bpm) => window_rates.push(bpm),
                Err(_) => {} // failed window; disclosed via clip failure if all fail
            }
            // Mean head estimate for waveform-level stitching.
            let est = match (&r1, &r2) {
                (Some(a), Some(b)) => Waveform::new(
                    a.samples.iter().zip(b.samples.iter()).map(|(x, y)| (x + y) / 2.0).collect(),
                    clip.fps,
                ),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!("model topology guarantees a head"),
            };
            est_windows.push((start, est));
        }
        if window_rates.is_empty() {
            eprintln!("warning: clip `{}`: no window produced a detectable rate", clip.name);
            failures += 1;
            continue;
        }
        let est_hr = window_rates.iter().sum::<f64>() / window_rates.len() as f64;
        let gt_hr = match sigproc::estimate_hr(&clip.gt) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("warning: clip `{}`: ground-truth rate failed ({e})", clip.name);
                failures += 1;
                continue;
            }
        };
        pairs.push((gt_hr, est_hr));

        // HRV attributes when the windows are long enough to carry them.
        if cfg.frames as f64 / clip.fps >= 30.0 {
            let est_wave = stitch_windows(&est_windows, clip.frames, clip.fps);
            if let (Ok(gt_ibi), Ok(est_ibi)) =
                (sigproc::detect_peaks(&clip.gt), sigproc::detect_peaks(&est_wave))
            {
                if let (Ok(gt_hrv), Ok(est_hrv)) =
                    (sigproc::hrv_metrics(&gt_ibi), sigproc::hrv_metrics(&est_ibi))
                {
                    hrv_pairs[0].1.push((gt_hrv.lf_nu, est_hrv.lf_nu));
                    hrv_pairs[1].1.push((gt_hrv.hf_nu, est_hrv.hf_nu));
                    hrv_pairs[2].1.push((gt_hrv.lf_hf_ratio, est_hrv.lf_hf_ratio));
                }
                if let (Ok(gt_rf), Ok(est_rf)) =
                    (sigproc::estimate_rf(&gt_ibi), sigproc::estimate_rf(&est_ibi))
                {
                    hrv_pairs[3].1.push((gt_rf.freq_hz, est_rf.freq_hz));
                }
            }
        }
    }

    if pairs.len() < 2 {
        return Err(HarnessError::Data(format!(
            "only {} clip(s) evaluable ({failures} failure(s)); need at least 2",
            pairs.len()
        )));
    }
    let hrv = hrv_pairs
        .into_iter()
        .filter(|(_, p)| p.len() >= 2)
        .map(|(name, p)| attr_agreement(&name, &p))
        .collect();
    Ok(MetricReport {
        n_clips: index.clips.len(),
        n_evaluated: pairs.len(),
        n_failures: failures,
        mae_bpm: mae(&pairs),
        rmse_bpm: rmse(&pairs),
        pearson_r: pearson(&pairs),
        bland_altman: bland_altman_limits(&pairs),
        pairs,
        hrv,
        eval_fingerprint: index.fingerprint,
        train_fingerprint,
        tag: tag.to_string(),
    })
}

/// Evaluation of a checkpoint trained elsewhere, with no adaptation; the
/// report is tagged `train→eval` and carries both dataset fingerprints.
pub fn cross_evaluate(
    cfg: &ModelConfig,
    store: &ParamStore,
    eval_index: &DatasetIndex,
    settings: &EvalSettings,
    train_fingerprint: Option<u64>,
    tag: &str,
) -> Result<MetricReport, HarnessError> {
    evaluate(cfg, store, eval_index, settings, train_fingerprint, tag)
}

impl MetricReport {
    /// `metrics.csv` column order:
    /// `tag,n_clips,n_evaluated,n_failures,mae_bpm,rmse_bpm,pearson_r`.
    /// Header comments carry the dataset fingerprints.
    pub fn write_csv(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("metrics.csv"))?);
        writeln!(f, "# eval_dataset_fingerprint = {:#018x}", self.eval_fingerprint)?;
        match self.train_fingerprint {
            Some(fp) => writeln!(f, "# train_dataset_fingerprint = {fp:#018x}")?,
            None => writeln!(f, "# train_dataset_fingerprint = unknown")?,
        }
        writeln!(f, "tag,n_clips,n_evaluated,n_failures,mae_bpm,rmse_bpm,pearson_r")?;
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            self.tag,
            self.n_clips,
            self.n_evaluated,
            self.n_failures,
            self.mae_bpm,
            self.rmse_bpm,
            self.pearson_r
        )?;
        for a in &self.hrv {
            writeln!(f, "# hrv {} std={} rmse={} r={}", a.name, a.std, a.rmse, a.r)?;
        }

        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("scatter.csv"))?);
        writeln!(f, "hr_gt_bpm,hr_et_bpm")?;
        for (gt, est) in &self.pairs {
            writeln!(f, "{gt},{est}")?;
        }

        let mut f =
            std::io::BufWriter::new(std::fs::File::create(dir.join("bland_altman.csv"))?);
        writeln!(f, "mean_bpm,diff_bpm")?;
        for (m, d) in &self.bland_altman.points {
            writeln!(f, "{m},{d}")?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(
            dir.join("bland_altman_limits.csv"),
        )?);
        writeln!(f, "mean_diff,sd_diff,lower_limit,upper_limit")?;
        writeln!(
            f,
            "{},{},{},{}",
            self.bland_altman.mean_diff,
            self.bland_altman.sd_diff,
            self.bland_altman.lower_limit,
            self.bland_altman.upper_limit
        )?;
        Ok(())
    }
}
