//! Command-line front end: synthetic data generation, training, intra- and
//! cross-dataset evaluation, ablation sweeps, single-clip inference, and
//! waveform metric reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use harness::{
    ablate, cross_evaluate, evaluate, ingest, stitch_windows, train, EvalSettings, HarnessError,
    RunSettings,
};
use sigproc::Waveform;
use vidformer::{HeadOutputs, ModelConfig};

#[derive(Parser)]
#[command(name = "vidformer", about = "Dual-branch video pulse reconstruction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Model config file (flat key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in profile when no config file is given.
    #[arg(long, default_value = "test")]
    profile: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ModelConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ModelConfig::load(path)?,
            None => ModelConfig::by_name(&self.profile)?,
        };
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        clips: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 48.0)]
        hr_lo: f64,
        #[arg(long, default_value_t = 150.0)]
        hr_hi: f64,
        /// Sensor noise, illumination drift and jitter at moderate levels.
        #[arg(long, default_value_t = false)]
        noisy: bool,
    },
    /// Train a model on an ingested dataset.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        steps: usize,
        #[arg(long)]
        max_lr: Option<f64>,
        #[arg(long)]
        min_lr: Option<f64>,
        #[arg(long, default_value_t = 2)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        ckpt_every: usize,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        stride: usize,
    },
    /// Cross-dataset evaluation (train→eval tagged report).
    Xeval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        stride: usize,
    },
    /// Train/evaluate the base model plus one variant per ablation flag.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Held-out dataset; defaults to --data.
        #[arg(long)]
        eval_data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "ga,s_mhsa,lcb,c_tb")]
        flags: String,
        #[arg(long, default_value_t = 300)]
        steps: usize,
        #[arg(long)]
        max_lr: Option<f64>,
    },
    /// Run a checkpoint over one clip and write the stitched waveform CSV.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        /// Clip directory (frames.bin or frames/ plus gt.csv).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metric report from waveform CSV pairs.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
}

fn run() -> Result<(), HarnessError> {
    match Cli::parse().command {
        Command::Synth { out, clips, seed, hr_lo, hr_hi, noisy } => {
            if !(40.0..=180.0).contains(&hr_lo) || !(40.0..=180.0).contains(&hr_hi) || hr_lo > hr_hi
            {
                return Err(HarnessError::Config(format!(
                    "heart-rate range [{hr_lo}, {hr_hi}] must lie within [40, 180]"
                )));
            }
            let mut ranges = skinsim::DatasetRanges::test_profile((hr_lo, hr_hi));
            if noisy {
                ranges = ranges.with_moderate_noise();
            }
            let metas = skinsim::make_dataset(&out, clips, &ranges, seed)?;
            println!("wrote {} clips under {}", metas.len(), out.display());
            Ok(())
        }
        Command::Train { cfg, data, out, steps, max_lr, min_lr, batch, ckpt_every } => {
            let cfg = cfg.resolve()?;
            let index = ingest(&data)?;
            let mut settings = RunSettings::new(&out, steps, cfg.seed);
            if let Some(lr) = max_lr {
                settings.max_lr = lr;
            }
            if let Some(lr) = min_lr {
                settings.min_lr = lr;
            }
            settings.batch_size = batch;
            settings.ckpt_every = ckpt_every;
            let outcome = train(&cfg, &index, &settings)?;
            println!(
                "trained {} steps; final loss {:.6}; checkpoint {}",
                outcome.steps,
                outcome.final_loss,
                outcome.checkpoint.display()
            );
            Ok(())
        }
        Command::Eval { ckpt, data, out, stride } => {
            let (cfg, store) = vidformer::checkpoint::load(&ckpt, None)?;
            let index = ingest(&data)?;
            let report = evaluate(
                &cfg,
                &store,
                &index,
                &EvalSettings { window_stride: stride },
                None,
                "eval",
            )?;
            report.write_csv(&out)?;
            println!(
                "evaluated {}/{} clips: MAE {:.3} bpm, RMSE {:.3} bpm, r {:.4}",
                report.n_evaluated, report.n_clips, report.mae_bpm, report.rmse_bpm,
                report.pearson_r
            );
            Ok(())
        }
        Command::Xeval { ckpt, data, out, stride } => {
            let (cfg, store) = vidformer::checkpoint::load(&ckpt, None)?;
            // The training run records its dataset fingerprint next to the
            // checkpoint.
            let train_fp = ckpt
                .parent()
                .map(|d| d.join("train_info.txt"))
                .filter(|p| p.is_file())
                .and_then(|p| std::fs::read_to_string(p).ok())
                .and_then(|text| {
                    text.lines().find_map(|l| {
                        let (k, v) = l.split_once('=')?;
                        (k.trim() == "dataset_fingerprint")
                            .then(|| u64::from_str_radix(v.trim().trim_start_matches("0x"), 16).ok())
                            .flatten()
                    })
                });
            let index = ingest(&data)?;
            let tag = format!(
                "{}→{}",
                train_fp.map(|f| format!("{f:#x}")).unwrap_or_else(|| "unknown".into()),
                index.fingerprint
            );
            let report = cross_evaluate(
                &cfg,
                &store,
                &index,
                &EvalSettings { window_stride: stride },
                train_fp,
                &tag,
            )?;
            report.write_csv(&out)?;
            println!(
                "cross-evaluated {} clips: MAE {:.3} bpm, RMSE {:.3} bpm, r {:.4}",
                report.n_evaluated, report.mae_bpm, report.rmse_bpm, report.pearson_r
            );
            Ok(())
        }
        Command::Ablate { cfg, data, eval_data, out, flags, steps, max_lr } => {
            let cfg = cfg.resolve()?;
            let train_index = ingest(&data)?;
            let eval_index = match eval_data {
                Some(p) => ingest(&p)?,
                None => train_index.clone(),
            };
            let flag_list: Vec<&str> =
                flags.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
            let mut settings = RunSettings::new(&out, steps, cfg.seed);
            if let Some(lr) = max_lr {
                settings.max_lr = lr;
            }
            let rows = ablate(&cfg, &flag_list, &train_index, &eval_index, &settings, &out)?;
            for row in rows {
                println!(
                    "{:<16} MAE {:.3} bpm  RMSE {:.3} bpm  r {:.4}",
                    row.variant, row.mae_bpm, row.rmse_bpm, row.pearson_r
                );
            }
            Ok(())
        }
        Command::Infer { ckpt, data, out } => {
            let (cfg, store) = vidformer::checkpoint::load(&ckpt, None)?;
            let parent = data
                .parent()
                .ok_or_else(|| HarnessError::Data("clip path has no parent".into()))?;
            let index = ingest(parent)?;
            let clip = index
                .clips
                .iter()
                .find(|c| c.path == data)
                .ok_or_else(|| {
                    HarnessError::Data(format!("{} is not an ingestable clip", data.display()))
                })?;
            let model = vidformer::VidFormer::bind(&cfg, &store, None)?;
            let frames = clip.load_frames()?;
            let tensor = harness::preprocess(&frames, &harness::CenterCrop, cfg.height, cfg.width)?;
            let stride = (cfg.frames / 5).max(1);
            let mut windows = Vec::new();
            for start in harness::window_starts(clip.frames, cfg.frames, stride) {
                let mut sliced = tensor
                    .slice(ndarray::s![.., start..start + cfg.frames, .., ..])
                    .to_owned()
                    .into_dyn();
                harness::train::detrend_per_pixel(&mut sliced);
                let window = sliced.insert_axis(ndarray::Axis(0));
                let heads = model.forward(&window)?;
                let r1 = heads.r1.as_ref().map(|h| HeadOutputs::waveforms(h, clip.fps).remove(0));
                let r2 = heads.r2.as_ref().map(|h| HeadOutputs::waveforms(h, clip.fps).remove(0));
                let est = match (r1, r2) {
                    (Some(a), Some(b)) => Waveform::new(
                        a.samples.iter().zip(b.samples.iter()).map(|(x, y)| (x + y) / 2.0).collect(),
                        clip.fps,
                    ),
                    (Some(a), None) => a,
                    (None, Some(b)) => b,
                    (None, None) => unreachable!(),
                };
                windows.push((start, est));
            }
            if windows.is_empty() {
                return Err(HarnessError::Data("clip shorter than one window".into()));
            }
            let stitched = stitch_windows(&windows, clip.frames, clip.fps);
            stitched.write_csv(&out)?;
            println!("wrote {} samples to {}", stitched.len(), out.display());
            Ok(())
        }
        Command::Metrics { pred, gt } => {
            let pred = Waveform::read_csv(&pred)?;
            let gt = Waveform::read_csv(&gt)?;
            let hr_pred = sigproc::estimate_hr(&pred)?;
            let hr_gt = sigproc::estimate_hr(&gt)?;
            println!("hr_et_bpm,{hr_pred}");
            println!("hr_gt_bpm,{hr_gt}");
            println!("abs_error_bpm,{}", (hr_pred - hr_gt).abs());
            if pred.duration_s() >= 30.0 {
                if let (Ok(pi), Ok(gi)) = (sigproc::detect_peaks(&pred), sigproc::detect_peaks(&gt))
                {
                    if let (Ok(ph), Ok(gh)) = (sigproc::hrv_metrics(&pi), sigproc::hrv_metrics(&gi))
                    {
                        println!("lf_nu_et,{}", ph.lf_nu);
                        println!("lf_nu_gt,{}", gh.lf_nu);
                        println!("hf_nu_et,{}", ph.hf_nu);
                        println!("hf_nu_gt,{}", gh.hf_nu);
                        println!("lf_hf_et,{}", ph.lf_hf_ratio);
                        println!("lf_hf_gt,{}", gh.lf_hf_ratio);
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
