//! Training loop: per epoch, one randomly chosen window per clip (seeded),
//! batches through the model with the joint two-head objective, decoupled
//! weight decay, and cosine-annealed learning rate with warm restarts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use autograd::optim::{AdamW, CosineWarmRestarts};
use autograd::{Arr, Graph};
use ndarray::IxDyn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidformer::heads::dual_objective_var;
use vidformer::{checkpoint, ModelConfig, ParamStore, VidFormer};

use crate::dataset::{window_starts, DatasetIndex};
use crate::preprocess::{preprocess, stack_batch, CenterCrop};
use crate::HarnessError;

#[derive(Clone, Debug)]
pub struct RunSettings {
    pub steps: usize,
    pub batch_size: usize,
    pub max_lr: f64,
    pub min_lr: f64,
    pub weight_decay: f64,
    /// First cosine period in steps; the next period is `restart_mult`
    /// times longer.
    pub restart_period: usize,
    pub restart_mult: usize,
    pub window_stride: usize,
    pub seed: u64,
    /// Also write a checkpoint every this many steps (0 = final only).
    pub ckpt_every: usize,
    pub out_dir: PathBuf,
}

impl RunSettings {
    /// Defaults mirroring the optimizer recipe: AdamW at 8e-5 → 2e-9 with
    /// weight decay 5e-4 and batch size 2.
    pub fn new(out_dir: &Path, steps: usize, seed: u64) -> Self {
        RunSettings {
            steps,
            batch_size: 2,
            max_lr: 8e-5,
            min_lr: 2e-9,
            weight_decay: 5e-4,
            restart_period: steps.max(1),
            restart_mult: 2,
            window_stride: 0, // filled from config when 0
            seed,
            ckpt_every: 0,
            out_dir: out_dir.to_path_buf(),
        }
    }

    /// Larger step size for short desk-scale runs.
    pub fn with_fast_lr(mut self) -> Self {
        self.max_lr = 2e-3;
        self.min_lr = 1e-5;
        self
    }
}

pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub loss_log: PathBuf,
    pub final_loss: f64,
    pub steps: usize,
    pub lr_trace: Vec<f64>,
}

/// Removes each pixel's temporal mean over the window, so the cube and
/// stem inputs are dominated by temporal variation rather than appearance.
pub fn detrend_per_pixel(x: &mut Arr) {
    let s = x.shape().to_vec();
    let (c, t, h, w) = (s[0], s[1], s[2], s[3]);
    for ci in 0..c {
        for hi in 0..h {
            for wi in 0..w {
                let mut mean = 0.0;
                for ti in 0..t {
                    mean += x[[ci, ti, hi, wi]];
                }
                mean /= t as f64;
                for ti in 0..t {
                    x[[ci, ti, hi, wi]] -= mean;
                }
            }
        }
    }
}

/// Z-scores a ground-truth window (degenerate windows pass through
/// mean-centered).
fn normalize_target(samples: &[f64]) -> Vec<f64> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        samples.iter().map(|v| v - mean).collect()
    } else {
        samples.iter().map(|v| (v - mean) / std).collect()
    }
}

pub fn train(
    cfg: &ModelConfig,
    index: &DatasetIndex,
    settings: &RunSettings,
) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    if index.clips.is_empty() {
        return Err(HarnessError::Data("empty training set".into()));
    }
    let stride = if settings.window_stride == 0 {
        (cfg.frames / 5).max(1)
    } else {
        settings.window_stride
    };
    std::fs::create_dir_all(&settings.out_dir)?;

    // Preload and preprocess every clip once; windows are cheap slices of
    // the preprocessed tensor.
    let mut prepared: Vec<(Arr, Vec<f64>, Vec<usize>)> = Vec::new();
    for clip in &index.clips {
        let frames = clip.load_frames()?;
        let starts = window_starts(clip.frames, cfg.frames, stride);
        if starts.is_empty() {
            eprintln!(
                "warning: clip `{}` is shorter than one window ({} < {}); skipped",
                clip.name, clip.frames, cfg.frames
            );
            continue;
        }
        let tensor = preprocess(&frames, &CenterCrop, cfg.height, cfg.width)?;
        prepared.push((tensor, clip.gt.samples.clone(), starts));
    }
    if prepared.is_empty() {
        return Err(HarnessError::Data("no clip is long enough for one window".into()));
    }

    let store_init = ParamStore::init(cfg)?;
    let mut tensors = store_init.tensors().clone();
    let mut optimizer = AdamW::new(settings.weight_decay);
    let schedule = CosineWarmRestarts::new(
        settings.max_lr,
        settings.min_lr,
        settings.restart_period,
        settings.restart_mult,
    );

    let log_path = settings.out_dir.join("loss.csv");
    let mut log = std::io::BufWriter::new(std::fs::File::create(&log_path)?);
    writeln!(log, "step,lr,total,lp_r1,l1_r1,lp_r2,l1_r2,degenerate_rows")?;

    let mut lr_trace = Vec::with_capacity(settings.steps);
    let mut final_loss = f64::NAN;
    let mut step = 0usize;
    let mut epoch = 0usize;
    'outer: loop {
        // One random window per clip per epoch, in a shuffled clip order.
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let picks: Vec<(usize, usize)> = order
            .iter()
            .map(|&ci| {
                let starts = &prepared[ci].2;
                (ci, starts[rng.random_range(0..starts.len())])
            })
            .collect();

        for batch in picks.chunks(settings.batch_size) {
            if step >= settings.steps {
                break 'outer;
            }
            let mut windows = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for &(ci, start) in batch {
                let (tensor, gt, _) = &prepared[ci];
                let mut window = tensor
                    .slice(ndarray::s![.., start..start + cfg.frames, .., ..])
                    .to_owned()
                    .into_dyn();
                detrend_per_pixel(&mut window);
                windows.push(window);
                targets.push(normalize_target(&gt[start..start + cfg.frames]));
            }
            let clip_batch = stack_batch(&windows);
            let mut target = Arr::zeros(IxDyn(&[batch.len(), cfg.frames]));
            for (b, row) in targets.iter().enumerate() {
                for (t, v) in row.iter().enumerate() {
                    target[[b, t]] = *v;
                }
            }

            let store = ParamStore::from_tensors(tensors.clone(), cfg.fingerprint());
            let graph = Graph::new();
            let bound = store.bind(Some(&graph));
            let model = VidFormer::bind_params(cfg, &bound)?;
            let heads = model.forward(&clip_batch)?;
            let (loss, parts) =
                dual_objective_var(heads.r1.as_ref(), heads.r2.as_ref(), &target, cfg.alpha);
            let loss_value = loss.scalar();
            if !loss_value.is_finite() {
                return Err(HarnessError::Divergence { step, loss: loss_value });
            }
            let grads_by_node = graph.backward(&loss);
            let mut grads: BTreeMap<String, Arr> = BTreeMap::new();
            for (name, var) in bound.var_map() {
                if let Some(g) = grads_by_node.get(var) {
                    grads.insert(name.clone(), g.clone());
                }
            }
            let lr = schedule.lr(step as u64);
            lr_trace.push(lr);
            optimizer.step(&mut tensors, &grads, lr);

            writeln!(
                log,
                "{step},{lr},{loss_value},{},{},{},{},{}",
                parts.lp_r1, parts.l1_r1, parts.lp_r2, parts.l1_r2, parts.degenerate_rows
            )?;
            final_loss = loss_value;
            step += 1;

            if settings.ckpt_every > 0 && step % settings.ckpt_every == 0 {
                let store = ParamStore::from_tensors(tensors.clone(), cfg.fingerprint());
                checkpoint::save(
                    &settings.out_dir.join(format!("step_{step:06}.ckpt")),
                    cfg,
                    &store,
                )?;
            }
        }
        epoch += 1;
    }
    drop(log);

    let ckpt_path = settings.out_dir.join("model.ckpt");
    let store = ParamStore::from_tensors(tensors, cfg.fingerprint());
    checkpoint::save(&ckpt_path, cfg, &store)?;
    // Record the training dataset so cross-dataset reports can cite it.
    std::fs::write(
        settings.out_dir.join("train_info.txt"),
        format!(
            "dataset_root = {}\ndataset_fingerprint = {:#018x}\nsteps = {}\nseed = {}\n",
            index.root.display(),
            index.fingerprint,
            settings.steps,
            settings.seed
        ),
    )?;
    Ok(TrainOutcome {
        checkpoint: ckpt_path,
        loss_log: log_path,
        final_loss,
        steps: step,
        lr_trace,
    })
}
