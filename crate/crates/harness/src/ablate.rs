//! Structural ablation runner: trains and evaluates the base model and each
//! requested flag variant with shared seeds and data, and emits a
//! side-by-side table.

use std::io::Write;
use std::path::Path;

use vidformer::ModelConfig;

use crate::dataset::DatasetIndex;
use crate::evaluate::{evaluate, EvalSettings};
use crate::train::{train, RunSettings};
use crate::HarnessError;

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: String,
    pub mae_bpm: f64,
    pub rmse_bpm: f64,
    pub pearson_r: f64,
    pub n_failures: usize,
}

/// Runs the full model (variant `full`) followed by one variant per flag.
/// Every run shares the same seed, data and step budget.
pub fn ablate(
    base_cfg: &ModelConfig,
    flags: &[&str],
    train_index: &DatasetIndex,
    eval_index: &DatasetIndex,
    settings: &RunSettings,
    out_dir: &Path,
) -> Result<Vec<AblationRow>, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    let mut variants: Vec<(String, ModelConfig)> =
        vec![("full".to_string(), base_cfg.clone())];
    for flag in flags {
        let mut cfg = base_cfg.clone();
        cfg.ablation.set(flag)?;
        cfg.validate()?;
        variants.push((format!("without_{flag}"), cfg));
    }

    for (name, cfg) in variants {
        let mut run = settings.clone();
        run.out_dir = out_dir.join(&name);
        let outcome = train(&cfg, train_index, &run)?;
        let (ckpt_cfg, store) = vidformer::checkpoint::load(&outcome.checkpoint, Some(&cfg))?;
        let report = evaluate(
            &ckpt_cfg,
            &store,
            eval_index,
            &EvalSettings::default(),
            Some(train_index.fingerprint),
            &name,
        )?;
        report.write_csv(&run.out_dir)?;
        rows.push(AblationRow {
            variant: name,
            mae_bpm: report.mae_bpm,
            rmse_bpm: report.rmse_bpm,
            pearson_r: report.pearson_r,
            n_failures: report.n_failures,
        });
    }

    let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("ablation.csv"))?);
    writeln!(f, "variant,mae_bpm,rmse_bpm,pearson_r,n_failures")?;
    for row in &rows {
        writeln!(
            f,
            "{},{},{},{},{}",
            row.variant, row.mae_bpm, row.rmse_bpm, row.pearson_r, row.n_failures
        )?;
    }
    Ok(rows)
}
