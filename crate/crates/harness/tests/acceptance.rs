//! Acceptance suite: one pass/fail line per criterion, asserted together at
//! the end so every criterion reports.
//!
//! Run with `cargo test -p harness --test acceptance -- --nocapture`.
//! Several criteria train models from scratch; expect over an hour on a
//! small CPU.

use std::path::{Path, PathBuf};
use std::time::Instant;

use autograd::Var;
use harness::*;
use ndarray::IxDyn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigproc::Waveform;
use vidformer::config::ModelConfig;
use vidformer::heads::{combined_loss, pearson_loss, smooth_l1_loss};
use vidformer::params::ParamStore;
use vidformer::{reference, HeadOutputs, VidFormer};

const C5_STEPS: usize = 300;
const C6_STEPS: usize = 500;
const FAST_MAX_LR: f64 = 2e-3;
const FAST_MIN_LR: f64 = 1e-4;
const BATCH: usize = 3;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(results: &mut Vec<Outcome>, name: &'static str, passed: bool, detail: String) {
    println!(
        "criterion {:<28} {}  ({detail})",
        name,
        if passed { "PASS" } else { "FAIL" }
    );
    results.push(Outcome { name, passed, detail });
}

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> autograd::Arr {
    let n: usize = shape.iter().product();
    autograd::Arr::from_shape_vec(
        IxDyn(shape),
        (0..n)
            .map(|_| {
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random::<f64>();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect(),
    )
    .unwrap()
}

fn max_abs_diff(a: &autograd::Arr, b: &autograd::Arr) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn work_dir() -> PathBuf {
    let dir = std::env::temp_dir().join("vidformer_acceptance");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fast_settings(out: &Path, steps: usize, seed: u64) -> RunSettings {
    let mut s = RunSettings::new(out, steps, seed);
    s.max_lr = FAST_MAX_LR;
    s.min_lr = FAST_MIN_LR;
    s.restart_period = steps.div_ceil(2);
    s.restart_mult = 1;
    s.batch_size = BATCH;
    s
}

/// Mean training-set Pearson loss per head for a checkpoint.
fn training_pearson(cfg: &ModelConfig, store: &ParamStore, index: &DatasetIndex) -> (f64, f64) {
    let model = VidFormer::bind(cfg, store, None).unwrap();
    let stride = (cfg.frames / 5).max(1);
    let (mut lp1, mut lp2) = (Vec::new(), Vec::new());
    for clip in &index.clips {
        let frames = clip.load_frames().unwrap();
        let tensor = preprocess(&frames, &CenterCrop, cfg.height, cfg.width).unwrap();
        for start in window_starts(clip.frames, cfg.frames, stride) {
            let mut window = tensor
                .slice(ndarray::s![.., start..start + cfg.frames, .., ..])
                .to_owned()
                .into_dyn();
            harness::train::detrend_per_pixel(&mut window);
            let batch = window.insert_axis(ndarray::Axis(0));
            let heads = model.forward(&batch).unwrap();
            let gt = Waveform::new(clip.gt.samples[start..start + cfg.frames].to_vec(), clip.fps);
            if let Some(r1) = &heads.r1 {
                lp1.push(pearson_loss(&HeadOutputs::waveforms(r1, clip.fps).remove(0), &gt));
            }
            if let Some(r2) = &heads.r2 {
                lp2.push(pearson_loss(&HeadOutputs::waveforms(r2, clip.fps).remove(0), &gt));
            }
        }
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    (mean(&lp1), mean(&lp2))
}

fn criterion_1_gradients(results: &mut Vec<Outcome>) {
    let t0 = Instant::now();
    let cfg = ModelConfig::micro_profile();
    let rep = vidformer::gradcheck::check_model_gradients(&cfg, 2024, 1e-4, 1e-3);
    let secs = t0.elapsed().as_secs_f64();
    let passed = rep.all_passed() && secs <= 120.0;
    report(
        results,
        "1 gradient-integrity",
        passed,
        format!(
            "{} params checked, {} failures, worst rel {:.2e}, {:.0}s",
            rep.checked,
            rep.failures.len(),
            rep.worst_rel,
            secs
        ),
    );
}

fn criterion_2_oracles(results: &mut Vec<Outcome>) {
    let cfg = ModelConfig::test_profile();
    let store = ParamStore::init(&cfg).unwrap();
    let mut worst = 0.0f64;
    let tol = 1e-5;
    let mut ok = true;

    // Conv-branch attention maps, both kinds.
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
        let x = randn(&mut rng, &[1, 8, 6, 4, 4]);
        let bound = store.bind(None);
        for (kind, spatial, tag) in [
            (vidformer::local_branch::AttentionKind::Spatial, true, "s_attn"),
            (vidformer::local_branch::AttentionKind::Temporal, false, "t_attn"),
        ] {
            let attn = vidformer::local_branch::ConvAttention::bind(&bound, 0, kind, cfg.conv_heads);
            let got = attn.forward(&Var::constant(x.clone()));
            let oracle = reference::conv_attention(
                &x,
                store.get(&format!("stage0.{tag}.p1.w")).unwrap(),
                store.get(&format!("stage0.{tag}.p1.b")).unwrap(),
                store.get(&format!("stage0.{tag}.p2.w")).unwrap(),
                store.get(&format!("stage0.{tag}.p2.b")).unwrap(),
                cfg.conv_heads,
                spatial,
            );
            let d = max_abs_diff(got.value(), &oracle);
            worst = worst.max(d);
            ok &= d < tol;
        }
    }

    // ga_weight.
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9100 + seed);
        let x = randn(&mut rng, &[1, 2, 3, 2, 2]);
        let s = randn(&mut rng, &[1, 2, 1, 2, 2]);
        let t = randn(&mut rng, &[1, 2, 3, 1, 1]);
        let got = vidformer::local_branch::ga_weight(
            &Var::constant(x.clone()),
            Some(&Var::constant(s.clone())),
            Some(&Var::constant(t.clone())),
        )
        .unwrap();
        let d = max_abs_diff(got.value(), &reference::ga_weight(&x, &s, &t));
        worst = worst.max(d);
        ok &= d < tol;
    }

    // ST-MHSA two-branch loop oracle on a small grid.
    let mut small = ModelConfig::test_profile();
    small.frames = 4;
    small.height = 8;
    small.width = 8;
    small.patch = (2, 4, 4);
    small.embed_dim = 8;
    small.transformer_heads = 2;
    small.ffn_hidden = 16;
    small.stage_widths = vec![16];
    small.stem_width = 8;
    small.validate().unwrap();
    let sstore = ParamStore::init(&small).unwrap();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9200 + seed);
        let x = randn(&mut rng, &[2, small.token_count(), small.embed_dim]);
        let ct = randn(&mut rng, &[2, small.token_count(), small.embed_dim]);
        let bound = sstore.bind(None);
        let st = vidformer::global_branch::StMhsa::bind(&bound, 0, small.transformer_heads, false, false);
        let got = st.forward(&Var::constant(x.clone()), Some(&Var::constant(ct.clone())), small.grid());
        let g = |n: &str| sstore.get(n).unwrap();
        let weights = reference::StMhsaWeights {
            ln_s_gamma: g("stage0.ln_s.gamma"),
            ln_s_beta: g("stage0.ln_s.beta"),
            ln_t_gamma: g("stage0.ln_t.gamma"),
            ln_t_beta: g("stage0.ln_t.beta"),
            spatial: reference::MhsaWeights {
                q_w: g("stage0.s_mhsa.q.w"),
                q_b: g("stage0.s_mhsa.q.b"),
                k_w: g("stage0.s_mhsa.k.w"),
                k_b: g("stage0.s_mhsa.k.b"),
                v_w: g("stage0.s_mhsa.v.w"),
                v_b: g("stage0.s_mhsa.v.b"),
                o_w: g("stage0.s_mhsa.o.w"),
                o_b: g("stage0.s_mhsa.o.b"),
            },
            temporal: reference::MhsaWeights {
                q_w: g("stage0.t_mhsa.q.w"),
                q_b: g("stage0.t_mhsa.q.b"),
                k_w: g("stage0.t_mhsa.k.w"),
                k_b: g("stage0.t_mhsa.k.b"),
                v_w: g("stage0.t_mhsa.v.w"),
                v_b: g("stage0.t_mhsa.v.b"),
                o_w: g("stage0.t_mhsa.o.w"),
                o_b: g("stage0.t_mhsa.o.b"),
            },
        };
        let oracle = reference::st_mhsa(&x, Some(&ct), small.grid(), &weights, small.transformer_heads);
        let d = max_abs_diff(got.value(), &oracle);
        worst = worst.max(d);
        ok &= d < tol;
    }

    // Bridges: projection/upsample order equality and pooling block means.
    let grid = cfg.grid();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9300 + seed);
        let tokens = randn(&mut rng, &[1, cfg.token_count(), cfg.embed_dim]);
        let bound = store.bind(None);
        let bridge = vidformer::ctim::TransConvBridge::bind(&bound, 0);
        let got = bridge
            .forward(&Var::constant(tokens.clone()), grid, (50, 32, 32))
            .unwrap();
        let (nt, nh, nw) = grid;
        let t5 = Var::constant(tokens)
            .reshape(&[1, nt, nh, nw, cfg.embed_dim])
            .permute(&[0, 4, 1, 2, 3]);
        let up = autograd::upsample_trilinear(&t5, (50, 32, 32));
        let w = Var::constant(store.get("stage0.tc.proj.w").unwrap().clone());
        let b = Var::constant(store.get("stage0.tc.proj.b").unwrap().clone());
        let literal = autograd::conv3d(&up, &w, Some(&b), (0, 0, 0));
        let d = max_abs_diff(got.value(), literal.value());
        worst = worst.max(d);
        ok &= d < tol;

        let feature = randn(&mut rng, &[1, cfg.stem_width, 50, 32, 32]);
        let pooled = autograd::adaptive_avg_pool3d(&Var::constant(feature.clone()), grid);
        let d = max_abs_diff(pooled.value(), &reference::block_mean_pool(&feature, grid));
        worst = worst.max(d);
        ok &= d < tol;
    }

    report(
        results,
        "2 formula-oracles",
        ok,
        format!("20 seeds per op, worst |diff| {worst:.2e} (tol 1e-5)"),
    );
}

fn criterion_3_loss_identities(results: &mut Vec<Outcome>) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let y = Waveform::new((0..64).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(), 30.0);
    let neg = Waveform::new(y.samples.iter().map(|v| -v).collect(), 30.0);
    let t = Waveform::new((0..64).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(), 30.0);

    let mut ok = pearson_loss(&y, &y).abs() < 1e-12;
    ok &= (pearson_loss(&neg, &y) - 2.0).abs() < 1e-12;
    for (a, b) in [(3.0, 1.0), (0.01, -2.0)] {
        let scaled = Waveform::new(y.samples.iter().map(|v| a * v + b).collect(), 30.0);
        ok &= (pearson_loss(&scaled, &t) - pearson_loss(&y, &t)).abs() < 1e-6;
    }
    let one = |d: f64| Waveform::new(vec![d], 30.0);
    ok &= smooth_l1_loss(&one(0.0), &one(0.0)) == 0.0;
    ok &= smooth_l1_loss(&one(0.0), &one(0.5)) == 0.125;
    ok &= smooth_l1_loss(&one(0.0), &one(2.0)) == 1.5;
    let lp = pearson_loss(&y, &t);
    let l1 = smooth_l1_loss(&y, &t);
    ok &= (combined_loss(&y, &t, 0.5).unwrap() - 0.5 * (lp + l1)).abs() < 1e-12;
    report(results, "3 loss-identities", ok, "exact endpoint and blend identities".into());
}

fn criterion_4_shape_contract(results: &mut Vec<Outcome>) {
    let t0 = Instant::now();
    let cfg = ModelConfig::paper_profile();
    let ok_tokens = cfg.token_count() == 640 && cfg.grid() == (10, 8, 8);
    let store = ParamStore::init(&cfg).unwrap();
    let model = VidFormer::bind(&cfg, &store, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let clip = randn(&mut rng, &[2, 3, 250, 128, 128]);
    let (cubes, grid) = vidformer::global_branch::cube_patchify(&clip, cfg.patch).unwrap();
    let ok_patch = cubes.shape() == [2, 640, 19200] && grid == (10, 8, 8);
    let heads = model.forward(&clip).unwrap();
    let ok_heads = heads.r1.as_ref().map(|h| h.shape() == [2, 250]).unwrap_or(false)
        && heads.r2.as_ref().map(|h| h.shape() == [2, 250]).unwrap_or(false);
    let passed = ok_tokens && ok_patch && ok_heads;
    report(
        results,
        "4 paper-shape-contract",
        passed,
        format!(
            "P=640, cubes (2,640,19200), R1/R2 len 250; forward {:.0}s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_5_overfit(results: &mut Vec<Outcome>, dir: &Path) {
    let t0 = Instant::now();
    let data = dir.join("c5_data");
    let mut ranges = skinsim::DatasetRanges::test_profile((60.0, 120.0));
    ranges.duration_s = 8.0;
    skinsim::make_dataset(&data, 8, &ranges, 7).unwrap();
    let index = ingest(&data).unwrap();
    let mut cfg = ModelConfig::test_profile();
    cfg.seed = 1;
    let mut settings = fast_settings(&dir.join("c5_run"), C5_STEPS, 1);
    settings.restart_period = 150;
    let outcome = train(&cfg, &index, &settings).unwrap();
    let (cfg2, store) = vidformer::checkpoint::load(&outcome.checkpoint, Some(&cfg)).unwrap();
    let (lp1, lp2) = training_pearson(&cfg2, &store, &index);
    let secs = t0.elapsed().as_secs_f64();
    let passed = lp1 <= 0.05 && lp2 <= 0.05 && secs <= 600.0;
    report(
        results,
        "5 overfit-surrogate",
        passed,
        format!("300 steps: train Lp(R1) {lp1:.4}, Lp(R2) {lp2:.4} (≤0.05), {secs:.0}s"),
    );
}

fn criterion_6_7_generalization(results: &mut Vec<Outcome>, dir: &Path) {
    // Shared fixture: 64 training clips, 16 held out, moderate noise.
    let ranges = skinsim::DatasetRanges::test_profile((48.0, 150.0)).with_moderate_noise();
    let train_dir = dir.join("c6_train");
    let eval_dir = dir.join("c6_eval");
    skinsim::make_dataset(&train_dir, 64, &ranges, 100).unwrap();
    skinsim::make_dataset(&eval_dir, 16, &ranges, 200).unwrap();
    let train_index = ingest(&train_dir).unwrap();
    let eval_index = ingest(&eval_dir).unwrap();

    let mut run_variant = |name: &str, flag: Option<&str>| -> (f64, f64, f64) {
        let mut cfg = ModelConfig::test_profile();
        cfg.seed = 1;
        if let Some(flag) = flag {
            cfg.ablation.set(flag).unwrap();
        }
        cfg.validate().unwrap();
        let settings = fast_settings(&dir.join(format!("c6_{name}")), C6_STEPS, 1);
        let outcome = train(&cfg, &train_index, &settings).unwrap();
        let (cfg2, store) = vidformer::checkpoint::load(&outcome.checkpoint, Some(&cfg)).unwrap();
        let rep = evaluate(
            &cfg2,
            &store,
            &eval_index,
            &EvalSettings::default(),
            Some(train_index.fingerprint),
            name,
        )
        .unwrap();
        rep.write_csv(&dir.join(format!("c6_{name}"))).unwrap();
        (rep.mae_bpm, rep.rmse_bpm, rep.pearson_r)
    };

    let t0 = Instant::now();
    let (full_mae, _, full_r) = run_variant("full", None);
    let c6_secs = t0.elapsed().as_secs_f64();
    let c6_pass = full_mae <= 3.0 && full_r >= 0.95 && c6_secs <= 2700.0;
    report(
        results,
        "6 generalization-surrogate",
        c6_pass,
        format!("held-out MAE {full_mae:.3} bpm (≤3), r {full_r:.4} (≥0.95), {c6_secs:.0}s"),
    );

    let mut details = Vec::new();
    let mut c7_pass = true;
    for flag in ["ga", "s_mhsa", "lcb", "c_tb"] {
        let (mae, _, _) = run_variant(flag, Some(flag));
        details.push(format!("wo-{flag} {mae:.3}"));
        c7_pass &= mae >= full_mae;
    }
    report(
        results,
        "7 ablation-direction",
        c7_pass,
        format!("full {full_mae:.3} bpm vs {}", details.join(", ")),
    );
}

fn criterion_8_signal_toolkit(results: &mut Vec<Outcome>) {
    let mut ok = true;
    for (freq, bpm) in [(1.0, 60.0), (1.5, 90.0), (2.0, 120.0)] {
        let n = 900;
        let w = Waveform::new(
            (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 30.0).sin())
                .collect(),
            30.0,
        );
        let hr = sigproc::estimate_hr(&w).unwrap();
        ok &= (hr - bpm).abs() <= 0.5;
    }

    // LF + HF normalized units sum to one identically.
    let mut t = 0.0;
    let mut times = vec![0.0];
    while t < 120.0 {
        t += 0.8 * (1.0 + 0.05 * (2.0 * std::f64::consts::PI * 0.1 * t).sin());
        times.push(t);
    }
    let ibi = sigproc::IbiSeries::from_peak_times(times);
    let m = sigproc::hrv_metrics(&ibi).unwrap();
    ok &= (m.lf_nu + m.hf_nu - 1.0).abs() < 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let img = ndarray::Array2::from_shape_fn((16, 16), |_| rng.random::<f64>() * 255.0);
    ok &= (sigproc::ssim(img.view(), img.view()).unwrap() - 1.0).abs() < 1e-12;

    // Green-channel baseline within 2 bpm on a noiseless synthetic clip.
    let bvp = skinsim::synth_bvp(&skinsim::BvpSpec {
        hr: skinsim::HrProfile::ConstantBpm(66.0),
        shape: skinsim::PulseShape::Sinusoid,
        hrv: skinsim::HrvModulation::default(),
        rate: 40.0,
        duration_s: 14.0,
    })
    .unwrap();
    let scene = skinsim::SceneConfig::simple(32, 32, 10.0, 14.0, 5);
    let clip = skinsim::render_clip(&bvp.waveform, &scene).unwrap();
    let baseline =
        sigproc::green_baseline(&clip.frames.view(), Some(&clip.mask), clip.fps).unwrap();
    let hr_est = sigproc::estimate_hr(&baseline).unwrap();
    let hr_gt = sigproc::estimate_hr(&clip.ground_truth).unwrap();
    ok &= (hr_est - hr_gt).abs() <= 2.0;

    report(
        results,
        "8 signal-toolkit",
        ok,
        "HR 60/90/120 ±0.5, LF+HF=1, ssim(x,x)=1, baseline ≤2 bpm".into(),
    );
}

fn criterion_9_determinism(results: &mut Vec<Outcome>, dir: &Path) {
    let data = dir.join("c9_data");
    let mut ranges = skinsim::DatasetRanges::test_profile((60.0, 120.0));
    ranges.duration_s = 8.0;
    skinsim::make_dataset(&data, 4, &ranges, 9).unwrap();
    let index = ingest(&data).unwrap();
    let mut cfg = ModelConfig::test_profile();
    cfg.seed = 5;

    let run = |out: &Path| {
        let settings = fast_settings(out, 6, 5);
        let outcome = train(&cfg, &index, &settings).unwrap();
        let (cfg2, store) = vidformer::checkpoint::load(&outcome.checkpoint, Some(&cfg)).unwrap();
        let rep = evaluate(&cfg2, &store, &index, &EvalSettings::default(), None, "det").unwrap();
        rep.write_csv(out).unwrap();
        (
            std::fs::read(out.join("metrics.csv")).unwrap(),
            std::fs::read(out.join("scatter.csv")).unwrap(),
            std::fs::read(out.join("bland_altman_limits.csv")).unwrap(),
            std::fs::read(out.join("loss.csv")).unwrap(),
        )
    };
    let a = run(&dir.join("c9_a"));
    let b = run(&dir.join("c9_b"));
    let passed = a == b;
    report(
        results,
        "9 determinism",
        passed,
        "two train+eval runs, all emitted CSVs byte-identical".into(),
    );
}

fn criterion_10_bland_altman(results: &mut Vec<Outcome>) {
    // Hand-built 5-pair fixture: differences 1, -1, 2, 0, 3.
    let pairs = [
        (60.0, 61.0),
        (70.0, 69.0),
        (80.0, 82.0),
        (90.0, 90.0),
        (100.0, 103.0),
    ];
    let ba = bland_altman_limits(&pairs);
    let sd = 2.5f64.sqrt(); // sample SD of {1,-1,2,0,3}
    let ok = (ba.mean_diff - 1.0).abs() < 1e-9
        && (ba.sd_diff - sd).abs() < 1e-9
        && (ba.lower_limit - (1.0 - 1.96 * sd)).abs() < 1e-9
        && (ba.upper_limit - (1.0 + 1.96 * sd)).abs() < 1e-9;
    report(
        results,
        "10 bland-altman-limits",
        ok,
        format!("mean {:.6}, limits [{:.6}, {:.6}]", ba.mean_diff, ba.lower_limit, ba.upper_limit),
    );
}

#[test]
fn acceptance() {
    let dir = work_dir();
    let mut results = Vec::new();

    criterion_1_gradients(&mut results);
    criterion_2_oracles(&mut results);
    criterion_3_loss_identities(&mut results);
    criterion_4_shape_contract(&mut results);
    criterion_5_overfit(&mut results, &dir);
    criterion_6_7_generalization(&mut results, &dir);
    criterion_8_signal_toolkit(&mut results);
    criterion_9_determinism(&mut results, &dir);
    criterion_10_bland_altman(&mut results);

    let failures: Vec<&Outcome> = results.iter().filter(|o| !o.passed).collect();
    for f in &failures {
        eprintln!("FAILED criterion {}: {}", f.name, f.detail);
    }
    assert!(failures.is_empty(), "{} acceptance criterion(s) failed", failures.len());
}
