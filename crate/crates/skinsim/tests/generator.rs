use ndarray::Array2;
use skinsim::*;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

fn clean_bvp(hr: f64, dur: f64) -> SynthBvp {
    synth_bvp(&BvpSpec {
        hr: HrProfile::ConstantBpm(hr),
        shape: PulseShape::Sinusoid,
        hrv: HrvModulation::default(),
        rate: 40.0,
        duration_s: dur,
    })
    .unwrap()
}

#[test]
fn noiseless_pixel_trace_is_bijective_with_pulse() {
    let bvp = clean_bvp(66.0, 12.0);
    let scene = SceneConfig::simple(24, 24, 10.0, 12.0, 3);
    let clip = render_clip(&bvp.waveform, &scene).unwrap();
    // Center pixel is inside the mask.
    let trace: Vec<f64> = (0..clip.frames.shape()[0])
        .map(|t| clip.frames[[t, 12, 12, 1]] as f64)
        .collect();
    let r = pearson(&trace, &clip.ground_truth.samples);
    assert!(r.abs() >= 0.99, "pixel/pulse correlation {r}");
}

#[test]
fn drifting_illumination_matches_closed_form() {
    let bvp = clean_bvp(72.0, 10.0);
    let mut scene = SceneConfig::simple(16, 16, 10.0, 10.0, 7);
    scene.gain_field = GainField::Uniform;
    scene.illumination = Illumination::Sinusoid { mean: 1.0, amplitude: 0.05, period_s: 4.0 };
    let clip = render_clip(&bvp.waveform, &scene).unwrap();
    for t in 0..clip.frames.shape()[0] {
        let ts = t as f64 / scene.fps;
        let illum = scene.illumination.at(ts, scene.duration_s);
        let y = clip.ground_truth.samples[t];
        let expected =
            illum * (scene.specular[1] + scene.diffuse_base[1] + scene.diffuse_bvp_gain[1] * y);
        let got = clip.frames[[t, 8, 8, 1]] as f64;
        assert!(
            (got - expected).abs() <= 0.5 + 1e-9,
            "frame {t}: {got} vs closed-form {expected}"
        );
    }
}

#[test]
fn illumination_scale_scales_values_linearly() {
    let bvp = clean_bvp(60.0, 6.0);
    let mut low = SceneConfig::simple(16, 16, 10.0, 6.0, 9);
    low.illumination = Illumination::Constant(0.5);
    let mut high = low.clone();
    high.illumination = Illumination::Constant(1.0);
    let a = render_clip(&bvp.waveform, &low).unwrap();
    let b = render_clip(&bvp.waveform, &high).unwrap();
    for t in [0usize, 20, 40] {
        let va = a.frames[[t, 8, 8, 1]] as f64;
        let vb = b.frames[[t, 8, 8, 1]] as f64;
        assert!((vb - 2.0 * va).abs() <= 1.5, "t={t}: {vb} vs 2×{va}");
    }
}

#[test]
fn noise_lowers_snr_monotonically() {
    let bvp = clean_bvp(66.0, 12.0);
    let mut snrs = Vec::new();
    for sigma in [0.0, 2.0, 6.0] {
        let mut scene = SceneConfig::simple(24, 24, 10.0, 12.0, 11);
        scene.noise_sigma = sigma;
        let clip = render_clip(&bvp.waveform, &scene).unwrap();
        // Mean-skin green trace.
        let t_len = clip.frames.shape()[0];
        let trace: Vec<f64> = (0..t_len)
            .map(|t| {
                let mut acc = 0.0;
                let mut n = 0;
                for y in 0..24 {
                    for x in 0..24 {
                        if clip.mask[[y, x]] {
                            acc += clip.frames[[t, y, x, 1]] as f64;
                            n += 1;
                        }
                    }
                }
                acc / n as f64
            })
            .collect();
        // SNR proxy: squared correlation against ground truth.
        let r = pearson(&trace, &clip.ground_truth.samples);
        snrs.push(r * r);
    }
    assert!(snrs[0] > snrs[1] && snrs[1] > snrs[2], "snr proxies {snrs:?}");
}

#[test]
fn mean_skin_color_is_monotone_in_pulse_value() {
    // Two constant pulse levels rendered with the same scene.
    let mut scene = SceneConfig::simple(16, 16, 10.0, 1.0, 5);
    scene.gain_field = GainField::Uniform;
    let lo = sigproc::Waveform::new(vec![-0.8; 40], 40.0);
    let hi = sigproc::Waveform::new(vec![0.8; 40], 40.0);
    let mean_green = |clip: &RenderedClip| {
        let mut acc = 0.0;
        let mut n = 0;
        for y in 0..16 {
            for x in 0..16 {
                if clip.mask[[y, x]] {
                    acc += clip.frames[[0, y, x, 1]] as f64;
                    n += 1;
                }
            }
        }
        acc / n as f64
    };
    let a = mean_green(&render_clip(&lo, &scene).unwrap());
    let b = mean_green(&render_clip(&hi, &scene).unwrap());
    assert!(b > a, "monotone violated: {a} !< {b}");
}

#[test]
fn ssim_declines_with_frame_interval_under_drift_and_motion() {
    let bvp = clean_bvp(66.0, 20.0);
    let mut scene = SceneConfig::simple(24, 24, 10.0, 20.0, 13);
    scene.illumination = Illumination::LinearDrift { from: 0.9, to: 1.1 };
    scene.jitter_max_px = 2;
    scene.jitter_sigma = 0.5;
    let clip = render_clip(&bvp.waveform, &scene).unwrap();
    let gray = |t: usize| {
        Array2::from_shape_fn((24, 24), |(y, x)| {
            (clip.frames[[t, y, x, 0]] as f64
                + clip.frames[[t, y, x, 1]] as f64
                + clip.frames[[t, y, x, 2]] as f64)
                / 3.0
        })
    };
    let base = gray(0);
    let mut values = Vec::new();
    for delta in [1usize, 20, 120] {
        values.push(sigproc::ssim(base.view(), gray(delta).view()).unwrap());
    }
    assert!(
        values[0] > values[1] && values[1] > values[2],
        "ssim trend {values:?}"
    );
}

#[test]
fn gain_overflow_is_reported_with_pixels() {
    let bvp = clean_bvp(60.0, 2.0);
    let mut scene = SceneConfig::simple(8, 8, 10.0, 2.0, 1);
    scene.diffuse_base = [240.0, 240.0, 240.0];
    let err = render_clip(&bvp.waveform, &scene).unwrap_err();
    match err {
        SimError::GainOverflow { count, first } => {
            assert!(count > 0 && !first.is_empty());
        }
        other => panic!("expected GainOverflow, got {other:?}"),
    }
}

#[test]
fn dataset_generation_is_byte_reproducible() {
    let tmp = std::env::temp_dir().join(format!("skinsim_det_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&tmp);
    let ranges = DatasetRanges::test_profile((48.0, 150.0)).with_moderate_noise();
    let a = tmp.join("a");
    let b = tmp.join("b");
    let metas_a = make_dataset(&a, 3, &ranges, 7).unwrap();
    let metas_b = make_dataset(&b, 3, &ranges, 7).unwrap();
    assert_eq!(metas_a.len(), 3);
    for (ma, mb) in metas_a.iter().zip(metas_b.iter()) {
        assert_eq!(ma.hr_bpm, mb.hr_bpm);
        for file in [FRAMES_FILE, GT_FILE, META_FILE] {
            let ba = std::fs::read(ma.path.join(file)).unwrap();
            let bb = std::fs::read(mb.path.join(file)).unwrap();
            assert_eq!(ba, bb, "{file} differs between identical runs");
        }
    }
    std::fs::remove_dir_all(&tmp).unwrap();
}

#[test]
fn dataset_metadata_respects_hr_range_and_gt_is_self_consistent() {
    let tmp = std::env::temp_dir().join(format!("skinsim_range_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&tmp);
    let ranges = DatasetRanges::test_profile((48.0, 150.0));
    let metas = make_dataset(&tmp, 8, &ranges, 42).unwrap();
    for m in &metas {
        assert!(
            (48.0..=150.0).contains(&m.hr_bpm),
            "metadata HR {} out of range",
            m.hr_bpm
        );
        let gt = sigproc::Waveform::read_csv(&m.path.join(GT_FILE)).unwrap();
        let hr_est = sigproc::estimate_hr(&gt).unwrap();
        assert!(
            (hr_est - m.hr_bpm).abs() <= 1.0,
            "clip {:?}: estimated {hr_est} vs recorded {}",
            m.path,
            m.hr_bpm
        );
    }
    std::fs::remove_dir_all(&tmp).unwrap();
}

#[test]
fn frames_file_roundtrip() {
    let bvp = clean_bvp(70.0, 3.0);
    let scene = SceneConfig::simple(12, 10, 10.0, 3.0, 21);
    let clip = render_clip(&bvp.waveform, &scene).unwrap();
    let tmp = std::env::temp_dir().join(format!("skinsim_rt_{}.bin", std::process::id()));
    write_frames(&tmp, &clip.frames, clip.fps).unwrap();
    let (frames, fps) = read_frames(&tmp).unwrap();
    assert_eq!(fps, clip.fps);
    assert_eq!(frames, clip.frames);
    std::fs::remove_file(&tmp).unwrap();
}
