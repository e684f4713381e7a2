//! Shape contracts, algebraic identities, ablation topology, determinism,
//! parameter accounting and checkpoint behavior.

use autograd::{Arr, Var};
use ndarray::IxDyn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidformer::config::{Ablation, ModelConfig};
use vidformer::global_branch::{
    cube_patchify, cube_unpatchify, from_spatial, from_temporal, to_spatial, to_temporal,
    PatchEmbed, StMhsa, TransformerBlock,
};
use vidformer::heads::RgmTokenHead;
use vidformer::local_branch::{ga_weight, AttentionKind, BsBlock, ConvAttention, Stem};
use vidformer::params::ParamStore;
use vidformer::{checkpoint, VidError, VidFormer};

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Arr {
    let n: usize = shape.iter().product();
    Arr::from_shape_vec(
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

fn zero_out(store: &mut ParamStore, name: &str) {
    store.tensors_mut().get_mut(name).unwrap().fill(0.0);
}

#[test]
fn stem_shapes_and_linearity() {
    let cfg = ModelConfig::test_profile();
    let store = ParamStore::init(&cfg).unwrap();
    let bound = store.bind(None);
    let stem = Stem::bind(&bound);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clip = randn(&mut rng, &[1, 3, 50, 32, 32]);
    let out = stem.forward(&Var::constant(clip));
    assert_eq!(out.shape(), &[1, 8, 50, 32, 32]);

    // All-zero clip with zero bias stays zero (bias initializes to zero).
    let zeros = Arr::zeros(IxDyn(&[1, 3, 50, 32, 32]));
    let out = stem.forward(&Var::constant(zeros));
    assert!(out.value().iter().all(|v| *v == 0.0));
}

#[test]
fn attention_maps_have_declared_shapes_and_stochastic_rows() {
    let cfg = ModelConfig::test_profile();
    let store = ParamStore::init(&cfg).unwrap();
    let bound = store.bind(None);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = randn(&mut rng, &[2, 8, 6, 4, 4]);

    let s_attn = ConvAttention::bind(&bound, 0, AttentionKind::Spatial, cfg.conv_heads);
    let t_attn = ConvAttention::bind(&bound, 0, AttentionKind::Temporal, cfg.conv_heads);
    assert_eq!(s_attn.forward(&Var::constant(x.clone())).shape(), &[2, 8, 1, 4, 4]);
    assert_eq!(t_attn.forward(&Var::constant(x.clone())).shape(), &[2, 8, 6, 1, 1]);

    // Row-stochastic attention probabilities (checked on the raw projections).
    let q = randn(&mut rng, &[3, 16, 4]);
    let k = randn(&mut rng, &[3, 16, 4]);
    let probs = autograd::attention_probs(&q, &k, 0.5);
    for n in 0..3 {
        for i in 0..16 {
            let mut sum = 0.0;
            for j in 0..16 {
                let p = probs[[n, i, j]];
                assert!(p >= 0.0);
                sum += p;
            }
            assert!((sum - 1.0).abs() < 1e-6, "row sum {sum}");
        }
    }
}

#[test]
fn single_position_attention_reduces_to_projection() {
    // H = W = 1: the softmax is over one position, so the output must equal
    // the ς1 projection of the pooled input.
    let cfg = ModelConfig::test_profile();
    let store = ParamStore::init(&cfg).unwrap();
    let bound = store.bind(None);
    let s_attn = ConvAttention::bind(&bound, 0, AttentionKind::Spatial, cfg.conv_heads);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = randn(&mut rng, &[1, 8, 5, 1, 1]);
    let got = s_attn.forward(&Var::constant(x.clone()));

    let pooled = autograd::adaptive_avg_pool3d(&Var::constant(x), (1, 1, 1));
    let w = Var::constant(store.get("stage0.s_attn.p1.w").unwrap().clone());
    let b = Var::constant(store.get("stage0.s_attn.p1.b").unwrap().clone());
    let expected = autograd::conv3d(&pooled, &w, Some(&b), (0, 0, 0));
    let d: f64 = got
        .value()
        .iter()
        .zip(expected.value().iter())
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
    assert!(d < 1e-10, "single-position attention differs by {d}");

    // Same for T = 1 on the temporal side.
    let t_attn = ConvAttention::bind(&bound, 0, AttentionKind::Temporal, cfg.conv_heads);
    let x = randn(&mut ChaCha8Rng::seed_from_u64(4), &[1, 8, 1, 4, 4]);
    let got = t_attn.forward(&Var::constant(x.clone()));
    let pooled = autograd::adaptive_avg_pool3d(&Var::constant(x), (1, 1, 1));
    let w = Var::constant(store.get("stage0.t_attn.p1.w").unwrap().clone());
    let b = Var::constant(store.get("stage0.t_attn.p1.b").unwrap().clone());
    let expected = autograd::conv3d(&pooled, &w, Some(&b), (0, 0, 0));
    let d: f64 = got
        .value()
        .iter()
        .zip(expected.value().iter())
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
    assert!(d < 1e-10, "single-frame attention differs by {d}");
}

#[test]
fn spatial_attention_is_permutation_equivariant() {
    // Kernel-1 projections carry no positional structure, so permuting the
    // flattened spatial positions permutes the output identically.
    let cfg = ModelConfig::test_profile();
    let store = ParamStore::init(&cfg).unwrap();
    let bound = store.bind(None);
    let s_attn = ConvAttention::bind(&bound, 0, AttentionKind::Spatial, cfg.conv_heads);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (h, w) = (3usize, 4usize);
    let x = randn(&mut rng, &[1, 8, 2, h, w]);

    // Fixed permutation of the h*w positions.
    let mut perm: Vec<usize> = (0..h * w).collect();
    for i in (1..perm.len()).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut xp = x.clone();
    for c in 0..8 {
        for t in 0..2 {
            for (dst, &src) in perm.iter().enumerate() {
                xp[[0, c, t, dst / w, dst % w]] = x[[0, c, t, src / w, src % w]];
            }
        }
    }
    let base = s_attn.forward(&Var::constant(x));
    let permuted = s_attn.forward(&Var::constant(xp));
    for c in 0..8 {
        for (dst, &src) in perm.iter().enumerate() {
            let a = permuted.value()[[0, c, 0, dst / w, dst % w]];
            let b = base.value()[[0, c, 0, src / w, src % w]];
            assert!((a - b).abs() < 1e-10, "equivariance broken at c={c}, {src}->{dst}");
        }
    }
}

#[test]
fn ga_weight_identities_and_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = randn(&mut rng, &[1, 2, 3, 2, 2]);
    let minus20_s = Arr::from_elem(IxDyn(&[1, 2, 1, 2, 2]), -20.0);
    let minus20_t = Arr::from_elem(IxDyn(&[1, 2, 3, 1, 1]), -20.0);
    let out = ga_weight(
        &Var::constant(x.clone()),
        Some(&Var::constant(minus20_s)),
        Some(&Var::constant(minus20_t)),
    )
    .unwrap();
    assert!(out.value().iter().all(|v| v.abs() < 1e-8), "sigmoid(-40) gate must crush output");

    let zero_s = Arr::zeros(IxDyn(&[1, 2, 1, 2, 2]));
    let zero_t = Arr::zeros(IxDyn(&[1, 2, 3, 1, 1]));
    let out = ga_weight(
        &Var::constant(x.clone()),
        Some(&Var::constant(zero_s)),
        Some(&Var::constant(zero_t)),
    )
    .unwrap();
    for (o, xi) in out.value().iter().zip(x.iter()) {
        assert_eq!(*o, 0.5 * xi, "sigmoid(0) must give exactly x/2");
    }

    // |out| <= |x| always.
    let s = randn(&mut rng, &[1, 2, 1, 2, 2]);
    let t = randn(&mut rng, &[1, 2, 3, 1, 1]);
    let out = ga_weight(
        &Var::constant(x.clone()),
        Some(&Var::constant(s)),
        Some(&Var::constant(t)),
    )
    .unwrap();
    for (o, xi) in out.value().iter().zip(x.iter()) {
        assert!(o.abs() <= xi.abs() + 1e-12);
    }

    // Shape error for non-broadcastable maps.
    let bad = Arr::zeros(IxDyn(&[1, 3, 1, 2, 2]));
    assert!(matches!(
        ga_weight(&Var::constant(x), Some(&Var::constant(bad)), None),
        Err(VidError::Shape(_))
    ));
}

#[test]
fn bs_block_identities() {
    let cfg = ModelConfig::test_profile();
    let mut store = ParamStore::init(&cfg).unwrap();

    // Zero inputs with zero biases give zero output (before/after pooling).
    {
        let bound = store.bind(None);
        let bs = BsBlock::bind(&bound, 0, cfg.gn_groups, true);
        let zeros = Arr::zeros(IxDyn(&[1, 8, 6, 8, 8]));
        let out = bs.forward(&Var::constant(zeros.clone()), Some(&Var::constant(zeros))).unwrap();
        assert_eq!(out.shape(), &[1, 16, 6, 4, 4]);
        assert!(out.value().iter().all(|v| *v == 0.0));
    }

    // Shape contract for stage 0 of the test profile.
    {
        let bound = store.bind(None);
        let bs = BsBlock::bind(&bound, 0, cfg.gn_groups, true);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = randn(&mut rng, &[1, 8, 50, 32, 32]);
        let out = bs.forward(&Var::constant(x), None).unwrap();
        assert_eq!(out.shape(), &[1, 16, 50, 16, 16]);
    }

    // Residual check: zero the kernel-3 path and disable the affine to get
    // output == u before pooling.
    zero_out(&mut store, "stage0.bs.conv.w");
    zero_out(&mut store, "stage0.bs.conv.b");
    zero_out(&mut store, "stage0.bs.gn.beta");
    {
        let bound = store.bind(None);
        let bs = BsBlock::bind(&bound, 0, cfg.gn_groups, false);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = randn(&mut rng, &[1, 8, 4, 6, 6]);
        let out = bs.forward(&Var::constant(x.clone()), None).unwrap();
        let w = Var::constant(store.get("stage0.bs.reduce.w").unwrap().clone());
        let b = Var::constant(store.get("stage0.bs.reduce.b").unwrap().clone());
        let u = autograd::conv3d(&Var::constant(x), &w, Some(&b), (0, 0, 0));
        let d: f64 = out
            .value()
            .iter()
            .zip(u.value().iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-12, "residual identity violated by {d}");
    }
}

#[test]
fn cube_patchify_contract_and_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let clip = randn(&mut rng, &[1, 3, 50, 32, 32]);
    let (cubes, grid) = cube_patchify(&clip, (10, 8, 8)).unwrap();
    assert_eq!(grid, (5, 4, 4));
    assert_eq!(cubes.shape(), &[1, 80, 1920]);
    let back = cube_unpatchify(&cubes, grid, (10, 8, 8), 3);
    assert_eq!(back, clip);

    assert!(matches!(
        cube_patchify(&clip, (7, 8, 8)),
        Err(VidError::Config(_))
    ));
}

#[test]
fn embed_zero_cubes_yields_positional_table() {
    let cfg = ModelConfig::test_profile();
    let store = ParamStore::init(&cfg).unwrap();
    let bound = store.bind(None);
    let embed = PatchEmbed::bind(&bound);
    let zeros = Arr::zeros(IxDyn(&[2, cfg.token_count(), cfg.cube_len()]));
    let out = embed.forward(&Var::constant(zeros));
    let pos = store.get("embed.pos").unwrap();
    for b in 0..2 {
        for p in 0..cfg.token_count() {
            for d in 0..cfg.embed_dim {
                assert_eq!(out.value()[[b, p, d]], pos[[p, d]]);
            }
        }
    }
}

#[test]
fn rearrange_layouts_and_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = randn(&mut rng, &[2, 80, 32]);
    let grid = (5usize, 4usize, 4usize);
    let xs = to_spatial(&Var::constant(x.clone()), grid);
    assert_eq!(xs.shape(), &[10, 16, 32]);
    let xt = to_temporal(&Var::constant(x.clone()), grid);
    assert_eq!(xt.shape(), &[32, 5, 32]);
    assert_eq!(from_spatial(&xs, 2, grid).value(), &x);
    assert_eq!(from_temporal(&xt, 2, grid).value(), &x);
}

#[test]
fn st_mhsa_zero_weights_pass_double_residual() {
    // With all projection weights and biases zero, both branches reduce to
    // their residuals and the output is exactly 2x.
    let mut cfg = ModelConfig::test_profile();
    cfg.frames = 4;
    cfg.height = 8;
    cfg.width = 8;
    cfg.patch = (2, 4, 4);
    cfg.embed_dim = 8;
    cfg.transformer_heads = 2;
    cfg.stem_width = 8;
    cfg.stage_widths = vec![16];
    cfg.validate().unwrap();
    let mut store = ParamStore::init(&cfg).unwrap();
    for proj in ["q", "k", "v", "o"] {
        for tag in ["s_mhsa", "t_mhsa"] {
            zero_out(&mut store, &format!("stage0.{tag}.{proj}.w"));
            zero_out(&mut store, &format!("stage0.{tag}.{proj}.b"));
        }
    }
    let bound = store.bind(None);
    let st = StMhsa::bind(&bound, 0, cfg.transformer_heads, false, false);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = randn(&mut rng, &[1, cfg.token_count(), cfg.embed_dim]);
    let out = st.forward(&Var::constant(x.clone()), None, cfg.grid());
    for (o, xi) in out.value().iter().zip(x.iter()) {
        assert!((o - 2.0 * xi).abs() < 1e-12, "double residual broken: {o} vs 2·{xi}");
    }
}

#[test]
fn transformer_block_zero_ffn_returns_layer_norm() {
    let cfg = ModelConfig::test_profile();
    let mut store = ParamStore::init(&cfg).unwrap();
    zero_out(&mut store, "stage0.ffn.l1.w");
    zero_out(&mut store, "stage0.ffn.l1.b");
    zero_out(&mut store, "stage0.ffn.l2.w");
    zero_out(&mut store, "stage0.ffn.l2.b");
    let bound = store.bind(None);
    let block = TransformerBlock::bind(&bound, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = randn(&mut rng, &[2, 80, cfg.embed_dim]);
    let out = block.forward(&Var::constant(x.clone()));
    assert_eq!(out.shape(), x.shape());

    let ln = autograd::layer_norm(
        &Var::constant(x),
        &Var::constant(store.get("stage0.ln_ffn.gamma").unwrap().clone()),
        &Var::constant(store.get("stage0.ln_ffn.beta").unwrap().clone()),
    );
    for (a, b) in out.value().iter().zip(ln.value().iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn layer_norm_rows_have_zero_mean_unit_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = randn(&mut rng, &[4, 7, 16]);
    let gamma = Arr::ones(IxDyn(&[16]));
    let beta = Arr::zeros(IxDyn(&[16]));
    let out = autograd::layer_norm(
        &Var::constant(x),
        &Var::constant(gamma),
        &Var::constant(beta),
    );
    for n in 0..4 {
        for l in 0..7 {
            let mut mean = 0.0;
            let mut var = 0.0;
            for d in 0..16 {
                mean += out.value()[[n, l, d]];
            }
            mean /= 16.0;
            for d in 0..16 {
                let dv = out.value()[[n, l, d]] - mean;
                var += dv * dv;
            }
            var /= 16.0;
            assert!(mean.abs() < 1e-5, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
        }
    }
}

#[test]
fn spatial_branch_confines_changes_to_time_slab() {
    // With the temporal branch dropped, perturbing one time slab changes
    // only that slab's tokens.
    let mut cfg = ModelConfig::test_profile();
    cfg.frames = 6;
    cfg.height = 8;
    cfg.width = 8;
    cfg.patch = (2, 4, 4);
    cfg.embed_dim = 8;
    cfg.transformer_heads = 2;
    cfg.stem_width = 8;
    cfg.stage_widths = vec![16];
    cfg.validate().unwrap();
    let store = ParamStore::init(&cfg).unwrap();
    let bound = store.bind(None);
    let st = StMhsa::bind(&bound, 0, cfg.transformer_heads, false, true);
    let grid = cfg.grid();
    let (nt, nh, nw) = grid;
    let per_slab = nh * nw;

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let x = randn(&mut rng, &[1, cfg.token_count(), cfg.embed_dim]);
    let mut xp = x.clone();
    // Perturb slab it = 1.
    for sp in 0..per_slab {
        for d in 0..cfg.embed_dim {
            xp[[0, per_slab + sp, d]] += 0.37;
        }
    }
    let base = st.forward(&Var::constant(x), None, grid);
    let pert = st.forward(&Var::constant(xp), None, grid);
    for it in 0..nt {
        for sp in 0..per_slab {
            let mut diff = 0.0f64;
            for d in 0..cfg.embed_dim {
                diff = diff.max(
                    (base.value()[[0, it * per_slab + sp, d]]
                        - pert.value()[[0, it * per_slab + sp, d]])
                    .abs(),
                );
            }
            if it == 1 {
                assert!(diff > 1e-6, "perturbed slab unchanged");
            } else {
                assert!(diff < 1e-12, "slab {it} leaked {diff}");
            }
        }
    }
}

#[test]
fn forward_shapes_and_ablation_topology() {
    let mut cfg = ModelConfig::test_profile();
    cfg.seed = 5;
    let store = ParamStore::init(&cfg).unwrap();
    let model = VidFormer::bind(&cfg, &store, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let clip = randn(&mut rng, &[1, 3, 50, 32, 32]);
    let heads = model.forward(&clip).unwrap();
    let r1 = heads.r1.expect("conv head present");
    let r2 = heads.r2.expect("token head present");
    assert_eq!(r1.shape(), &[1, 50]);
    assert_eq!(r2.shape(), &[1, 50]);

    // Profile mismatch is a configuration error.
    let bad = randn(&mut rng, &[1, 3, 40, 32, 32]);
    assert!(matches!(model.forward(&bad), Err(VidError::Config(_))));

    // Branch ablations drop the corresponding head.
    let mut cfg_gtb = cfg.clone();
    cfg_gtb.ablation = Ablation { gtb: true, ..Default::default() };
    let store_gtb = ParamStore::init(&cfg_gtb).unwrap();
    let model_gtb = VidFormer::bind(&cfg_gtb, &store_gtb, None).unwrap();
    let out = model_gtb.forward(&clip).unwrap();
    assert!(out.r2.is_none());
    assert_eq!(out.r1.unwrap().shape(), &[1, 50]);

    let mut cfg_lcb = cfg.clone();
    cfg_lcb.ablation = Ablation { lcb: true, ..Default::default() };
    let store_lcb = ParamStore::init(&cfg_lcb).unwrap();
    let model_lcb = VidFormer::bind(&cfg_lcb, &store_lcb, None).unwrap();
    let out = model_lcb.forward(&clip).unwrap();
    assert!(out.r1.is_none());
    assert_eq!(out.r2.unwrap().shape(), &[1, 50]);
}

#[test]
fn every_single_flag_produces_valid_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let clip = randn(&mut rng, &[1, 3, 10, 16, 16]);
    for flag in vidformer::config::ABLATION_FLAGS {
        let mut cfg = ModelConfig::micro_profile();
        cfg.ablation.set(flag).unwrap();
        cfg.validate().unwrap();
        let store = ParamStore::init(&cfg).unwrap();
        let model = VidFormer::bind(&cfg, &store, None).unwrap();
        let out = model.forward(&clip).unwrap();
        if flag != "lcb" {
            assert_eq!(out.r1.as_ref().unwrap().shape(), &[1, 10], "flag {flag}");
        }
        if flag != "gtb" {
            assert_eq!(out.r2.as_ref().unwrap().shape(), &[1, 10], "flag {flag}");
        }
    }
}

#[test]
fn forward_is_deterministic_for_fixed_seed() {
    let cfg = ModelConfig::micro_profile();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let clip = randn(&mut rng, &[2, 3, 10, 16, 16]);
    let run = || {
        let store = ParamStore::init(&cfg).unwrap();
        let model = VidFormer::bind(&cfg, &store, None).unwrap();
        let out = model.forward(&clip).unwrap();
        (out.r1.unwrap().value().clone(), out.r2.unwrap().value().clone())
    };
    let (a1, a2) = run();
    let (b1, b2) = run();
    assert_eq!(a1, b1);
    assert_eq!(a2, b2);
}

#[test]
fn init_is_seed_deterministic_and_seed_sensitive() {
    let mut cfg = ModelConfig::micro_profile();
    cfg.seed = 7;
    let a = ParamStore::init(&cfg).unwrap();
    let b = ParamStore::init(&cfg).unwrap();
    assert_eq!(a.tensors(), b.tensors());

    let mut cfg2 = cfg.clone();
    cfg2.seed = 8;
    let c = ParamStore::init(&cfg2).unwrap();
    assert_ne!(
        a.get("embed.pos").unwrap(),
        c.get("embed.pos").unwrap(),
        "different seeds must give different positional tables"
    );
}

#[test]
fn parameter_count_matches_shape_arithmetic() {
    // Independent count from the declared shapes of the test profile.
    let cfg = ModelConfig::test_profile();
    let store = ParamStore::init(&cfg).unwrap();
    let d = cfg.embed_dim;
    let p = cfg.token_count();
    let mut expected = 0usize;
    expected += cfg.stem_width * cfg.channels * 27 + cfg.stem_width; // stem
    expected += cfg.cube_len() * d + d + p * d; // embedding + pos
    for k in 0..cfg.stages() {
        let c_in = cfg.stage_in_channels(k);
        let c_out = cfg.stage_widths[k];
        expected += 2 * 2 * (c_in * c_in + c_in); // two attention maps, two kernel-1 projections each
        expected += c_out * c_in + c_out; // bs reduce
        expected += c_out * c_out * 27 + c_out; // bs conv3
        expected += 2 * c_out; // groupnorm affine
        expected += c_in * d + c_in; // trans→conv projection
        expected += c_in * d + d + 2 * d; // conv→trans linear + LN
        expected += 3 * 2 * d; // ln_s, ln_t, ln_ffn
        expected += 2 * 4 * (d * d + d); // two MHSAs, four projections each
        expected += d * cfg.ffn_hidden + cfg.ffn_hidden + cfg.ffn_hidden * d + d; // FFN
    }
    let c_last = *cfg.stage_widths.last().unwrap();
    expected += c_last + 1; // conv head (1 x C x 1x1x1 + bias)
    expected += d * cfg.dr + cfg.dr; // token head projection
    expected += p * cfg.dr * cfg.mlp_hidden + cfg.mlp_hidden; // mlp l1
    expected += cfg.mlp_hidden * cfg.frames + cfg.frames; // mlp l2

    assert_eq!(store.total_params(), expected);
    // Frozen regression value for the test profile.
    assert_eq!(store.total_params(), 536_479);
}

#[test]
fn checkpoint_roundtrip_and_fingerprint_guard() {
    let dir = std::env::temp_dir().join(format!("vf_ckpt_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.ckpt");

    let mut cfg = ModelConfig::micro_profile();
    cfg.seed = 21;
    let store = ParamStore::init(&cfg).unwrap();
    checkpoint::save(&path, &cfg, &store).unwrap();
    let (cfg2, store2) = checkpoint::load(&path, Some(&cfg)).unwrap();
    assert_eq!(cfg2, cfg);
    assert_eq!(store2.tensors(), store.tensors());

    let mut other = cfg.clone();
    other.embed_dim = 8;
    other.transformer_heads = 2;
    assert!(matches!(
        checkpoint::load(&path, Some(&other)),
        Err(VidError::FingerprintMismatch { .. })
    ));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn token_head_shape_and_zero_weight_bias() {
    let cfg = ModelConfig::test_profile();
    let mut store = ParamStore::init(&cfg).unwrap();
    {
        let bound = store.bind(None);
        let head = RgmTokenHead::bind(&bound);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let tokens = randn(&mut rng, &[1, 80, 64]);
        assert_eq!(head.forward(&Var::constant(tokens)).shape(), &[1, 50]);
    }
    for name in [
        "head.token.proj.w",
        "head.token.proj.b",
        "head.token.mlp.l1.w",
        "head.token.mlp.l1.b",
        "head.token.mlp.l2.w",
    ] {
        zero_out(&mut store, name);
    }
    store
        .tensors_mut()
        .get_mut("head.token.mlp.l2.b")
        .unwrap()
        .fill(0.25);
    let bound = store.bind(None);
    let head = RgmTokenHead::bind(&bound);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let tokens = randn(&mut rng, &[1, 80, 64]);
    let out = head.forward(&Var::constant(tokens));
    assert!(out.value().iter().all(|v| (*v - 0.25).abs() < 1e-15));
}

#[test]
fn micro_model_gradients_match_finite_differences() {
    // A reduced profile keeps this unit-level; the acceptance suite runs the
    // full micro profile.
    let mut cfg = ModelConfig::micro_profile();
    cfg.frames = 6;
    cfg.height = 8;
    cfg.width = 8;
    cfg.patch = (3, 4, 4);
    cfg.stem_width = 2;
    cfg.stage_widths = vec![4];
    cfg.embed_dim = 8;
    cfg.conv_heads = 2;
    cfg.transformer_heads = 2;
    cfg.ffn_hidden = 8;
    cfg.gn_groups = 2;
    cfg.dr = 2;
    cfg.mlp_hidden = 8;
    cfg.validate().unwrap();
    let report = vidformer::gradcheck::check_model_gradients(&cfg, 31, 1e-4, 1e-3);
    assert!(report.checked > 1000);
    assert!(
        report.all_passed(),
        "gradient failures (worst rel {}): {:?}",
        report.worst_rel,
        &report.failures[..report.failures.len().min(5)]
    );
}
