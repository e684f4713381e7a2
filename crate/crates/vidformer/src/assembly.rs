//! End-to-end model: stem and token embedding, the per-stage loop wiring
//! both branches through the bridges, and the waveform heads.
//!
//! Bridge convention: conv stage `k` consumes the transformer→conv bridge of
//! the previous stage's tokens, and transformer stage `k` consumes the
//! conv→transformer bridge of the previous stage's conv feature, so within a
//! stage both branches depend only on stage `k−1` outputs and can be
//! evaluated in either order.

use autograd::{Arr, Graph, Var};
use sigproc::Waveform;

use crate::config::ModelConfig;
use crate::ctim::{ConvTransBridge, TransConvBridge};
use crate::global_branch::{cube_patchify, PatchEmbed, StMhsa, TransformerBlock};
use crate::heads::{RgmConvHead, RgmTokenHead};
use crate::local_branch::{dims5, ga_weight, AttentionKind, BsBlock, ConvAttention, Stem};
use crate::params::{Bound, ParamStore};
use crate::VidError;

/// Network input: a rank-5 clip (B, C, T, H, W) with frame-rate metadata.
#[derive(Clone, Debug)]
pub struct VideoClip {
    pub data: Arr,
    pub fps: f64,
}

impl VideoClip {
    pub fn new(data: Arr, fps: f64) -> Result<Self, VidError> {
        if data.shape().len() != 5 {
            return Err(VidError::Shape(format!(
                "clip must be rank 5 (B,C,T,H,W), got {:?}",
                data.shape()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(VidError::Shape("clip contains non-finite values".into()));
        }
        Ok(VideoClip { data, fps })
    }
}

struct Stage {
    s_attn: ConvAttention,
    t_attn: ConvAttention,
    bs: BsBlock,
    tc: TransConvBridge,
    ct: ConvTransBridge,
    st_mhsa: StMhsa,
    block: TransformerBlock,
}

/// Both branch heads; an ablated branch yields `None`.
pub struct HeadOutputs {
    pub r1: Option<Var>,
    pub r2: Option<Var>,
}

impl HeadOutputs {
    /// Extracts per-batch waveforms from a head output (B, T).
    pub fn waveforms(head: &Var, fps: f64) -> Vec<Waveform> {
        let s = head.shape();
        (0..s[0])
            .map(|b| {
                Waveform::new(
                    (0..s[1]).map(|t| head.value()[[b, t]]).collect(),
                    fps,
                )
            })
            .collect()
    }
}

pub struct VidFormer {
    cfg: ModelConfig,
    stem: Stem,
    embed: PatchEmbed,
    stages: Vec<Stage>,
    conv_head: RgmConvHead,
    token_head: RgmTokenHead,
}

impl VidFormer {
    /// Binds the parameter store into a runnable model. With a graph the
    /// forward pass is differentiable.
    pub fn bind(
        cfg: &ModelConfig,
        store: &ParamStore,
        graph: Option<&Graph>,
    ) -> Result<VidFormer, VidError> {
        cfg.validate()?;
        if store.fingerprint() != cfg.fingerprint() {
            return Err(VidError::FingerprintMismatch {
                file: store.fingerprint(),
                expected: cfg.fingerprint(),
            });
        }
        let params: Bound = store.bind(graph);
        let model = Self::bind_params(cfg, &params)?;
        params.assert_consumed();
        Ok(model)
    }

    /// Binds against an existing [`Bound`] view, letting the caller keep the
    /// leaf map for gradient extraction after the backward pass.
    pub fn bind_params(cfg: &ModelConfig, params: &Bound) -> Result<VidFormer, VidError> {
        let stages = (0..cfg.stages())
            .map(|k| Stage {
                s_attn: ConvAttention::bind(params, k, AttentionKind::Spatial, cfg.conv_heads),
                t_attn: ConvAttention::bind(params, k, AttentionKind::Temporal, cfg.conv_heads),
                bs: BsBlock::bind(params, k, cfg.gn_groups, k + 1 < cfg.stages()),
                tc: TransConvBridge::bind(params, k),
                ct: ConvTransBridge::bind(params, k),
                st_mhsa: StMhsa::bind(
                    params,
                    k,
                    cfg.transformer_heads,
                    cfg.ablation.s_mhsa,
                    cfg.ablation.t_mhsa,
                ),
                block: TransformerBlock::bind(params, k),
            })
            .collect();
        Ok(VidFormer {
            cfg: cfg.clone(),
            stem: Stem::bind(params),
            embed: PatchEmbed::bind(params),
            stages,
            conv_head: RgmConvHead::bind(params),
            token_head: RgmTokenHead::bind(params),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Full forward pass. Ablation flags drop the corresponding paths
    /// without changing any surviving shape.
    pub fn forward(&self, clip: &Arr) -> Result<HeadOutputs, VidError> {
        let cfg = &self.cfg;
        let expected = [
            clip.shape().first().copied().unwrap_or(0),
            cfg.channels,
            cfg.frames,
            cfg.height,
            cfg.width,
        ];
        if clip.shape().len() != 5 || clip.shape()[1..] != expected[1..] {
            return Err(VidError::Config(format!(
                "clip shape {:?} does not match profile (_, {}, {}, {}, {})",
                clip.shape(),
                cfg.channels,
                cfg.frames,
                cfg.height,
                cfg.width
            )));
        }
        let ab = cfg.ablation;
        let use_lcb = !ab.lcb;
        let use_gtb = !ab.gtb;
        let grid = cfg.grid();

        let clip_var = Var::constant(clip.clone());
        let mut conv_feat: Option<Var> = use_lcb.then(|| self.stem.forward(&clip_var));
        let mut tokens: Option<Var> = if use_gtb {
            let (cubes, g) = cube_patchify(clip, cfg.patch)?;
            debug_assert_eq!(g, grid);
            Some(self.embed.forward(&Var::constant(cubes)))
        } else {
            None
        };

        for stage in &self.stages {
            let prev_conv = conv_feat.clone();
            let prev_tokens = tokens.clone();

            if let Some(xc) = &prev_conv {
                // Global-attention weighting (Eq. 5 topology, minus ablated maps).
                let weighted = if ab.ga || (ab.s_ga && ab.t_ga) {
                    xc.clone()
                } else {
                    let s_map = (!ab.s_ga).then(|| stage.s_attn.forward(xc));
                    let t_map = (!ab.t_ga).then(|| stage.t_attn.forward(xc));
                    ga_weight(xc, s_map.as_ref(), t_map.as_ref())?
                };
                let bridge = match (&prev_tokens, ab.t_cb) {
                    (Some(xt), false) => {
                        let (_, _, t, h, w) = dims5(xc);
                        Some(stage.tc.forward(xt, grid, (t, h, w))?)
                    }
                    _ => None,
                };
                conv_feat = Some(stage.bs.forward(&weighted, bridge.as_ref())?);
            }

            if let Some(xt) = &prev_tokens {
                let injection = match (&prev_conv, ab.c_tb) {
                    (Some(xc), false) => Some(stage.ct.forward(xc, grid)),
                    _ => None,
                };
                let mixed = stage.st_mhsa.forward(xt, injection.as_ref(), grid);
                tokens = Some(stage.block.forward(&mixed));
            }
        }

        Ok(HeadOutputs {
            r1: conv_feat.map(|xc| self.conv_head.forward(&xc)),
            r2: tokens.map(|xt| self.token_head.forward(&xt)),
        })
    }
}

/// Final heart rate: the mean of the per-head estimates, falling back to
/// whichever head exists.
pub fn hr_from_heads(
    r1: Option<&Waveform>,
    r2: Option<&Waveform>,
) -> Result<f64, sigproc::SigError> {
    match (r1, r2) {
        (Some(a), Some(b)) => Ok((sigproc::estimate_hr(a)? + sigproc::estimate_hr(b)?) / 2.0),
        (Some(a), None) => sigproc::estimate_hr(a),
        (None, Some(b)) => sigproc::estimate_hr(b),
        (None, None) => Err(sigproc::SigError::DetectionFailure(
            "no head outputs available".into(),
        )),
    }
}
