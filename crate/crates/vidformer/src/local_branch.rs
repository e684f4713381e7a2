//! Local convolution branch: the stem, the global spatial/temporal attention
//! weighting, and the base residual convolution block.
//!
//! The attention weighting pools the feature over time (spatial map) or over
//! space (temporal map), projects with two kernel-1 convolutions, forms
//! multi-head position-position attention scaled by 1/√C, and re-weights the
//! raw feature through a sigmoid of the two maps' sum. The residual block is
//! `GELU(GroupNorm(conv3(conv1(x)))) + conv1(x)` followed by spatial 2×2
//! average pooling on every stage except the last.

use autograd::{adaptive_avg_pool3d, attention, conv3d, group_norm, Var};

use crate::params::Bound;
use crate::VidError;

pub struct Stem {
    w: Var,
    b: Var,
}

impl Stem {
    pub fn bind(params: &Bound) -> Stem {
        Stem { w: params.take("stem.conv.w"), b: params.take("stem.conv.b") }
    }

    pub fn forward(&self, clip: &Var) -> Var {
        conv3d(clip, &self.w, Some(&self.b), (1, 1, 1))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum AttentionKind {
    Spatial,
    Temporal,
}

/// One of the two global-attention maps (spatial or temporal).
pub struct ConvAttention {
    p1_w: Var,
    p1_b: Var,
    p2_w: Var,
    p2_b: Var,
    pub heads: usize,
    pub kind: AttentionKind,
}

impl ConvAttention {
    pub fn bind(params: &Bound, stage: usize, kind: AttentionKind, heads: usize) -> Self {
        let tag = match kind {
            AttentionKind::Spatial => "s_attn",
            AttentionKind::Temporal => "t_attn",
        };
        ConvAttention {
            p1_w: params.take(&format!("stage{stage}.{tag}.p1.w")),
            p1_b: params.take(&format!("stage{stage}.{tag}.p1.b")),
            p2_w: params.take(&format!("stage{stage}.{tag}.p2.w")),
            p2_b: params.take(&format!("stage{stage}.{tag}.p2.b")),
            heads,
            kind,
        }
    }

    /// x: (B, C, T, H, W) → attention map (B, C, 1, H, W) or (B, C, T, 1, 1).
    pub fn forward(&self, x: &Var) -> Var {
        let (b, c, t, h, w) = dims5(x);
        assert_eq!(c % self.heads, 0, "heads must divide channels");
        let (pooled, len) = match self.kind {
            AttentionKind::Spatial => (adaptive_avg_pool3d(x, (1, h, w)), h * w),
            AttentionKind::Temporal => (adaptive_avg_pool3d(x, (t, 1, 1)), t),
        };
        // Kernel-1 projections; the first doubles as the value path.
        let q = conv3d(&pooled, &self.p1_w, Some(&self.p1_b), (0, 0, 0));
        let k = conv3d(&pooled, &self.p2_w, Some(&self.p2_b), (0, 0, 0));

        let dh = c / self.heads;
        let to_heads = |v: &Var| {
            v.reshape(&[b, c, len])
                .permute(&[0, 2, 1]) // (B, L, C)
                .reshape(&[b, len, self.heads, dh])
                .permute(&[0, 2, 1, 3]) // (B, heads, L, dh)
                .reshape(&[b * self.heads, len, dh])
        };
        let qh = to_heads(&q);
        let kh = to_heads(&k);
        // Scale is 1/√C (full channel count), not per-head.
        let out = attention(&qh, &kh, &qh, 1.0 / (c as f64).sqrt());
        let merged = out
            .reshape(&[b, self.heads, len, dh])
            .permute(&[0, 2, 1, 3])
            .reshape(&[b, len, c])
            .permute(&[0, 2, 1]);
        match self.kind {
            AttentionKind::Spatial => merged.reshape(&[b, c, 1, h, w]),
            AttentionKind::Temporal => merged.reshape(&[b, c, t, 1, 1]),
        }
    }
}

/// Sigmoid-gated re-weighting of the raw feature by the sum of the two
/// attention maps (either may be absent under ablation).
pub fn ga_weight(x: &Var, spatial: Option<&Var>, temporal: Option<&Var>) -> Result<Var, VidError> {
    let gate = match (spatial, temporal) {
        (Some(s), Some(t)) => {
            check_broadcastable(x, s)?;
            check_broadcastable(x, t)?;
            s.add(t)
        }
        (Some(s), None) => {
            check_broadcastable(x, s)?;
            s.clone()
        }
        (None, Some(t)) => {
            check_broadcastable(x, t)?;
            t.clone()
        }
        (None, None) => return Ok(x.clone()),
    };
    Ok(gate.sigmoid().mul(x))
}

fn check_broadcastable(x: &Var, map: &Var) -> Result<(), VidError> {
    let xs = x.shape();
    let ms = map.shape();
    if xs.len() != 5 || ms.len() != 5 {
        return Err(VidError::Shape(format!(
            "expected rank-5 tensors, got {xs:?} and {ms:?}"
        )));
    }
    for (a, m) in xs.iter().zip(ms.iter()) {
        if *m != 1 && *m != *a {
            return Err(VidError::Shape(format!(
                "attention map {ms:?} is not broadcastable to feature {xs:?}"
            )));
        }
    }
    Ok(())
}

/// Base residual convolution block, optionally followed by 2×2 spatial
/// average pooling.
pub struct BsBlock {
    reduce_w: Var,
    reduce_b: Var,
    conv_w: Var,
    conv_b: Var,
    gn_gamma: Var,
    gn_beta: Var,
    groups: usize,
    pub pool: bool,
}

impl BsBlock {
    pub fn bind(params: &Bound, stage: usize, groups: usize, pool: bool) -> Self {
        BsBlock {
            reduce_w: params.take(&format!("stage{stage}.bs.reduce.w")),
            reduce_b: params.take(&format!("stage{stage}.bs.reduce.b")),
            conv_w: params.take(&format!("stage{stage}.bs.conv.w")),
            conv_b: params.take(&format!("stage{stage}.bs.conv.b")),
            gn_gamma: params.take(&format!("stage{stage}.bs.gn.gamma")),
            gn_beta: params.take(&format!("stage{stage}.bs.gn.beta")),
            groups,
            pool,
        }
    }

    /// `x_g` is the weighted feature, `x_tc` the bridge injection (absent at
    /// stage boundaries where the bridge is disabled).
    pub fn forward(&self, x_g: &Var, x_tc: Option<&Var>) -> Result<Var, VidError> {
        if let Some(tc) = x_tc {
            if tc.shape() != x_g.shape() {
                return Err(VidError::Shape(format!(
                    "bridge feature {:?} does not match stage input {:?}",
                    tc.shape(),
                    x_g.shape()
                )));
            }
        }
        let summed = match x_tc {
            Some(tc) => x_g.add(tc),
            None => x_g.clone(),
        };
        let u = conv3d(&summed, &self.reduce_w, Some(&self.reduce_b), (0, 0, 0));
        let hidden = conv3d(&u, &self.conv_w, Some(&self.conv_b), (1, 1, 1));
        let normed = group_norm(&hidden, &self.gn_gamma, &self.gn_beta, self.groups);
        let out = normed.gelu().add(&u);
        if self.pool {
            let (_, _, t, h, w) = dims5(&out);
            Ok(adaptive_avg_pool3d(&out, (t, h / 2, w / 2)))
        } else {
            Ok(out)
        }
    }
}

pub(crate) fn dims5(v: &Var) -> (usize, usize, usize, usize, usize) {
    let s = v.shape();
    assert_eq!(s.len(), 5, "expected rank-5 tensor, got {s:?}");
    (s[0], s[1], s[2], s[3], s[4])
}
