//! Waveform generation heads and the training objective.
//!
//! The conv head reduces channels with a kernel-1 convolution and collapses
//! space by adaptive average pooling; the token head reduces the embedding
//! axis, flattens, and maps through a two-layer perceptron. The objective
//! per head is `α·(1 − Pearson r) + (1 − α)·smooth-L1`, and the two heads
//! are optimized jointly by summing their objectives.

use autograd::{adaptive_avg_pool3d, conv3d, linear, pearson_loss_rows, smooth_l1_rows, Arr, Var};
use sigproc::Waveform;

use crate::global_branch::dims3;
use crate::local_branch::dims5;
use crate::params::Bound;
use crate::VidError;

pub struct RgmConvHead {
    w: Var,
    b: Var,
}

impl RgmConvHead {
    pub fn bind(params: &Bound) -> Self {
        RgmConvHead { w: params.take("head.conv.w"), b: params.take("head.conv.b") }
    }

    /// (B, C, T, H, W) → (B, T).
    pub fn forward(&self, x: &Var) -> Var {
        let (b, _, t, _, _) = dims5(x);
        let reduced = conv3d(x, &self.w, Some(&self.b), (0, 0, 0));
        adaptive_avg_pool3d(&reduced, (t, 1, 1)).reshape(&[b, t])
    }
}

pub struct RgmTokenHead {
    proj_w: Var,
    proj_b: Var,
    l1_w: Var,
    l1_b: Var,
    l2_w: Var,
    l2_b: Var,
}

impl RgmTokenHead {
    pub fn bind(params: &Bound) -> Self {
        RgmTokenHead {
            proj_w: params.take("head.token.proj.w"),
            proj_b: params.take("head.token.proj.b"),
            l1_w: params.take("head.token.mlp.l1.w"),
            l1_b: params.take("head.token.mlp.l1.b"),
            l2_w: params.take("head.token.mlp.l2.w"),
            l2_b: params.take("head.token.mlp.l2.b"),
        }
    }

    /// (B, P, D) → (B, T).
    pub fn forward(&self, tokens: &Var) -> Var {
        let (b, p, _) = dims3(tokens);
        let reduced = linear(tokens, &self.proj_w, Some(&self.proj_b));
        let dr = reduced.shape()[2];
        let flat = reduced.reshape(&[b, p * dr]);
        let hidden = linear(&flat, &self.l1_w, Some(&self.l1_b)).gelu();
        linear(&hidden, &self.l2_w, Some(&self.l2_b))
    }
}

// ---------------------------------------------------------------------------
// Scalar (reporting) losses over single waveforms.
// ---------------------------------------------------------------------------

/// `1 − r(y, t)` with the zero-correlation convention (value 1) when either
/// signal is constant.
pub fn pearson_loss(y: &Waveform, t: &Waveform) -> f64 {
    assert_eq!(y.len(), t.len(), "waveform lengths differ");
    assert!(y.len() >= 2, "need at least 2 samples");
    let l = y.len();
    let ym = y.mean();
    let tm = t.mean();
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for i in 0..l {
        let a = y.samples[i] - ym;
        let b = t.samples[i] - tm;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
    }
    if saa < 1e-24 || sbb < 1e-24 {
        return 1.0;
    }
    1.0 - sab / (saa * sbb).sqrt()
}

/// Mean smooth-L1: `0.5·d²` for `|d| < 1`, else `|d| − 0.5`.
pub fn smooth_l1_loss(y: &Waveform, t: &Waveform) -> f64 {
    assert_eq!(y.len(), t.len(), "waveform lengths differ");
    let total: f64 = y
        .samples
        .iter()
        .zip(t.samples.iter())
        .map(|(a, b)| {
            let d = b - a;
            if d.abs() < 1.0 {
                0.5 * d * d
            } else {
                d.abs() - 0.5
            }
        })
        .sum();
    total / y.len() as f64
}

/// `α·Lp + (1−α)·L1`.
pub fn combined_loss(y: &Waveform, t: &Waveform, alpha: f64) -> Result<f64, VidError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(VidError::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(alpha * pearson_loss(y, t) + (1.0 - alpha) * smooth_l1_loss(y, t))
}

/// Sum of the two heads' combined losses, with the parts reported.
#[derive(Clone, Copy, Debug)]
pub struct DualLoss {
    pub total: f64,
    pub lp_r1: f64,
    pub l1_r1: f64,
    pub lp_r2: f64,
    pub l1_r2: f64,
}

pub fn dual_objective(
    r1: &Waveform,
    r2: &Waveform,
    t: &Waveform,
    alpha: f64,
) -> Result<DualLoss, VidError> {
    let c1 = combined_loss(r1, t, alpha)?;
    let c2 = combined_loss(r2, t, alpha)?;
    Ok(DualLoss {
        total: c1 + c2,
        lp_r1: pearson_loss(r1, t),
        l1_r1: smooth_l1_loss(r1, t),
        lp_r2: pearson_loss(r2, t),
        l1_r2: smooth_l1_loss(r2, t),
    })
}

// ---------------------------------------------------------------------------
// Differentiable batched losses used by training.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default)]
pub struct LossParts {
    pub lp_r1: f64,
    pub l1_r1: f64,
    pub lp_r2: f64,
    pub l1_r2: f64,
    pub degenerate_rows: usize,
}

/// Batched `α·Lp + (1−α)·L1` over (B, T) predictions.
pub fn combined_loss_var(pred: &Var, target: &Arr, alpha: f64) -> (Var, f64, f64, usize) {
    let (lp, degenerate) = pearson_loss_rows(pred, target);
    let l1 = smooth_l1_rows(pred, target);
    let total = lp.scale(alpha).add(&l1.scale(1.0 - alpha));
    (total, lp.scalar(), l1.scalar(), degenerate)
}

/// Joint objective over whichever heads are present. At least one head must
/// exist (enforced by the model topology).
pub fn dual_objective_var(
    r1: Option<&Var>,
    r2: Option<&Var>,
    target: &Arr,
    alpha: f64,
) -> (Var, LossParts) {
    let mut parts = LossParts::default();
    let mut total: Option<Var> = None;
    if let Some(r1) = r1 {
        let (loss, lp, l1, deg) = combined_loss_var(r1, target, alpha);
        parts.lp_r1 = lp;
        parts.l1_r1 = l1;
        parts.degenerate_rows += deg;
        total = Some(loss);
    }
    if let Some(r2) = r2 {
        let (loss, lp, l1, deg) = combined_loss_var(r2, target, alpha);
        parts.lp_r2 = lp;
        parts.l1_r2 = l1;
        parts.degenerate_rows += deg;
        total = Some(match total {
            Some(t) => t.add(&loss),
            None => loss,
        });
    }
    (total.expect("at least one head output required"), parts)
}
