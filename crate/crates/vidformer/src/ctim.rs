//! Per-stage bridges between the two branches.
//!
//! Trans-Conv: tokens → grid-shaped feature (embedding as channels) →
//! kernel-1 projection to the consuming stage's channel count → trilinear
//! upsampling to the stage's full extent. The projection commutes with the
//! interpolation (both are linear, acting on disjoint axes), so it runs
//! first; the composite equals upsample-then-project.
//!
//! Conv-Trans: adaptive average pooling down to the patch grid → flatten to
//! tokens → affine embedding → layer normalization.

use autograd::{adaptive_avg_pool3d, conv3d, layer_norm, linear, upsample_trilinear, Var};

use crate::global_branch::dims3;
use crate::local_branch::dims5;
use crate::params::Bound;
use crate::VidError;

pub struct TransConvBridge {
    w: Var,
    b: Var,
}

impl TransConvBridge {
    pub fn bind(params: &Bound, stage: usize) -> Self {
        TransConvBridge {
            w: params.take(&format!("stage{stage}.tc.proj.w")),
            b: params.take(&format!("stage{stage}.tc.proj.b")),
        }
    }

    /// tokens (B, P, D) → conv feature (B, C_k, T, H_k, W_k).
    pub fn forward(
        &self,
        tokens: &Var,
        grid: (usize, usize, usize),
        target: (usize, usize, usize),
    ) -> Result<Var, VidError> {
        let (b, p, d) = dims3(tokens);
        let (nt, nh, nw) = grid;
        if p != nt * nh * nw {
            return Err(VidError::Shape(format!(
                "token count {p} does not match grid {grid:?}"
            )));
        }
        let (t, h, w) = target;
        if nt > t || nh > h || nw > w {
            return Err(VidError::Config(format!(
                "grid {grid:?} exceeds upsample target {target:?}"
            )));
        }
        let grid5 = tokens
            .reshape(&[b, nt, nh, nw, d])
            .permute(&[0, 4, 1, 2, 3]);
        let projected = conv3d(&grid5, &self.w, Some(&self.b), (0, 0, 0));
        Ok(upsample_trilinear(&projected, (t, h, w)))
    }
}

pub struct ConvTransBridge {
    lin_w: Var,
    lin_b: Var,
    ln_gamma: Var,
    ln_beta: Var,
}

impl ConvTransBridge {
    pub fn bind(params: &Bound, stage: usize) -> Self {
        ConvTransBridge {
            lin_w: params.take(&format!("stage{stage}.ct.lin.w")),
            lin_b: params.take(&format!("stage{stage}.ct.lin.b")),
            ln_gamma: params.take(&format!("stage{stage}.ct.ln.gamma")),
            ln_beta: params.take(&format!("stage{stage}.ct.ln.beta")),
        }
    }

    /// conv feature (B, C, T, H, W) → tokens (B, P, D).
    pub fn forward(&self, feature: &Var, grid: (usize, usize, usize)) -> Var {
        let (b, c, _, _, _) = dims5(feature);
        let (nt, nh, nw) = grid;
        let pooled = adaptive_avg_pool3d(feature, grid);
        let tokens = pooled
            .reshape(&[b, c, nt * nh * nw])
            .permute(&[0, 2, 1]); // (B, P, C)
        let embedded = linear(&tokens, &self.lin_w, Some(&self.lin_b));
        layer_norm(&embedded, &self.ln_gamma, &self.ln_beta)
    }
}
