//! Model configuration: every architectural hyperparameter, the named
//! profiles, validation of the structural invariants, and the flat
//! `key = value` config-file format (unknown keys rejected).

use crate::{fnv1a64, VidError};

/// Structural ablation switches. A set flag removes the piece.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ablation {
    /// Replace the attention weighting with identity (keep the raw feature).
    pub ga: bool,
    /// Drop only the spatial attention map of the weighting.
    pub s_ga: bool,
    /// Drop only the temporal attention map of the weighting.
    pub t_ga: bool,
    /// Drop the spatial branch of the token attention.
    pub s_mhsa: bool,
    /// Drop the temporal branch of the token attention.
    pub t_mhsa: bool,
    /// Remove the whole convolution branch (first head absent).
    pub lcb: bool,
    /// Remove the whole transformer branch (second head absent).
    pub gtb: bool,
    /// Zero the conv→transformer bridge.
    pub c_tb: bool,
    /// Zero the transformer→conv bridge.
    pub t_cb: bool,
}

pub const ABLATION_FLAGS: [&str; 9] =
    ["ga", "s_ga", "t_ga", "s_mhsa", "t_mhsa", "lcb", "gtb", "c_tb", "t_cb"];

impl Ablation {
    pub fn set(&mut self, flag: &str) -> Result<(), VidError> {
        match flag {
            "ga" => self.ga = true,
            "s_ga" => self.s_ga = true,
            "t_ga" => self.t_ga = true,
            "s_mhsa" => self.s_mhsa = true,
            "t_mhsa" => self.t_mhsa = true,
            "lcb" => self.lcb = true,
            "gtb" => self.gtb = true,
            "c_tb" => self.c_tb = true,
            "t_cb" => self.t_cb = true,
            other => {
                return Err(VidError::Config(format!("unknown ablation flag `{other}`")))
            }
        }
        Ok(())
    }

    pub fn active(&self) -> Vec<&'static str> {
        let vals = [
            self.ga, self.s_ga, self.t_ga, self.s_mhsa, self.t_mhsa, self.lcb, self.gtb,
            self.c_tb, self.t_cb,
        ];
        ABLATION_FLAGS
            .iter()
            .zip(vals)
            .filter_map(|(n, v)| v.then_some(*n))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub channels: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub patch: (usize, usize, usize),
    pub stem_width: usize,
    pub stage_widths: Vec<usize>,
    pub embed_dim: usize,
    pub conv_heads: usize,
    pub transformer_heads: usize,
    pub ffn_hidden: usize,
    pub gn_groups: usize,
    pub dr: usize,
    pub mlp_hidden: usize,
    pub alpha: f64,
    pub ablation: Ablation,
    pub seed: u64,
}

impl ModelConfig {
    /// Full-scale profile: 250-frame windows at 128×128, 25×16×16 patches.
    pub fn paper_profile() -> Self {
        ModelConfig {
            channels: 3,
            frames: 250,
            height: 128,
            width: 128,
            fps: 30.0,
            patch: (25, 16, 16),
            stem_width: 16,
            stage_widths: vec![16, 32, 64],
            embed_dim: 64,
            conv_heads: 4,
            transformer_heads: 4,
            ffn_hidden: 128,
            gn_groups: 4,
            dr: 4,
            mlp_hidden: 256,
            alpha: 0.5,
            ablation: Ablation::default(),
            seed: 0,
        }
    }

    /// Desk-scale profile: 50-frame windows at 32×32, 10×8×8 patches.
    pub fn test_profile() -> Self {
        ModelConfig {
            channels: 3,
            frames: 50,
            height: 32,
            width: 32,
            fps: 10.0,
            patch: (10, 8, 8),
            stem_width: 8,
            stage_widths: vec![16, 32, 64],
            embed_dim: 64,
            conv_heads: 4,
            transformer_heads: 4,
            ffn_hidden: 128,
            gn_groups: 4,
            dr: 4,
            mlp_hidden: 256,
            alpha: 0.5,
            ablation: Ablation::default(),
            seed: 0,
        }
    }

    /// Minimal single-stage profile for exhaustive gradient checking.
    pub fn micro_profile() -> Self {
        ModelConfig {
            channels: 3,
            frames: 10,
            height: 16,
            width: 16,
            fps: 10.0,
            patch: (5, 4, 4),
            stem_width: 4,
            stage_widths: vec![8],
            embed_dim: 16,
            conv_heads: 2,
            transformer_heads: 2,
            ffn_hidden: 32,
            gn_groups: 4,
            dr: 2,
            mlp_hidden: 32,
            alpha: 0.5,
            ablation: Ablation::default(),
            seed: 0,
        }
    }

    pub fn by_name(name: &str) -> Result<Self, VidError> {
        match name {
            "paper" => Ok(Self::paper_profile()),
            "test" => Ok(Self::test_profile()),
            "micro" => Ok(Self::micro_profile()),
            other => Err(VidError::Config(format!("unknown profile `{other}`"))),
        }
    }

    pub fn stages(&self) -> usize {
        self.stage_widths.len()
    }

    /// Patch-grid dimensions (nt, nh, nw).
    pub fn grid(&self) -> (usize, usize, usize) {
        (
            self.frames / self.patch.0,
            self.height / self.patch.1,
            self.width / self.patch.2,
        )
    }

    pub fn token_count(&self) -> usize {
        let (nt, nh, nw) = self.grid();
        nt * nh * nw
    }

    pub fn cube_len(&self) -> usize {
        self.channels * self.patch.0 * self.patch.1 * self.patch.2
    }

    /// Channels entering conv stage `k` (0-based).
    pub fn stage_in_channels(&self, k: usize) -> usize {
        if k == 0 {
            self.stem_width
        } else {
            self.stage_widths[k - 1]
        }
    }

    /// Spatial edge lengths entering conv stage `k`: halved after every
    /// stage except the last.
    pub fn stage_in_hw(&self, k: usize) -> (usize, usize) {
        (self.height >> k, self.width >> k)
    }

    pub fn validate(&self) -> Result<(), VidError> {
        let err = |m: String| Err(VidError::Config(m));
        if self.channels == 0 || self.frames == 0 || self.height == 0 || self.width == 0 {
            return err("input profile dimensions must be positive".into());
        }
        if self.stage_widths.is_empty() {
            return err("need at least one stage".into());
        }
        let (pt, ph, pw) = self.patch;
        if pt == 0 || ph == 0 || pw == 0 {
            return err("patch dimensions must be positive".into());
        }
        if self.frames % pt != 0 || self.height % ph != 0 || self.width % pw != 0 {
            return err(format!(
                "patch ({pt},{ph},{pw}) must divide the input profile ({},{},{})",
                self.frames, self.height, self.width
            ));
        }
        for k in 0..self.stages() {
            let c = self.stage_in_channels(k);
            if c % self.conv_heads != 0 {
                return err(format!(
                    "conv attention heads ({}) must divide stage {k} input channels ({c})",
                    self.conv_heads
                ));
            }
            let w = self.stage_widths[k];
            if w % self.gn_groups != 0 {
                return err(format!(
                    "group-norm groups ({}) must divide stage {k} width ({w})",
                    self.gn_groups
                ));
            }
            let (h, w2) = self.stage_in_hw(k);
            let (_, nh, nw) = self.grid();
            if h < nh || w2 < nw {
                return err(format!(
                    "stage {k} spatial extent {h}x{w2} is below the patch grid {nh}x{nw}; \
                     use larger spatial patches or fewer stages"
                ));
            }
            if h % 2 != 0 && k + 1 < self.stages() {
                return err(format!("stage {k} spatial extent {h} is not divisible by 2"));
            }
        }
        if self.embed_dim % self.transformer_heads != 0 {
            return err(format!(
                "transformer heads ({}) must divide the embedding dim ({})",
                self.transformer_heads, self.embed_dim
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return err(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if self.dr == 0 || self.mlp_hidden == 0 || self.ffn_hidden == 0 {
            return err("head widths must be positive".into());
        }
        if self.ablation.lcb && self.ablation.gtb {
            return err("cannot ablate both branches at once".into());
        }
        Ok(())
    }

    /// Canonical flat serialization; key order is fixed so the fingerprint
    /// is stable.
    pub fn canonical_text(&self) -> String {
        let widths: Vec<String> = self.stage_widths.iter().map(|w| w.to_string()).collect();
        let mut s = String::new();
        let mut push = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        push("channels", self.channels.to_string());
        push("frames", self.frames.to_string());
        push("height", self.height.to_string());
        push("width", self.width.to_string());
        push("fps", format!("{}", self.fps));
        push("patch_t", self.patch.0.to_string());
        push("patch_h", self.patch.1.to_string());
        push("patch_w", self.patch.2.to_string());
        push("stem_width", self.stem_width.to_string());
        push("stage_widths", widths.join(","));
        push("embed_dim", self.embed_dim.to_string());
        push("conv_heads", self.conv_heads.to_string());
        push("transformer_heads", self.transformer_heads.to_string());
        push("ffn_hidden", self.ffn_hidden.to_string());
        push("gn_groups", self.gn_groups.to_string());
        push("dr", self.dr.to_string());
        push("mlp_hidden", self.mlp_hidden.to_string());
        push("alpha", format!("{}", self.alpha));
        push("ablate", {
            let a = self.ablation.active();
            if a.is_empty() { "none".to_string() } else { a.join(",") }
        });
        push("seed", self.seed.to_string());
        s
    }

    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.canonical_text().as_bytes())
    }

    /// Parses the flat `key = value` format produced by `canonical_text`.
    /// Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<ModelConfig, VidError> {
        let mut cfg = ModelConfig::test_profile();
        cfg.ablation = Ablation::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(VidError::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    ln + 1
                )));
            };
            let (k, v) = (k.trim(), v.trim());
            let parse_usize = |v: &str| -> Result<usize, VidError> {
                v.parse()
                    .map_err(|_| VidError::Config(format!("line {}: bad integer `{v}`", ln + 1)))
            };
            let parse_f64 = |v: &str| -> Result<f64, VidError> {
                v.parse()
                    .map_err(|_| VidError::Config(format!("line {}: bad number `{v}`", ln + 1)))
            };
            match k {
                "channels" => cfg.channels = parse_usize(v)?,
                "frames" => cfg.frames = parse_usize(v)?,
                "height" => cfg.height = parse_usize(v)?,
                "width" => cfg.width = parse_usize(v)?,
                "fps" => cfg.fps = parse_f64(v)?,
                "patch_t" => cfg.patch.0 = parse_usize(v)?,
                "patch_h" => cfg.patch.1 = parse_usize(v)?,
                "patch_w" => cfg.patch.2 = parse_usize(v)?,
                "stem_width" => cfg.stem_width = parse_usize(v)?,
                "stage_widths" => {
                    cfg.stage_widths = v
                        .split(',')
                        .map(|p| {
                            p.trim().parse().map_err(|_| {
                                VidError::Config(format!("line {}: bad width `{p}`", ln + 1))
                            })
                        })
                        .collect::<Result<_, _>>()?;
                }
                "embed_dim" => cfg.embed_dim = parse_usize(v)?,
                "conv_heads" => cfg.conv_heads = parse_usize(v)?,
                "transformer_heads" => cfg.transformer_heads = parse_usize(v)?,
                "ffn_hidden" => cfg.ffn_hidden = parse_usize(v)?,
                "gn_groups" => cfg.gn_groups = parse_usize(v)?,
                "dr" => cfg.dr = parse_usize(v)?,
                "mlp_hidden" => cfg.mlp_hidden = parse_usize(v)?,
                "alpha" => cfg.alpha = parse_f64(v)?,
                "seed" => {
                    cfg.seed = v.parse().map_err(|_| {
                        VidError::Config(format!("line {}: bad seed `{v}`", ln + 1))
                    })?;
                }
                "ablate" => {
                    if v != "none" && !v.is_empty() {
                        for flag in v.split(',') {
                            cfg.ablation.set(flag.trim())?;
                        }
                    }
                }
                other => {
                    return Err(VidError::Config(format!(
                        "line {}: unknown key `{other}`",
                        ln + 1
                    )));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ModelConfig, VidError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), VidError> {
        std::fs::write(path, self.canonical_text())?;
        Ok(())
    }
}
