//! Scene renderer: per-pixel color = illumination × (specular + diffuse)
//! plus sensor noise, where the diffuse term is an affine map of the
//! instantaneous pulse value with a per-pixel gain field, subject to motion
//! jitter and 8-bit quantization.

use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sigproc::Waveform;

use crate::SimError;

#[derive(Clone, Copy, Debug)]
pub enum Illumination {
    Constant(f64),
    LinearDrift { from: f64, to: f64 },
    Sinusoid { mean: f64, amplitude: f64, period_s: f64 },
}

impl Illumination {
    pub fn at(&self, t: f64, duration: f64) -> f64 {
        match *self {
            Illumination::Constant(v) => v,
            Illumination::LinearDrift { from, to } => {
                from + (to - from) * (t / duration).clamp(0.0, 1.0)
            }
            Illumination::Sinusoid { mean, amplitude, period_s } => {
                mean + amplitude * (2.0 * std::f64::consts::PI * t / period_s).sin()
            }
        }
    }

    fn range(&self) -> (f64, f64) {
        match *self {
            Illumination::Constant(v) => (v, v),
            Illumination::LinearDrift { from, to } => (from.min(to), from.max(to)),
            Illumination::Sinusoid { mean, amplitude, .. } => {
                (mean - amplitude.abs(), mean + amplitude.abs())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum SkinMask {
    /// Centered rectangle covering `fraction` of each dimension.
    CenterRect { fraction: f64 },
    Custom(Array2<bool>),
}

#[derive(Clone, Copy, Debug)]
pub enum GainField {
    Uniform,
    /// Smooth per-pixel gain in [min, 1], from a seeded coarse grid.
    SmoothRandom { min: f64 },
}

#[derive(Clone, Debug)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub duration_s: f64,
    pub mask: SkinMask,
    pub illumination: Illumination,
    /// Diffuse reflection per channel: `base + bvp_gain · gain(ρ) · y(t)`.
    pub diffuse_base: [f64; 3],
    pub diffuse_bvp_gain: [f64; 3],
    /// Pulse-independent specular term per channel.
    pub specular: [f64; 3],
    /// Non-skin pixel diffuse level per channel.
    pub background: [f64; 3],
    pub gain_field: GainField,
    pub jitter_max_px: usize,
    pub jitter_sigma: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SceneConfig {
    /// A small scene with physiologically flavored defaults: green carries
    /// the strongest pulse gain.
    pub fn simple(height: usize, width: usize, fps: f64, duration_s: f64, seed: u64) -> Self {
        SceneConfig {
            height,
            width,
            fps,
            duration_s,
            mask: SkinMask::CenterRect { fraction: 0.62 },
            illumination: Illumination::Constant(1.0),
            diffuse_base: [92.0, 110.0, 100.0],
            diffuse_bvp_gain: [5.0, 12.0, 7.0],
            specular: [18.0, 18.0, 18.0],
            background: [70.0, 74.0, 80.0],
            gain_field: GainField::SmoothRandom { min: 0.35 },
            jitter_max_px: 0,
            jitter_sigma: 0.0,
            noise_sigma: 0.0,
            seed,
        }
    }

    fn mask_array(&self) -> Array2<bool> {
        match &self.mask {
            SkinMask::Custom(m) => {
                assert_eq!(m.shape(), [self.height, self.width], "mask size mismatch");
                m.clone()
            }
            SkinMask::CenterRect { fraction } => {
                let fh = (self.height as f64 * fraction).round() as usize;
                let fw = (self.width as f64 * fraction).round() as usize;
                let y0 = (self.height - fh) / 2;
                let x0 = (self.width - fw) / 2;
                Array2::from_shape_fn((self.height, self.width), |(y, x)| {
                    y >= y0 && y < y0 + fh && x >= x0 && x < x0 + fw
                })
            }
        }
    }

    fn gain_array(&self, rng: &mut ChaCha8Rng) -> Array2<f64> {
        match self.gain_field {
            GainField::Uniform => Array2::from_elem((self.height, self.width), 1.0),
            GainField::SmoothRandom { min } => {
                let gh = (self.height / 8).max(2) + 1;
                let gw = (self.width / 8).max(2) + 1;
                let grid =
                    Array2::from_shape_fn((gh, gw), |_| min + (1.0 - min) * rng.random::<f64>());
                Array2::from_shape_fn((self.height, self.width), |(y, x)| {
                    let fy = y as f64 / self.height as f64 * (gh - 1) as f64;
                    let fx = x as f64 / self.width as f64 * (gw - 1) as f64;
                    let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
                    let (y1, x1) = ((y0 + 1).min(gh - 1), (x0 + 1).min(gw - 1));
                    let (dy, dx) = (fy - y0 as f64, fx - x0 as f64);
                    grid[[y0, x0]] * (1.0 - dy) * (1.0 - dx)
                        + grid[[y0, x1]] * (1.0 - dy) * dx
                        + grid[[y1, x0]] * dy * (1.0 - dx)
                        + grid[[y1, x1]] * dy * dx
                })
            }
        }
    }
}

/// A rendered clip with its frame-aligned ground truth.
#[derive(Clone, Debug)]
pub struct RenderedClip {
    /// (T, H, W, 3), 8-bit RGB.
    pub frames: Array4<u8>,
    pub fps: f64,
    /// Pulse value at each frame instant (rate = fps).
    pub ground_truth: Waveform,
    pub mask: Array2<bool>,
}

/// Renders `scene.duration_s` seconds of video driven by `bvp`.
pub fn render_clip(bvp: &Waveform, scene: &SceneConfig) -> Result<RenderedClip, SimError> {
    if scene.duration_s > bvp.duration_s() + 1e-9 {
        return Err(SimError::InvalidSpec(format!(
            "clip duration {} s exceeds bvp duration {} s",
            scene.duration_s,
            bvp.duration_s()
        )));
    }
    let n_frames = (scene.fps * scene.duration_s).round() as usize;
    let (h, w) = (scene.height, scene.width);
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let mask = scene.mask_array();
    if !mask.iter().any(|&m| m) {
        return Err(SimError::InvalidSpec("skin mask is empty".into()));
    }
    let gain = scene.gain_array(&mut rng);

    // Range check: every pixel must stay inside [0, 255] before noise for
    // every reachable pulse value and illumination level.
    let (y_lo, y_hi) = bvp
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (i_lo, i_hi) = scene.illumination.range();
    let mut offenders = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let is_skin = mask[[y, x]];
            for c in 0..3 {
                let (d_lo, d_hi) = if is_skin {
                    let g = gain[[y, x]] * scene.diffuse_bvp_gain[c];
                    let a = scene.diffuse_base[c] + g * y_lo;
                    let b = scene.diffuse_base[c] + g * y_hi;
                    (a.min(b), a.max(b))
                } else {
                    (scene.background[c], scene.background[c])
                };
                let lo = (scene.specular[c] + d_lo) * i_lo.min(i_hi);
                let hi = (scene.specular[c] + d_hi) * i_hi.max(i_lo);
                if lo < -0.5 || hi > 255.5 {
                    offenders.push((y, x));
                    break;
                }
            }
        }
    }
    if !offenders.is_empty() {
        let count = offenders.len();
        offenders.truncate(8);
        return Err(SimError::GainOverflow { count, first: offenders });
    }

    let noise = Normal::new(0.0, scene.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let jitter_step = Normal::new(0.0, scene.jitter_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut frames = Array4::<u8>::zeros((n_frames, h, w, 3));
    let mut gt = Vec::with_capacity(n_frames);
    let (mut jy, mut jx) = (0.0f64, 0.0f64);

    for f in 0..n_frames {
        let t = f as f64 / scene.fps;
        let yv = bvp.value_at(t);
        gt.push(yv);
        let illum = scene.illumination.at(t, scene.duration_s);
        if scene.jitter_max_px > 0 && scene.jitter_sigma > 0.0 {
            let m = scene.jitter_max_px as f64;
            jy = (jy + jitter_step.sample(&mut rng)).clamp(-m, m);
            jx = (jx + jitter_step.sample(&mut rng)).clamp(-m, m);
        }
        let (dy, dx) = (jy.round() as isize, jx.round() as isize);
        for y in 0..h {
            for x in 0..w {
                let sy = y as isize - dy;
                let sx = x as isize - dx;
                let in_src = sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize;
                let is_skin = in_src && mask[[sy as usize, sx as usize]];
                for c in 0..3 {
                    let diffuse = if is_skin {
                        scene.diffuse_base[c]
                            + gain[[sy as usize, sx as usize]] * scene.diffuse_bvp_gain[c] * yv
                    } else {
                        scene.background[c]
                    };
                    let mut v = illum * (scene.specular[c] + diffuse);
                    if scene.noise_sigma > 0.0 {
                        v += noise.sample(&mut rng);
                    }
                    frames[[f, y, x, c]] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }

    Ok(RenderedClip {
        frames,
        fps: scene.fps,
        ground_truth: Waveform::new(gt, scene.fps),
        mask,
    })
}
