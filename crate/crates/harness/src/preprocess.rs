//! Window preprocessing: region-of-interest crop through a pluggable
//! provider (geometric center crop by default), bilinear resize to the
//! profile resolution, and scaling to [0, 1].

use autograd::Arr;
use ndarray::{Array2, Array4, IxDyn};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub y0: usize,
    pub x0: usize,
    pub h: usize,
    pub w: usize,
}

pub trait RoiProvider {
    fn roi(&self, height: usize, width: usize) -> Result<Rect, String>;
}

/// Centered square covering the smaller edge.
pub struct CenterCrop;

impl RoiProvider for CenterCrop {
    fn roi(&self, height: usize, width: usize) -> Result<Rect, String> {
        let side = height.min(width);
        Ok(Rect {
            y0: (height - side) / 2,
            x0: (width - side) / 2,
            h: side,
            w: side,
        })
    }
}

/// Square extension of a skin mask's bounding box, clamped to the frame.
pub struct MaskRoi(pub Array2<bool>);

impl RoiProvider for MaskRoi {
    fn roi(&self, height: usize, width: usize) -> Result<Rect, String> {
        if self.0.shape() != [height, width] {
            return Err(format!(
                "mask {:?} does not match frame {height}x{width}",
                self.0.shape()
            ));
        }
        let mut y_min = height;
        let mut y_max = 0usize;
        let mut x_min = width;
        let mut x_max = 0usize;
        for ((y, x), &m) in self.0.indexed_iter() {
            if m {
                y_min = y_min.min(y);
                y_max = y_max.max(y);
                x_min = x_min.min(x);
                x_max = x_max.max(x);
            }
        }
        if y_min > y_max {
            return Err("empty mask".into());
        }
        let side = (y_max - y_min + 1).max(x_max - x_min + 1).min(height.min(width));
        let y0 = y_min.min(height - side);
        let x0 = x_min.min(width - side);
        Ok(Rect { y0, x0, h: side, w: side })
    }
}

fn bilinear_resize_frame(
    frames: &Array4<u8>,
    t: usize,
    c: usize,
    rect: Rect,
    out_h: usize,
    out_w: usize,
    out: &mut Arr,
) {
    for oy in 0..out_h {
        for ox in 0..out_w {
            let (src_y, src_x) = if rect.h == out_h && rect.w == out_w {
                (oy as f64, ox as f64)
            } else {
                (
                    ((oy as f64 + 0.5) * rect.h as f64 / out_h as f64 - 0.5)
                        .clamp(0.0, (rect.h - 1) as f64),
                    ((ox as f64 + 0.5) * rect.w as f64 / out_w as f64 - 0.5)
                        .clamp(0.0, (rect.w - 1) as f64),
                )
            };
            let y0 = src_y.floor() as usize;
            let x0 = src_x.floor() as usize;
            let y1 = (y0 + 1).min(rect.h - 1);
            let x1 = (x0 + 1).min(rect.w - 1);
            let fy = src_y - y0 as f64;
            let fx = src_x - x0 as f64;
            let sample = |yy: usize, xx: usize| {
                frames[[t, rect.y0 + yy, rect.x0 + xx, c]] as f64 / 255.0
            };
            let v = sample(y0, x0) * (1.0 - fy) * (1.0 - fx)
                + sample(y0, x1) * (1.0 - fy) * fx
                + sample(y1, x0) * fy * (1.0 - fx)
                + sample(y1, x1) * fy * fx;
            out[[c, t, oy, ox]] = v;
        }
    }
}

/// (T, H, W, 3) bytes → (C, T, out_h, out_w) floats in [0, 1]. A failing
/// ROI provider falls back to the center crop with a warning.
pub fn preprocess(
    frames: &Array4<u8>,
    roi: &dyn RoiProvider,
    out_h: usize,
    out_w: usize,
) -> Result<Arr, HarnessError> {
    let (t, h, w, c) = (
        frames.shape()[0],
        frames.shape()[1],
        frames.shape()[2],
        frames.shape()[3],
    );
    if c != 3 {
        return Err(HarnessError::Data(format!("expected 3 channels, got {c}")));
    }
    let rect = match roi.roi(h, w) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("warning: roi provider failed ({e}); falling back to center crop");
            CenterCrop.roi(h, w).expect("center crop cannot fail")
        }
    };
    if rect.y0 + rect.h > h || rect.x0 + rect.w > w || rect.h == 0 || rect.w == 0 {
        return Err(HarnessError::Data(format!("roi {rect:?} outside {h}x{w} frame")));
    }
    let mut out = Arr::zeros(IxDyn(&[3, t, out_h, out_w]));
    for ti in 0..t {
        for ci in 0..3 {
            bilinear_resize_frame(frames, ti, ci, rect, out_h, out_w, &mut out);
        }
    }
    Ok(out)
}

/// Stacks preprocessed windows (C, T, H, W) into a batch (B, C, T, H, W).
pub fn stack_batch(windows: &[Arr]) -> Arr {
    assert!(!windows.is_empty());
    let s = windows[0].shape().to_vec();
    let mut out = Arr::zeros(IxDyn(&[windows.len(), s[0], s[1], s[2], s[3]]));
    for (b, wdw) in windows.iter().enumerate() {
        assert_eq!(wdw.shape(), s.as_slice());
        out.slice_mut(ndarray::s![b, .., .., .., ..])
            .assign(&wdw.view().into_dimensionality::<ndarray::Ix4>().unwrap());
    }
    out
}
