//! On-disk dataset index: one directory per clip, holding either the packed
//! `frames.bin` tensor or a `frames/` directory of raw per-frame blobs, plus
//! `gt.csv` and optional `meta.txt` (subject / tags).

use std::path::{Path, PathBuf};

use ndarray::{s, Array4};
use sigproc::Waveform;
use vidformer::fnv1a64;

use crate::HarnessError;

#[derive(Clone, Debug)]
pub struct ClipEntry {
    pub name: String,
    pub path: PathBuf,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    /// Ground truth resampled to the clip frame rate.
    pub gt: Waveform,
    pub subject: Option<String>,
    pub tags: Vec<String>,
}

impl ClipEntry {
    /// Reads the pixel data (T, H, W, 3).
    pub fn load_frames(&self) -> Result<Array4<u8>, HarnessError> {
        load_frames_any(&self.path).map(|(frames, _)| frames)
    }
}

#[derive(Clone, Debug)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub clips: Vec<ClipEntry>,
    pub fingerprint: u64,
}

fn load_frames_any(dir: &Path) -> Result<(Array4<u8>, f64), HarnessError> {
    let packed = dir.join(skinsim::FRAMES_FILE);
    if packed.is_file() {
        return skinsim::read_frames(&packed)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", dir.display())));
    }
    let frames_dir = dir.join("frames");
    if frames_dir.is_dir() {
        return load_frames_directory(&frames_dir)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", dir.display())));
    }
    Err(HarnessError::Data(format!(
        "{}: no frames.bin or frames/ directory",
        dir.display()
    )))
}

/// Frames-directory variant: `frames/meta.txt` with fps/height/width and
/// numbered `*.raw` blobs of H·W·3 bytes each.
fn load_frames_directory(dir: &Path) -> Result<(Array4<u8>, f64), String> {
    let meta = skinsim::read_meta(&dir.join("meta.txt"))
        .map_err(|e| format!("frames/meta.txt: {e}"))?;
    let get = |key: &str| -> Result<f64, String> {
        meta.iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.parse().ok())
            .ok_or_else(|| format!("frames/meta.txt missing `{key}`"))
    };
    let fps = get("fps")?;
    let h = get("height")? as usize;
    let w = get("width")? as usize;
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "raw"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err("frames/ holds no .raw files".into());
    }
    let mut data = Vec::with_capacity(names.len() * h * w * 3);
    for p in &names {
        let bytes = std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?;
        if bytes.len() != h * w * 3 {
            return Err(format!(
                "{}: expected {} bytes, got {}",
                p.display(),
                h * w * 3,
                bytes.len()
            ));
        }
        data.extend_from_slice(&bytes);
    }
    let t = names.len();
    Array4::from_shape_vec((t, h, w, 3), data)
        .map(|a| (a, fps))
        .map_err(|e| e.to_string())
}

/// Scans `root` for clip directories and validates each one. The ground
/// truth is resampled to the clip frame rate; its span must cover the clip.
pub fn ingest(root: &Path) -> Result<DatasetIndex, HarnessError> {
    if !root.is_dir() {
        return Err(HarnessError::Data(format!("{} is not a directory", root.display())));
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(HarnessError::Data(format!("{} holds no clip directories", root.display())));
    }

    let mut clips = Vec::new();
    let mut fp_input = String::new();
    for dir in dirs {
        let name = dir.file_name().unwrap().to_string_lossy().to_string();
        let (frames, fps) = load_frames_any(&dir)?;
        let gt_path = dir.join(skinsim::GT_FILE);
        if !gt_path.is_file() {
            return Err(HarnessError::Data(format!(
                "clip `{name}`: missing {}",
                skinsim::GT_FILE
            )));
        }
        let gt_raw = Waveform::read_csv(&gt_path)
            .map_err(|e| HarnessError::Data(format!("clip `{name}`: {e}")))?;
        let t = frames.shape()[0];
        // The ground truth must span the clip (allowing one frame of slack
        // before resampling).
        if gt_raw.duration_s() + 1.5 / fps < t as f64 / fps {
            return Err(HarnessError::Data(format!(
                "clip `{name}`: ground truth covers {:.2}s but the clip lasts {:.2}s",
                gt_raw.duration_s(),
                t as f64 / fps
            )));
        }
        let mut gt = gt_raw.resample(fps);
        if gt.len() < t {
            return Err(HarnessError::Data(format!(
                "clip `{name}`: resampled ground truth has {} samples for {} frames",
                gt.len(),
                t
            )));
        }
        gt.samples.truncate(t);

        let mut subject = None;
        let mut tags = Vec::new();
        let meta_path = dir.join(skinsim::META_FILE);
        if meta_path.is_file() {
            if let Ok(meta) = skinsim::read_meta(&meta_path) {
                for (k, v) in meta {
                    match k.as_str() {
                        "subject" => subject = Some(v),
                        "tags" => {
                            tags = v.split(',').map(|s| s.trim().to_string()).collect()
                        }
                        _ => {}
                    }
                }
            }
        }

        let frames_file = dir.join(skinsim::FRAMES_FILE);
        let size = std::fs::metadata(&frames_file).map(|m| m.len()).unwrap_or(0);
        fp_input.push_str(&format!("{name}:{size}:{t};"));

        clips.push(ClipEntry {
            name,
            path: dir,
            frames: t,
            height: frames.shape()[1],
            width: frames.shape()[2],
            fps,
            gt,
            subject,
            tags,
        });
    }
    let fingerprint = fnv1a64(fp_input.as_bytes());
    Ok(DatasetIndex { root: root.to_path_buf(), clips, fingerprint })
}

/// Window start offsets: 0, stride, 2·stride, …, with the trailing
/// remainder dropped.
pub fn window_starts(total: usize, window: usize, stride: usize) -> Vec<usize> {
    assert!(stride > 0);
    if total < window {
        return Vec::new();
    }
    (0..=total - window).step_by(stride).collect()
}

/// Slices a clip into sliding windows paired with the aligned ground-truth
/// slice. A clip shorter than one window yields no windows (the caller
/// logs the skip).
pub fn window_clip(
    frames: &Array4<u8>,
    gt: &Waveform,
    window: usize,
    stride: usize,
) -> Vec<(Array4<u8>, Waveform)> {
    let t = frames.shape()[0];
    window_starts(t, window, stride)
        .into_iter()
        .map(|start| {
            let slice = frames.slice(s![start..start + window, .., .., ..]).to_owned();
            let gt_slice =
                Waveform::new(gt.samples[start..start + window].to_vec(), gt.rate);
            (slice, gt_slice)
        })
        .collect()
}
