//! Scalar agreement metrics over paired heart-rate estimates.

pub fn mae(pairs: &[(f64, f64)]) -> f64 {
    pairs.iter().map(|(gt, est)| (est - gt).abs()).sum::<f64>() / pairs.len() as f64
}

pub fn rmse(pairs: &[(f64, f64)]) -> f64 {
    (pairs.iter().map(|(gt, est)| (est - gt) * (est - gt)).sum::<f64>() / pairs.len() as f64)
        .sqrt()
}

pub fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|(a, _)| a).sum::<f64>() / n;
    let my = pairs.iter().map(|(_, b)| b).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Bland–Altman agreement: per-pair (mean, difference) points and the
/// mean ± 1.96·sd limits (sample standard deviation).
#[derive(Clone, Debug)]
pub struct BlandAltman {
    pub points: Vec<(f64, f64)>,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub lower_limit: f64,
    pub upper_limit: f64,
}

pub fn bland_altman_limits(pairs: &[(f64, f64)]) -> BlandAltman {
    assert!(pairs.len() >= 2, "need at least two pairs");
    let points: Vec<(f64, f64)> = pairs
        .iter()
        .map(|(gt, est)| ((gt + est) / 2.0, est - gt))
        .collect();
    let n = points.len() as f64;
    let mean_diff = points.iter().map(|(_, d)| d).sum::<f64>() / n;
    let sd_diff = (points
        .iter()
        .map(|(_, d)| (d - mean_diff) * (d - mean_diff))
        .sum::<f64>()
        / (n - 1.0))
        .sqrt();
    BlandAltman {
        points,
        mean_diff,
        sd_diff,
        lower_limit: mean_diff - 1.96 * sd_diff,
        upper_limit: mean_diff + 1.96 * sd_diff,
    }
}
