//! Helpers for comparing analytic gradients against central finite
//! differences.

/// Symmetric relative error with an absolute floor: differences below the
/// finite-difference noise floor are not meaningful.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff <= 1e-9 {
        return 0.0;
    }
    diff / a.abs().max(b.abs()).max(1e-6)
}

/// Central finite difference of `f` with respect to one coordinate of `x`.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], idx: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[idx] += h;
    let fp = f(&xp);
    xp[idx] = x[idx] - h;
    let fm = f(&xp);
    (fp - fm) / (2.0 * h)
}
