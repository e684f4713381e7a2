//! Single-scale SSIM with the standard 11×11 Gaussian window (σ = 1.5) and
//! stabilizers C1 = (0.01·255)², C2 = (0.03·255)², averaged over all valid
//! window positions.

use ndarray::ArrayView2;

use crate::SigError;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

pub fn ssim(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64, SigError> {
    if a.shape() != b.shape() {
        return Err(SigError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (h, w) = (a.shape()[0], a.shape()[1]);
    if h < WINDOW || w < WINDOW {
        return Err(SigError::ShapeMismatch(format!(
            "images must be at least {WINDOW}x{WINDOW}, got {h}x{w}"
        )));
    }
    let k = gaussian_kernel();
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=(h - WINDOW) {
        for x0 in 0..=(w - WINDOW) {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            for dy in 0..WINDOW {
                for dx in 0..WINDOW {
                    let wgt = k[dy] * k[dx];
                    mu_a += wgt * a[[y0 + dy, x0 + dx]];
                    mu_b += wgt * b[[y0 + dy, x0 + dx]];
                }
            }
            let mut var_a = 0.0;
            let mut var_b = 0.0;
            let mut cov = 0.0;
            for dy in 0..WINDOW {
                for dx in 0..WINDOW {
                    let wgt = k[dy] * k[dx];
                    let da = a[[y0 + dy, x0 + dx]] - mu_a;
                    let db = b[[y0 + dy, x0 + dx]] - mu_b;
                    var_a += wgt * da * da;
                    var_b += wgt * db * db;
                    cov += wgt * da * db;
                }
            }
            let num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
            let den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}
