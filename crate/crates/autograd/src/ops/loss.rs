//! Fused waveform losses over row-major batches of signals.

use ndarray::IxDyn;

use crate::graph::make_op;
use crate::{arr_from, Arr, Var};

/// Sum of squares below which a signal is treated as constant (degenerate
/// correlation).
const VAR_EPS: f64 = 1e-24;

/// Mean over rows of `1 − r(pred_row, target_row)`.
///
/// Rows where either side has (numerically) zero variance contribute the
/// zero-correlation value 1 with zero gradient; the count of such rows is
/// returned so callers can surface it.
pub fn pearson_loss_rows(pred: &Var, target: &Arr) -> (Var, usize) {
    let ps = pred.shape().to_vec();
    assert_eq!(ps.len(), 2, "pearson_loss_rows expects (B, L)");
    assert_eq!(target.shape(), pred.shape(), "pred/target shape mismatch");
    let (b, l) = (ps[0], ps[1]);
    assert!(l >= 2, "pearson needs at least 2 samples");

    let p2 = pred.value().view().into_shape_with_order((b, l)).unwrap();
    let t2 = target.view().into_shape_with_order((b, l)).unwrap();

    let mut total = 0.0;
    let mut degenerate = 0usize;
    // Per-row gradient of the row loss wrt pred, before the 1/B batch factor.
    let mut grad = Arr::zeros(IxDyn(&ps));
    {
        let mut g2 = grad.view_mut().into_shape_with_order((b, l)).unwrap();
        for r in 0..b {
            let y = p2.row(r);
            let t = t2.row(r);
            let ym = y.mean().unwrap();
            let tm = t.mean().unwrap();
            let mut saa = 0.0;
            let mut sbb = 0.0;
            let mut sab = 0.0;
            for i in 0..l {
                let a = y[i] - ym;
                let bb = t[i] - tm;
                saa += a * a;
                sbb += bb * bb;
                sab += a * bb;
            }
            if saa < VAR_EPS || sbb < VAR_EPS {
                degenerate += 1;
                total += 1.0;
                continue;
            }
            let denom = (saa * sbb).sqrt();
            let r_coef = sab / denom;
            total += 1.0 - r_coef;
            for i in 0..l {
                let a = y[i] - ym;
                let bb = t[i] - tm;
                // d r / d y_i ; the mean-removal term vanishes because both
                // centered sums are zero.
                let dr = bb / denom - (sab / saa) * a / denom;
                g2[[r, i]] = -dr;
            }
        }
    }
    let loss = total / b as f64;
    let var = make_op(&[pred], arr_from(&[1], vec![loss]), move |g| {
        let gs = g[[0]] / b as f64;
        vec![Some(&grad * gs)]
    });
    (var, degenerate)
}

/// Smooth-L1 (Huber at delta 1) between `pred` and `target`, averaged over
/// every sample: `0.5·d²` for `|d| < 1`, else `|d| − 0.5`.
pub fn smooth_l1_rows(pred: &Var, target: &Arr) -> Var {
    assert_eq!(target.shape(), pred.shape(), "pred/target shape mismatch");
    let n = pred.value().len() as f64;
    let mut total = 0.0;
    let mut grad = Arr::zeros(pred.value().raw_dim());
    for ((gslot, &y), &t) in grad.iter_mut().zip(pred.value().iter()).zip(target.iter()) {
        let d = y - t;
        if d.abs() < 1.0 {
            total += 0.5 * d * d;
            *gslot = d;
        } else {
            total += d.abs() - 0.5;
            *gslot = d.signum();
        }
    }
    make_op(&[pred], arr_from(&[1], vec![total / n]), move |g| {
        let gs = g[[0]] / n;
        vec![Some(&grad * gs)]
    })
}

/// `Σ x ∘ w` as a `[1]` var; handy for scalarizing outputs in gradient tests.
pub fn weighted_sum(x: &Var, w: &Arr) -> Var {
    assert_eq!(x.shape(), w.shape());
    let total: f64 = x.value().iter().zip(w.iter()).map(|(a, b)| a * b).sum();
    let wsaved = w.clone();
    make_op(&[x], arr_from(&[1], vec![total]), move |g| {
        vec![Some(&wsaved * g[[0]])]
    })
}
