//! Fused scaled-dot-product attention: `softmax(Q·Kᵀ·scale)·V` batched over
//! the leading axis. The forward pass streams over row blocks so the full
//! score matrix is never materialized for long sequences; the backward pass
//! recomputes the probabilities per block.

use ndarray::{s, Array2, Axis, IxDyn};
use rayon::prelude::*;

use crate::graph::make_op;
use crate::{Arr, Var};

const ROW_BLOCK: usize = 512;

/// Dense softmax(Q·Kᵀ·scale) probabilities, (N, Lq, Lk). Diagnostic only —
/// not differentiable and materializes the full matrix.
pub fn attention_probs(q: &Arr, k: &Arr, scale: f64) -> Arr {
    let (n, lq, d) = (q.shape()[0], q.shape()[1], q.shape()[2]);
    let lk = k.shape()[1];
    let q3 = q.view().into_shape_with_order((n, lq, d)).unwrap();
    let k3 = k.view().into_shape_with_order((n, lk, d)).unwrap();
    let mut out = Arr::zeros(IxDyn(&[n, lq, lk]));
    for ni in 0..n {
        let mut scores = q3.index_axis(Axis(0), ni).dot(&k3.index_axis(Axis(0), ni).t());
        scores *= scale;
        softmax_rows_inplace(&mut scores);
        out.slice_mut(s![ni, .., ..]).assign(&scores);
    }
    out
}

fn softmax_rows_inplace(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// q: (N, Lq, d), k: (N, Lk, d), v: (N, Lk, dv) → (N, Lq, dv).
pub fn attention(q: &Var, k: &Var, v: &Var, scale: f64) -> Var {
    let qs = q.shape().to_vec();
    let ks = k.shape().to_vec();
    let vs = v.shape().to_vec();
    assert!(qs.len() == 3 && ks.len() == 3 && vs.len() == 3);
    let (n, lq, d) = (qs[0], qs[1], qs[2]);
    let (lk, dv) = (ks[1], vs[2]);
    assert_eq!(ks[0], n);
    assert_eq!(vs[0], n);
    assert_eq!(ks[2], d, "q/k depth mismatch");
    assert_eq!(vs[1], lk, "k/v length mismatch");

    let q3 = q.value().view().into_shape_with_order((n, lq, d)).unwrap();
    let k3 = k.value().view().into_shape_with_order((n, lk, d)).unwrap();
    let v3 = v.value().view().into_shape_with_order((n, lk, dv)).unwrap();

    let mut blocks = Vec::new();
    for ni in 0..n {
        let mut r0 = 0;
        while r0 < lq {
            blocks.push((ni, r0, (r0 + ROW_BLOCK).min(lq)));
            r0 = (r0 + ROW_BLOCK).min(lq);
        }
    }

    let pieces: Vec<(usize, usize, usize, Array2<f64>)> = blocks
        .par_iter()
        .map(|&(ni, r0, r1)| {
            let qb = q3.slice(s![ni, r0..r1, ..]);
            let kn = k3.index_axis(Axis(0), ni);
            let vn = v3.index_axis(Axis(0), ni);
            let mut scores = qb.dot(&kn.t());
            scores *= scale;
            softmax_rows_inplace(&mut scores);
            (ni, r0, r1, scores.dot(&vn))
        })
        .collect();

    let mut out = Arr::zeros(IxDyn(&[n, lq, dv]));
    for (ni, r0, r1, piece) in pieces {
        out.slice_mut(s![ni, r0..r1, ..]).assign(&piece);
    }

    let (qv, kv, vv) = (q.shared_value(), k.shared_value(), v.shared_value());
    make_op(&[q, k, v], out, move |g| {
        let q3 = qv.view().into_shape_with_order((n, lq, d)).unwrap();
        let k3 = kv.view().into_shape_with_order((n, lk, d)).unwrap();
        let v3 = vv.view().into_shape_with_order((n, lk, dv)).unwrap();
        let g3 = g.view().into_shape_with_order((n, lq, dv)).unwrap();

        let per_n: Vec<(Array2<f64>, Array2<f64>, Array2<f64>)> = (0..n)
            .into_par_iter()
            .map(|ni| {
                let kn = k3.index_axis(Axis(0), ni);
                let vn = v3.index_axis(Axis(0), ni);
                let mut dq = Array2::<f64>::zeros((lq, d));
                let mut dk = Array2::<f64>::zeros((lk, d));
                let mut dvn = Array2::<f64>::zeros((lk, dv));
                let mut r0 = 0;
                while r0 < lq {
                    let r1 = (r0 + ROW_BLOCK).min(lq);
                    let qb = q3.slice(s![ni, r0..r1, ..]);
                    let gb = g3.slice(s![ni, r0..r1, ..]);
                    let mut probs = qb.dot(&kn.t());
                    probs *= scale;
                    softmax_rows_inplace(&mut probs);
                    // dP = dO·Vᵀ ; dS = P ∘ (dP − rowsum(dP∘P))
                    let mut dp = gb.dot(&vn.t());
                    for (mut dp_row, p_row) in dp.rows_mut().into_iter().zip(probs.rows()) {
                        let dot: f64 = dp_row.iter().zip(p_row.iter()).map(|(a, b)| a * b).sum();
                        for (dpv, pv) in dp_row.iter_mut().zip(p_row.iter()) {
                            *dpv = pv * (*dpv - dot);
                        }
                    }
                    let ds = dp; // renamed: now holds dS
                    dq.slice_mut(s![r0..r1, ..])
                        .assign(&(ds.dot(&kn).mapv(|x| x * scale)));
                    dk += &ds.t().dot(&qb).mapv(|x| x * scale);
                    dvn += &probs.t().dot(&gb);
                    r0 = r1;
                }
                (dq, dk, dvn)
            })
            .collect();

        let mut dq_all = Arr::zeros(IxDyn(&[n, lq, d]));
        let mut dk_all = Arr::zeros(IxDyn(&[n, lk, d]));
        let mut dv_all = Arr::zeros(IxDyn(&[n, lk, dv]));
        for (ni, (dq, dk, dvn)) in per_n.into_iter().enumerate() {
            dq_all.slice_mut(s![ni, .., ..]).assign(&dq);
            dk_all.slice_mut(s![ni, .., ..]).assign(&dk);
            dv_all.slice_mut(s![ni, .., ..]).assign(&dvn);
        }
        vec![Some(dq_all), Some(dk_all), Some(dv_all)]
    })
}
