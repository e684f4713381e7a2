//! Layer normalization (trailing axis) and group normalization (channel
//! groups of a rank-5 tensor), with affine parameters.

use ndarray::{Array1, Array2, IxDyn};

use crate::graph::make_op;
use crate::Var;

pub const NORM_EPS: f64 = 1e-5;

/// LayerNorm over the last axis; `gamma`/`beta` have that axis's length.
pub fn layer_norm(x: &Var, gamma: &Var, beta: &Var) -> Var {
    let xs = x.shape().to_vec();
    let d = *xs.last().expect("layer_norm input rank >= 1");
    assert_eq!(gamma.value().len(), d);
    assert_eq!(beta.value().len(), d);
    let rows: usize = xs[..xs.len() - 1].iter().product();

    let x2 = x.value().view().into_shape_with_order((rows, d)).unwrap().to_owned();
    let gv = gamma.value().view().into_shape_with_order(d).unwrap().to_owned();
    let bv = beta.value().view().into_shape_with_order(d).unwrap().to_owned();

    let mut xhat = Array2::<f64>::zeros((rows, d));
    let mut inv_std = Array1::<f64>::zeros(rows);
    let mut y2 = Array2::<f64>::zeros((rows, d));
    for r in 0..rows {
        let row = x2.row(r);
        let mu = row.mean().unwrap();
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
        let istd = 1.0 / (var + NORM_EPS).sqrt();
        inv_std[r] = istd;
        for i in 0..d {
            let h = (row[i] - mu) * istd;
            xhat[[r, i]] = h;
            y2[[r, i]] = h * gv[i] + bv[i];
        }
    }
    let out = y2.into_shape_with_order(IxDyn(&xs)).unwrap();

    make_op(&[x, gamma, beta], out, move |g| {
        let g2 = g.view().into_shape_with_order((rows, d)).unwrap();
        let mut dx = Array2::<f64>::zeros((rows, d));
        let mut dgamma = Array1::<f64>::zeros(d);
        let mut dbeta = Array1::<f64>::zeros(d);
        for r in 0..rows {
            let grow = g2.row(r);
            let hrow = xhat.row(r);
            let mut mean_dxhat = 0.0;
            let mut mean_dxhat_h = 0.0;
            for i in 0..d {
                let dxhat = grow[i] * gv[i];
                mean_dxhat += dxhat;
                mean_dxhat_h += dxhat * hrow[i];
                dgamma[i] += grow[i] * hrow[i];
                dbeta[i] += grow[i];
            }
            mean_dxhat /= d as f64;
            mean_dxhat_h /= d as f64;
            for i in 0..d {
                let dxhat = grow[i] * gv[i];
                dx[[r, i]] = inv_std[r] * (dxhat - mean_dxhat - hrow[i] * mean_dxhat_h);
            }
        }
        vec![
            Some(dx.into_shape_with_order(IxDyn(&xs)).unwrap()),
            Some(dgamma.into_dyn()),
            Some(dbeta.into_dyn()),
        ]
    })
}

/// GroupNorm over (C/groups, T, H, W) blocks of a (B, C, T, H, W) tensor.
pub fn group_norm(x: &Var, gamma: &Var, beta: &Var, groups: usize) -> Var {
    let xs = x.shape().to_vec();
    assert_eq!(xs.len(), 5, "group_norm expects rank 5");
    let (b, c) = (xs[0], xs[1]);
    let spatial: usize = xs[2] * xs[3] * xs[4];
    assert!(groups >= 1 && c % groups == 0, "groups must divide channels");
    assert_eq!(gamma.value().len(), c);
    assert_eq!(beta.value().len(), c);
    let cg = c / groups;
    let block = cg * spatial;

    let x3 = x
        .value()
        .view()
        .into_shape_with_order((b * groups, block))
        .unwrap()
        .to_owned();
    let gv = gamma.value().view().into_shape_with_order(c).unwrap().to_owned();
    let bv = beta.value().view().into_shape_with_order(c).unwrap().to_owned();

    let mut xhat = Array2::<f64>::zeros((b * groups, block));
    let mut inv_std = Array1::<f64>::zeros(b * groups);
    let mut y = Array2::<f64>::zeros((b * groups, block));
    for r in 0..b * groups {
        let row = x3.row(r);
        let mu = row.mean().unwrap();
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / block as f64;
        let istd = 1.0 / (var + NORM_EPS).sqrt();
        inv_std[r] = istd;
        let grp = r % groups;
        for i in 0..block {
            let ch = grp * cg + i / spatial;
            let h = (row[i] - mu) * istd;
            xhat[[r, i]] = h;
            y[[r, i]] = h * gv[ch] + bv[ch];
        }
    }
    let out = y.into_shape_with_order(IxDyn(&xs)).unwrap();

    make_op(&[x, gamma, beta], out, move |g| {
        let g2 = g.view().into_shape_with_order((b * groups, block)).unwrap();
        let mut dx = Array2::<f64>::zeros((b * groups, block));
        let mut dgamma = Array1::<f64>::zeros(c);
        let mut dbeta = Array1::<f64>::zeros(c);
        for r in 0..b * groups {
            let grow = g2.row(r);
            let hrow = xhat.row(r);
            let grp = r % groups;
            let mut mean_dxhat = 0.0;
            let mut mean_dxhat_h = 0.0;
            for i in 0..block {
                let ch = grp * cg + i / spatial;
                let dxhat = grow[i] * gv[ch];
                mean_dxhat += dxhat;
                mean_dxhat_h += dxhat * hrow[i];
                dgamma[ch] += grow[i] * hrow[i];
                dbeta[ch] += grow[i];
            }
            mean_dxhat /= block as f64;
            mean_dxhat_h /= block as f64;
            for i in 0..block {
                let ch = grp * cg + i / spatial;
                let dxhat = grow[i] * gv[ch];
                dx[[r, i]] = inv_std[r] * (dxhat - mean_dxhat - hrow[i] * mean_dxhat_h);
            }
        }
        vec![
            Some(dx.into_shape_with_order(IxDyn(&xs)).unwrap()),
            Some(dgamma.into_dyn()),
            Some(dbeta.into_dyn()),
        ]
    })
}
