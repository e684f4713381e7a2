//! Affine map over the trailing axis: `y[..., o] = Σ_i x[..., i]·w[i, o] + b[o]`.

use ndarray::{Array2, Axis, IxDyn};

use crate::graph::make_op;
use crate::{Arr, Var};

pub fn linear(x: &Var, w: &Var, bias: Option<&Var>) -> Var {
    let xs = x.shape().to_vec();
    let ws = w.shape().to_vec();
    assert_eq!(ws.len(), 2, "linear weight must be (in, out)");
    let d_in = *xs.last().expect("linear input rank >= 1");
    assert_eq!(d_in, ws[0], "linear dimension mismatch");
    let d_out = ws[1];
    let rows: usize = xs[..xs.len() - 1].iter().product();

    let x2 = x
        .value()
        .view()
        .into_shape_with_order((rows, d_in))
        .unwrap()
        .to_owned();
    let w2 = w.value().view().into_shape_with_order((d_in, d_out)).unwrap().to_owned();
    let mut y2 = x2.dot(&w2);
    if let Some(b) = bias {
        let bv = b.value().view().into_shape_with_order(d_out).unwrap();
        y2 += &bv;
    }
    let mut out_shape = xs.clone();
    *out_shape.last_mut().unwrap() = d_out;
    let out = y2.into_shape_with_order(IxDyn(&out_shape)).unwrap();

    let has_bias = bias.is_some();
    let zero = Var::constant(Arr::zeros(IxDyn(&[1])));
    let bref: &Var = bias.unwrap_or(&zero);
    let xsv = x.shared_value();
    let wsv = w.shared_value();
    make_op(&[x, w, bref], out, move |g| {
        let g2: Array2<f64> = g
            .view()
            .into_shape_with_order((rows, d_out))
            .unwrap()
            .to_owned();
        let x2 = xsv.view().into_shape_with_order((rows, d_in)).unwrap().to_owned();
        let w2 = wsv.view().into_shape_with_order((d_in, d_out)).unwrap().to_owned();
        let dx = g2.dot(&w2.t()).into_shape_with_order(IxDyn(&xs)).unwrap();
        let dw = x2.t().dot(&g2).into_shape_with_order(IxDyn(&ws)).unwrap();
        let db = has_bias.then(|| g2.sum_axis(Axis(0)).into_dyn());
        vec![Some(dx), Some(dw), db]
    })
}
