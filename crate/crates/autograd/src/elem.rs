//! Elementwise arithmetic, activations and shape ops on [`Var`].

use ndarray::{IxDyn, SliceInfoElem};
use rayon::prelude::*;

use crate::graph::make_op;
use crate::{Arr, Var};

const PAR_CHUNK: usize = 65_536;

/// Parallel elementwise map over a standard-layout array. Each output slot
/// is written by exactly one worker, so the result is scheduling-invariant.
pub(crate) fn par_map(x: &Arr, f: impl Fn(f64) -> f64 + Sync) -> Arr {
    let src = x.as_slice().expect("standard layout");
    let mut out = vec![0.0f64; src.len()];
    out.par_chunks_mut(PAR_CHUNK)
        .zip(src.par_chunks(PAR_CHUNK))
        .for_each(|(dst, s)| {
            for (d, v) in dst.iter_mut().zip(s.iter()) {
                *d = f(*v);
            }
        });
    Arr::from_shape_vec(x.raw_dim(), out).unwrap()
}

/// Parallel elementwise combine of two equally shaped arrays.
pub(crate) fn par_zip(a: &Arr, b: &Arr, f: impl Fn(f64, f64) -> f64 + Sync) -> Arr {
    let sa = a.as_slice().expect("standard layout");
    let sb = b.as_slice().expect("standard layout");
    assert_eq!(sa.len(), sb.len());
    let mut out = vec![0.0f64; sa.len()];
    out.par_chunks_mut(PAR_CHUNK)
        .zip(sa.par_chunks(PAR_CHUNK).zip(sb.par_chunks(PAR_CHUNK)))
        .for_each(|(dst, (xa, xb))| {
            for ((d, va), vb) in dst.iter_mut().zip(xa.iter()).zip(xb.iter()) {
                *d = f(*va, *vb);
            }
        });
    Arr::from_shape_vec(a.raw_dim(), out).unwrap()
}

/// NumPy-style broadcast shape of two shapes; panics on incompatibility.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let n = a.len().max(b.len());
    let mut out = vec![0usize; n];
    for i in 0..n {
        let da = if i < n - a.len() { 1 } else { a[i - (n - a.len())] };
        let db = if i < n - b.len() { 1 } else { b[i - (n - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => panic!("shapes {a:?} and {b:?} are not broadcastable"),
        };
    }
    out
}

/// Reduces a broadcast gradient back onto `shape` by summing the expanded axes.
pub fn sum_to(grad: &Arr, shape: &[usize]) -> Arr {
    let mut g = grad.clone();
    while g.ndim() > shape.len() {
        g = g.sum_axis(ndarray::Axis(0));
    }
    for ax in 0..shape.len() {
        if shape[ax] == 1 && g.shape()[ax] > 1 {
            let summed = g.sum_axis(ndarray::Axis(ax));
            g = summed.insert_axis(ndarray::Axis(ax));
        }
    }
    g
}

fn broadcast_pair(a: &Arr, b: &Arr) -> (Arr, Vec<usize>) {
    let shape = broadcast_shape(a.shape(), b.shape());
    let av = a.broadcast(IxDyn(&shape)).expect("broadcast a");
    let bv = b.broadcast(IxDyn(&shape)).expect("broadcast b");
    (&av + &bv, shape)
}

impl Var {
    pub fn add(&self, other: &Var) -> Var {
        let out = if self.shape() == other.shape() {
            par_zip(self.value(), other.value(), |a, b| a + b)
        } else {
            broadcast_pair(self.value(), other.value()).0
        };
        let sa = self.shape().to_vec();
        let sb = other.shape().to_vec();
        make_op(&[self, other], out, move |g| {
            vec![Some(sum_to(g, &sa)), Some(sum_to(g, &sb))]
        })
    }

    pub fn sub(&self, other: &Var) -> Var {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Var) -> Var {
        let out = if self.shape() == other.shape() {
            par_zip(self.value(), other.value(), |a, b| a * b)
        } else {
            let shape = broadcast_shape(self.shape(), other.shape());
            let av = self.value().broadcast(IxDyn(&shape)).unwrap();
            let bv = other.value().broadcast(IxDyn(&shape)).unwrap();
            (&av * &bv).as_standard_layout().to_owned()
        };
        let (a, b) = (self.shared_value(), other.shared_value());
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        make_op(&[self, other], out, move |g| {
            let shape = g.shape().to_vec();
            let ga = if b.shape() == shape.as_slice() {
                par_zip(g, &b, |gv, bv| gv * bv)
            } else {
                let bv = b.broadcast(IxDyn(&shape)).unwrap();
                (g * &bv).as_standard_layout().to_owned()
            };
            let gb = if a.shape() == shape.as_slice() {
                par_zip(g, &a, |gv, av| gv * av)
            } else {
                let av = a.broadcast(IxDyn(&shape)).unwrap();
                (g * &av).as_standard_layout().to_owned()
            };
            vec![Some(sum_to(&ga, &sa)), Some(sum_to(&gb, &sb))]
        })
    }

    pub fn scale(&self, c: f64) -> Var {
        let out = par_map(self.value(), |x| x * c);
        make_op(&[self], out, move |g| vec![Some(g * c)])
    }

    pub fn add_scalar(&self, c: f64) -> Var {
        let out = self.value() + c;
        make_op(&[self], out, move |g| vec![Some(g.clone())])
    }

    pub fn sigmoid(&self) -> Var {
        let out = par_map(self.value(), |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        let saved = out.clone();
        make_op(&[self], out, move |g| {
            vec![Some(par_zip(g, &saved, |gv, s| gv * s * (1.0 - s)))]
        })
    }

    /// Exact (erf-based) GELU.
    pub fn gelu(&self) -> Var {
        let out = par_map(self.value(), gelu_f);
        let x = self.shared_value();
        make_op(&[self], out, move |g| {
            vec![Some(par_zip(g, &x, |gv, xv| gv * gelu_grad_f(xv)))]
        })
    }

    /// Sum over all elements, as a `[1]`-shaped var.
    pub fn sum_all(&self) -> Var {
        let s = self.value().sum();
        let shape = self.shape().to_vec();
        make_op(&[self], crate::arr_from(&[1], vec![s]), move |g| {
            let gs = g[[0]];
            vec![Some(Arr::from_elem(IxDyn(&shape), gs))]
        })
    }

    pub fn mean_all(&self) -> Var {
        let n = self.value().len() as f64;
        self.sum_all().scale(1.0 / n)
    }

    /// Contiguous reshape (element order preserved).
    pub fn reshape(&self, shape: &[usize]) -> Var {
        let n: usize = shape.iter().product();
        assert_eq!(n, self.value().len(), "reshape length mismatch");
        let out = self
            .value()
            .to_shape(IxDyn(shape))
            .expect("reshape")
            .to_owned();
        let orig = self.shape().to_vec();
        make_op(&[self], out, move |g| {
            vec![Some(g.to_shape(IxDyn(&orig)).unwrap().to_owned())]
        })
    }

    /// Axis permutation; the result is materialized in standard layout.
    pub fn permute(&self, axes: &[usize]) -> Var {
        let out = permute_raw(self.value(), axes);
        let mut inverse = vec![0usize; axes.len()];
        for (i, &ax) in axes.iter().enumerate() {
            inverse[ax] = i;
        }
        make_op(&[self], out, move |g| vec![Some(permute_raw(g, &inverse))])
    }

    /// Static slice on one axis (used to split attention heads when needed).
    pub fn slice_axis(&self, axis: usize, from: usize, to: usize) -> Var {
        let out = self
            .value()
            .slice_axis(ndarray::Axis(axis), ndarray::Slice::from(from..to))
            .to_owned();
        let shape = self.shape().to_vec();
        make_op(&[self], out, move |g| {
            let mut full = Arr::zeros(IxDyn(&shape));
            let info: Vec<SliceInfoElem> = (0..shape.len())
                .map(|ax| {
                    if ax == axis {
                        SliceInfoElem::from(from..to)
                    } else {
                        SliceInfoElem::from(..)
                    }
                })
                .collect();
            full.slice_mut(info.as_slice()).assign(g);
            vec![Some(full)]
        })
    }
}

pub(crate) fn permute_raw(x: &Arr, axes: &[usize]) -> Arr {
    let v = x.view().permuted_axes(IxDyn(axes));
    // `as_standard_layout` copies unless already contiguous.
    v.as_standard_layout().to_owned()
}

pub(crate) fn gelu_f(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub(crate) fn gelu_grad_f(x: f64) -> f64 {
    let phi_big = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let phi_small = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    phi_big + x * phi_small
}
