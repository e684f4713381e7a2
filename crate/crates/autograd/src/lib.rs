//! A small reverse-mode automatic differentiation engine over dense `f64`
//! tensors, with the operation set needed for spatiotemporal video networks:
//! 3-D convolution, adaptive average pooling, trilinear upsampling, layer and
//! group normalization, fused scaled-dot-product attention, and waveform
//! losses. Everything runs on the CPU; parallelism only ever splits work over
//! disjoint output regions so results are bit-reproducible across runs.

mod elem;
mod graph;
mod ops;
pub mod check;
pub mod optim;

pub use graph::{Gradients, Graph, Var};
pub use ops::attention::{attention, attention_probs};
pub use ops::conv::{conv3d, conv3d_raw};
pub use ops::linear::linear;
pub use ops::loss::{pearson_loss_rows, smooth_l1_rows, weighted_sum};
pub use ops::norm::{group_norm, layer_norm};
pub use ops::pool::adaptive_avg_pool3d;
pub use ops::resize::upsample_trilinear;

/// Dense dynamic-rank tensor. All `Var` values are kept in standard
/// (row-major, contiguous) layout.
pub type Arr = ndarray::ArrayD<f64>;

/// Shorthand for building an `Arr` from a shape and a flat buffer.
pub fn arr_from(shape: &[usize], data: Vec<f64>) -> Arr {
    ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(shape), data)
        .expect("shape/data length mismatch")
}
