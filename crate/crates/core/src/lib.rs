//! Kolmogorov–Arnold networks with B-spline edges, trained across simulated
//! federated clients whose uploads are sparsified to fit a bit budget.
//!
//! The numeric core ([`spline`], [`kan`], [`codec`]) is generic over the scalar
//! type; [`data`] and [`fl`] work in `f64`.

pub mod codec;
pub mod data;
pub mod fl;
pub mod kan;
pub mod linalg;
pub mod scalar;
pub mod seed;
pub mod spline;

pub use scalar::Scalar;

pub type GridSpec64 = spline::GridSpec<f64>;
pub type GridSpec32 = spline::GridSpec<f32>;
pub type SplineEdge64 = spline::SplineEdge<f64>;
pub type SplineEdge32 = spline::SplineEdge<f32>;
pub type KanNetwork64 = kan::KanNetwork<f64>;
pub type KanNetwork32 = kan::KanNetwork<f32>;
pub type ParamVector64 = kan::ParamVector<f64>;
pub type SparseSet64 = codec::SparseSet<f64>;
pub type SparsePayload64 = codec::SparsePayload<f64>;
