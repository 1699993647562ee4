//! Layered Kolmogorov–Arnold networks built from [`SplineEdge`]s.
//!
//! Node `j` of layer `l + 1` is the sum over source nodes `i` of `φ_{l,j,i}(x_i)`.
//! Parameters flatten in canonical order: layer-major, then destination node, then
//! source node; within an edge the base coefficient α comes first, followed by the
//! `g + o` spline coefficients.

mod checkpoint;
mod grad;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use train::{train_local, OptimizerKind, TrainConfig, TrainOutcome};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::scalar::{silu, Scalar};
use crate::spline::{extend_grid, GridSpec, SplineEdge, SplineError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KanError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("expected input of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("non-finite activation entering layer {layer}")]
    NonFinite { layer: usize },
    #[error("parameter vector of length {got} does not match layout of length {expected}")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training diverged in epoch {epoch}; last finite loss {last_finite_loss}")]
    Diverged { epoch: usize, last_finite_loss: f64 },
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// One regression example. `y` has one entry per output node.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T> Sample<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Self {
        Self { x, y }
    }
}

/// Shape and grid of a network, sufficient to rebuild it from a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KanSpec<T> {
    pub widths: Vec<usize>,
    pub order: usize,
    pub grid: usize,
    /// Spline domain of the input layer.
    pub input_domain: (T, T),
    /// Hidden layers use `[-hidden_range, hidden_range]`.
    pub hidden_range: T,
}

impl<T: Scalar> KanSpec<T> {
    pub fn new(widths: Vec<usize>, order: usize, grid: usize) -> Self {
        Self { widths, order, grid, input_domain: (-T::one(), T::one()), hidden_range: T::lit(4.0) }
    }

    pub fn domain(&self, layer: usize) -> (T, T) {
        if layer == 0 {
            self.input_domain
        } else {
            (-self.hidden_range, self.hidden_range)
        }
    }

    fn validate(&self) -> Result<(), KanError> {
        if self.widths.len() < 2 {
            return Err(KanError::InvalidNetwork("need at least input and output widths".into()));
        }
        if self.widths.contains(&0) {
            return Err(KanError::InvalidNetwork(format!("zero width in {:?}", self.widths)));
        }
        Ok(())
    }
}

/// Canonical index layout of a flattened network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    widths: Vec<usize>,
    order: usize,
    grid: usize,
    domains: Vec<(f64, f64)>,
}

impl ParamLayout {
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn domains(&self) -> &[(f64, f64)] {
        &self.domains
    }

    /// Edge counts `ω_l = n_l · n_{l+1}` per layer.
    pub fn omegas(&self) -> Vec<usize> {
        self.widths.windows(2).map(|w| w[0] * w[1]).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.omegas().iter().sum()
    }

    /// Scalars per edge: α plus `g + o` coefficients.
    pub fn edge_len(&self) -> usize {
        1 + self.grid + self.order
    }

    pub fn len(&self) -> usize {
        self.edge_count() * self.edge_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of edge `(layer, dst, src)` in canonical edge order.
    pub fn edge_index(&self, layer: usize, dst: usize, src: usize) -> usize {
        let before: usize = self.omegas()[..layer].iter().sum();
        before + dst * self.widths[layer] + src
    }

    pub fn edge_range(&self, layer: usize, dst: usize, src: usize) -> std::ops::Range<usize> {
        let start = self.edge_index(layer, dst, src) * self.edge_len();
        start..start + self.edge_len()
    }

    /// Stable 64-bit FNV-1a digest of the layout, used to check cross-client alignment.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.widths.len() as u64);
        self.widths.iter().for_each(|&w| eat(w as u64));
        eat(self.order as u64);
        eat(self.grid as u64);
        for &(lo, hi) in &self.domains {
            eat(lo.to_bits());
            eat(hi.to_bits());
        }
        h
    }
}

/// Flattened parameters together with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    pub values: Vec<T>,
    pub layout: ParamLayout,
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(values: Vec<T>, layout: ParamLayout) -> Result<Self, KanError> {
        if values.len() != layout.len() {
            return Err(KanError::LayoutMismatch { expected: layout.len(), got: values.len() });
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: ParamLayout) -> Self {
        Self { values: vec![T::zero(); layout.len()], layout }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One layer: `out_dim × in_dim` edges sharing a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer<T> {
    in_dim: usize,
    out_dim: usize,
    grid: GridSpec<T>,
    edges: Vec<SplineEdge<T>>,
}

impl<T: Scalar> KanLayer<T> {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn edge(&self, dst: usize, src: usize) -> &SplineEdge<T> {
        &self.edges[dst * self.in_dim + src]
    }

    pub fn edges(&self) -> &[SplineEdge<T>] {
        &self.edges
    }

    fn forward(&self, input: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.out_dim];
        for (i, &x) in input.iter().enumerate() {
            let s = silu(x);
            let local = self.grid.local_basis(x);
            for (j, o) in out.iter_mut().enumerate() {
                let e = &self.edges[j * self.in_dim + i];
                let spline = local.as_ref().map_or(T::zero(), |lb| lb.dot(e.coeffs()));
                *o += e.base() * s + spline;
            }
        }
        out
    }
}

/// A multi-layer KAN whose edges all share spline order and grid size.
#[derive(Debug, Clone, PartialEq)]
pub struct KanNetwork<T> {
    spec: KanSpec<T>,
    layers: Vec<KanLayer<T>>,
}

impl<T: Scalar> KanNetwork<T> {
    /// All-zero network.
    pub fn zeros(spec: KanSpec<T>) -> Result<Self, KanError> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.widths.len() - 1);
        for (l, w) in spec.widths.windows(2).enumerate() {
            let (lo, hi) = spec.domain(l);
            let grid = GridSpec::new(spec.order, spec.grid, lo, hi)?;
            let edges = vec![SplineEdge::zeros(grid.clone()); w[0] * w[1]];
            layers.push(KanLayer { in_dim: w[0], out_dim: w[1], grid, edges });
        }
        Ok(Self { spec, layers })
    }

    /// α ~ N(0, 0.1²), c_p ~ N(0, (0.1/√(g+o))²).
    pub fn random<R: Rng + ?Sized>(spec: KanSpec<T>, rng: &mut R) -> Result<Self, KanError> {
        let mut net = Self::zeros(spec)?;
        let n = net.spec.grid + net.spec.order;
        let base_dist = Normal::new(0.0, 0.1).expect("valid normal");
        let coeff_dist = Normal::new(0.0, 0.1 / (n as f64).sqrt()).expect("valid normal");
        for layer in &mut net.layers {
            for edge in &mut layer.edges {
                edge.set_base(T::lit(base_dist.sample(rng)));
                for c in edge.coeffs_mut() {
                    *c = T::lit(coeff_dist.sample(rng));
                }
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &KanSpec<T> {
        &self.spec
    }

    pub fn widths(&self) -> &[usize] {
        &self.spec.widths
    }

    pub fn order(&self) -> usize {
        self.spec.order
    }

    pub fn grid_size(&self) -> usize {
        self.spec.grid
    }

    pub fn layers(&self) -> &[KanLayer<T>] {
        &self.layers
    }

    pub fn edge(&self, layer: usize, dst: usize, src: usize) -> &SplineEdge<T> {
        self.layers[layer].edge(dst, src)
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            widths: self.spec.widths.clone(),
            order: self.spec.order,
            grid: self.spec.grid,
            domains: self
                .layers
                .iter()
                .map(|l| {
                    let (lo, hi) = l.grid.domain();
                    (lo.as_f64(), hi.as_f64())
                })
                .collect(),
        }
    }

    pub fn flatten(&self) -> ParamVector<T> {
        let layout = self.layout();
        let mut values = Vec::with_capacity(layout.len());
        for layer in &self.layers {
            for edge in &layer.edges {
                values.push(edge.base());
                values.extend_from_slice(edge.coeffs());
            }
        }
        ParamVector { values, layout }
    }

    /// Overwrites all parameters from a canonical-order slice.
    pub fn assign(&mut self, values: &[T]) -> Result<(), KanError> {
        let expected = self.layout().len();
        if values.len() != expected {
            return Err(KanError::LayoutMismatch { expected, got: values.len() });
        }
        let mut chunks = values.chunks_exact(1 + self.spec.grid + self.spec.order);
        for layer in &mut self.layers {
            for edge in &mut layer.edges {
                let chunk = chunks.next().expect("length checked above");
                edge.set_base(chunk[0]);
                edge.coeffs_mut().copy_from_slice(&chunk[1..]);
            }
        }
        Ok(())
    }

    /// Rebuilds a network from a parameter vector and its layout.
    pub fn unflatten(params: &ParamVector<T>) -> Result<Self, KanError> {
        let layout = &params.layout;
        if layout.domains.len() + 1 != layout.widths.len() {
            return Err(KanError::InvalidNetwork("layout domains do not match widths".into()));
        }
        let mut net = Self::zeros(KanSpec::new(layout.widths.clone(), layout.order, layout.grid))?;
        for (layer, &(lo, hi)) in net.layers.iter_mut().zip(&layout.domains) {
            let grid = GridSpec::new(layout.order, layout.grid, T::lit(lo), T::lit(hi))?;
            for edge in &mut layer.edges {
                *edge = SplineEdge::zeros(grid.clone());
            }
            layer.grid = grid;
        }
        net.spec.input_domain = net.layers[0].grid.domain();
        if let Some(hidden) = net.layers.get(1) {
            net.spec.hidden_range = hidden.grid.domain().1;
        }
        net.assign(&params.values)?;
        Ok(net)
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, KanError> {
        Ok(self.forward_layers(x)?.pop().expect("at least one layer"))
    }

    /// Node values of every layer, input first and output last.
    pub fn forward_layers(&self, x: &[T]) -> Result<Vec<Vec<T>>, KanError> {
        if x.len() != self.spec.widths[0] {
            return Err(KanError::DimensionMismatch { expected: self.spec.widths[0], got: x.len() });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let act = &acts[l];
            if act.iter().any(|v| !v.is_finite()) {
                return Err(KanError::NonFinite { layer: l });
            }
            let next = layer.forward(act);
            acts.push(next);
        }
        if acts[self.layers.len()].iter().any(|v| !v.is_finite()) {
            return Err(KanError::NonFinite { layer: self.layers.len() });
        }
        Ok(acts)
    }

    /// Mean over the batch of the summed squared output error.
    pub fn loss(&self, batch: &[Sample<T>]) -> Result<T, KanError> {
        if batch.is_empty() {
            return Err(KanError::EmptyBatch);
        }
        let mut per_sample = Vec::with_capacity(batch.len());
        for s in batch {
            let out = self.forward(&s.x)?;
            check_target(&out, &s.y)?;
            per_sample.push(out.iter().zip(&s.y).map(|(&o, &y)| (o - y) * (o - y)).sum::<T>());
        }
        Ok(order_independent_mean(per_sample))
    }

    /// Exact gradient of [`KanNetwork::loss`] in canonical parameter order.
    pub fn gradients(&self, batch: &[Sample<T>]) -> Result<ParamVector<T>, KanError> {
        grad::loss_and_gradients(self, batch).map(|(_, g)| g)
    }

    pub fn loss_and_gradients(&self, batch: &[Sample<T>]) -> Result<(T, ParamVector<T>), KanError> {
        grad::loss_and_gradients(self, batch)
    }

    /// Refits every edge onto `new_grid` intervals; α values are kept.
    pub fn extend_grid(&self, new_grid: usize) -> Result<Self, KanError> {
        let mut out = self.clone();
        for layer in &mut out.layers {
            for edge in &mut layer.edges {
                *edge = extend_grid(edge, new_grid)?;
            }
            layer.grid = layer.grid.with_grid(new_grid)?;
        }
        out.spec.grid = new_grid;
        Ok(out)
    }
}

/// Mean that does not depend on the order of its inputs (sums after sorting).
pub(crate) fn order_independent_mean<T: Scalar>(mut values: Vec<T>) -> T {
    let n = T::from_usize_lossy(values.len());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    values.into_iter().fold(T::zero(), |acc, v| acc + v) / n
}

fn check_target<T>(out: &[T], y: &[T]) -> Result<(), KanError> {
    if out.len() != y.len() {
        return Err(KanError::DimensionMismatch { expected: out.len(), got: y.len() });
    }
    Ok(())
}
