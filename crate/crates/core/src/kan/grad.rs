//! Hand-written reverse-mode differentiation of the mean squared error.

use super::{check_target, order_independent_mean, KanError, KanNetwork, ParamVector, Sample};
use crate::scalar::{silu, silu_derivative, Scalar};
use crate::spline::LocalBasis;

struct NodeCache<T> {
    silu: T,
    silu_prime: T,
    basis: Option<LocalBasis<T>>,
}

pub(super) fn loss_and_gradients<T: Scalar>(
    net: &KanNetwork<T>,
    batch: &[Sample<T>],
) -> Result<(T, ParamVector<T>), KanError> {
    if batch.is_empty() {
        return Err(KanError::EmptyBatch);
    }
    let layout = net.layout();
    let edge_len = layout.edge_len();
    let layer_offsets: Vec<usize> = layout
        .omegas()
        .iter()
        .scan(0, |acc, &w| {
            let start = *acc;
            *acc += w * edge_len;
            Some(start)
        })
        .collect();
    let mut grad = vec![T::zero(); layout.len()];
    let scale = T::lit(2.0) / T::from_usize_lossy(batch.len());
    let mut per_sample = Vec::with_capacity(batch.len());

    for sample in batch {
        if sample.x.len() != net.widths()[0] {
            return Err(KanError::DimensionMismatch { expected: net.widths()[0], got: sample.x.len() });
        }
        // Forward pass, keeping per-node basis windows.
        let mut caches: Vec<Vec<NodeCache<T>>> = Vec::with_capacity(net.layers().len());
        let mut act = sample.x.clone();
        for (l, layer) in net.layers().iter().enumerate() {
            if act.iter().any(|v| !v.is_finite()) {
                return Err(KanError::NonFinite { layer: l });
            }
            let cache: Vec<NodeCache<T>> = act
                .iter()
                .map(|&x| NodeCache { silu: silu(x), silu_prime: silu_derivative(x), basis: layer.grid().local_basis(x) })
                .collect();
            let mut next = vec![T::zero(); layer.out_dim()];
            for (i, node) in cache.iter().enumerate() {
                for (j, out) in next.iter_mut().enumerate() {
                    let e = layer.edge(j, i);
                    let spline = node.basis.as_ref().map_or(T::zero(), |lb| lb.dot(e.coeffs()));
                    *out += e.base() * node.silu + spline;
                }
            }
            caches.push(cache);
            act = next;
        }
        if act.iter().any(|v| !v.is_finite()) {
            return Err(KanError::NonFinite { layer: net.layers().len() });
        }
        check_target(&act, &sample.y)?;
        per_sample.push(act.iter().zip(&sample.y).map(|(&o, &y)| (o - y) * (o - y)).sum::<T>());

        // Backward pass.
        let mut delta: Vec<T> = act.iter().zip(&sample.y).map(|(&o, &y)| scale * (o - y)).collect();
        for (l, layer) in net.layers().iter().enumerate().rev() {
            let cache = &caches[l];
            let mut upstream = vec![T::zero(); layer.in_dim()];
            for (j, &dj) in delta.iter().enumerate() {
                if dj == T::zero() {
                    continue;
                }
                for (i, node) in cache.iter().enumerate() {
                    let e = layer.edge(j, i);
                    let start = layer_offsets[l] + (j * layer.in_dim() + i) * edge_len;
                    grad[start] += dj * node.silu;
                    let mut slope = e.base() * node.silu_prime;
                    if let Some(lb) = &node.basis {
                        for (p, b, db) in lb.iter() {
                            grad[start + 1 + p] += dj * b;
                            slope += e.coeffs()[p] * db;
                        }
                    }
                    upstream[i] += dj * slope;
                }
            }
            delta = upstream;
        }
    }

    let loss = order_independent_mean(per_sample);
    Ok((loss, ParamVector { values: grad, layout }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kan::KanSpec;
    use crate::spline::basis_eval;

    #[test]
    fn single_edge_closed_form() {
        let mut net = KanNetwork::<f64>::zeros(KanSpec::new(vec![1, 1], 3, 5)).unwrap();
        let values: Vec<f64> = (0..9).map(|k| 0.1 * k as f64 - 0.3).collect();
        net.assign(&values).unwrap();
        let (x, y) = (0.37, 0.8);
        let yhat = net.forward(&[x]).unwrap()[0];
        let g = net.gradients(&[Sample::new(vec![x], vec![y])]).unwrap();
        let basis = basis_eval(x, net.layers()[0].grid()).unwrap();
        assert!((g.values[0] - 2.0 * (yhat - y) * silu(x)).abs() < 1e-14);
        for (p, b) in basis.iter().enumerate() {
            assert!((g.values[1 + p] - 2.0 * (yhat - y) * b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let net = KanNetwork::<f64>::random(KanSpec::new(vec![2, 3, 1], 3, 4), &mut rng).unwrap();
        let batch: Vec<_> = [[0.1, -0.4], [0.7, 0.2]]
            .iter()
            .map(|x| Sample::new(x.to_vec(), net.forward(x).unwrap()))
            .collect();
        let g = net.gradients(&batch).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }
}
