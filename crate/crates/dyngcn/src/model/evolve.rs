//! The weight-evolution stage: each node's first-layer weight row becomes an
//! attention-weighted combination of its neighbors' transformed rows.
//!
//! For node v with neighborhood N_v in the step's snapshot:
//!   c(u,v) = sigmoid( A(u,v) * [a_left . (H w_prev(u)) + a_right . (H w_prev(v))] )
//!   alpha  = softmax of c over N_v
//!   out(v) = ELU( sum_u alpha(u) * H w_prev(u) )
//! Nodes with an empty neighborhood carry their previous row unchanged.

use crate::error::{Error, Result};
use crate::exec;
use crate::graphcore::{GraphSnapshot, NodeId};
use crate::numkit::{
    elu, elu_grad, matmul, sigmoid, sigmoid_grad_from_output, softmax, Matrix,
};

/// Per-node intermediate values the backward pass needs.
#[derive(Debug, Clone)]
pub(crate) struct NodeAttention {
    /// Softmax weights over the neighborhood, in neighbor order.
    alpha: Vec<f64>,
    /// Sigmoid outputs c(u,v), in neighbor order.
    coef: Vec<f64>,
    /// The combination sum before ELU.
    pre: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct EvolveCache {
    /// Transformed previous rows: m[u] = H * w_prev(u), node_universe x d1.
    m: Matrix,
    /// One entry per node; None for carried-over rows.
    per_node: Vec<Option<NodeAttention>>,
}

fn check_shapes(w_prev: &Matrix, h: &Matrix, a: &Matrix) -> Result<usize> {
    let d1 = w_prev.cols();
    if h.shape() != (d1, d1) {
        return Err(Error::Dimension {
            op: "evolve_weights(transform)".into(),
            lhs: (d1, d1),
            rhs: h.shape(),
        });
    }
    if a.shape() != (1, 2 * d1) {
        return Err(Error::Dimension {
            op: "evolve_weights(attention)".into(),
            lhs: (1, 2 * d1),
            rhs: a.shape(),
        });
    }
    Ok(d1)
}

pub(crate) fn evolve_forward(
    w_prev: &Matrix,
    h: &Matrix,
    a: &Matrix,
    snapshot: &GraphSnapshot,
) -> Result<(Matrix, EvolveCache)> {
    let d1 = check_shapes(w_prev, h, a)?;
    let n = w_prev.rows();
    if snapshot.node_universe() != n {
        return Err(Error::Dimension {
            op: "evolve_weights(snapshot)".into(),
            lhs: (n, d1),
            rhs: (snapshot.node_universe(), d1),
        });
    }
    let m = matmul(w_prev, &h.transpose())?;
    let a_left = &a.data()[..d1];
    let a_right = &a.data()[d1..];

    let rows = exec::map_indexed(n, |v| {
        let neigh = snapshot.neighborhood(v);
        if neigh.is_empty() {
            return (w_prev.row(v).to_vec(), None);
        }
        let mv = m.row(v);
        let right = dot(a_right, mv);
        let coef: Vec<f64> = neigh
            .iter()
            .map(|&(u, weight)| sigmoid(weight * (dot(a_left, m.row(u)) + right)))
            .collect();
        let alpha = softmax(&coef);
        // Non-finite alphas stem from non-finite parameters and are turned
        // into a numeric error by the check_finite below; the simplex
        // property is only claimed for finite inputs.
        debug_assert!(
            alpha.iter().any(|x| !x.is_finite())
                || (alpha.iter().all(|&x| x > 0.0)
                    && (alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-12),
            "attention weights for node {v} leave the simplex"
        );
        let mut pre = vec![0.0; d1];
        for (&(u, _), &al) in neigh.iter().zip(&alpha) {
            let mu = m.row(u);
            for (p, &x) in pre.iter_mut().zip(mu) {
                *p += al * x;
            }
        }
        let out: Vec<f64> = pre.iter().map(|&x| elu(x)).collect();
        (out, Some(NodeAttention { alpha, coef, pre }))
    });

    let mut out = Matrix::zeros(n, d1);
    let mut per_node = Vec::with_capacity(n);
    for (v, (row, attn)) in rows.into_iter().enumerate() {
        out.row_mut(v).copy_from_slice(&row);
        per_node.push(attn);
        let _ = v;
    }
    out.check_finite("evolve_weights")?;
    Ok((out, EvolveCache { m, per_node }))
}

/// One evolution step; see the module docs for the per-node formula.
pub fn evolve_weights(
    w_prev: &Matrix,
    h: &Matrix,
    a: &Matrix,
    snapshot: &GraphSnapshot,
) -> Result<Matrix> {
    evolve_forward(w_prev, h, a, snapshot).map(|(out, _)| out)
}

/// Attention weights per node, for inspection: (node, neighbors, alpha).
/// Only nodes with a nonempty neighborhood appear.
pub fn evolve_attention(
    w_prev: &Matrix,
    h: &Matrix,
    a: &Matrix,
    snapshot: &GraphSnapshot,
) -> Result<Vec<(NodeId, Vec<NodeId>, Vec<f64>)>> {
    let (_, cache) = evolve_forward(w_prev, h, a, snapshot)?;
    Ok(cache
        .per_node
        .iter()
        .enumerate()
        .filter_map(|(v, attn)| {
            attn.as_ref().map(|na| {
                let neighbors = snapshot.neighborhood(v).into_iter().map(|(u, _)| u).collect();
                (v, neighbors, na.alpha.clone())
            })
        })
        .collect())
}

/// Reverse-mode step: given dL/d(out), returns (dL/d(w_prev), dL/dH, dL/da).
pub(crate) fn evolve_backward(
    w_prev: &Matrix,
    h: &Matrix,
    a: &Matrix,
    snapshot: &GraphSnapshot,
    cache: &EvolveCache,
    g_out: &Matrix,
) -> Result<(Matrix, Matrix, Matrix)> {
    let d1 = check_shapes(w_prev, h, a)?;
    let n = w_prev.rows();
    if g_out.shape() != (n, d1) {
        return Err(Error::Dimension {
            op: "evolve_backward".into(),
            lhs: (n, d1),
            rhs: g_out.shape(),
        });
    }
    let a_left = &a.data()[..d1];
    let a_right = &a.data()[d1..];

    let mut d_m = Matrix::zeros(n, d1);
    let mut d_a = Matrix::zeros(1, 2 * d1);
    let mut d_w_prev = Matrix::zeros(n, d1);

    for v in 0..n {
        let Some(attn) = &cache.per_node[v] else {
            // Carried-over row: identity pass-through.
            let dst = d_w_prev.row_mut(v);
            for (d, &g) in dst.iter_mut().zip(g_out.row(v)) {
                *d += g;
            }
            continue;
        };
        let neigh = snapshot.neighborhood(v);
        let ds: Vec<f64> = g_out
            .row(v)
            .iter()
            .zip(&attn.pre)
            .map(|(&g, &p)| g * elu_grad(p))
            .collect();

        // d(alpha_u) = ds . m(u); then softmax backward to the coefficients.
        let d_alpha: Vec<f64> = neigh
            .iter()
            .map(|&(u, _)| dot(&ds, cache.m.row(u)))
            .collect();
        let weighted: f64 = attn
            .alpha
            .iter()
            .zip(&d_alpha)
            .map(|(&al, &da)| al * da)
            .sum();

        for (j, (&(u, weight), &al)) in neigh.iter().zip(&attn.alpha).enumerate() {
            // Combination term: out pre-activation accumulates alpha * m(u).
            {
                let dst = d_m.row_mut(u);
                for (d, &s) in dst.iter_mut().zip(&ds) {
                    *d += al * s;
                }
            }
            let d_c = al * (d_alpha[j] - weighted);
            let d_e = d_c * sigmoid_grad_from_output(attn.coef[j]);
            let t = d_e * weight;
            if t == 0.0 {
                continue;
            }
            let mu = cache.m.row(u);
            let mv = cache.m.row(v);
            {
                let da = d_a.data_mut();
                for i in 0..d1 {
                    da[i] += t * mu[i];
                    da[d1 + i] += t * mv[i];
                }
            }
            {
                let dst = d_m.row_mut(u);
                for i in 0..d1 {
                    dst[i] += t * a_left[i];
                }
            }
            {
                let dst = d_m.row_mut(v);
                for i in 0..d1 {
                    dst[i] += t * a_right[i];
                }
            }
        }
    }

    // m = w_prev * H^T, so dL/d(w_prev) += dM * H and dL/dH = dM^T * w_prev.
    let via_m = matmul(&d_m, h)?;
    d_w_prev.axpy(1.0, &via_m)?;
    let d_h = matmul(&d_m.transpose(), w_prev)?;
    Ok((d_w_prev, d_h, d_a))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn snap(universe: usize, edges: &[(usize, usize, f64)]) -> GraphSnapshot {
        let active: BTreeSet<usize> = edges.iter().flat_map(|&(u, v, _)| [u, v]).collect();
        GraphSnapshot::new(0, universe, active, edges).unwrap()
    }

    fn ramp(rows: usize, cols: usize, scale: f64) -> Matrix {
        let data = (0..rows * cols).map(|i| scale * (i as f64 - 2.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn single_neighbor_row_is_transformed_neighbor() {
        let w_prev = ramp(3, 2, 0.1);
        let h = Matrix::from_vec(2, 2, vec![0.5, -0.2, 0.3, 0.4]).unwrap();
        let a = ramp(1, 4, 0.05);
        let s = snap(3, &[(0, 1, 7.0)]);
        let out = evolve_weights(&w_prev, &h, &a, &s).unwrap();
        // Node 0's only neighbor is 1: alpha = [1], so the row is
        // ELU(H * w_prev(1)) regardless of the attention vector.
        let m1: Vec<f64> = (0..2)
            .map(|i| (0..2).map(|j| h.get(i, j) * w_prev.get(1, j)).sum::<f64>())
            .collect();
        for i in 0..2 {
            assert!((out.get(0, i) - elu(m1[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_attention_vector_gives_uniform_alpha() {
        let w_prev = ramp(4, 3, 0.2);
        let h = Matrix::identity(3);
        let a = Matrix::zeros(1, 6);
        let s = snap(4, &[(0, 1, 5.0), (0, 2, 50.0), (0, 3, 0.5)]);
        let detail = evolve_attention(&w_prev, &h, &a, &s).unwrap();
        let row0 = detail.iter().find(|(v, _, _)| *v == 0).unwrap();
        assert_eq!(row0.1, vec![1, 2, 3]);
        for &al in &row0.2 {
            assert!((al - 1.0 / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn symmetric_neighbors_share_attention() {
        // Neighbors 1 and 2 have identical weight rows and equal edge
        // weights, so their scores tie and alpha is [0.5, 0.5].
        let mut w_prev = ramp(3, 2, 0.1);
        let row: Vec<f64> = w_prev.row(1).to_vec();
        w_prev.row_mut(2).copy_from_slice(&row);
        let h = ramp(2, 2, 0.3);
        let a = ramp(1, 4, 0.2);
        let s = snap(3, &[(0, 1, 4.0), (0, 2, 4.0)]);
        let detail = evolve_attention(&w_prev, &h, &a, &s).unwrap();
        let row0 = detail.iter().find(|(v, _, _)| *v == 0).unwrap();
        assert!((row0.2[0] - 0.5).abs() <= 1e-12);
        assert!((row0.2[1] - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn empty_neighborhood_carries_row_forward() {
        let w_prev = ramp(4, 2, 0.7);
        let h = ramp(2, 2, 0.1);
        let a = ramp(1, 4, 0.1);
        let s = snap(4, &[(0, 1, 1.0)]);
        let out = evolve_weights(&w_prev, &h, &a, &s).unwrap();
        assert_eq!(out.row(2), w_prev.row(2));
        assert_eq!(out.row(3), w_prev.row(3));
    }

    #[test]
    fn shape_preserved_and_pure() {
        let w_prev = ramp(5, 3, 0.11);
        let h = ramp(3, 3, 0.07);
        let a = ramp(1, 6, 0.05);
        let s = snap(5, &[(0, 1, 2.0), (1, 2, 3.0), (3, 4, 1.0)]);
        let x = evolve_weights(&w_prev, &h, &a, &s).unwrap();
        let y = evolve_weights(&w_prev, &h, &a, &s).unwrap();
        assert_eq!(x.shape(), w_prev.shape());
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let w_prev = ramp(3, 2, 0.1);
        let s = snap(3, &[(0, 1, 1.0)]);
        assert!(evolve_weights(&w_prev, &Matrix::zeros(3, 3), &Matrix::zeros(1, 4), &s).is_err());
        assert!(evolve_weights(&w_prev, &Matrix::zeros(2, 2), &Matrix::zeros(1, 5), &s).is_err());
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let w_prev = ramp(6, 4, 0.13);
        let h = ramp(4, 4, 0.09);
        let a = ramp(1, 8, 0.03);
        let s = snap(6, &[(0, 1, 2.0), (1, 2, 30.0), (2, 3, 0.4), (4, 5, 7.0)]);
        let par = evolve_weights(&w_prev, &h, &a, &s).unwrap();
        crate::exec::force_sequential(true);
        let seq = evolve_weights(&w_prev, &h, &a, &s).unwrap();
        crate::exec::force_sequential(false);
        assert_eq!(par.data(), seq.data());
    }

    #[test]
    fn backward_matches_finite_differences() {
        use crate::numkit::{finite_diff_check, GradCheckOptions, Gradients, ParamSet};

        let s = snap(5, &[(0, 1, 2.0), (0, 2, 8.0), (1, 2, 1.0), (3, 4, 3.0)]);
        let mut params = ParamSet::new();
        params.insert("w", ramp(5, 3, 0.21)).unwrap();
        params.insert("h", ramp(3, 3, 0.17)).unwrap();
        params.insert("a", ramp(1, 6, 0.4)).unwrap();

        // Scalar objective: weighted sum of the evolved matrix, so dL/d(out)
        // is a fixed ramp and the chain rule exercises every branch.
        let probe = ramp(5, 3, 0.31);
        let loss = |p: &ParamSet| -> crate::error::Result<f64> {
            let out = evolve_weights(p.get("w").unwrap(), p.get("h").unwrap(), p.get("a").unwrap(), &s)?;
            Ok(out
                .data()
                .iter()
                .zip(probe.data())
                .map(|(&o, &q)| o * q)
                .sum())
        };

        let (_, cache) = evolve_forward(
            params.get("w").unwrap(),
            params.get("h").unwrap(),
            params.get("a").unwrap(),
            &s,
        )
        .unwrap();
        let (dw, dh, da) = evolve_backward(
            params.get("w").unwrap(),
            params.get("h").unwrap(),
            params.get("a").unwrap(),
            &s,
            &cache,
            &probe,
        )
        .unwrap();
        let mut grads = Gradients::zeros_like(&params);
        grads.accumulate("w", &dw).unwrap();
        grads.accumulate("h", &dh).unwrap();
        grads.accumulate("a", &da).unwrap();

        let rep =
            finite_diff_check(&params, &grads, loss, &GradCheckOptions::default()).unwrap();
        assert!(
            rep.max_rel_err < 1e-6,
            "worst: {:?}",
            rep.worst
        );
    }
}
