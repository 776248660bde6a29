//! The graph-convolution stack: Z^l = act( A_hat * Z^{l-1} * W^l ), with
//! ReLU on hidden layers and a linear final layer. Node features default to
//! the identity matrix, in which case the first product is skipped.

use crate::error::{Error, Result};
use crate::numkit::{matmul, relu, relu_grad, spmm, Matrix, SparseMatrix};

#[derive(Debug, Clone)]
pub(crate) struct GcnCache {
    /// Pre-activation A_hat * Z^{l-1} * W^l per layer.
    pre: Vec<Matrix>,
    /// Layer inputs Z^0..Z^{L-1}; None at position 0 means identity features.
    inputs: Vec<Option<Matrix>>,
}

pub(crate) fn gcn_forward_cached(
    a_hat: &SparseMatrix,
    features: Option<&Matrix>,
    weights: &[&Matrix],
) -> Result<(Matrix, GcnCache)> {
    if weights.is_empty() {
        return Err(Error::Contract("gcn_forward: no layer weights".into()));
    }
    let n = a_hat.rows();
    if a_hat.cols() != n {
        return Err(Error::Dimension {
            op: "gcn_forward(a_hat)".into(),
            lhs: (n, n),
            rhs: a_hat.shape(),
        });
    }
    if let Some(x) = features {
        if x.rows() != n {
            return Err(Error::Dimension {
                op: "gcn_forward(features)".into(),
                lhs: (n, x.cols()),
                rhs: x.shape(),
            });
        }
    }

    let layers = weights.len();
    let mut pre = Vec::with_capacity(layers);
    let mut inputs = Vec::with_capacity(layers);
    let mut z: Option<Matrix> = features.cloned();
    for (l, w) in weights.iter().enumerate() {
        let expected_in = z.as_ref().map(|m| m.cols()).unwrap_or(n);
        if w.rows() != expected_in {
            return Err(Error::Dimension {
                op: format!("gcn_forward(layer {})", l + 1),
                lhs: (expected_in, w.cols()),
                rhs: w.shape(),
            });
        }
        let u = match &z {
            Some(m) => matmul(m, w)?,
            None => (*w).clone(),
        };
        let p = spmm(a_hat, &u)?;
        inputs.push(z.take());
        let out = if l + 1 < layers { p.map(relu) } else { p.clone() };
        pre.push(p);
        z = Some(out);
    }
    let z = z.unwrap();
    z.check_finite("gcn_forward")?;
    Ok((z, GcnCache { pre, inputs }))
}

/// Forward pass through the stack; see the module docs.
pub fn gcn_forward(
    a_hat: &SparseMatrix,
    features: Option<&Matrix>,
    weights: &[&Matrix],
) -> Result<Matrix> {
    gcn_forward_cached(a_hat, features, weights).map(|(z, _)| z)
}

/// Reverse pass: given dL/dZ^L, returns per-layer weight gradients (same
/// order as `weights`). The gradient with respect to the features is not
/// produced; layer-one weight gradients flow to the evolution stage instead.
pub(crate) fn gcn_backward(
    a_hat: &SparseMatrix,
    weights: &[&Matrix],
    cache: &GcnCache,
    g_z: &Matrix,
) -> Result<Vec<Matrix>> {
    let layers = weights.len();
    let mut grads: Vec<Matrix> = Vec::with_capacity(layers);
    let mut d_z = g_z.clone();
    for l in (0..layers).rev() {
        let d_p = if l + 1 < layers {
            let gate = &cache.pre[l];
            let mut m = d_z.clone();
            for (x, &p) in m.data_mut().iter_mut().zip(gate.data()) {
                *x *= relu_grad(p);
            }
            m
        } else {
            d_z
        };
        // Pre-activation is A_hat * U with U = Z^{l-1} W^l; A_hat is
        // symmetric, so dU = A_hat * dP.
        let d_u = spmm(a_hat, &d_p)?;
        let d_w = match &cache.inputs[l] {
            Some(zin) => matmul(&zin.transpose(), &d_u)?,
            None => d_u.clone(),
        };
        grads.push(d_w);
        d_z = if l > 0 {
            matmul(&d_u, &weights[l].transpose())?
        } else {
            Matrix::zeros(0, 0)
        };
    }
    grads.reverse();
    Ok(grads)
}
