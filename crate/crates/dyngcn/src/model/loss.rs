//! Reconstruction loss: RMSE between ReLU-clipped embedding inner products
//! and observed edge capacities, normalized by the active node count.

use crate::error::{Error, Result};
use crate::graphcore::GraphSnapshot;
use crate::numkit::{relu, relu_grad, Matrix};

fn residual_sum(z: &Matrix, snapshot: &GraphSnapshot) -> f64 {
    // The double sum over ordered pairs counts every undirected edge twice.
    snapshot
        .edges()
        .iter()
        .map(|&(u, v, w)| {
            let p = dot(z.row(u), z.row(v));
            let r = relu(p) - w;
            2.0 * r * r
        })
        .sum()
}

/// sqrt( (1/n_k) * sum over ordered active pairs of
/// (ReLU(z(u).z(v)) - A(u,v))^2 ).
pub fn reconstruction_loss(z: &Matrix, snapshot: &GraphSnapshot) -> Result<f64> {
    if z.rows() != snapshot.node_universe() {
        return Err(Error::Dimension {
            op: "reconstruction_loss".into(),
            lhs: (snapshot.node_universe(), z.cols()),
            rhs: z.shape(),
        });
    }
    let n_k = snapshot.active_count();
    if n_k == 0 {
        return Err(Error::UndefinedLoss(format!(
            "snapshot {} has no active nodes",
            snapshot.step_index()
        )));
    }
    Ok((residual_sum(z, snapshot) / n_k as f64).sqrt())
}

/// Loss value together with dL/dZ. At zero loss every residual is zero and
/// the gradient is zero as well.
pub fn loss_with_gradient(z: &Matrix, snapshot: &GraphSnapshot) -> Result<(f64, Matrix)> {
    let loss = reconstruction_loss(z, snapshot)?;
    let mut g = Matrix::zeros(z.rows(), z.cols());
    if loss == 0.0 {
        return Ok((loss, g));
    }
    let n_k = snapshot.active_count() as f64;
    // loss = sqrt(S / n_k), so dL/dS = 1 / (2 n_k loss); each undirected
    // edge contributes d(2 r^2)/dz through both endpoint rows.
    let d_loss_d_sum = 1.0 / (2.0 * n_k * loss);
    for &(u, v, w) in snapshot.edges() {
        let p = dot(z.row(u), z.row(v));
        let r = relu(p) - w;
        let coef = 4.0 * r * relu_grad(p) * d_loss_d_sum;
        if coef == 0.0 {
            continue;
        }
        let (zu, zv): (Vec<f64>, Vec<f64>) = (z.row(u).to_vec(), z.row(v).to_vec());
        for (d, &x) in g.row_mut(u).iter_mut().zip(&zv) {
            *d += coef * x;
        }
        for (d, &x) in g.row_mut(v).iter_mut().zip(&zu) {
            *d += coef * x;
        }
    }
    Ok((loss, g))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
