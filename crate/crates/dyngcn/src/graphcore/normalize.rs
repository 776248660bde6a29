//! Symmetric adjacency normalization used by every graph convolution.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graphcore::NodeId;
use crate::numkit::SparseMatrix;

/// Computes the propagation operator for one snapshot's adjacency:
/// with the self-loop added, each entry of A + I is divided by
/// sqrt(deg(u) * deg(v)) where deg is the row sum of A + I.
///
/// The input must be symmetric, nonnegative, and zero on the diagonal, and
/// only active nodes may carry edges. Inactive nodes keep just their
/// normalized self-loop, which comes out as exactly 1 on the diagonal, so
/// the operator has constant shape across a window of snapshots.
pub fn normalize_adjacency(
    a: &SparseMatrix,
    active: &BTreeSet<NodeId>,
) -> Result<SparseMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension {
            op: "normalize_adjacency".into(),
            lhs: (a.rows(), a.cols()),
            rhs: (a.rows(), a.rows()),
        });
    }

    let mut deg = vec![1.0f64; n];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            if w < 0.0 {
                return Err(Error::Contract(format!(
                    "normalize_adjacency: negative weight {w} at ({i}, {j})"
                )));
            }
            if i == j {
                return Err(Error::Contract(format!(
                    "normalize_adjacency: nonzero diagonal at node {i}"
                )));
            }
            if a.get(j, i) != w {
                return Err(Error::Contract(format!(
                    "normalize_adjacency: asymmetric input at ({i}, {j})"
                )));
            }
            if !active.contains(&i) || !active.contains(&j) {
                return Err(Error::Contract(format!(
                    "normalize_adjacency: edge ({i}, {j}) touches an inactive node"
                )));
            }
            deg[i] += w;
        }
    }

    let mut trips = Vec::with_capacity(a.nnz() + n);
    for i in 0..n {
        trips.push((i, i, 1.0 / deg[i]));
        let (cols, vals) = a.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            trips.push((i, j, w / (deg[i] * deg[j]).sqrt()));
        }
    }
    SparseMatrix::from_triplets(n, n, &trips)
}
