//! Compressed sparse row matrices and the CSR x dense product.

use crate::error::{Error, Result};
use crate::exec;
use crate::numkit::matrix::Matrix;

/// CSR matrix with `f64` values. Column indices are strictly increasing
/// within each row and every stored value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets. Entries are sorted per row;
    /// duplicate coordinates are rejected, explicit zeros are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<SparseMatrix> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::Contract(format!(
                    "triplet ({r},{c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::numeric("non-finite value in sparse triplet"));
            }
            if v != 0.0 {
                per_row[r].push((c, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut per_row {
            row.sort_unstable_by_key(|&(c, _)| c);
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(Error::Contract(format!(
                        "duplicate sparse coordinate (col {})",
                        pair[0].0
                    )));
                }
            }
            for &(c, v) in row.iter() {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`, indices strictly increasing.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Value at (i, j); zero when the coordinate is not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn densify(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out.set(i, c, v);
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if (self.get(j, i) - v).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Max |a(i,j) - b(i,j)| over the union of stored coordinates.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for m in [self, other] {
            for i in 0..m.rows {
                let (cols, _) = m.row(i);
                for &j in cols {
                    worst = worst.max((self.get(i, j) - other.get(i, j)).abs());
                }
            }
        }
        worst
    }
}

/// Sparse-dense product `s * d`; matches `matmul(densify(s), d)` to
/// machine precision because each output row accumulates in the same
/// ascending-column order.
pub fn spmm(s: &SparseMatrix, d: &Matrix) -> Result<Matrix> {
    if s.cols != d.rows() {
        return Err(Error::Dimension {
            op: "spmm".into(),
            lhs: s.shape(),
            rhs: d.shape(),
        });
    }
    let m = d.cols();
    let mut out = Matrix::zeros(s.rows, m);
    exec::for_each_row(out.data_mut(), m, |i, row| {
        let (cols, vals) = s.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            let drow = d.row(c);
            for (r, &dv) in row.iter_mut().zip(drow) {
                *r += v * dv;
            }
        }
    });
    out.check_finite("spmm")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::matrix::matmul;
    use proptest::prelude::*;

    #[test]
    fn identity_spmm_is_noop() {
        let d = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let id = SparseMatrix::identity(3);
        assert_eq!(spmm(&id, &d).unwrap(), d);
    }

    #[test]
    fn empty_sparse_gives_zero_matrix() {
        let s = SparseMatrix::from_triplets(4, 4, &[]).unwrap();
        let d = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        let out = spmm(&s, &d).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn spmm_shape_mismatch() {
        let s = SparseMatrix::identity(3);
        let d = Matrix::zeros(2, 2);
        assert!(matches!(
            spmm(&s, &d),
            Err(Error::Dimension { ref op, .. }) if op == "spmm"
        ));
    }

    #[test]
    fn duplicate_coordinate_rejected() {
        let err = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0)]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    fn sparse_and_dense() -> impl Strategy<Value = (SparseMatrix, Matrix)> {
        (
            proptest::collection::vec((0usize..5, 0usize..5, -3.0f64..3.0), 0..12),
            proptest::collection::vec(-2.0f64..2.0, 15),
        )
            .prop_map(|(trips, dense)| {
                let mut seen = std::collections::HashSet::new();
                let trips: Vec<_> = trips
                    .into_iter()
                    .filter(|&(r, c, _)| seen.insert((r, c)))
                    .collect();
                (
                    SparseMatrix::from_triplets(5, 5, &trips).unwrap(),
                    Matrix::from_vec(5, 3, dense).unwrap(),
                )
            })
    }

    proptest! {
        #[test]
        fn spmm_matches_dense_oracle((s, d) in sparse_and_dense()) {
            let fast = spmm(&s, &d).unwrap();
            let slow = matmul(&s.densify(), &d).unwrap();
            prop_assert!(fast.max_abs_diff(&slow) <= 1e-12);
        }
    }
}
