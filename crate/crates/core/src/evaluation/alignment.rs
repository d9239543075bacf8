use serde::{Deserialize, Serialize};

use crate::embedding::SimilarityMatrix;
use crate::error::{Error, Result};

/// One-to-one matching of generated (row) to reference (column) items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, column)` pairs, rows ascending.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl Assignment {
    pub fn mean(&self) -> f64 {
        if self.pairs.is_empty() {
            0.0
        } else {
            self.total / self.pairs.len() as f64
        }
    }
}

/// Maximum-sum perfect matching on a square matrix (Hungarian method with
/// potentials, O(K³)). `total` is summed in row order.
pub fn optimal_alignment(matrix: &SimilarityMatrix) -> Result<Assignment> {
    let n = matrix.rows();
    if n != matrix.cols() {
        return Err(Error::Metric(format!(
            "alignment needs a square matrix, got {}×{}",
            n,
            matrix.cols()
        )));
    }
    if n == 0 {
        return Err(Error::Metric("alignment needs a non-empty matrix".into()));
    }
    if (0..n).any(|r| matrix.row(r).iter().any(|v| !v.is_finite())) {
        return Err(Error::Metric("alignment matrix has non-finite entries".into()));
    }
    // minimize the negated scores; 1-indexed potentials u (rows), v (cols)
    let cost = |i: usize, j: usize| -matrix.get(i - 1, j - 1);
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        col_of_row[p[j] - 1] = j - 1;
    }
    let pairs: Vec<(usize, usize)> = col_of_row.into_iter().enumerate().collect();
    let total = pairs.iter().map(|&(r, c)| matrix.get(r, c)).sum();
    Ok(Assignment { pairs, total })
}
