//! Minimum-cost bipartite assignment (Hungarian / Kuhn-Munkres).
//!
//! Shortest augmenting path formulation with row/column potentials, O(n^3) on
//! the padded square matrix.

use crate::error::{input_err, Result};

/// Outcome of [`assign_min_cost`]. `assignment[row]` is the matched column, or
/// `None` when the row was matched to a zero-cost dummy column.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub assignment: Vec<Option<usize>>,
    pub total_cost: f64,
}

/// Minimum-cost injective assignment of rows to columns for a rectangular,
/// non-negative cost matrix. When there are more rows than columns the matrix
/// is padded with zero-cost dummy columns.
pub fn assign_min_cost(costs: &[Vec<f64>]) -> Result<MatchResult> {
    let rows = costs.len();
    if rows == 0 || costs[0].is_empty() {
        return input_err("cost matrix is empty");
    }
    let cols = costs[0].len();
    for row in costs {
        if row.len() != cols {
            return input_err("cost matrix rows have different lengths");
        }
        if row.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return input_err("costs must be finite and non-negative");
        }
    }

    let n = rows.max(cols);
    let cost = |i: usize, j: usize| if i < rows && j < cols { costs[i][j] } else { 0.0 };

    // 1-based potentials and matching; index 0 is the virtual root column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    for (j, &i) in row_of_col.iter().enumerate().take(n + 1).skip(1) {
        if (1..=rows).contains(&i) && j <= cols {
            assignment[i - 1] = Some(j - 1);
        }
    }
    let total_cost = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| costs[i][j]))
        .sum();
    Ok(MatchResult { assignment, total_cost })
}
