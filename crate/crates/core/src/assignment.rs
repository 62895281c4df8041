//! Optimal bipartite matching on IoU (Kuhn-Munkres with dual potentials).
//!
//! The solver works on a square cost matrix `1 - IoU`, padding the shorter
//! side with zero-IoU dummies. Among equal-value optima the assignment that is
//! lexicographically smallest by row is returned: after solving, every optimal
//! assignment uses only edges that are tight under the final potentials, so the
//! canonical one is found by greedily fixing rows inside that tight subgraph.

use serde::{Deserialize, Serialize};

use crate::geometry::IoUMatrix;

/// Default IoU floor below which a pair is not considered evidence of a match.
pub const DEFAULT_IOU_MIN: f64 = 0.05;

const TIGHT_EPS: f64 = 1e-9;

/// A partial matching as `(row, col)` pairs sorted by row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchList {
    pub pairs: Vec<(usize, usize)>,
}

impl MatchList {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.pairs.iter()
    }

    /// Sum of the matrix entries at the matched positions.
    pub fn total(&self, m: &IoUMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| m.get(i, j)).sum()
    }
}

/// Maximum-total-IoU matching restricted to pairs with IoU above `iou_min`.
pub fn hungarian_match(m: &IoUMatrix, iou_min: f64) -> MatchList {
    let (rows, cols) = (m.rows(), m.cols());
    if rows == 0 || cols == 0 {
        return MatchList::default();
    }
    let n = rows.max(cols);
    let admissible = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            let v = m.get(i, j);
            if v > iou_min {
                return v;
            }
        }
        0.0
    };
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = 1.0 - admissible(i, j);
        }
    }

    let solution = solve_min_cost(&cost, n);
    let assignment = canonical_assignment(&cost, n, &solution);

    let pairs = assignment
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| i < rows && j < cols && admissible(i, j) > 0.0)
        .collect();
    MatchList { pairs }
}

struct Solution {
    row_to_col: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Shortest-augmenting-path Hungarian method on a square matrix.
fn solve_min_cost(cost: &[f64], n: usize) -> Solution {
    // 1-indexed internally; row/col 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    Solution {
        row_to_col,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}

/// Lexicographically smallest optimal assignment within the tight subgraph.
fn canonical_assignment(cost: &[f64], n: usize, sol: &Solution) -> Vec<usize> {
    let tight = |i: usize, j: usize| (cost[i * n + j] - sol.u[i] - sol.v[j]).abs() <= TIGHT_EPS;
    let mut row_to_col = sol.row_to_col.clone();
    let mut col_to_row = vec![0usize; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    let mut col_fixed = vec![false; n];

    for i in 0..n {
        for j in 0..n {
            if col_fixed[j] || !tight(i, j) {
                continue;
            }
            if row_to_col[i] == j {
                break;
            }
            // Move row i onto column j; the previous owner of j must reach
            // row i's old column through an alternating path of tight edges.
            let old_col = row_to_col[i];
            let displaced = col_to_row[j];
            let mut trial_r2c = row_to_col.clone();
            let mut trial_c2r = col_to_row.clone();
            trial_r2c[i] = j;
            trial_c2r[j] = i;
            let mut visited = col_fixed.clone();
            visited[j] = true;
            if augment(
                displaced,
                old_col,
                n,
                &tight,
                &mut visited,
                &mut trial_r2c,
                &mut trial_c2r,
            ) {
                row_to_col = trial_r2c;
                col_to_row = trial_c2r;
                break;
            }
        }
        col_fixed[row_to_col[i]] = true;
    }
    row_to_col
}

/// Finds an alternating path from `row` that ends by claiming `target`.
fn augment(
    row: usize,
    target: usize,
    n: usize,
    tight: &impl Fn(usize, usize) -> bool,
    visited: &mut [bool],
    r2c: &mut [usize],
    c2r: &mut [usize],
) -> bool {
    for c in 0..n {
        if visited[c] || !tight(row, c) {
            continue;
        }
        visited[c] = true;
        if c == target {
            r2c[row] = c;
            c2r[c] = row;
            return true;
        }
        let owner = c2r[c];
        if augment(owner, target, n, tight, visited, r2c, c2r) {
            r2c[row] = c;
            c2r[c] = row;
            return true;
        }
    }
    false
}
