//! Bipartite matchings on weighted adjacency matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Degrees within this distance of the maximum count as maximal.
pub const DEGREE_TOLERANCE: f64 = 1e-12;

/// Maximum-weight assignment for a `rows x cols` integer weight matrix.
///
/// Returns `assignment[row] = Some(col)`; every pair with positive weight is
/// kept, zero-weight pairs are dropped. Runs in `O(k^2 K)` with `k` the
/// smaller and `K` the larger side.
pub fn max_weight_matching(weights: &[Vec<i64>], cols: usize) -> Vec<Option<usize>> {
    let rows = weights.len();
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let transpose = rows > cols;
    let (k, big) = if transpose { (cols, rows) } else { (rows, cols) };
    let cost = |a: usize, b: usize| -> i64 {
        if transpose {
            -weights[b][a]
        } else {
            -weights[a][b]
        }
    };
    // Shortest augmenting path Hungarian method, 1-based with a virtual
    // column 0; `owner[c]` is the small-side vertex matched to column `c`.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; big + 1];
    let mut owner = vec![0usize; big + 1];
    let mut way = vec![0usize; big + 1];
    for a in 1..=k {
        owner[0] = a;
        let mut c0 = 0usize;
        let mut minv = vec![inf; big + 1];
        let mut used = vec![false; big + 1];
        loop {
            used[c0] = true;
            let a0 = owner[c0];
            let mut delta = inf;
            let mut c1 = 0usize;
            for c in 1..=big {
                if !used[c] {
                    let cur = cost(a0 - 1, c - 1) - u[a0] - v[c];
                    if cur < minv[c] {
                        minv[c] = cur;
                        way[c] = c0;
                    }
                    if minv[c] < delta {
                        delta = minv[c];
                        c1 = c;
                    }
                }
            }
            for c in 0..=big {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            c0 = c1;
            if owner[c0] == 0 {
                break;
            }
        }
        loop {
            let c1 = way[c0];
            owner[c0] = owner[c1];
            c0 = c1;
            if c0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![None; rows];
    for c in 1..=big {
        let a = owner[c];
        if a == 0 {
            continue;
        }
        let (row, col) = if transpose { (c - 1, a - 1) } else { (a - 1, c - 1) };
        if weights[row][col] > 0 {
            assignment[row] = Some(col);
        }
    }
    assignment
}

/// Weighted degrees of the rows and columns of `matrix`.
pub fn degrees(matrix: &[Vec<f64>], cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut col_deg = vec![0.0; cols];
    let row_deg = matrix
        .iter()
        .map(|row| {
            for (c, &w) in row.iter().enumerate() {
                col_deg[c] += w;
            }
            row.iter().sum()
        })
        .collect();
    (row_deg, col_deg)
}

/// A matching that covers every vertex of maximum weighted degree.
///
/// `matrix[i][j] > 0` is the weight of edge `(i, j)`. Edges are scored by
/// how many maximum-degree endpoints they cover; a maximum-score matching
/// covers them all whenever such a matching exists, which is always the case
/// for bipartite graphs. Only edges touching a maximum-degree vertex are
/// returned.
pub fn covering_matching(matrix: &[Vec<f64>], cols: usize) -> Result<Vec<(usize, usize)>> {
    if !matrix.iter().flatten().any(|&w| w > 0.0) {
        return Err(Error::NoEdges);
    }
    let (row_deg, col_deg) = degrees(matrix, cols);
    let delta = row_deg.iter().chain(&col_deg).fold(0.0f64, |a, &b| a.max(b));
    let top = |d: f64| d >= delta - DEGREE_TOLERANCE;
    let scores: Vec<Vec<i64>> = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &w)| {
                    if w > 0.0 {
                        top(row_deg[i]) as i64 + top(col_deg[j]) as i64
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    Ok(max_weight_matching(&scores, cols)
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(weights: &[Vec<i64>], cols: usize) -> i64 {
        fn go(weights: &[Vec<i64>], row: usize, used: &mut Vec<bool>) -> i64 {
            if row == weights.len() {
                return 0;
            }
            let mut best = go(weights, row + 1, used);
            for c in 0..used.len() {
                if !used[c] && weights[row][c] > 0 {
                    used[c] = true;
                    best = best.max(weights[row][c] + go(weights, row + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        go(weights, 0, &mut vec![false; cols])
    }

    fn weight_of(weights: &[Vec<i64>], a: &[Option<usize>]) -> i64 {
        let mut used = vec![false; weights.first().map_or(0, |r| r.len())];
        a.iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, c)))
            .map(|(r, c)| {
                assert!(!used[c]);
                used[c] = true;
                weights[r][c]
            })
            .sum()
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let cases = [
            vec![vec![1, 2, 0], vec![2, 0, 1]],
            vec![vec![3], vec![1], vec![2]],
            vec![vec![0, 0], vec![0, 0]],
            vec![vec![1, 1, 2, 0], vec![0, 2, 2, 1], vec![2, 0, 1, 1], vec![1, 1, 0, 2]],
        ];
        for w in &cases {
            let cols = w[0].len();
            let a = max_weight_matching(w, cols);
            assert_eq!(weight_of(w, &a), brute_force(w, cols));
        }
    }

    #[test]
    fn single_edge() {
        assert_eq!(covering_matching(&[vec![0.0, 0.3]], 2).unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn doubly_stochastic_gets_perfect_matching() {
        let m = [vec![0.3, 0.7], vec![0.7, 0.3]];
        let mut got = covering_matching(&m, 2).unwrap();
        got.sort();
        assert_eq!(got.len(), 2);
        assert_ne!(got[0].1, got[1].1);
    }

    #[test]
    fn path_covers_center() {
        // a - b - c with b as the single row
        let got = covering_matching(&[vec![0.6, 0.6]], 2).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, 0);
    }

    #[test]
    fn no_edges() {
        assert_eq!(covering_matching(&[vec![0.0]], 1), Err(Error::NoEdges));
    }
}
