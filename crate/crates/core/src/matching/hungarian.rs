//! Dense O(n³) Hungarian algorithm (shortest augmenting paths with potentials).

use alloc::vec;
use alloc::vec::Vec;

/// Optimal assignment of a square cost matrix (row-major `n × n`).
pub(crate) struct Solution {
    /// `assignment[row] = col`.
    pub assignment: Vec<usize>,
    /// Dual potentials with `cost[i][j] − row_pot[i] − col_pot[j] ≥ 0`, tight on the assignment.
    pub row_pot: Vec<f64>,
    pub col_pot: Vec<f64>,
}

pub(crate) fn solve(costs: &[f64], n: usize) -> Solution {
    debug_assert_eq!(costs.len(), n * n);
    if n == 0 {
        return Solution { assignment: Vec::new(), row_pot: Vec::new(), col_pot: Vec::new() };
    }
    let inf = f64::INFINITY;
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    Solution { assignment, row_pot: u[1..].to_vec(), col_pot: v[1..].to_vec() }
}

/// Lexicographically smallest assignment among those optimal for `costs`.
///
/// Every optimal assignment is a perfect matching of the tight edges of an
/// optimal dual, so rows are fixed greedily to their smallest tight column
/// that still admits a perfect matching of the rest.
pub(crate) fn solve_lexicographic(costs: &[f64], n: usize) -> Vec<usize> {
    let sol = solve(costs, n);
    if n <= 1 {
        return sol.assignment;
    }
    let scale = costs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * scale;
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| costs[i * n + j] - sol.row_pot[i] - sol.col_pot[j] <= tol)
                .collect()
        })
        .collect();
    if tight.iter().all(|t| t.len() == 1) {
        return sol.assignment;
    }
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut col_taken = vec![false; n];
    for i in 0..n {
        let mut chosen = None;
        for &j in &tight[i] {
            if col_taken[j] {
                continue;
            }
            col_taken[j] = true;
            if has_perfect_matching(&tight, i + 1, &col_taken) {
                chosen = Some(j);
                break;
            }
            col_taken[j] = false;
        }
        match chosen {
            Some(j) => fixed.push(j),
            // Tolerance disagreement with the solver: keep its answer.
            None => return sol.assignment,
        }
    }
    fixed
}

/// Kuhn's algorithm on rows `first..` restricted to free columns.
fn has_perfect_matching(adj: &[Vec<usize>], first: usize, taken: &[bool]) -> bool {
    let n = taken.len();
    let mut match_col: Vec<Option<usize>> = vec![None; n];
    for row in first..adj.len() {
        let mut seen = vec![false; n];
        if !augment(adj, row, taken, &mut seen, &mut match_col) {
            return false;
        }
    }
    true
}

fn augment(adj: &[Vec<usize>], row: usize, taken: &[bool], seen: &mut [bool], match_col: &mut [Option<usize>]) -> bool {
    for &j in &adj[row] {
        if taken[j] || seen[j] {
            continue;
        }
        seen[j] = true;
        let free = match match_col[j] {
            None => true,
            Some(r) => augment(adj, r, taken, seen, match_col),
        };
        if free {
            match_col[j] = Some(row);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost_of(c: &[f64], n: usize, a: &[usize]) -> f64 {
        (0..n).map(|i| c[i * n + a[i]]).sum()
    }

    #[test]
    fn small_known_instance() {
        let c = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let s = solve(&c, 3);
        assert_eq!(cost_of(&c, 3, &s.assignment), 5.0);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        // All-equal costs: identity is the smallest permutation.
        let c = [1.0; 16];
        assert_eq!(solve_lexicographic(&c, 4), vec![0, 1, 2, 3]);
        // Rows 1 and 2 are identical: two optimal assignments.
        let c = [0.0, 9.0, 9.0, 9.0, 1.0, 1.0, 9.0, 1.0, 1.0];
        assert_eq!(solve_lexicographic(&c, 3), vec![0, 1, 2]);
    }

    #[test]
    fn potentials_certify_optimality() {
        let n = 6;
        let c: Vec<f64> = (0..n * n).map(|k| libm::sin(k as f64 * 1.7).abs() * 10.0).collect();
        let s = solve(&c, n);
        for i in 0..n {
            for j in 0..n {
                assert!(c[i * n + j] - s.row_pot[i] - s.col_pot[j] >= -1e-9);
            }
            let j = s.assignment[i];
            assert!((c[i * n + j] - s.row_pot[i] - s.col_pot[j]).abs() < 1e-9);
        }
    }
}
