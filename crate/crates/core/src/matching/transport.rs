//! Exact discrete optimal transport by the transportation simplex.
//!
//! Starts from the north-west corner basis (a spanning tree of the
//! bipartite supply/demand graph) and pivots along tree cycles until every
//! reduced cost is non-negative. Bland's rule on both the entering and the
//! leaving variable rules out cycling on degenerate bases.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    /// Row-major `m × n` plan with row sums `supply` and column sums `demand`.
    pub plan: Vec<f64>,
    pub cost: f64,
    /// Dual potentials: `cost[i][j] − row_pot[i] − col_pot[j] ≥ 0`, tight on the basis.
    pub row_pot: Vec<f64>,
    pub col_pot: Vec<f64>,
}

/// Minimizes `⟨costs, plan⟩` over plans with the given marginals.
pub fn solve_transport(supply: &[f64], demand: &[f64], costs: &[f64]) -> Result<TransportSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || costs.len() != m * n {
        return Err(Error::ShapeMismatch(format!(
            "transport problem with {m} sources, {n} sinks and {} costs",
            costs.len()
        )));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("transport costs must be finite".into()));
    }
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    if supply.iter().chain(demand).any(|w| !(*w >= 0.0)) || (total_a - total_b).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("unbalanced marginals: {total_a} vs {total_b}")));
    }

    let mut plan = vec![0.0; m * n];
    let mut basic = vec![false; m * n];
    // North-west corner: m + n − 1 cells along a staircase.
    let mut ra = supply.to_vec();
    let mut rb = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let q = ra[i].min(rb[j]).max(0.0);
        plan[i * n + j] = q;
        basic[i * n + j] = true;
        ra[i] -= q;
        rb[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && ra[i] <= rb[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    let scale = costs.iter().fold(1.0f64, |s, c| s.max(c.abs()));
    let tol = 1e-12 * scale;
    let max_pivots = 100 * (m * n) + 1000;
    let mut row_pot = vec![0.0; m];
    let mut col_pot = vec![0.0; n];

    for _ in 0..max_pivots {
        let adj = tree_adjacency(&basic, m, n);
        potentials(&adj, costs, m, &mut row_pot, &mut col_pot);

        // Bland: first non-basic cell with negative reduced cost.
        let entering = (0..m * n).find(|&e| !basic[e] && costs[e] - row_pot[e / n] - col_pot[e % n] < -tol);
        let Some(e) = entering else {
            let cost = plan.iter().zip(costs).map(|(x, c)| x * c).sum();
            return Ok(TransportSolution { plan, cost, row_pot, col_pot });
        };
        let (ei, ej) = (e / n, e % n);

        // Tree path from column ej back to row ei; its edges alternate −, +, −, …
        let path = tree_path(&adj, m + ej, ei, m, n);
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 && (plan[cell] < theta || (plan[cell] == theta && cell < leaving)) {
                theta = plan[cell];
                leaving = cell;
            }
        }
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                plan[cell] -= theta;
            } else {
                plan[cell] += theta;
            }
        }
        plan[e] += theta;
        plan[leaving] = 0.0;
        basic[leaving] = false;
        basic[e] = true;
    }
    Err(Error::InvalidParameter("transport simplex did not converge".into()))
}

/// Adjacency over nodes `0..m` (rows) and `m..m+n` (columns); edges carry the cell index.
fn tree_adjacency(basic: &[bool], m: usize, n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); m + n];
    for (cell, _) in basic.iter().enumerate().filter(|(_, b)| **b) {
        let (i, j) = (cell / n, cell % n);
        adj[i].push((m + j, cell));
        adj[m + j].push((i, cell));
    }
    adj
}

fn potentials(adj: &[Vec<(usize, usize)>], costs: &[f64], m: usize, u: &mut [f64], v: &mut [f64]) {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::new();
    u[0] = 0.0;
    seen[0] = true;
    queue.push_back(0);
    while let Some(node) = queue.pop_front() {
        for &(next, cell) in &adj[node] {
            if seen[next] {
                continue;
            }
            seen[next] = true;
            if node < m {
                v[next - m] = costs[cell] - u[node];
            } else {
                u[next] = costs[cell] - v[node - m];
            }
            queue.push_back(next);
        }
    }
}

/// Cells on the tree path from `from` to `to`, in order.
fn tree_path(adj: &[Vec<(usize, usize)>], from: usize, to: usize, m: usize, n: usize) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; m + n];
    let mut seen = vec![false; m + n];
    let mut queue = VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(next, cell) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, cell));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while let Some((prev, cell)) = parent[node] {
        path.push(cell);
        node = prev;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_certificate(a: &[f64], b: &[f64], c: &[f64], s: &TransportSolution) {
        let (m, n) = (a.len(), b.len());
        for i in 0..m {
            let row: f64 = (0..n).map(|j| s.plan[i * n + j]).sum();
            assert!((row - a[i]).abs() < 1e-9);
        }
        for j in 0..n {
            let col: f64 = (0..m).map(|i| s.plan[i * n + j]).sum();
            assert!((col - b[j]).abs() < 1e-9);
        }
        assert!(s.plan.iter().all(|&x| x >= -1e-15));
        for i in 0..m {
            for j in 0..n {
                assert!(c[i * n + j] - s.row_pot[i] - s.col_pot[j] >= -1e-9);
            }
        }
        let dual: f64 = a.iter().zip(&s.row_pot).map(|(x, y)| x * y).sum::<f64>()
            + b.iter().zip(&s.col_pot).map(|(x, y)| x * y).sum::<f64>();
        assert!((dual - s.cost).abs() < 1e-9, "gap {} vs {}", dual, s.cost);
    }

    #[test]
    fn two_by_two() {
        let a = [0.5, 0.5];
        let b = [0.5, 0.5];
        let c = [1.0, 0.0, 0.0, 1.0];
        let s = solve_transport(&a, &b, &c).unwrap();
        assert_eq!(s.cost, 0.0);
        assert_eq!(s.plan, vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn rectangular_instances_are_certified() {
        for seed in 0..30u32 {
            let m = 2 + (seed % 4) as usize;
            let n = 1 + (seed % 5) as usize;
            let raw_a: Vec<f64> = (0..m).map(|i| 1.0 + libm::sin((seed * 7 + i as u32) as f64).abs()).collect();
            let raw_b: Vec<f64> = (0..n).map(|j| 0.5 + libm::cos((seed * 3 + j as u32) as f64).abs()).collect();
            let sa: f64 = raw_a.iter().sum();
            let sb: f64 = raw_b.iter().sum();
            let a: Vec<f64> = raw_a.iter().map(|x| x / sa).collect();
            let b: Vec<f64> = raw_b.iter().map(|x| x / sb).collect();
            let c: Vec<f64> = (0..m * n).map(|k| libm::sin((k as u32 * 13 + seed) as f64).abs() * 4.0).collect();
            let s = solve_transport(&a, &b, &c).unwrap();
            check_certificate(&a, &b, &c, &s);
        }
    }

    #[test]
    fn degenerate_uniform_square() {
        let n = 5;
        let a = vec![0.2; n];
        let c: Vec<f64> = (0..n * n).map(|k| ((k * 7) % 11) as f64).collect();
        let s = solve_transport(&a, &a, &c).unwrap();
        check_certificate(&a, &a, &c, &s);
    }

    #[test]
    fn rejects_unbalanced() {
        assert!(solve_transport(&[1.0], &[0.5], &[0.0]).is_err());
    }
}
