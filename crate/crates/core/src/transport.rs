//! Exact discrete optimal transport by the transportation simplex.
//!
//! The basis is a spanning tree on the bipartite graph of supply rows and
//! demand columns (`m + n − 1` cells, degenerate cells allowed). Each pivot
//! prices all cells against the tree duals `u_i + v_j = c_ij`, brings in the
//! most negative reduced cost and pushes flow around the unique tree cycle.
//! After a run of degenerate pivots the rule switches to Bland's
//! lowest-index choice, which cannot cycle.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    /// Basic cells `(row, column, mass)`; zero-mass cells are dropped.
    pub flows: Vec<(usize, usize, f64)>,
}

struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Basis {
    fn northwest(supply: &[f64], demand: &[f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let (mut ra, mut rb) = (supply.to_vec(), demand.to_vec());
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let f = ra[i].min(rb[j]).max(0.0);
            cells.push((i, j));
            flow.push(f);
            ra[i] -= f;
            rb[j] -= f;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { m, n, cells, flow }
    }

    /// Node ids: rows `0..m`, columns `m..m+n`. Returns, per node, the
    /// parent node and the basic cell index of the connecting edge.
    fn tree(&self) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let nodes = self.m + self.n;
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
        for (e, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, e));
            adj[self.m + j].push((i, e));
        }
        let mut parent = vec![usize::MAX; nodes];
        let mut edge = vec![usize::MAX; nodes];
        let mut depth = vec![0usize; nodes];
        let mut stack = vec![0usize];
        parent[0] = 0;
        while let Some(u) = stack.pop() {
            for &(v, e) in &adj[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    edge[v] = e;
                    depth[v] = depth[u] + 1;
                    stack.push(v);
                }
            }
        }
        (parent, edge, depth)
    }
}

fn tree_duals(basis: &Basis, cost: &[f64], parent: &[usize], edge: &[usize], depth: &[usize]) -> Vec<f64> {
    let (m, n) = (basis.m, basis.n);
    let mut order: Vec<usize> = (0..m + n).collect();
    order.sort_by_key(|&v| depth[v]);
    // potentials: rows carry u_i, columns carry v_j, with u_i + v_j = c_ij on the tree
    let mut pot = vec![0.0; m + n];
    for &v in order.iter().skip(1) {
        let (i, j) = basis.cells[edge[v]];
        let c = cost[i * n + j];
        pot[v] = c - pot[parent[v]];
    }
    pot
}

/// Minimum-cost transport between `supply` and `demand` with row-major
/// `cost[i * n + j]`. Masses must be nonnegative with equal totals (up to
/// rounding; the demand is rescaled to the supply total).
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::Transport("empty marginal".into()));
    }
    if cost.len() != m * n {
        return Err(Error::Transport(format!("cost matrix has {} entries, expected {}", cost.len(), m * n)));
    }
    if supply.iter().chain(demand).any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Transport("masses must be finite and nonnegative".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("transport costs"));
    }
    let (sa, sb): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
        return Err(Error::Transport(format!("unbalanced marginals: {sa} vs {sb}")));
    }
    let demand: Vec<f64> = demand.iter().map(|b| b * sa / sb).collect();

    let max_cost = cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let tol = 64.0 * f64::EPSILON * (1.0 + max_cost) * (m + n) as f64;
    let mut basis = Basis::northwest(supply, &demand);
    let mut in_basis = vec![false; m * n];
    for &(i, j) in &basis.cells {
        in_basis[i * n + j] = true;
    }

    let max_pivots = 50 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0usize;
    for _ in 0..max_pivots {
        let (parent, edge, depth) = basis.tree();
        let pot = tree_duals(&basis, cost, &parent, &edge, &depth);

        let bland = degenerate_run > m + n;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -tol;
        'price: for i in 0..m {
            for j in 0..n {
                if in_basis[i * n + j] {
                    continue;
                }
                let r = cost[i * n + j] - pot[i] - pot[m + j];
                if r < best {
                    entering = Some((i, j));
                    if bland {
                        break 'price;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let total = basis
                .cells
                .iter()
                .zip(&basis.flow)
                .map(|(&(i, j), &f)| f * cost[i * n + j])
                .sum();
            let flows = basis
                .cells
                .iter()
                .zip(&basis.flow)
                .filter(|(_, &f)| f > 0.0)
                .map(|(&(i, j), &f)| (i, j, f))
                .collect();
            return Ok(TransportPlan { cost: total, flows });
        };

        // tree path from column node (m + ej) up to row node ei
        let (mut a, mut b) = (m + ej, ei);
        let (mut from_col, mut from_row) = (Vec::new(), Vec::new());
        while depth[a] > depth[b] {
            from_col.push(edge[a]);
            a = parent[a];
        }
        while depth[b] > depth[a] {
            from_row.push(edge[b]);
            b = parent[b];
        }
        while a != b {
            from_col.push(edge[a]);
            a = parent[a];
            from_row.push(edge[b]);
            b = parent[b];
        }
        from_row.reverse();
        let path: Vec<usize> = from_col.into_iter().chain(from_row).collect();

        // edges at odd positions (1-based) along the path lose flow
        let mut leave = usize::MAX;
        let mut theta = f64::INFINITY;
        for &e in path.iter().step_by(2) {
            let f = basis.flow[e];
            let key = basis.cells[e];
            if f < theta || (f == theta && key < basis.cells[leave]) {
                theta = f;
                leave = e;
            }
        }
        let theta = theta.max(0.0);
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[e] = (basis.flow[e] - theta).max(0.0);
            } else {
                basis.flow[e] += theta;
            }
        }
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
        let (li, lj) = basis.cells[leave];
        in_basis[li * n + lj] = false;
        in_basis[ei * n + ej] = true;
        basis.cells[leave] = (ei, ej);
        basis.flow[leave] = theta;
    }
    Err(Error::Transport(format!("no optimum after {max_pivots} pivots")))
}

#[cfg(test)]
pub(crate) mod oracle {
    /// Minimum cost over every basic feasible plan: each choice of
    /// `m + n − 1` cells forming a spanning tree determines a unique plan by
    /// leaf peeling; infeasible (negative) plans are discarded.
    pub fn brute_force(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
        let (m, n) = (supply.len(), demand.len());
        let k = m + n - 1;
        let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let mut best = f64::INFINITY;
        let mut chosen = Vec::with_capacity(k);
        subsets(&cells, k, 0, &mut chosen, &mut |set| {
            if let Some(flow) = peel(supply, demand, set) {
                if flow.iter().all(|&f| f >= -1e-14) {
                    let c: f64 = set.iter().zip(&flow).map(|(&(i, j), f)| f * cost[i * n + j]).sum();
                    best = best.min(c);
                }
            }
        });
        best
    }

    fn subsets(
        cells: &[(usize, usize)],
        k: usize,
        start: usize,
        chosen: &mut Vec<(usize, usize)>,
        visit: &mut dyn FnMut(&[(usize, usize)]),
    ) {
        if chosen.len() == k {
            visit(chosen);
            return;
        }
        for idx in start..cells.len() {
            chosen.push(cells[idx]);
            subsets(cells, k, idx + 1, chosen, visit);
            chosen.pop();
        }
    }

    fn peel(supply: &[f64], demand: &[f64], set: &[(usize, usize)]) -> Option<Vec<f64>> {
        let (m, _) = (supply.len(), demand.len());
        let mut ra = supply.to_vec();
        let mut rb = demand.to_vec();
        let mut flow = vec![f64::NAN; set.len()];
        let mut open: Vec<bool> = vec![true; set.len()];
        for _ in 0..set.len() {
            // find a node with exactly one open incident cell
            let mut progress = false;
            for node in 0..(m + demand.len()) {
                let incident: Vec<usize> = (0..set.len())
                    .filter(|&e| open[e] && if node < m { set[e].0 == node } else { set[e].1 == node - m })
                    .collect();
                if incident.len() == 1 {
                    let e = incident[0];
                    let (i, j) = set[e];
                    let f = if node < m { ra[i] } else { rb[j] };
                    flow[e] = f;
                    ra[i] -= f;
                    rb[j] -= f;
                    open[e] = false;
                    progress = true;
                    break;
                }
            }
            if !progress {
                return None; // contains a cycle
            }
        }
        let residual = ra.iter().chain(&rb).fold(0.0f64, |a, r| a.max(r.abs()));
        (residual <= 1e-12).then_some(flow)
    }
}
