//! Balanced transportation problems: an exact transportation simplex and an
//! entropic (Sinkhorn) approximation.
//!
//! The exact solver keeps a spanning-tree basis of `m + n - 1` cells over the
//! bipartite row/column graph and prices cells with dual potentials. The
//! entering cell has the most negative reduced cost; ties, and ties among
//! leaving cells, go to the lowest row, then the lowest column. Long runs of
//! degenerate pivots switch to Bland's rule, which rules out cycling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OtError {
    #[error("unbalanced problem: supply {supply} vs demand {demand}")]
    Unbalanced { supply: f64, demand: f64 },

    #[error("invalid problem: {0}")]
    InvalidInput(String),

    #[error("simplex exceeded {0} pivots")]
    NumericalFailure(usize),
}

/// Masses below this are dropped before solving.
pub const MIN_MASS: f64 = 1e-15;
/// Balance tolerance, relative to `max(1, total supply)`.
pub const BALANCE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem {
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    /// `supply.len()` rows of `demand.len()` columns.
    pub cost: Vec<Vec<f64>>,
}

/// Dual potentials certifying optimality: `u_i + v_j <= c_ij` everywhere,
/// with equality on the plan's support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub plan: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Marginal error before rounding (entropic solver only).
    pub residual: f64,
    pub duals: Option<Duals>,
}

impl TransportProblem {
    pub fn new(supply: Vec<f64>, demand: Vec<f64>, cost: Vec<Vec<f64>>) -> Self {
        TransportProblem { supply, demand, cost }
    }

    pub fn rows(&self) -> usize {
        self.supply.len()
    }

    pub fn cols(&self) -> usize {
        self.demand.len()
    }

    /// Swaps supply and demand and transposes the cost.
    pub fn transposed(&self) -> Self {
        let cost = (0..self.cols())
            .map(|j| self.cost.iter().map(|row| row[j]).collect())
            .collect();
        TransportProblem::new(self.demand.clone(), self.supply.clone(), cost)
    }

    fn validate(&self) -> Result<(f64, f64), OtError> {
        let (m, n) = (self.rows(), self.cols());
        if m == 0 || n == 0 {
            return Err(OtError::InvalidInput("empty marginal".into()));
        }
        if self.cost.len() != m || self.cost.iter().any(|r| r.len() != n) {
            return Err(OtError::InvalidInput(format!("cost matrix is not {m}x{n}")));
        }
        let bad = |x: &f64| !x.is_finite() || *x < 0.0;
        if self.supply.iter().chain(&self.demand).any(bad) {
            return Err(OtError::InvalidInput("masses must be finite and >= 0".into()));
        }
        if self.cost.iter().flatten().any(|c| !c.is_finite()) {
            return Err(OtError::InvalidInput("costs must be finite".into()));
        }
        let s: f64 = self.supply.iter().sum();
        let d: f64 = self.demand.iter().sum();
        if (s - d).abs() >= BALANCE_TOL * s.max(1.0) {
            return Err(OtError::Unbalanced { supply: s, demand: d });
        }
        Ok((s, d))
    }

    /// Indices of rows/columns carrying at least [`MIN_MASS`].
    fn support(&self) -> (Vec<usize>, Vec<usize>) {
        let keep = |v: &[f64]| (0..v.len()).filter(|&i| v[i] >= MIN_MASS).collect();
        (keep(&self.supply), keep(&self.demand))
    }
}

pub fn objective(plan: &[Vec<f64>], cost: &[Vec<f64>]) -> f64 {
    plan.iter()
        .zip(cost)
        .flat_map(|(p, c)| p.iter().zip(c).map(|(x, y)| x * y))
        .sum()
}

/// Exact optimum of the transportation LP.
///
/// Rows and columns with mass below [`MIN_MASS`] are dropped; the remaining
/// demand is rescaled to the remaining supply total so both sides balance
/// exactly. The result is deterministic for a given input.
pub fn solve_exact(problem: &TransportProblem) -> Result<TransportPlan, OtError> {
    problem.validate()?;
    let (m, n) = (problem.rows(), problem.cols());
    let (rows, cols) = problem.support();
    let mut plan = vec![vec![0.0; n]; m];

    if rows.is_empty() || cols.is_empty() {
        let duals = extend_duals(problem, &rows, &cols, &[], &[]);
        return Ok(TransportPlan {
            plan,
            objective: 0.0,
            iterations: 0,
            converged: true,
            residual: 0.0,
            duals: Some(duals),
        });
    }

    let supply: Vec<f64> = rows.iter().map(|&i| problem.supply[i]).collect();
    let demand_raw: Vec<f64> = cols.iter().map(|&j| problem.demand[j]).collect();
    let (s_total, d_total): (f64, f64) = (supply.iter().sum(), demand_raw.iter().sum());
    let demand: Vec<f64> = demand_raw.iter().map(|d| d * (s_total / d_total)).collect();
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| problem.cost[i][j]).collect())
        .collect();

    let mut simplex = Simplex::northwest(&supply, &demand, &cost);
    let iterations = simplex.run()?;
    let (u, v) = simplex.potentials();

    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            plan[i][j] = simplex.flow[a][b].max(0.0);
        }
    }
    let duals = extend_duals(problem, &rows, &cols, &u, &v);
    Ok(TransportPlan {
        objective: objective(&plan, &problem.cost),
        plan,
        iterations,
        converged: true,
        residual: 0.0,
        duals: Some(duals),
    })
}

/// Fills potentials for dropped rows/columns so that dual feasibility holds
/// on the full problem.
fn extend_duals(problem: &TransportProblem, rows: &[usize], cols: &[usize], u_kept: &[f64], v_kept: &[f64]) -> Duals {
    let (m, n) = (problem.rows(), problem.cols());
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    for (a, &i) in rows.iter().enumerate() {
        if a < u_kept.len() {
            u[i] = u_kept[a];
        }
    }
    for (b, &j) in cols.iter().enumerate() {
        if b < v_kept.len() {
            v[j] = v_kept[b];
        }
    }
    for i in 0..m {
        if u[i].is_nan() {
            u[i] = (0..n)
                .filter(|&j| !v[j].is_nan())
                .map(|j| problem.cost[i][j] - v[j])
                .fold(f64::INFINITY, f64::min);
            if !u[i].is_finite() {
                u[i] = 0.0;
            }
        }
    }
    for j in 0..n {
        if v[j].is_nan() {
            v[j] = (0..m).map(|i| problem.cost[i][j] - u[i]).fold(f64::INFINITY, f64::min);
        }
    }
    Duals { u, v }
}

struct Simplex<'a> {
    cost: &'a [Vec<f64>],
    flow: Vec<Vec<f64>>,
    basic: Vec<Vec<bool>>,
    basis: Vec<(usize, usize)>,
    m: usize,
    n: usize,
}

impl<'a> Simplex<'a> {
    /// Initial basic feasible solution from the northwest-corner rule. When a
    /// row and column are exhausted together the walk advances only one of
    /// them, keeping a zero-valued basic cell so the basis stays a tree.
    fn northwest(supply: &[f64], demand: &[f64], cost: &'a [Vec<f64>]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut flow = vec![vec![0.0; n]; m];
        let mut basic = vec![vec![false; n]; m];
        let mut basis = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = if i == m - 1 && j == n - 1 {
                // Last cell absorbs rounding drift.
                s[i].max(0.0)
            } else {
                s[i].min(d[j]).max(0.0)
            };
            flow[i][j] = x;
            basic[i][j] = true;
            basis.push((i, j));
            s[i] -= x;
            d[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        Simplex { cost, flow, basic, basis, m, n }
    }

    /// Potentials with `u_0 = 0` and `u_i + v_j = c_ij` on basic cells.
    fn potentials(&self) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let adj = self.adjacency();
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            for &(next, (i, j)) in &adj[node] {
                if pot[next].is_nan() {
                    pot[next] = self.cost[i][j] - pot[node];
                    stack.push(next);
                }
            }
        }
        let v = pot.split_off(m);
        (pot, v)
    }

    /// Node `i` is row `i`; node `m + j` is column `j`.
    fn adjacency(&self) -> Vec<Vec<(usize, (usize, usize))>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for &(i, j) in &self.basis {
            adj[i].push((self.m + j, (i, j)));
            adj[self.m + j].push((i, (i, j)));
        }
        adj
    }

    /// Basic cells on the tree path from column `j` to row `i`, in that order.
    fn tree_path(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let adj = self.adjacency();
        let start = self.m + j;
        let mut via: Vec<Option<(usize, (usize, usize))>> = vec![None; self.m + self.n];
        let mut visited = vec![false; self.m + self.n];
        visited[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == i {
                break;
            }
            for &(next, cell) in &adj[node] {
                if !visited[next] {
                    visited[next] = true;
                    via[next] = Some((node, cell));
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = i;
        while let Some((prev, cell)) = via[node] {
            path.push(cell);
            node = prev;
        }
        path.reverse();
        path
    }

    fn run(&mut self) -> Result<usize, OtError> {
        let scale = self
            .cost
            .iter()
            .flatten()
            .fold(1.0f64, |acc, c| acc.max(c.abs()));
        let eps = 1e-12 * scale;
        let cap = 10_000 + 20 * self.m * self.n * (self.m + self.n);

        // Most negative reduced cost enters (ties: lowest row, then column).
        // After a run of degenerate pivots the first negative cell enters
        // instead (Bland), until a pivot moves mass again.
        let mut degenerate_run = 0;
        for iteration in 0..cap {
            let (u, v) = self.potentials();
            let bland = degenerate_run > self.m + self.n;
            let mut entering: Option<((usize, usize), f64)> = None;
            'scan: for i in 0..self.m {
                for j in 0..self.n {
                    if self.basic[i][j] {
                        continue;
                    }
                    let reduced = self.cost[i][j] - u[i] - v[j];
                    if reduced < -eps && entering.is_none_or(|(_, best)| reduced < best) {
                        entering = Some(((i, j), reduced));
                        if bland {
                            break 'scan;
                        }
                    }
                }
            }
            let Some(((ei, ej), _)) = entering else {
                return Ok(iteration);
            };

            // Cycle: entering cell gets +theta, path cells alternate -, +, -, ...
            let path = self.tree_path(ei, ej);
            debug_assert!(path.len() % 2 == 1);
            let mut leaving = path[0];
            for &(pi, pj) in path.iter().step_by(2) {
                let (li, lj) = leaving;
                let (f, lf) = (self.flow[pi][pj], self.flow[li][lj]);
                if f < lf || (f == lf && (pi, pj) < (li, lj)) {
                    leaving = (pi, pj);
                }
            }
            let theta = self.flow[leaving.0][leaving.1].max(0.0);
            degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };

            for (k, &(pi, pj)) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[pi][pj] = (self.flow[pi][pj] - theta).max(0.0);
                } else {
                    self.flow[pi][pj] += theta;
                }
            }
            self.flow[ei][ej] = theta;
            self.flow[leaving.0][leaving.1] = 0.0;
            self.basic[leaving.0][leaving.1] = false;
            self.basic[ei][ej] = true;
            let pos = self.basis.iter().position(|&c| c == leaving).expect("leaving cell is basic");
            self.basis[pos] = (ei, ej);
        }
        Err(OtError::NumericalFailure(cap))
    }
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn scaling followed by rounding onto the exact
/// marginals. The returned plan is feasible, so its cost is an upper bound
/// on the exact optimum.
pub fn solve_entropic(problem: &TransportProblem, epsilon: f64, max_iter: usize) -> Result<TransportPlan, OtError> {
    problem.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(OtError::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let (m, n) = (problem.rows(), problem.cols());
    let (rows, cols) = problem.support();
    let mut plan = vec![vec![0.0; n]; m];
    if rows.is_empty() || cols.is_empty() {
        return Ok(TransportPlan {
            plan,
            objective: 0.0,
            iterations: 0,
            converged: true,
            residual: 0.0,
            duals: None,
        });
    }

    let a: Vec<f64> = rows.iter().map(|&i| problem.supply[i]).collect();
    let b_raw: Vec<f64> = cols.iter().map(|&j| problem.demand[j]).collect();
    let (sa, sb): (f64, f64) = (a.iter().sum(), b_raw.iter().sum());
    let b: Vec<f64> = b_raw.iter().map(|x| x * sa / sb).collect();
    let c: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| problem.cost[i][j]).collect())
        .collect();
    let (mk, nk) = (a.len(), b.len());
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();

    let mut f = vec![0.0; mk];
    let mut g = vec![0.0; nk];
    let tol = 1e-12 * sa.max(1.0);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    let kernel = |f: &[f64], g: &[f64]| -> Vec<Vec<f64>> {
        (0..mk)
            .map(|i| (0..nk).map(|j| ((f[i] + g[j] - c[i][j]) / epsilon).exp()).collect())
            .collect()
    };

    while iterations < max_iter {
        for i in 0..mk {
            let lse = logsumexp((0..nk).map(|j| (g[j] - c[i][j]) / epsilon));
            f[i] = epsilon * (log_a[i] - lse);
        }
        for j in 0..nk {
            let lse = logsumexp((0..mk).map(|i| (f[i] - c[i][j]) / epsilon));
            g[j] = epsilon * (log_b[j] - lse);
        }
        iterations += 1;
        // Columns are exact after the g-update; check rows.
        if iterations % 10 == 0 || iterations == max_iter {
            residual = (0..mk)
                .map(|i| {
                    let row: f64 = (0..nk).map(|j| ((f[i] + g[j] - c[i][j]) / epsilon).exp()).sum();
                    (row - a[i]).abs()
                })
                .sum();
            if residual < tol {
                break;
            }
        }
    }
    let converged = residual < tol;
    if !converged {
        log::warn!("Sinkhorn stopped after {iterations} iterations with marginal error {residual:.3e}");
    }

    let p = round_to_marginals(kernel(&f, &g), &a, &b);
    for (ai, &i) in rows.iter().enumerate() {
        for (bj, &j) in cols.iter().enumerate() {
            plan[i][j] = p[ai][bj];
        }
    }
    Ok(TransportPlan {
        objective: objective(&plan, &problem.cost),
        plan,
        iterations,
        converged,
        residual,
        duals: None,
    })
}

/// Projects an approximate coupling onto the exact transport polytope by
/// shrinking over-full rows and columns and spreading the deficit as a
/// rank-one correction.
fn round_to_marginals(mut p: Vec<Vec<f64>>, a: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    let (m, n) = (a.len(), b.len());
    for i in 0..m {
        let r: f64 = p[i].iter().sum();
        if r > a[i] {
            let x = a[i] / r;
            p[i].iter_mut().for_each(|v| *v *= x);
        }
    }
    for j in 0..n {
        let col: f64 = (0..m).map(|i| p[i][j]).sum();
        if col > b[j] {
            let y = b[j] / col;
            (0..m).for_each(|i| p[i][j] *= y);
        }
    }
    let err_r: Vec<f64> = (0..m).map(|i| (a[i] - p[i].iter().sum::<f64>()).max(0.0)).collect();
    let err_c: Vec<f64> = (0..n).map(|j| (b[j] - (0..m).map(|i| p[i][j]).sum::<f64>()).max(0.0)).collect();
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            for j in 0..n {
                p[i][j] += err_r[i] * err_c[j] / total;
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_marginals(p: &TransportProblem, t: &TransportPlan, tol: f64) {
        for (i, row) in t.plan.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - p.supply[i]).abs() < tol);
            assert!(row.iter().all(|&x| x >= -1e-12));
        }
        for j in 0..p.cols() {
            let col: f64 = t.plan.iter().map(|r| r[j]).sum();
            assert!((col - p.demand[j]).abs() < tol);
        }
    }

    #[test]
    fn single_source() {
        let p = TransportProblem::new(vec![1.0], vec![0.4, 0.6], vec![vec![2.0, 5.0]]);
        let t = solve_exact(&p).unwrap();
        assert!((t.objective - 3.8).abs() < 1e-12);
        check_marginals(&p, &t, 1e-12);
    }

    #[test]
    fn two_by_two() {
        // Vertex enumeration: T = [[x, 0.3 - x], [0.6 - x, 0.1 + x]], x in [0, 0.3],
        // cost = x + 0.1 + x, minimized at x = 0.
        let p = TransportProblem::new(vec![0.3, 0.7], vec![0.6, 0.4], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let t = solve_exact(&p).unwrap();
        assert!((t.objective - 0.1).abs() < 1e-12);
        let want = [[0.0, 0.3], [0.6, 0.1]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((t.plan[i][j] - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_coupling() {
        let w = vec![0.25, 0.25, 0.5];
        let cost = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        let t = solve_exact(&TransportProblem::new(w.clone(), w, cost)).unwrap();
        assert_eq!(t.objective, 0.0);
    }

    #[test]
    fn errors() {
        let p = TransportProblem::new(vec![1.0], vec![0.5], vec![vec![1.0]]);
        assert!(matches!(solve_exact(&p), Err(OtError::Unbalanced { .. })));
        let p = TransportProblem::new(vec![1.0], vec![1.0], vec![vec![1.0, 2.0]]);
        assert!(matches!(solve_exact(&p), Err(OtError::InvalidInput(_))));
        let p = TransportProblem::new(vec![1.0], vec![1.0], vec![vec![f64::NAN]]);
        assert!(matches!(solve_exact(&p), Err(OtError::InvalidInput(_))));
        let p = TransportProblem::new(vec![1.0], vec![1.0], vec![vec![1.0]]);
        assert!(matches!(solve_entropic(&p, 0.0, 10), Err(OtError::InvalidInput(_))));
    }

    #[test]
    fn tiny_masses_are_dropped() {
        let p = TransportProblem::new(
            vec![0.5, 1e-17, 0.5],
            vec![1.0, 0.0],
            vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![3.0, 0.0]],
        );
        let t = solve_exact(&p).unwrap();
        assert!((t.objective - 2.0).abs() < 1e-12);
        assert_eq!(t.plan[1], vec![0.0, 0.0]);
        let duals = t.duals.unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert!(duals.u[i] + duals.v[j] <= p.cost[i][j] + 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_marginals_terminate() {
        // Equal partial sums force simultaneous row/column exhaustion.
        let w = vec![0.25; 4];
        let cost: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| ((i * 3 + j * 5) % 4) as f64).collect()).collect();
        let t = solve_exact(&TransportProblem::new(w.clone(), w, cost)).unwrap();
        assert_eq!(t.objective, 0.0);
    }

    #[test]
    fn entropic_trivial() {
        let p = TransportProblem::new(vec![1.0], vec![1.0], vec![vec![0.7]]);
        let t = solve_entropic(&p, 0.1, 100).unwrap();
        assert!((t.plan[0][0] - 1.0).abs() < 1e-12);
        assert!((t.objective - 0.7).abs() < 1e-12);
    }

    #[test]
    fn entropic_identity_goes_to_zero() {
        let w = vec![1.0 / 3.0; 3];
        let cost = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let p = TransportProblem::new(w.clone(), w, cost);
        let coarse = solve_entropic(&p, 0.5, 5000).unwrap().objective;
        let fine = solve_entropic(&p, 0.01, 5000).unwrap().objective;
        assert!(fine < coarse);
        assert!(fine < 1e-6);
    }
}
