use crate::error::{Error, Result};
use crate::grid_model::ForestConfig;

use super::{check_dimension, InjectionVector, VoltageState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistFlowOptions {
    /// Substation voltage magnitude (per-unit).
    pub v0: f64,
    /// Stop once no voltage magnitude moves by more than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DistFlowOptions {
    fn default() -> Self {
        DistFlowOptions {
            v0: 1.0,
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistFlowSolution {
    /// ε = v − 1 at the load nodes; phases are not produced.
    pub state: VoltageState,
    /// Voltage magnitudes at the load nodes.
    pub voltage: Vec<f64>,
    /// Active power sent from parent to child over each line, indexed by
    /// edge id; zero on open lines.
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub iterations: usize,
    /// Largest residual of the branch-flow equations at the returned point.
    pub residual: f64,
}

/// Nonlinear branch-flow equations solved by backward/forward sweep from a
/// flat, lossless start.
///
/// Backward: `P_ab = c_b + Σ P_bc + r_ab (P_ab² + Q_ab²) / v_a²` with
/// `c_b = −p_b` the consumption at the receiving node (so a leaf receives
/// exactly its consumption). Forward:
/// `v_b² = v_a² − 2(r P + x Q) + (r² + x²)(P² + Q²)/v_a²`.
pub fn distflow_solve(
    forest: &ForestConfig,
    inj: &InjectionVector,
    opts: DistFlowOptions,
) -> Result<DistFlowSolution> {
    check_dimension(forest, inj)?;
    if !(opts.v0 > 0.0 && opts.v0.is_finite()) {
        return Err(Error::Domain(format!(
            "root voltage must be positive, got {}",
            opts.v0
        )));
    }
    if opts.tol <= 0.0 || opts.tol.is_nan() {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }

    let grid = forest.grid();
    let n_nodes = grid.nodes().len();
    let order = forest.preorder();
    let mut cons_p = vec![0.0; n_nodes];
    let mut cons_q = vec![0.0; n_nodes];
    for (pos, node) in grid.nodes().iter().enumerate() {
        if let Some(i) = grid.load_index(node.id) {
            cons_p[pos] = -inj.p[i];
            cons_q[pos] = -inj.q[i];
        }
    }
    // (r, x) of the line into each non-root node
    let imp: Vec<(f64, f64)> = (0..n_nodes)
        .map(|v| match forest.parent_pos(v) {
            Some((_, e)) => {
                let l = grid.line(e).unwrap();
                (l.r, l.x)
            }
            None => (0.0, 0.0),
        })
        .collect();

    let mut v2 = vec![opts.v0 * opts.v0; n_nodes];
    let mut flow_p = cons_p.clone();
    let mut flow_q = cons_q.clone();
    for &v in order.iter().rev() {
        if let Some((p, _)) = forest.parent_pos(v) {
            flow_p[p] += flow_p[v];
            flow_q[p] += flow_q[v];
        }
    }

    let mut child_p = vec![0.0; n_nodes];
    let mut child_q = vec![0.0; n_nodes];
    let mut change = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        child_p.fill(0.0);
        child_q.fill(0.0);
        for &v in order.iter().rev() {
            let Some((p, _)) = forest.parent_pos(v) else {
                continue;
            };
            let (r, x) = imp[v];
            let s2 = (flow_p[v] * flow_p[v] + flow_q[v] * flow_q[v]) / v2[p];
            flow_p[v] = cons_p[v] + child_p[v] + r * s2;
            flow_q[v] = cons_q[v] + child_q[v] + x * s2;
            child_p[p] += flow_p[v];
            child_q[p] += flow_q[v];
        }

        change = 0.0;
        for &v in order {
            let Some((p, _)) = forest.parent_pos(v) else {
                continue;
            };
            let (r, x) = imp[v];
            let s2 = flow_p[v] * flow_p[v] + flow_q[v] * flow_q[v];
            let next = v2[p] - 2.0 * (r * flow_p[v] + x * flow_q[v]) + (r * r + x * x) * s2 / v2[p];
            if next <= 0.0 || next.is_nan() {
                return Err(Error::Infeasible {
                    node: forest.node_at(v).0,
                    value: next,
                });
            }
            change = f64::max(change, (next.sqrt() - v2[v].sqrt()).abs());
            v2[v] = next;
        }

        if change < opts.tol {
            let residual = branch_residual(forest, &imp, &cons_p, &cons_q, &flow_p, &flow_q, &v2);
            let n = grid.load_count();
            let mut voltage = vec![0.0; n];
            let mut p_flow = vec![0.0; grid.lines().len()];
            let mut q_flow = vec![0.0; grid.lines().len()];
            for v in 0..n_nodes {
                if let Some(i) = grid.load_index(forest.node_at(v)) {
                    voltage[i] = v2[v].sqrt();
                }
                if let Some((_, e)) = forest.parent_pos(v) {
                    p_flow[e.0] = flow_p[v];
                    q_flow[e.0] = flow_q[v];
                }
            }
            let eps = voltage.iter().map(|v| v - 1.0).collect();
            return Ok(DistFlowSolution {
                state: VoltageState { eps, theta: None },
                voltage,
                p_flow,
                q_flow,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual: change,
    })
}

fn branch_residual(
    forest: &ForestConfig,
    imp: &[(f64, f64)],
    cons_p: &[f64],
    cons_q: &[f64],
    flow_p: &[f64],
    flow_q: &[f64],
    v2: &[f64],
) -> f64 {
    let n = v2.len();
    let mut child_p = vec![0.0; n];
    let mut child_q = vec![0.0; n];
    for v in 0..n {
        if let Some((p, _)) = forest.parent_pos(v) {
            child_p[p] += flow_p[v];
            child_q[p] += flow_q[v];
        }
    }
    let mut worst: f64 = 0.0;
    for v in 0..n {
        let Some((p, _)) = forest.parent_pos(v) else {
            continue;
        };
        let (r, x) = imp[v];
        let s2 = (flow_p[v] * flow_p[v] + flow_q[v] * flow_q[v]) / v2[p];
        let rp = flow_p[v] - r * s2 - cons_p[v] - child_p[v];
        let rq = flow_q[v] - x * s2 - cons_q[v] - child_q[v];
        let rv = v2[v] - (v2[p] - 2.0 * (r * flow_p[v] + x * flow_q[v]) + (r * r + x * x) * s2);
        worst = worst.max(rp.abs()).max(rq.abs()).max(rv.abs());
    }
    worst
}
