use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid_model::ForestConfig;

use super::{check_dimension, InjectionVector, VoltageState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearModel {
    /// Linear coupled flow: ε = H_{1/r}⁻¹p + H_{1/x}⁻¹q, θ = H_{1/x}⁻¹p − H_{1/r}⁻¹q.
    Lc,
    /// Resistance-dominated limit: ε = H_g⁻¹p, θ = −H_g⁻¹q.
    DcResistive,
}

/// Precomputed two-pass solver for one forest.
///
/// The backward pass aggregates subtree injections onto each line; the
/// forward pass accumulates the per-line drops from the substation down.
/// That is the LinDistFlow form of the matrix equations and costs O(N).
#[derive(Debug, Clone)]
pub struct LinearSweep {
    n_loads: usize,
    /// (position, parent position, ε-coefficients on (P, Q), θ-coefficients on (P, Q)), preorder.
    steps: Vec<(usize, usize, [f64; 2], [f64; 2])>,
    roots: Vec<usize>,
    load_of: Vec<Option<usize>>,
}

impl LinearSweep {
    pub fn new(forest: &ForestConfig, model: LinearModel) -> Self {
        let grid = forest.grid();
        let load_of = grid.nodes().iter().map(|n| grid.load_index(n.id)).collect();
        let mut steps = Vec::with_capacity(grid.load_count());
        let mut roots = Vec::new();
        for &v in forest.preorder() {
            match forest.parent_pos(v) {
                Some((p, e)) => {
                    let line = grid.line(e).unwrap();
                    let (eps, theta) = match model {
                        LinearModel::Lc => ([line.r, line.x], [line.x, -line.r]),
                        LinearModel::DcResistive => {
                            let z = 1.0 / line.conductance();
                            ([z, 0.0], [0.0, -z])
                        }
                    };
                    steps.push((v, p, eps, theta));
                }
                None => roots.push(v),
            }
        }
        LinearSweep {
            n_loads: grid.load_count(),
            steps,
            roots,
            load_of,
        }
    }

    pub fn load_count(&self) -> usize {
        self.n_loads
    }

    /// Solve for `eps` (and `theta` when given) in load-index order.
    pub fn solve_into(&self, p: &[f64], q: &[f64], eps: &mut [f64], theta: Option<&mut [f64]>) {
        let n_nodes = self.load_of.len();
        let mut flow_p = vec![0.0; n_nodes];
        let mut flow_q = vec![0.0; n_nodes];
        for (pos, li) in self.load_of.iter().enumerate() {
            if let Some(i) = *li {
                flow_p[pos] = p[i];
                flow_q[pos] = q[i];
            }
        }
        for &(v, parent, _, _) in self.steps.iter().rev() {
            flow_p[parent] += flow_p[v];
            flow_q[parent] += flow_q[v];
        }

        let mut acc = vec![0.0; n_nodes];
        for &r in &self.roots {
            acc[r] = 0.0;
        }
        for &(v, parent, c, _) in &self.steps {
            acc[v] = acc[parent] + c[0] * flow_p[v] + c[1] * flow_q[v];
        }
        for (pos, li) in self.load_of.iter().enumerate() {
            if let Some(i) = *li {
                eps[i] = acc[pos];
            }
        }

        if let Some(theta) = theta {
            for &(v, parent, _, c) in &self.steps {
                acc[v] = acc[parent] + c[0] * flow_p[v] + c[1] * flow_q[v];
            }
            for (pos, li) in self.load_of.iter().enumerate() {
                if let Some(i) = *li {
                    theta[i] = acc[pos];
                }
            }
        }
    }

    pub fn solve(&self, inj: &InjectionVector) -> VoltageState {
        let mut eps = vec![0.0; self.n_loads];
        let mut theta = vec![0.0; self.n_loads];
        self.solve_into(&inj.p, &inj.q, &mut eps, Some(&mut theta));
        VoltageState {
            eps,
            theta: Some(theta),
        }
    }
}

pub fn lcpf_solve(forest: &ForestConfig, inj: &InjectionVector) -> Result<VoltageState> {
    check_dimension(forest, inj)?;
    Ok(LinearSweep::new(forest, LinearModel::Lc).solve(inj))
}

pub fn dc_resistive_solve(forest: &ForestConfig, inj: &InjectionVector) -> Result<VoltageState> {
    check_dimension(forest, inj)?;
    Ok(LinearSweep::new(forest, LinearModel::DcResistive).solve(inj))
}
