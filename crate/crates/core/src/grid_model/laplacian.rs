use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::forest::ForestConfig;
use super::graph::{EdgeId, NodeId, WeightKind};
use super::incidence::ReducedIncidence;

/// Dense reduced Laplacians `Mᵀ diag(w) M` for the four line weightings,
/// in the row/column order of the [`ReducedIncidence`] they were built from.
///
/// The solvers never touch these; they exist for inspection and as the
/// reference side of consistency checks.
#[derive(Debug, Clone)]
pub struct WeightedLaplacians {
    nodes: Vec<NodeId>,
    conductance: DMatrix<f64>,
    susceptance: DMatrix<f64>,
    inverse_resistance: DMatrix<f64>,
    inverse_reactance: DMatrix<f64>,
}

impl WeightedLaplacians {
    pub fn new(forest: &ForestConfig, incidence: &ReducedIncidence) -> Self {
        let grid = forest.grid();
        let m = incidence.matrix();
        let build = |kind: WeightKind| {
            let mut weighted = m.clone();
            for (row, e) in incidence.edge_order().iter().enumerate() {
                let w = grid.line(*e).unwrap().weight(kind);
                weighted.row_mut(row).scale_mut(w);
            }
            m.transpose() * weighted
        };
        WeightedLaplacians {
            nodes: incidence.node_order().to_vec(),
            conductance: build(WeightKind::Conductance),
            susceptance: build(WeightKind::Susceptance),
            inverse_resistance: build(WeightKind::InverseResistance),
            inverse_reactance: build(WeightKind::InverseReactance),
        }
    }

    pub fn node_order(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn get(&self, kind: WeightKind) -> &DMatrix<f64> {
        match kind {
            WeightKind::Conductance => &self.conductance,
            WeightKind::Susceptance => &self.susceptance,
            WeightKind::InverseResistance => &self.inverse_resistance,
            WeightKind::InverseReactance => &self.inverse_reactance,
        }
    }
}

fn check_weight(weights: &[f64], e: EdgeId) -> Result<f64> {
    match weights.get(e.0) {
        Some(&w) if w.is_finite() && w > 0.0 => Ok(w),
        Some(&w) => Err(Error::Domain(format!(
            "weight of line {e} must be positive and finite, got {w}"
        ))),
        None => Err(Error::Domain(format!("missing weight for line {e}"))),
    }
}

/// H_w⁻¹(a, b) for the reduced Laplacian weighted by `weights` (indexed by
/// [`EdgeId`]): the sum of `1/w` over lines common to the root paths of `a`
/// and `b`, zero when they sit in different trees. Substations have empty
/// root paths and therefore zero rows.
pub fn laplacian_inverse_entry(
    forest: &ForestConfig,
    weights: &[f64],
    a: NodeId,
    b: NodeId,
) -> Result<f64> {
    let (pa, pb) = (forest.pos(a)?, forest.pos(b)?);
    let mut err = None;
    let sum = forest.common_path_sum(pa, pb, |e| match check_weight(weights, e) {
        Ok(w) => 1.0 / w,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(sum),
    }
}

/// H_w⁻¹(a, c) − H_w⁻¹(b, c) for a child `a` and its parent `b`: `1/w_ab`
/// when `c` descends from `a`, zero otherwise.
pub fn laplacian_row_difference(
    forest: &ForestConfig,
    weights: &[f64],
    a: NodeId,
    b: NodeId,
    c: NodeId,
) -> Result<f64> {
    let (pa, pc) = (forest.pos(a)?, forest.pos(c)?);
    forest.pos(b)?;
    let edge = match forest.parent_pos(pa) {
        Some((p, e)) if forest.node_at(p) == b => e,
        _ => return Err(Error::Domain(format!("{b} is not the parent of {a}"))),
    };
    let w = check_weight(weights, edge)?;
    Ok(if forest.is_descendant_pos(pc, pa) {
        1.0 / w
    } else {
        0.0
    })
}

/// Dense N×N matrix (load-index order) whose (a, b) entry is the sum of
/// `value(e)` over lines shared by the root paths of `a` and `b`.
///
/// With `value = r` this is H_{1/r}⁻¹, with `value = 1/g` it is H_g⁻¹.
pub fn path_sum_matrix(forest: &ForestConfig, value: impl Fn(EdgeId) -> f64) -> DMatrix<f64> {
    let grid = forest.grid();
    let n = grid.load_count();
    let positions: Vec<usize> = grid
        .loads()
        .iter()
        .map(|&a| forest.pos(a).unwrap())
        .collect();

    // distance from every node to its root, accumulated in preorder
    let mut to_root = vec![0.0; grid.nodes().len()];
    for &v in forest.preorder() {
        if let Some((p, e)) = forest.parent_pos(v) {
            to_root[v] = to_root[p] + value(e);
        }
    }

    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = to_root[positions[i]];
        for j in 0..i {
            let (a, b) = (positions[i], positions[j]);
            if forest.tree_pos(a) == forest.tree_pos(b) {
                let v = to_root[forest.lca_pos(a, b)];
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    }
    out
}

/// H_{1/r}⁻¹ in load-index order.
pub fn resistance_path_matrix(forest: &ForestConfig) -> DMatrix<f64> {
    let grid = forest.grid();
    path_sum_matrix(forest, |e| grid.line(e).unwrap().r)
}

/// H_{1/x}⁻¹ in load-index order.
pub fn reactance_path_matrix(forest: &ForestConfig) -> DMatrix<f64> {
    let grid = forest.grid();
    path_sum_matrix(forest, |e| grid.line(e).unwrap().x)
}

/// H_g⁻¹ in load-index order.
pub fn inverse_conductance_path_matrix(forest: &ForestConfig) -> DMatrix<f64> {
    let grid = forest.grid();
    path_sum_matrix(forest, |e| 1.0 / grid.line(e).unwrap().conductance())
}
