//! Meshed grid, operational forests and the tree-combinatorial structure
//! behind them: reduced incidence matrices, root paths, descendant sets and
//! inverse weighted Laplacians.

mod forest;
mod graph;
mod incidence;
mod laplacian;

pub use forest::ForestConfig;
pub use graph::{EdgeId, GridGraph, Line, Node, NodeId, NodeKind, WeightKind};
pub use incidence::{build_reduced_incidence, inverse_incidence_entry, ReducedIncidence};
pub use laplacian::{
    inverse_conductance_path_matrix, laplacian_inverse_entry, laplacian_row_difference,
    path_sum_matrix, reactance_path_matrix, resistance_path_matrix, WeightedLaplacians,
};

use crate::error::Result;

/// D_a for `a` in `forest`, including `a` itself.
pub fn descendants(forest: &ForestConfig, a: NodeId) -> Result<Vec<NodeId>> {
    forest.descendants(a)
}
