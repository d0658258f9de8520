use std::collections::HashMap;
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::forest::ForestConfig;
use super::graph::{EdgeId, NodeId};

/// Reduced edge-to-node incidence matrix of a forest, substation columns
/// removed.
///
/// Rows and columns are ordered by tree index, then ascending node id.
/// Row `i` is the line joining load node `i` to its parent, oriented from
/// child to parent: `+1` at the child column, `-1` at the parent column
/// unless the parent is a substation. With that orientation every nonzero
/// entry of the inverse is `+1`.
#[derive(Debug, Clone)]
pub struct ReducedIncidence {
    matrix: DMatrix<f64>,
    nodes: Vec<NodeId>,
    edges: Vec<EdgeId>,
    blocks: Vec<Range<usize>>,
}

pub fn build_reduced_incidence(forest: &ForestConfig) -> ReducedIncidence {
    let grid = forest.grid();
    let mut order: Vec<(usize, NodeId)> = grid
        .loads()
        .iter()
        .map(|&a| (forest.tree_of(a).expect("grid node"), a))
        .collect();
    order.sort();

    let n = order.len();
    let nodes: Vec<NodeId> = order.iter().map(|&(_, a)| a).collect();
    let column: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut matrix = DMatrix::zeros(n, n);
    let mut edges = Vec::with_capacity(n);
    for (row, &a) in nodes.iter().enumerate() {
        let parent = forest.parent(a).unwrap().expect("load nodes have parents");
        edges.push(forest.parent_edge(a).unwrap().unwrap());
        matrix[(row, row)] = 1.0;
        if let Some(&col) = column.get(&parent) {
            matrix[(row, col)] = -1.0;
        }
    }

    let mut blocks = Vec::with_capacity(forest.tree_count());
    let mut start = 0;
    for k in 0..forest.tree_count() {
        let len = order[start..].iter().take_while(|&&(t, _)| t == k).count();
        blocks.push(start..start + len);
        start += len;
    }

    ReducedIncidence {
        matrix,
        nodes,
        edges,
        blocks,
    }
}

impl ReducedIncidence {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Column order (load nodes).
    pub fn node_order(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Row order (closed lines).
    pub fn edge_order(&self) -> &[EdgeId] {
        &self.edges
    }

    /// Row/column range of tree `k`; empty for a substation with no loads.
    pub fn block_range(&self, k: usize) -> Range<usize> {
        self.blocks[k].clone()
    }

    /// The square per-tree block M_k.
    pub fn block(&self, k: usize) -> DMatrix<f64> {
        let r = self.blocks[k].clone();
        self.matrix
            .view((r.start, r.start), (r.len(), r.len()))
            .into_owned()
    }

    /// M⁻¹ assembled entry by entry from root paths (rows: nodes, columns:
    /// edges, both in this matrix's order).
    pub fn path_inverse(&self, forest: &ForestConfig) -> DMatrix<f64> {
        let n = self.nodes.len();
        DMatrix::from_fn(n, n, |i, j| {
            f64::from(inverse_incidence_entry(forest, self.nodes[i], self.edges[j]).unwrap())
        })
    }
}

/// Entry (a, r) of the inverse reduced incidence matrix under the
/// child-to-parent orientation: `+1` when line `r` lies on the path from
/// `a` to its substation, `0` otherwise (including different trees).
pub fn inverse_incidence_entry(forest: &ForestConfig, a: NodeId, r: EdgeId) -> Result<i8> {
    let pa = forest.pos(a)?;
    if forest.grid().is_substation(a) {
        return Err(Error::Domain(format!(
            "node {a} is a substation; M⁻¹ has rows for load nodes only"
        )));
    }
    if !forest.is_closed(r) {
        return Err(Error::Domain(format!(
            "line {r} is not a closed edge of the forest"
        )));
    }
    let line = forest.grid().line(r).unwrap();
    // the endpoint farther from the root is the child side of the line
    let (pf, pt) = (forest.pos(line.from)?, forest.pos(line.to)?);
    let child = if forest.depth_pos(pf) > forest.depth_pos(pt) {
        pf
    } else {
        pt
    };
    Ok(if forest.is_descendant_pos(pa, child) {
        1
    } else {
        0
    })
}
