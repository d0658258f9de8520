use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a bus, as it appears in grid files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a line in [`GridGraph::lines`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Substation,
    Load,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
}

/// A line of the as-designed network. Impedances are per-unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: NodeId,
    pub to: NodeId,
    pub r: f64,
    pub x: f64,
    pub switchable: bool,
}

impl Line {
    /// g = r / (r² + x²)
    pub fn conductance(&self) -> f64 {
        self.r / (self.r * self.r + self.x * self.x)
    }

    /// β = x / (r² + x²)
    pub fn susceptance(&self) -> f64 {
        self.x / (self.r * self.r + self.x * self.x)
    }

    pub fn weight(&self, kind: WeightKind) -> f64 {
        match kind {
            WeightKind::Conductance => self.conductance(),
            WeightKind::Susceptance => self.susceptance(),
            WeightKind::InverseResistance => 1.0 / self.r,
            WeightKind::InverseReactance => 1.0 / self.x,
        }
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.from == node || self.to == node
    }

    /// The endpoint opposite to `node`, if `node` is an endpoint.
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        if self.from == node {
            Some(self.to)
        } else if self.to == node {
            Some(self.from)
        } else {
            None
        }
    }
}

/// Edge weights used to build reduced weighted Laplacians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Conductance,
    Susceptance,
    InverseResistance,
    InverseReactance,
}

impl WeightKind {
    pub const ALL: [WeightKind; 4] = [
        WeightKind::Conductance,
        WeightKind::Susceptance,
        WeightKind::InverseResistance,
        WeightKind::InverseReactance,
    ];
}

/// The meshed network with every switch closed.
///
/// Nodes are kept sorted by id. Load nodes get a dense index `0..N` in
/// ascending id order; that index is the row/column order of every
/// per-node vector and moment matrix in this crate.
#[derive(Debug, Clone)]
pub struct GridGraph {
    nodes: Vec<Node>,
    lines: Vec<Line>,
    position: HashMap<NodeId, usize>,
    load_index: Vec<Option<usize>>,
    loads: Vec<NodeId>,
    substations: Vec<NodeId>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    edge_lookup: HashMap<(NodeId, NodeId), EdgeId>,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl GridGraph {
    pub fn new(mut nodes: Vec<Node>, lines: Vec<Line>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        let mut position = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if position.insert(n.id, i).is_some() {
                return Err(Error::Structural(format!("duplicate node id {}", n.id)));
            }
        }

        let mut load_index = vec![None; nodes.len()];
        let mut loads = Vec::new();
        let mut substations = Vec::new();
        for (i, n) in nodes.iter().enumerate() {
            match n.kind {
                NodeKind::Load => {
                    load_index[i] = Some(loads.len());
                    loads.push(n.id);
                }
                NodeKind::Substation => substations.push(n.id),
            }
        }
        if substations.is_empty() {
            return Err(Error::Structural("grid has no substation".into()));
        }
        if loads.is_empty() {
            return Err(Error::Structural("grid has no load node".into()));
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut edge_lookup = HashMap::with_capacity(lines.len());
        for (e, line) in lines.iter().enumerate() {
            let (Some(&pa), Some(&pb)) = (position.get(&line.from), position.get(&line.to)) else {
                return Err(Error::Structural(format!(
                    "line {} references unknown node ({}, {})",
                    e, line.from, line.to
                )));
            };
            if line.from == line.to {
                return Err(Error::Structural(format!(
                    "line {e} is a self-loop at {}",
                    line.from
                )));
            }
            if !(line.r.is_finite() && line.r > 0.0 && line.x.is_finite() && line.x > 0.0) {
                return Err(Error::Structural(format!(
                    "line {e} ({}, {}) needs positive finite r and x, got r={} x={}",
                    line.from, line.to, line.r, line.x
                )));
            }
            if edge_lookup
                .insert(key(line.from, line.to), EdgeId(e))
                .is_some()
            {
                return Err(Error::Structural(format!(
                    "duplicate line between {} and {}",
                    line.from, line.to
                )));
            }
            adjacency[pa].push((line.to, EdgeId(e)));
            adjacency[pb].push((line.from, EdgeId(e)));
        }
        for adj in &mut adjacency {
            adj.sort();
        }

        let grid = GridGraph {
            nodes,
            lines,
            position,
            load_index,
            loads,
            substations,
            adjacency,
            edge_lookup,
        };
        grid.check_connected()?;
        Ok(grid)
    }

    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &(nb, _) in &self.adjacency[i] {
                let j = self.position[&nb];
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(Error::Structural(format!(
                "grid is not connected: node {} unreachable from node {}",
                self.nodes[i].id, self.nodes[0].id
            ))),
            None => Ok(()),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn line(&self, edge: EdgeId) -> Option<&Line> {
        self.lines.get(edge.0)
    }

    /// Load nodes in ascending id order (N of them).
    pub fn loads(&self) -> &[NodeId] {
        &self.loads
    }

    /// Substations in ascending id order (K of them).
    pub fn substations(&self) -> &[NodeId] {
        &self.substations
    }

    pub fn load_count(&self) -> usize {
        self.loads.len()
    }

    pub fn substation_count(&self) -> usize {
        self.substations.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.position.contains_key(&node)
    }

    pub fn kind(&self, node: NodeId) -> Option<NodeKind> {
        self.position.get(&node).map(|&i| self.nodes[i].kind)
    }

    pub fn is_substation(&self, node: NodeId) -> bool {
        self.kind(node) == Some(NodeKind::Substation)
    }

    /// Dense index of a load node, `None` for substations and unknown ids.
    pub fn load_index(&self, node: NodeId) -> Option<usize> {
        self.position.get(&node).and_then(|&i| self.load_index[i])
    }

    pub(crate) fn position(&self, node: NodeId) -> Option<usize> {
        self.position.get(&node).copied()
    }

    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<EdgeId> {
        self.edge_lookup.get(&key(a, b)).copied()
    }

    /// Neighbours of `node` over all lines, sorted by neighbour id.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, EdgeId)] {
        match self.position.get(&node) {
            Some(&i) => &self.adjacency[i],
            None => &[],
        }
    }

    /// Per-line weights indexed by [`EdgeId`].
    pub fn weights(&self, kind: WeightKind) -> Vec<f64> {
        self.lines.iter().map(|l| l.weight(kind)).collect()
    }

    /// Copy of this grid with resistance and reactance exchanged on every line.
    pub fn with_swapped_impedances(&self) -> GridGraph {
        let mut g = self.clone();
        for l in &mut g.lines {
            std::mem::swap(&mut l.r, &mut l.x);
        }
        g
    }
}
