use std::sync::Arc;

use crate::error::{Error, Result};

use super::graph::{EdgeId, GridGraph, NodeId};

/// An operational configuration: a spanning forest of the grid in which
/// every tree holds exactly one substation as its root.
///
/// Positional arrays are indexed like [`GridGraph::nodes`]. Each tree is
/// walked depth-first from its substation with children in ascending id
/// order, which fixes the entry/exit times used for O(1) ancestor tests.
#[derive(Debug, Clone)]
pub struct ForestConfig {
    grid: Arc<GridGraph>,
    closed: Vec<EdgeId>,
    is_closed: Vec<bool>,
    tree: Vec<usize>,
    parent: Vec<Option<(usize, EdgeId)>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    enter: Vec<usize>,
    exit: Vec<usize>,
    roots: Vec<NodeId>,
    preorder: Vec<usize>,
}

impl ForestConfig {
    pub fn new(grid: Arc<GridGraph>, closed: impl IntoIterator<Item = EdgeId>) -> Result<Self> {
        let n_nodes = grid.nodes().len();
        let mut is_closed = vec![false; grid.lines().len()];
        let mut closed_edges = Vec::new();
        for e in closed {
            if e.0 >= is_closed.len() {
                return Err(Error::Structural(format!(
                    "closed edge {e} is not a line of the grid"
                )));
            }
            if std::mem::replace(&mut is_closed[e.0], true) {
                return Err(Error::Structural(format!("closed edge {e} listed twice")));
            }
            closed_edges.push(e);
        }
        closed_edges.sort();

        let mut adjacency = vec![Vec::new(); n_nodes];
        for &e in &closed_edges {
            let line = &grid.lines()[e.0];
            let pa = grid.position(line.from).expect("validated grid");
            let pb = grid.position(line.to).expect("validated grid");
            adjacency[pa].push((pb, e));
            adjacency[pb].push((pa, e));
        }
        for adj in &mut adjacency {
            adj.sort();
        }

        const UNSEEN: usize = usize::MAX;
        let mut tree = vec![UNSEEN; n_nodes];
        let mut parent = vec![None; n_nodes];
        let mut children = vec![Vec::new(); n_nodes];
        let mut depth = vec![0; n_nodes];
        let mut enter = vec![0; n_nodes];
        let mut exit = vec![0; n_nodes];
        let mut preorder = Vec::with_capacity(n_nodes);
        let roots: Vec<NodeId> = grid.substations().to_vec();
        let mut clock = 0;

        for (k, &root) in roots.iter().enumerate() {
            let rp = grid.position(root).expect("validated grid");
            if tree[rp] != UNSEEN {
                let other = roots[tree[rp]];
                return Err(Error::Structural(format!(
                    "tree {} contains two substations ({other} and {root})",
                    tree[rp]
                )));
            }
            tree[rp] = k;
            // (node, next adjacency slot to visit)
            let mut stack = vec![(rp, 0usize)];
            enter[rp] = clock;
            clock += 1;
            preorder.push(rp);
            while let Some(top) = stack.last_mut() {
                let v = top.0;
                if top.1 == adjacency[v].len() {
                    exit[v] = clock;
                    stack.pop();
                    continue;
                }
                let (w, e) = adjacency[v][top.1];
                top.1 += 1;
                if parent[v].is_some_and(|(_, pe)| pe == e) {
                    continue;
                }
                if tree[w] != UNSEEN {
                    if tree[w] == k {
                        return Err(Error::Structural(format!(
                            "closed edges contain a cycle through line {e} ({}, {})",
                            grid.nodes()[v].id,
                            grid.nodes()[w].id
                        )));
                    }
                    return Err(Error::Structural(format!(
                        "tree {k} contains two substations ({root} and {})",
                        roots[tree[w]]
                    )));
                }
                if grid.nodes()[w].kind == super::graph::NodeKind::Substation {
                    return Err(Error::Structural(format!(
                        "tree {k} contains two substations ({root} and {})",
                        grid.nodes()[w].id
                    )));
                }
                tree[w] = k;
                parent[w] = Some((v, e));
                children[v].push(w);
                depth[w] = depth[v] + 1;
                enter[w] = clock;
                clock += 1;
                preorder.push(w);
                stack.push((w, 0));
            }
        }

        if let Some(i) = tree.iter().position(|&t| t == UNSEEN) {
            return Err(Error::Structural(format!(
                "node {} is not connected to any substation by closed edges",
                grid.nodes()[i].id
            )));
        }
        // Every node reached exactly once from one root, so the closed edges
        // used as parent links number exactly N; any surplus edge would have
        // been reported as a cycle above.
        debug_assert_eq!(closed_edges.len(), grid.load_count());

        Ok(ForestConfig {
            grid,
            closed: closed_edges,
            is_closed,
            tree,
            parent,
            children,
            depth,
            enter,
            exit,
            roots,
            preorder,
        })
    }

    pub fn grid(&self) -> &GridGraph {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<GridGraph> {
        &self.grid
    }

    /// Operational edges in ascending id order.
    pub fn closed_edges(&self) -> &[EdgeId] {
        &self.closed
    }

    pub fn is_closed(&self, edge: EdgeId) -> bool {
        self.is_closed.get(edge.0).copied().unwrap_or(false)
    }

    pub fn tree_count(&self) -> usize {
        self.roots.len()
    }

    /// Substation at the root of tree `k`.
    pub fn root(&self, k: usize) -> NodeId {
        self.roots[k]
    }

    pub(crate) fn pos(&self, node: NodeId) -> Result<usize> {
        self.grid
            .position(node)
            .ok_or_else(|| Error::Domain(format!("unknown node {node}")))
    }

    pub(crate) fn node_at(&self, pos: usize) -> NodeId {
        self.grid.nodes()[pos].id
    }

    pub fn tree_of(&self, node: NodeId) -> Result<usize> {
        Ok(self.tree[self.pos(node)?])
    }

    pub fn parent(&self, node: NodeId) -> Result<Option<NodeId>> {
        Ok(self.parent[self.pos(node)?].map(|(p, _)| self.node_at(p)))
    }

    /// The closed line joining `node` to its parent.
    pub fn parent_edge(&self, node: NodeId) -> Result<Option<EdgeId>> {
        Ok(self.parent[self.pos(node)?].map(|(_, e)| e))
    }

    pub fn children(&self, node: NodeId) -> Result<Vec<NodeId>> {
        Ok(self.children[self.pos(node)?]
            .iter()
            .map(|&c| self.node_at(c))
            .collect())
    }

    pub fn depth(&self, node: NodeId) -> Result<usize> {
        Ok(self.depth[self.pos(node)?])
    }

    /// Parent map over load nodes.
    pub fn parent_map(&self) -> Vec<(NodeId, NodeId)> {
        self.grid
            .loads()
            .iter()
            .map(|&a| {
                let p = self.parent[self.grid.position(a).unwrap()].unwrap().0;
                (a, self.node_at(p))
            })
            .collect()
    }

    /// Tree index of every load node, in load-index order.
    pub fn tree_labels(&self) -> Vec<usize> {
        self.grid
            .loads()
            .iter()
            .map(|&a| self.tree[self.grid.position(a).unwrap()])
            .collect()
    }

    pub(crate) fn is_descendant_pos(&self, c: usize, a: usize) -> bool {
        self.enter[a] <= self.enter[c] && self.exit[c] <= self.exit[a]
    }

    /// True when `a` lies on the path from `c` to its root (`c` itself included).
    pub fn is_descendant(&self, c: NodeId, a: NodeId) -> Result<bool> {
        Ok(self.is_descendant_pos(self.pos(c)?, self.pos(a)?))
    }

    /// D_a: every node whose root path passes through `a`, including `a`,
    /// in ascending id order.
    pub fn descendants(&self, a: NodeId) -> Result<Vec<NodeId>> {
        let pa = self.pos(a)?;
        let mut out = Vec::new();
        let mut stack = vec![pa];
        while let Some(v) = stack.pop() {
            out.push(self.node_at(v));
            stack.extend_from_slice(&self.children[v]);
        }
        out.sort();
        Ok(out)
    }

    /// Nodes in depth-first order, every parent before its children.
    pub(crate) fn preorder(&self) -> &[usize] {
        &self.preorder
    }

    pub(crate) fn parent_pos(&self, pos: usize) -> Option<(usize, EdgeId)> {
        self.parent[pos]
    }

    pub(crate) fn tree_pos(&self, pos: usize) -> usize {
        self.tree[pos]
    }

    pub(crate) fn depth_pos(&self, pos: usize) -> usize {
        self.depth[pos]
    }

    /// Lowest common ancestor of two nodes of the same tree.
    pub(crate) fn lca_pos(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap().0;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap().0;
        }
        while a != b {
            a = self.parent[a].unwrap().0;
            b = self.parent[b].unwrap().0;
        }
        a
    }

    /// Sum of `value(e)` over the lines shared by the root paths of `a` and
    /// `b`; zero across trees.
    pub(crate) fn common_path_sum(
        &self,
        a: usize,
        b: usize,
        mut value: impl FnMut(EdgeId) -> f64,
    ) -> f64 {
        if self.tree[a] != self.tree[b] {
            return 0.0;
        }
        let mut v = self.lca_pos(a, b);
        let mut sum = 0.0;
        while let Some((p, e)) = self.parent[v] {
            sum += value(e);
            v = p;
        }
        sum
    }

    /// The same forest on a grid with r and x exchanged on every line.
    pub fn with_swapped_impedances(&self) -> ForestConfig {
        ForestConfig::new(
            Arc::new(self.grid.with_swapped_impedances()),
            self.closed.iter().copied(),
        )
        .expect("same topology")
    }
}
