use std::collections::HashSet;
use std::sync::Arc;

use petgraph::unionfind::UnionFind;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_model::{EdgeId, ForestConfig, GridGraph, Line, Node, NodeId, NodeKind};

/// Parameters of a synthetic grid.
///
/// Loads get ids `1..=loads`, substations the ids after them. Operational
/// line impedances are uniform in `r_range` and `x_range`; tie switches and
/// extra lines draw uniformly between the smallest and largest operational
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub loads: usize,
    pub substations: usize,
    pub tie_switches: usize,
    pub extra_lines: usize,
    pub r_range: (f64, f64),
    pub x_range: (f64, f64),
    /// Probability that a new load hangs off the previously placed one,
    /// which stretches feeders into long laterals.
    pub chain_bias: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            loads: 13,
            substations: 3,
            tie_switches: 3,
            extra_lines: 10,
            r_range: (0.01, 0.04),
            x_range: (0.01, 0.04),
            chain_bias: 0.5,
        }
    }
}

impl GeneratorSpec {
    pub fn chain(loads: usize) -> Self {
        GeneratorSpec {
            loads,
            substations: 1,
            tie_switches: 0,
            extra_lines: 0,
            chain_bias: 1.0,
            ..Self::default()
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn pair_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

/// A random grid with its operational forest; deterministic per seed.
pub fn generate_random_grid(
    spec: &GeneratorSpec,
    seed: u64,
) -> Result<(Arc<GridGraph>, ForestConfig)> {
    let (n, k) = (spec.loads, spec.substations);
    if k == 0 || n < k {
        return Err(Error::Domain(format!(
            "need loads ≥ substations ≥ 1, got {n} loads and {k} substations"
        )));
    }
    for (name, (lo, hi)) in [("r_range", spec.r_range), ("x_range", spec.x_range)] {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Domain(format!(
                "{name} must satisfy 0 < min ≤ max, got ({lo}, {hi})"
            )));
        }
    }
    if !(0.0..=1.0).contains(&spec.chain_bias) {
        return Err(Error::Domain("chain_bias must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loads: Vec<NodeId> = (1..=n as u32).map(NodeId).collect();
    let subs: Vec<NodeId> = (n as u32 + 1..=(n + k) as u32).map(NodeId).collect();

    let mut order = loads.clone();
    order.shuffle(&mut rng);
    let mut tree_of = std::collections::HashMap::new();
    let mut members: Vec<Vec<NodeId>> = subs.iter().map(|&s| vec![s]).collect();
    let mut lines = Vec::new();
    let mut used = HashSet::new();
    let mut prev: Option<NodeId> = None;
    for (i, &a) in order.iter().enumerate() {
        // The first k loads open one feeder per substation.
        let (parent, t) = if i < k {
            (subs[i], i)
        } else if let Some(p) = prev.filter(|_| rng.random_bool(spec.chain_bias)) {
            (p, tree_of[&p])
        } else {
            let t = rng.random_range(0..k);
            let m = &members[t];
            (m[rng.random_range(0..m.len())], t)
        };
        tree_of.insert(a, t);
        members[t].push(a);
        used.insert(pair_key(a, parent));
        lines.push(Line {
            from: parent,
            to: a,
            r: uniform(&mut rng, spec.r_range),
            x: uniform(&mut rng, spec.x_range),
            switchable: false,
        });
        prev = Some(a);
    }
    let closed: Vec<EdgeId> = (0..lines.len()).map(EdgeId).collect();
    let r_span = min_max(lines.iter().map(|l| l.r));
    let x_span = min_max(lines.iter().map(|l| l.x));

    // Tie switches join loads. The first k − 1 chain the feeders together so
    // the closed-switch grid is connected; the rest prefer distinct feeders.
    if spec.tie_switches + 1 < k {
        return Err(Error::Domain(format!(
            "{k} feeders need at least {} tie switches to be connected",
            k - 1
        )));
    }
    let mut tie_pairs = Vec::with_capacity(spec.tie_switches);
    for t in 1..k {
        let a = members[t - 1][1 + rng.random_range(0..members[t - 1].len() - 1)];
        let b = members[t][1 + rng.random_range(0..members[t].len() - 1)];
        tie_pairs.push(pair_key(a, b));
        used.insert(pair_key(a, b));
    }
    let load_pairs: Vec<(NodeId, NodeId)> = pairs(&loads, &loads)
        .filter(|p| !used.contains(p))
        .collect();
    let mut pool: Vec<_> = load_pairs
        .iter()
        .copied()
        .filter(|(a, b)| tree_of[a] != tree_of[b])
        .collect();
    let rest = spec.tie_switches - tie_pairs.len();
    if pool.len() < rest {
        pool = load_pairs;
    }
    if pool.len() < rest {
        return Err(Error::Domain(format!(
            "not enough free load pairs for {} tie switches",
            spec.tie_switches
        )));
    }
    pool.shuffle(&mut rng);
    tie_pairs.extend_from_slice(&pool[..rest]);
    for (a, b) in tie_pairs {
        lines.push(Line {
            from: a,
            to: b,
            r: uniform(&mut rng, r_span),
            x: uniform(&mut rng, x_span),
            switchable: true,
        });
    }

    let grid = GridGraph::new(nodes(&loads, &subs), lines)?;
    let forest_closed = closed;
    let grid = add_extra_lines(&grid, spec.extra_lines, &mut rng)?;
    let forest = ForestConfig::new(grid.clone(), forest_closed)?;
    Ok((grid, forest))
}

fn nodes(loads: &[NodeId], subs: &[NodeId]) -> Vec<Node> {
    loads
        .iter()
        .map(|&id| Node {
            id,
            kind: NodeKind::Load,
        })
        .chain(subs.iter().map(|&id| Node {
            id,
            kind: NodeKind::Substation,
        }))
        .collect()
}

fn pairs<'a>(a: &'a [NodeId], b: &'a [NodeId]) -> impl Iterator<Item = (NodeId, NodeId)> + 'a {
    a.iter()
        .flat_map(move |&x| b.iter().filter(move |&&y| x < y).map(move |&y| (x, y)))
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn add_extra_lines(grid: &GridGraph, count: usize, rng: &mut ChaCha8Rng) -> Result<Arc<GridGraph>> {
    let operational: Vec<&Line> = grid.lines().iter().filter(|l| !l.switchable).collect();
    let r_span = min_max(operational.iter().map(|l| l.r));
    let x_span = min_max(operational.iter().map(|l| l.x));
    let ids: Vec<NodeId> = grid.nodes().iter().map(|n| n.id).collect();
    let mut free: Vec<(NodeId, NodeId)> = pairs(&ids, &ids)
        .filter(|&(a, b)| {
            grid.edge_between(a, b).is_none() && !(grid.is_substation(a) && grid.is_substation(b))
        })
        .collect();
    if free.len() < count {
        return Err(Error::Domain(format!(
            "only {} free node pairs for {count} extra lines",
            free.len()
        )));
    }
    free.shuffle(rng);
    let mut lines = grid.lines().to_vec();
    for &(a, b) in &free[..count] {
        lines.push(Line {
            from: a,
            to: b,
            r: uniform(rng, r_span),
            x: uniform(rng, x_span),
            switchable: false,
        });
    }
    Ok(Arc::new(GridGraph::new(grid.nodes().to_vec(), lines)?))
}

/// The same operational forest on a grid with `count` more open lines.
/// Existing edge ids are preserved.
pub fn augment_with_extra_lines(
    forest: &ForestConfig,
    count: usize,
    seed: u64,
) -> Result<ForestConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = add_extra_lines(forest.grid(), count, &mut rng)?;
    ForestConfig::new(grid, forest.closed_edges().iter().copied())
}

/// A uniformly shuffled Kruskal spanning forest of `grid` in which every
/// tree holds exactly one substation.
pub fn random_spanning_forest(grid: &Arc<GridGraph>, seed: u64) -> Result<ForestConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = grid.nodes();
    let pos = |id: NodeId| {
        nodes
            .binary_search_by_key(&id, |n| n.id)
            .expect("grid node")
    };
    let mut uf = UnionFind::<usize>::new(nodes.len());
    // Contract all substations into one super-root.
    let subs = grid.substations();
    for s in &subs[1..] {
        uf.union(pos(subs[0]), pos(*s));
    }
    let mut edges: Vec<EdgeId> = (0..grid.lines().len()).map(EdgeId).collect();
    edges.shuffle(&mut rng);
    let mut closed = Vec::with_capacity(grid.load_count());
    for e in edges {
        let l = &grid.lines()[e.0];
        if uf.union(pos(l.from), pos(l.to)) {
            closed.push(e);
        }
    }
    ForestConfig::new(grid.clone(), closed)
}
