use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::source::{DeviationMoments, SampleMoments};
use crate::error::{Error, Result};
use crate::grid_model::{EdgeId, ForestConfig, GridGraph, NodeId};
use crate::moments::{InjectionModel, VoltageSamples};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Lc,
    Dc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidates {
    /// Only pairs joined by a line of the grid are tested.
    #[default]
    Grid,
    /// Every leaf is tested; pairs without a line have no impedance and are rejected.
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub tau: f64,
    pub variant: Variant,
    pub candidates: Candidates,
    /// Use `1 − |LHS/RHS| < τ` instead of `|1 − LHS/RHS| < τ`.
    pub literal_tolerance: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            tau: 0.05,
            variant: Variant::Lc,
            candidates: Candidates::Grid,
            literal_tolerance: false,
        }
    }
}

impl LearnerConfig {
    pub fn with_tau(tau: f64) -> Self {
        LearnerConfig {
            tau,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Domain(format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    Rejected,
    /// The two nodes share no line.
    NoLine,
    /// The predicted squared difference is zero.
    ZeroRhs,
}

/// One tested (leaf, candidate parent) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub leaf: NodeId,
    pub candidate: NodeId,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub deviation: Option<f64>,
    pub outcome: Outcome,
}

impl TraceEntry {
    pub fn accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    /// Sorted.
    pub learned_edges: Vec<EdgeId>,
    /// `(child, parent)` sorted by child.
    pub parent_map: Vec<(NodeId, NodeId)>,
    pub trace: Vec<TraceEntry>,
    /// Every node in the order it was popped.
    pub pop_order: Vec<NodeId>,
    /// Load nodes never attached to a parent.
    pub unattached: Vec<NodeId>,
}

impl ReconstructionResult {
    pub fn relative_error(&self, truth: &ForestConfig) -> f64 {
        relative_error(self, truth)
    }

    /// Trace as CSV: `leaf,candidate,lhs,rhs,deviation,accepted`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["leaf", "candidate", "lhs", "rhs", "deviation", "accepted"])?;
        let num = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        for t in &self.trace {
            w.write_record([
                t.leaf.0.to_string(),
                t.candidate.0.to_string(),
                num(t.lhs),
                num(t.rhs),
                num(t.deviation),
                t.accepted().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mislabeled lines over operational lines: `|learned △ truth| / |truth|`.
pub fn relative_error(result: &ReconstructionResult, truth: &ForestConfig) -> f64 {
    let truth_edges = truth.closed_edges();
    if truth_edges.is_empty() {
        return if result.learned_edges.is_empty() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    let (mut i, mut j, mut diff) = (0, 0, 0usize);
    let (a, b) = (&result.learned_edges, truth_edges);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                diff += 1;
                i += 1;
            }
            (Some(_), None) => {
                diff += 1;
                i += 1;
            }
            _ => {
                diff += 1;
                j += 1;
            }
        }
    }
    diff as f64 / b.len() as f64
}

/// Reconstruct the operational forest from raw ε samples whose columns follow
/// the grid's load order.
pub fn reconstruct(
    samples: &VoltageSamples,
    model: &InjectionModel,
    grid: &GridGraph,
    config: &LearnerConfig,
) -> Result<ReconstructionResult> {
    let source = SampleMoments::new(samples, grid)?;
    reconstruct_from(&source, model, grid, config)
}

/// Running `Σ_{c,d ∈ D} S(c, d)` for the three injection moments.
#[derive(Debug, Clone, Copy, Default)]
struct BlockSums {
    p: f64,
    q: f64,
    pq: f64,
}

/// Bottom-up reconstruction from any source of ε statistics.
pub fn reconstruct_from(
    moments: &dyn DeviationMoments,
    model: &InjectionModel,
    grid: &GridGraph,
    config: &LearnerConfig,
) -> Result<ReconstructionResult> {
    config.validate()?;
    let n = grid.load_count();
    if moments.load_count() != n || model.dim() != n {
        return Err(Error::Domain(format!(
            "grid has {n} load nodes, statistics cover {} and the model {}",
            moments.load_count(),
            model.dim()
        )));
    }
    let loads = grid.loads();
    let (sp, sq, spq) = (model.sigma_p(), model.sigma_q(), model.sigma_pq());

    // Pop order: descending Σε(b,b), ties by ascending id. Substations are 0.
    let mut order: Vec<(f64, NodeId)> = grid
        .nodes()
        .iter()
        .map(|node| {
            (
                grid.load_index(node.id).map_or(0.0, |i| moments.diag(i)),
                node.id,
            )
        })
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let mut desc: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut sums: Vec<BlockSums> = (0..n)
        .map(|i| BlockSums {
            p: sp[(i, i)],
            q: sq[(i, i)],
            pq: spq[(i, i)],
        })
        .collect();
    let mut leaves: Vec<usize> = Vec::new();
    let mut parent: Vec<Option<(NodeId, EdgeId)>> = vec![None; n];
    let mut trace = Vec::new();

    for &(_, b) in &order {
        let b_idx = grid.load_index(b);
        let mut attached = Vec::new();
        for &a in &leaves {
            let leaf = loads[a];
            let line = grid.edge_between(leaf, b);
            let Some(e) = line else {
                let lhs = match config.candidates {
                    Candidates::Grid => None,
                    Candidates::AllPairs => Some(moments.sq_diff(a, b_idx)),
                };
                trace.push(TraceEntry {
                    leaf,
                    candidate: b,
                    lhs,
                    rhs: None,
                    deviation: None,
                    outcome: Outcome::NoLine,
                });
                continue;
            };
            let l = grid.line(e).expect("edge ids come from the grid");
            let s = sums[a];
            let rhs = match config.variant {
                Variant::Lc => l.r * l.r * s.p + l.x * l.x * s.q + 2.0 * l.r * l.x * s.pq,
                Variant::Dc => {
                    let z = 1.0 / l.conductance();
                    z * z * s.p
                }
            };
            let lhs = moments.sq_diff(a, b_idx);
            if rhs == 0.0 {
                trace.push(TraceEntry {
                    leaf,
                    candidate: b,
                    lhs: Some(lhs),
                    rhs: Some(rhs),
                    deviation: None,
                    outcome: Outcome::ZeroRhs,
                });
                continue;
            }
            let ratio = lhs / rhs;
            let deviation = if config.literal_tolerance {
                1.0 - ratio.abs()
            } else {
                (1.0 - ratio).abs()
            };
            let ok = deviation < config.tau;
            trace.push(TraceEntry {
                leaf,
                candidate: b,
                lhs: Some(lhs),
                rhs: Some(rhs),
                deviation: Some(deviation),
                outcome: if ok {
                    Outcome::Accepted
                } else {
                    Outcome::Rejected
                },
            });
            if ok {
                parent[a] = Some((b, e));
                attached.push(a);
            }
        }
        if !attached.is_empty() {
            leaves.retain(|a| parent[*a].is_none());
            if let Some(bi) = b_idx {
                for a in attached {
                    merge(&mut desc, &mut sums, bi, a, sp, sq, spq);
                }
            }
        }
        // Substations are roots and never wait for a parent.
        if let Some(bi) = b_idx {
            leaves.push(bi);
        }
    }

    let mut learned_edges: Vec<EdgeId> = parent.iter().flatten().map(|&(_, e)| e).collect();
    learned_edges.sort_unstable();
    let mut parent_map: Vec<(NodeId, NodeId)> = parent
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|(b, _)| (loads[i], b)))
        .collect();
    parent_map.sort_unstable();
    let mut unattached: Vec<NodeId> = leaves.iter().map(|&a| loads[a]).collect();
    unattached.sort_unstable();
    Ok(ReconstructionResult {
        learned_edges,
        parent_map,
        trace,
        pop_order: order.into_iter().map(|(_, id)| id).collect(),
        unattached,
    })
}

/// `D_b ← D_b ∪ D_a`, updating the block sums with the cross terms.
fn merge(
    desc: &mut [Vec<usize>],
    sums: &mut [BlockSums],
    b: usize,
    a: usize,
    sp: &DMatrix<f64>,
    sq: &DMatrix<f64>,
    spq: &DMatrix<f64>,
) {
    let moved = std::mem::take(&mut desc[a]);
    let mut cross = BlockSums::default();
    for &c in &desc[b] {
        for &d in &moved {
            cross.p += sp[(c, d)] + sp[(d, c)];
            cross.q += sq[(c, d)] + sq[(d, c)];
            cross.pq += spq[(c, d)] + spq[(d, c)];
        }
    }
    let (sa, sb) = (sums[a], sums[b]);
    sums[b] = BlockSums {
        p: sb.p + sa.p + cross.p,
        q: sb.q + sa.q + cross.q,
        pq: sb.pq + sa.pq + cross.pq,
    };
    desc[b].extend(moved);
}
