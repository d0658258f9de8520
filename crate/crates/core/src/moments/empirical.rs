use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid_model::NodeId;
use crate::powerflow::VoltageState;

/// Where a [`MomentSet`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Empirical { samples: usize },
}

/// Non-central second moments of voltage deviations, in load-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub sigma_eps: DMatrix<f64>,
    pub sigma_theta: Option<DMatrix<f64>>,
    /// `E[θ εᵀ]`
    pub sigma_theta_eps: Option<DMatrix<f64>>,
    pub provenance: Provenance,
}

/// Streaming `(1/m) Σ x xᵀ` over voltage states.
///
/// Phase moments are kept only while every pushed state carries θ.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    n: usize,
    count: usize,
    eps: DMatrix<f64>,
    theta: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

fn add_outer(acc: &mut DMatrix<f64>, a: &[f64], b: &[f64]) {
    for (j, bj) in b.iter().enumerate() {
        let mut col = acc.column_mut(j);
        for (i, ai) in a.iter().enumerate() {
            col[i] += ai * bj;
        }
    }
}

impl MomentAccumulator {
    pub fn new(n: usize) -> Self {
        MomentAccumulator {
            n,
            count: 0,
            eps: DMatrix::zeros(n, n),
            theta: Some((DMatrix::zeros(n, n), DMatrix::zeros(n, n))),
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, state: &VoltageState) -> Result<()> {
        self.push_parts(&state.eps, state.theta.as_deref())
    }

    pub fn push_parts(&mut self, eps: &[f64], theta: Option<&[f64]>) -> Result<()> {
        if eps.len() != self.n || theta.is_some_and(|t| t.len() != self.n) {
            return Err(Error::Domain(format!(
                "state dimension differs from accumulator dimension {}",
                self.n
            )));
        }
        add_outer(&mut self.eps, eps, eps);
        match (theta, &mut self.theta) {
            (Some(t), Some((tt, te))) => {
                add_outer(tt, t, t);
                add_outer(te, t, eps);
            }
            _ => self.theta = None,
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: MomentAccumulator) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Domain(
                "cannot merge accumulators of different dimension".into(),
            ));
        }
        self.eps += other.eps;
        self.theta = match (self.theta.take(), other.theta) {
            (Some((a, b)), Some((c, d))) => Some((a + c, b + d)),
            _ => None,
        };
        self.count += other.count;
        Ok(())
    }

    pub fn finish(self) -> Result<MomentSet> {
        if self.count == 0 {
            return Err(Error::Domain("no samples to average".into()));
        }
        let m = self.count as f64;
        let (sigma_theta, sigma_theta_eps) = match self.theta {
            Some((tt, te)) => (Some(tt / m), Some(te / m)),
            None => (None, None),
        };
        Ok(MomentSet {
            sigma_eps: self.eps / m,
            sigma_theta,
            sigma_theta_eps,
            provenance: Provenance::Empirical {
                samples: self.count,
            },
        })
    }
}

/// Sample second moments of a batch of voltage states.
pub fn empirical_moments(samples: &[VoltageState]) -> Result<MomentSet> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Domain("no samples to average".into()))?;
    let mut acc = MomentAccumulator::new(first.eps.len());
    for s in samples {
        acc.push(s)?;
    }
    acc.finish()
}

/// A table of ε samples: one row per sample, one column per load node.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSamples {
    nodes: Vec<NodeId>,
    data: Vec<f64>,
}

impl VoltageSamples {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        VoltageSamples {
            nodes,
            data: Vec::new(),
        }
    }

    pub fn from_states(nodes: Vec<NodeId>, states: &[VoltageState]) -> Result<Self> {
        let mut s = Self::new(nodes);
        for st in states {
            s.push_row(&st.eps)?;
        }
        Ok(s)
    }

    pub fn push_row(&mut self, eps: &[f64]) -> Result<()> {
        if eps.len() != self.nodes.len() {
            return Err(Error::Domain(format!(
                "row has {} values, expected {}",
                eps.len(),
                self.nodes.len()
            )));
        }
        self.data.extend_from_slice(eps);
        Ok(())
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        if self.nodes.is_empty() {
            0
        } else {
            self.data.len() / self.nodes.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.nodes.len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.nodes.len().max(1))
    }

    /// `(1/m) Σ ε εᵀ` over the rows.
    pub fn second_moments(&self) -> Result<MomentSet> {
        let mut acc = MomentAccumulator::new(self.nodes.len());
        for r in self.rows() {
            acc.push_parts(r, None)?;
        }
        acc.finish()
    }
}
