use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_model::{GridGraph, NodeId};

/// Second-order statistics of nodal injections, in load-index order.
///
/// All `sigma_*` matrices are non-central (`E[p pᵀ]`, `E[q qᵀ]`,
/// `E[p qᵀ]`); covariances are derived by subtracting the mean outer
/// products.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionModel {
    mu_p: Vec<f64>,
    mu_q: Vec<f64>,
    sigma_p: DMatrix<f64>,
    sigma_q: DMatrix<f64>,
    sigma_pq: DMatrix<f64>,
}

/// Which injection moment a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    P,
    Q,
    Pq,
}

impl fmt::Display for MomentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MomentKind::P => "Σp",
            MomentKind::Q => "Σq",
            MomentKind::Pq => "Σpq",
        })
    }
}

/// A same-tree pair whose injection moment is not strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityViolation {
    pub a: usize,
    pub b: usize,
    pub moment: MomentKind,
    pub value: f64,
}

const PSD_RTOL: f64 = 1e-10;

fn check_symmetric(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Model(format!(
                    "{name} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

fn check_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let eig = m.clone().symmetric_eigenvalues();
    let top = eig.amax();
    let low = eig.min();
    if low < -PSD_RTOL * top.max(f64::MIN_POSITIVE) {
        return Err(Error::Model(format!(
            "{name} is not positive semi-definite (eigenvalue {low:e})"
        )));
    }
    Ok(())
}

impl InjectionModel {
    /// Model from means and the joint covariance of `(p, q)` (2N × 2N).
    pub fn from_covariance(mu_p: Vec<f64>, mu_q: Vec<f64>, joint: &DMatrix<f64>) -> Result<Self> {
        let n = mu_p.len();
        if mu_q.len() != n || joint.nrows() != 2 * n || joint.ncols() != 2 * n {
            return Err(Error::Model(format!(
                "dimension mismatch: |μp| = {n}, |μq| = {}, covariance {}×{}",
                mu_q.len(),
                joint.nrows(),
                joint.ncols()
            )));
        }
        check_symmetric("joint covariance", joint)?;
        check_psd("joint covariance", joint)?;
        let mp = DMatrix::from_column_slice(n, 1, &mu_p);
        let mq = DMatrix::from_column_slice(n, 1, &mu_q);
        let sigma_p = joint.view((0, 0), (n, n)) + &mp * mp.transpose();
        let sigma_q = joint.view((n, n), (n, n)) + &mq * mq.transpose();
        let sigma_pq = joint.view((0, n), (n, n)) + &mp * mq.transpose();
        Ok(InjectionModel {
            mu_p,
            mu_q,
            sigma_p,
            sigma_q,
            sigma_pq,
        })
    }

    /// Model from means and non-central second moments.
    pub fn from_second_moments(
        mu_p: Vec<f64>,
        mu_q: Vec<f64>,
        sigma_p: DMatrix<f64>,
        sigma_q: DMatrix<f64>,
        sigma_pq: DMatrix<f64>,
    ) -> Result<Self> {
        let n = mu_p.len();
        for (name, m) in [("Σp", &sigma_p), ("Σq", &sigma_q), ("Σpq", &sigma_pq)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Model(format!(
                    "{name} is {}×{}, expected {n}×{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        check_symmetric("Σp", &sigma_p)?;
        check_symmetric("Σq", &sigma_q)?;
        let model = InjectionModel {
            mu_p,
            mu_q,
            sigma_p,
            sigma_q,
            sigma_pq,
        };
        if model.mu_q.len() != n {
            return Err(Error::Model("μq dimension mismatch".into()));
        }
        check_psd("joint covariance", &model.joint_covariance())?;
        Ok(model)
    }

    pub fn zero(n: usize) -> Self {
        InjectionModel {
            mu_p: vec![0.0; n],
            mu_q: vec![0.0; n],
            sigma_p: DMatrix::zeros(n, n),
            sigma_q: DMatrix::zeros(n, n),
            sigma_pq: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mu_p.len()
    }

    pub fn mean_p(&self) -> &[f64] {
        &self.mu_p
    }

    pub fn mean_q(&self) -> &[f64] {
        &self.mu_q
    }

    pub fn sigma_p(&self) -> &DMatrix<f64> {
        &self.sigma_p
    }

    pub fn sigma_q(&self) -> &DMatrix<f64> {
        &self.sigma_q
    }

    pub fn sigma_pq(&self) -> &DMatrix<f64> {
        &self.sigma_pq
    }

    pub fn sigma_qp(&self) -> DMatrix<f64> {
        self.sigma_pq.transpose()
    }

    fn mean_outer(a: &[f64], b: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
    }

    /// Ω_p = Σ_p − μ_p μ_pᵀ
    pub fn covariance_p(&self) -> DMatrix<f64> {
        &self.sigma_p - Self::mean_outer(&self.mu_p, &self.mu_p)
    }

    pub fn covariance_q(&self) -> DMatrix<f64> {
        &self.sigma_q - Self::mean_outer(&self.mu_q, &self.mu_q)
    }

    pub fn covariance_pq(&self) -> DMatrix<f64> {
        &self.sigma_pq - Self::mean_outer(&self.mu_p, &self.mu_q)
    }

    /// Covariance of the stacked vector `(p, q)`.
    pub fn joint_covariance(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        let cpq = self.covariance_pq();
        j.view_mut((0, 0), (n, n)).copy_from(&self.covariance_p());
        j.view_mut((n, n), (n, n)).copy_from(&self.covariance_q());
        j.view_mut((0, n), (n, n)).copy_from(&cpq);
        j.view_mut((n, 0), (n, n)).copy_from(&cpq.transpose());
        j
    }

    /// Pairs `(a, b)` in the same group whose moment in `kinds` is not
    /// strictly positive. `groups[i]` is the tree label of load `i`.
    pub fn positivity_violations(
        &self,
        groups: &[usize],
        kinds: &[MomentKind],
    ) -> Vec<PositivityViolation> {
        let mut out = Vec::new();
        let n = self.dim();
        for a in 0..n {
            for b in 0..n {
                if groups[a] != groups[b] {
                    continue;
                }
                for &kind in kinds {
                    let value = match kind {
                        MomentKind::P => self.sigma_p[(a, b)],
                        MomentKind::Q => self.sigma_q[(a, b)],
                        MomentKind::Pq => self.sigma_pq[(a, b)],
                    };
                    let symmetric_dup = b < a && kind != MomentKind::Pq;
                    if (value <= 0.0 || value.is_nan()) && !symmetric_dup {
                        out.push(PositivityViolation {
                            a,
                            b,
                            moment: kind,
                            value,
                        });
                    }
                }
            }
        }
        out
    }

    /// Same model with `Σpq` negated and `μq` flipped: the statistics of
    /// `(p, −q)`.
    pub fn with_negated_q(&self) -> InjectionModel {
        InjectionModel {
            mu_p: self.mu_p.clone(),
            mu_q: self.mu_q.iter().map(|v| -v).collect(),
            sigma_p: self.sigma_p.clone(),
            sigma_q: self.sigma_q.clone(),
            sigma_pq: -&self.sigma_pq,
        }
    }
}

/// How the shared correlation term of [`ModelSpec`] spreads across nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationScope {
    /// Correlated within a tree, independent across trees.
    #[default]
    Tree,
    /// One correlation block over every load.
    Grid,
}

/// Parametric Gaussian injection model, the form used in config files.
///
/// `p ~ N(μ, σ²(I + ρ·B))` with `σ = cv·|mean_p|` and `B` the same-group
/// indicator; `q = q_ratio·p + η` with independent
/// `η ~ N(0, (q_noise_cv·|q_ratio·mean_p|)²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub mean_p: f64,
    pub cv: f64,
    pub rho: f64,
    pub q_ratio: f64,
    pub q_noise_cv: f64,
    pub correlation: CorrelationScope,
    /// Per-node replacements for `mean_p`.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub mean_p_overrides: BTreeMap<NodeId, f64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            mean_p: -0.005,
            cv: 0.2,
            rho: 0.1,
            q_ratio: 0.3,
            q_noise_cv: 0.1,
            correlation: CorrelationScope::Tree,
            mean_p_overrides: BTreeMap::new(),
        }
    }
}

impl ModelSpec {
    /// Instantiate on `grid`. `tree_labels` (load-index order) is needed for
    /// [`CorrelationScope::Tree`]; without it every load shares one group.
    pub fn build(&self, grid: &GridGraph, tree_labels: Option<&[usize]>) -> Result<InjectionModel> {
        let n = grid.load_count();
        for node in self.mean_p_overrides.keys() {
            if grid.load_index(*node).is_none() {
                return Err(Error::Model(format!(
                    "mean override for {node}, which is not a load node"
                )));
            }
        }
        let mu_p: Vec<f64> = grid
            .loads()
            .iter()
            .map(|a| self.mean_p_overrides.get(a).copied().unwrap_or(self.mean_p))
            .collect();
        let mu_q: Vec<f64> = mu_p.iter().map(|m| self.q_ratio * m).collect();
        let group = |i: usize| match (self.correlation, tree_labels) {
            (CorrelationScope::Tree, Some(labels)) => labels[i],
            _ => 0,
        };
        let sigma = self.cv * self.mean_p.abs();
        let noise = self.q_noise_cv * (self.q_ratio * self.mean_p).abs();
        let cov_p = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { 1.0 } else { 0.0 };
            let shared = if group(i) == group(j) { self.rho } else { 0.0 };
            sigma * sigma * (diag + shared)
        });
        let k = self.q_ratio;
        let mut joint = DMatrix::zeros(2 * n, 2 * n);
        joint.view_mut((0, 0), (n, n)).copy_from(&cov_p);
        joint.view_mut((0, n), (n, n)).copy_from(&(&cov_p * k));
        joint.view_mut((n, 0), (n, n)).copy_from(&(&cov_p * k));
        let cov_q = &cov_p * (k * k) + DMatrix::identity(n, n) * (noise * noise);
        joint.view_mut((n, n), (n, n)).copy_from(&cov_q);
        InjectionModel::from_covariance(mu_p, mu_q, &joint)
    }
}
