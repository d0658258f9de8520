use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid_model::{
    inverse_conductance_path_matrix, reactance_path_matrix, resistance_path_matrix, ForestConfig,
    GridGraph,
};
use crate::moments::{InjectionModel, MomentSet, VoltageSamples};
use crate::powerflow::LinearModel;

/// The voltage statistics the learner reads: diagonal second moments and
/// mean squared differences between pairs. Indices are load indices;
/// `None` stands for a substation, whose deviation is identically zero.
pub trait DeviationMoments {
    fn load_count(&self) -> usize;

    /// `Σε(a, a)`
    fn diag(&self, a: usize) -> f64;

    /// `E[(ε_a − ε_b)²]`
    fn sq_diff(&self, a: usize, b: Option<usize>) -> f64;
}

/// Empirical statistics from raw samples, stored per node for cheap
/// pairwise passes.
#[derive(Debug, Clone)]
pub struct SampleMoments {
    columns: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

impl SampleMoments {
    /// `samples` columns must follow the grid's load order.
    pub fn new(samples: &VoltageSamples, grid: &GridGraph) -> Result<Self> {
        if samples.nodes() != grid.loads() {
            return Err(Error::Domain(
                "sample columns do not match the grid's load nodes".into(),
            ));
        }
        if samples.is_empty() {
            return Err(Error::Domain(
                "at least one voltage sample is required".into(),
            ));
        }
        let n = samples.nodes().len();
        let mut columns = vec![Vec::with_capacity(samples.len()); n];
        for row in samples.rows() {
            for (c, v) in columns.iter_mut().zip(row) {
                c.push(*v);
            }
        }
        let m = samples.len() as f64;
        let diag = columns
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() / m)
            .collect();
        Ok(SampleMoments { columns, diag })
    }
}

impl DeviationMoments for SampleMoments {
    fn load_count(&self) -> usize {
        self.columns.len()
    }

    fn diag(&self, a: usize) -> f64 {
        self.diag[a]
    }

    fn sq_diff(&self, a: usize, b: Option<usize>) -> f64 {
        let Some(b) = b else { return self.diag[a] };
        let (ca, cb) = (&self.columns[a], &self.columns[b]);
        ca.iter()
            .zip(cb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / ca.len() as f64
    }
}

/// Statistics read off a second-moment matrix, e.g. the analytic one.
#[derive(Debug, Clone)]
pub struct MatrixMoments {
    sigma: DMatrix<f64>,
}

impl MatrixMoments {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::Domain("second-moment matrix must be square".into()));
        }
        Ok(MatrixMoments { sigma })
    }

    pub fn from_set(set: &MomentSet) -> Self {
        MatrixMoments {
            sigma: set.sigma_eps.clone(),
        }
    }
}

impl DeviationMoments for MatrixMoments {
    fn load_count(&self) -> usize {
        self.sigma.nrows()
    }

    fn diag(&self, a: usize) -> f64 {
        self.sigma[(a, a)]
    }

    fn sq_diff(&self, a: usize, b: Option<usize>) -> f64 {
        match b {
            None => self.sigma[(a, a)],
            Some(b) => self.sigma[(a, a)] + self.sigma[(b, b)] - 2.0 * self.sigma[(a, b)],
        }
    }
}

/// Exact statistics implied by an injection model on a known forest.
///
/// Reading `E[(ε_a − ε_b)²]` off `Σε` cancels badly on deep feeders, where
/// `Σε(a,a)` can exceed the difference by ten orders of magnitude. Here
/// `ε = A s` with `s` the stacked injections, and the difference is formed as
/// `(A_a − A_b) · ((A J)_a − (A J)_b)` so only first-order cancellation remains.
#[derive(Debug, Clone)]
pub struct ModelMoments {
    // Columns are per load, so each pairwise pass is contiguous.
    coeff: DMatrix<f64>,
    weighted: DMatrix<f64>,
    diag: Vec<f64>,
}

impl ModelMoments {
    pub fn new(forest: &ForestConfig, model: &InjectionModel, kind: LinearModel) -> Result<Self> {
        let n = forest.grid().load_count();
        if model.dim() != n {
            return Err(Error::Domain(format!(
                "model has dimension {}, grid has {n} load nodes",
                model.dim()
            )));
        }
        let (coeff, joint) = match kind {
            LinearModel::Lc => {
                let mut a = DMatrix::zeros(n, 2 * n);
                a.view_mut((0, 0), (n, n))
                    .copy_from(&resistance_path_matrix(forest));
                a.view_mut((0, n), (n, n))
                    .copy_from(&reactance_path_matrix(forest));
                let mut j = DMatrix::zeros(2 * n, 2 * n);
                j.view_mut((0, 0), (n, n)).copy_from(model.sigma_p());
                j.view_mut((0, n), (n, n)).copy_from(model.sigma_pq());
                j.view_mut((n, 0), (n, n)).copy_from(&model.sigma_qp());
                j.view_mut((n, n), (n, n)).copy_from(model.sigma_q());
                (a, j)
            }
            LinearModel::DcResistive => (
                inverse_conductance_path_matrix(forest),
                model.sigma_p().clone(),
            ),
        };
        let weighted = (&coeff * &joint).transpose();
        let coeff = coeff.transpose();
        let diag = (0..n)
            .map(|a| coeff.column(a).dot(&weighted.column(a)))
            .collect();
        Ok(ModelMoments {
            coeff,
            weighted,
            diag,
        })
    }
}

impl DeviationMoments for ModelMoments {
    fn load_count(&self) -> usize {
        self.diag.len()
    }

    fn diag(&self, a: usize) -> f64 {
        self.diag[a]
    }

    fn sq_diff(&self, a: usize, b: Option<usize>) -> f64 {
        let Some(b) = b else { return self.diag[a] };
        let (ca, cb) = (self.coeff.column(a), self.coeff.column(b));
        let (wa, wb) = (self.weighted.column(a), self.weighted.column(b));
        ca.iter()
            .zip(cb.iter())
            .zip(wa.iter().zip(wb.iter()))
            .map(|((x, y), (u, v))| (x - y) * (u - v))
            .sum()
    }
}
