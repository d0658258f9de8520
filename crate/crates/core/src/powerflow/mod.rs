//! Power flow on an operational forest.
//!
//! Injections are positive for generation and negative for consumption.
//! Voltage deviations follow the sign of the linear model
//! `p = H_g ε + H_β θ`, so `v ≈ 1 + ε` and a consuming feeder has ε < 0.
//! Substations are slack buses with zero deviation and phase; vectors here
//! cover load nodes only, in load-index order.

mod distflow;
mod linear;

pub use distflow::{distflow_solve, DistFlowOptions, DistFlowSolution};
pub use linear::{dc_resistive_solve, lcpf_solve, LinearModel, LinearSweep};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_model::ForestConfig;

/// Active and reactive injections at the load nodes (per-unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionVector {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl InjectionVector {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::Domain(format!(
                "p has {} entries, q has {}",
                p.len(),
                q.len()
            )));
        }
        if let Some(v) = p.iter().chain(&q).find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite injection {v}")));
        }
        Ok(InjectionVector { p, q })
    }

    pub fn zeros(n: usize) -> Self {
        InjectionVector {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        InjectionVector {
            p: self.p.iter().map(|v| v * s).collect(),
            q: self.q.iter().map(|v| v * s).collect(),
        }
    }
}

/// Voltage deviations (and phases, when the model yields them) at the load nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageState {
    pub eps: Vec<f64>,
    pub theta: Option<Vec<f64>>,
}

impl VoltageState {
    /// Per-unit magnitudes `1 + ε`.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.eps.iter().map(|e| 1.0 + e).collect()
    }
}

pub(crate) fn check_dimension(forest: &ForestConfig, inj: &InjectionVector) -> Result<()> {
    let n = forest.grid().load_count();
    if inj.p.len() != n || inj.q.len() != n {
        return Err(Error::Domain(format!(
            "injection vector has dimension ({}, {}), grid has {n} load nodes",
            inj.p.len(),
            inj.q.len()
        )));
    }
    Ok(())
}
