use nalgebra::DMatrix;

use super::empirical::{MomentSet, Provenance};
use super::model::{InjectionModel, MomentKind};
use crate::error::{Error, Result};
use crate::grid_model::{
    inverse_conductance_path_matrix, reactance_path_matrix, resistance_path_matrix, ForestConfig,
    NodeId,
};
use crate::powerflow::LinearModel;

fn check_model(forest: &ForestConfig, model: &InjectionModel) -> Result<()> {
    let n = forest.grid().load_count();
    if model.dim() != n {
        return Err(Error::Domain(format!(
            "model has dimension {}, grid has {n} load nodes",
            model.dim()
        )));
    }
    Ok(())
}

/// `A S Bᵀ + (A S Bᵀ)ᵀ`
fn sym_cross(a: &DMatrix<f64>, s: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let t = a * s * b;
    &t + t.transpose()
}

/// `E[ε εᵀ]` under the linear-coupled model: `ε = R p + X q`.
pub fn analytic_sigma_eps(forest: &ForestConfig, model: &InjectionModel) -> Result<DMatrix<f64>> {
    check_model(forest, model)?;
    let r = resistance_path_matrix(forest);
    let x = reactance_path_matrix(forest);
    Ok(&r * model.sigma_p() * &r + &x * model.sigma_q() * &x + sym_cross(&r, model.sigma_pq(), &x))
}

/// `E[θ θᵀ]` under the linear-coupled model: `θ = X p − R q`.
pub fn analytic_sigma_theta(forest: &ForestConfig, model: &InjectionModel) -> Result<DMatrix<f64>> {
    check_model(forest, model)?;
    let r = resistance_path_matrix(forest);
    let x = reactance_path_matrix(forest);
    Ok(&x * model.sigma_p() * &x + &r * model.sigma_q() * &r - sym_cross(&x, model.sigma_pq(), &r))
}

/// `E[θ εᵀ]` under the linear-coupled model.
pub fn analytic_sigma_theta_eps(
    forest: &ForestConfig,
    model: &InjectionModel,
) -> Result<DMatrix<f64>> {
    check_model(forest, model)?;
    let r = resistance_path_matrix(forest);
    let x = reactance_path_matrix(forest);
    let qp = model.sigma_qp();
    Ok(
        &x * model.sigma_p() * &r - &r * model.sigma_q() * &x + &x * model.sigma_pq() * &x
            - &r * qp * &r,
    )
}

/// `E[ε εᵀ]` under the resistive DC model: `ε = G p` with `G = H_g⁻¹`.
pub fn analytic_sigma_eps_dc(
    forest: &ForestConfig,
    model: &InjectionModel,
) -> Result<DMatrix<f64>> {
    check_model(forest, model)?;
    let g = inverse_conductance_path_matrix(forest);
    Ok(&g * model.sigma_p() * &g)
}

/// All moments the chosen linear model defines.
pub fn analytic_moments(
    forest: &ForestConfig,
    model: &InjectionModel,
    kind: LinearModel,
) -> Result<MomentSet> {
    check_model(forest, model)?;
    match kind {
        LinearModel::Lc => Ok(MomentSet {
            sigma_eps: analytic_sigma_eps(forest, model)?,
            sigma_theta: Some(analytic_sigma_theta(forest, model)?),
            sigma_theta_eps: Some(analytic_sigma_theta_eps(forest, model)?),
            provenance: Provenance::Analytic,
        }),
        LinearModel::DcResistive => {
            // θ = −G q
            let g = inverse_conductance_path_matrix(forest);
            Ok(MomentSet {
                sigma_eps: &g * model.sigma_p() * &g,
                sigma_theta: Some(&g * model.sigma_q() * &g),
                sigma_theta_eps: Some(-(&g * model.sigma_qp() * &g)),
                provenance: Provenance::Analytic,
            })
        }
    }
}

/// Load indices of `D_a` and the impedance of the line from `a` to its parent `b`.
fn subtree_and_line(forest: &ForestConfig, a: NodeId, b: NodeId) -> Result<(Vec<usize>, f64, f64)> {
    if forest.parent(a)? != Some(b) {
        return Err(Error::Domain(format!("{b} is not the parent of {a}")));
    }
    let e = forest
        .parent_edge(a)?
        .expect("load with a parent has a parent edge");
    let line = forest.grid().line(e).expect("forest edges are grid lines");
    let grid = forest.grid();
    let idx = forest
        .descendants(a)?
        .into_iter()
        .map(|c| grid.load_index(c).expect("descendants of a load are loads"))
        .collect();
    Ok((idx, line.r, line.x))
}

fn block_sum(m: &DMatrix<f64>, idx: &[usize]) -> f64 {
    idx.iter()
        .flat_map(|&c| idx.iter().map(move |&d| m[(c, d)]))
        .sum()
}

/// `E[(ε_a − ε_b)²]` for `b` the parent of `a`, as the quadratic form in the
/// injection moments over `D_a`.
pub fn expected_sq_diff_lc(
    forest: &ForestConfig,
    model: &InjectionModel,
    a: NodeId,
    b: NodeId,
) -> Result<f64> {
    check_model(forest, model)?;
    let (d, r, x) = subtree_and_line(forest, a, b)?;
    Ok(r * r * block_sum(model.sigma_p(), &d)
        + x * x * block_sum(model.sigma_q(), &d)
        + 2.0 * r * x * block_sum(model.sigma_pq(), &d))
}

/// `E[(ε_a − ε_b)²]` under the DC model: `Σ_{c,d ∈ D_a} Σp(c,d) / g_ab²`.
pub fn expected_sq_diff_dc(
    forest: &ForestConfig,
    model: &InjectionModel,
    a: NodeId,
    b: NodeId,
) -> Result<f64> {
    check_model(forest, model)?;
    let (d, r, x) = subtree_and_line(forest, a, b)?;
    let z = (r * r + x * x) / r;
    Ok(z * z * block_sum(model.sigma_p(), &d))
}

/// An ancestor–descendant pair whose ε second moments are out of order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingViolation {
    pub ancestor: NodeId,
    pub descendant: NodeId,
    pub ancestor_value: f64,
    pub descendant_value: f64,
}

/// Every pair of loads with `c` a strict descendant of `a` and
/// `Σε(c,c) ≤ Σε(a,a)`.
///
/// Fails with [`Error::Precondition`] when some same-tree injection moment
/// the model relies on is not strictly positive.
pub fn verify_moment_ordering(
    forest: &ForestConfig,
    model: &InjectionModel,
    kind: LinearModel,
) -> Result<Vec<OrderingViolation>> {
    check_model(forest, model)?;
    let needed: &[MomentKind] = match kind {
        LinearModel::Lc => &[MomentKind::P, MomentKind::Q, MomentKind::Pq],
        LinearModel::DcResistive => &[MomentKind::P],
    };
    let labels = forest.tree_labels();
    if let Some(v) = model.positivity_violations(&labels, needed).first() {
        let loads = forest.grid().loads();
        return Err(Error::Precondition(format!(
            "{}({}, {}) = {:e} is not positive",
            v.moment, loads[v.a], loads[v.b], v.value
        )));
    }
    let sigma = match kind {
        LinearModel::Lc => analytic_sigma_eps(forest, model)?,
        LinearModel::DcResistive => analytic_sigma_eps_dc(forest, model)?,
    };
    let loads = forest.grid().loads();
    let mut out = Vec::new();
    for (ai, &a) in loads.iter().enumerate() {
        for (ci, &c) in loads.iter().enumerate() {
            if ai == ci || !forest.is_descendant(c, a)? {
                continue;
            }
            let (va, vc) = (sigma[(ai, ai)], sigma[(ci, ci)]);
            if vc <= va || vc.is_nan() || va.is_nan() {
                out.push(OrderingViolation {
                    ancestor: a,
                    descendant: c,
                    ancestor_value: va,
                    descendant_value: vc,
                });
            }
        }
    }
    Ok(out)
}
