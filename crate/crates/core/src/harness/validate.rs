use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::grid_model::{
    build_reduced_incidence, laplacian_inverse_entry, reactance_path_matrix,
    resistance_path_matrix, ForestConfig, WeightKind, WeightedLaplacians,
};
use crate::learner::{DeviationMoments, ModelMoments};
use crate::moments::{
    expected_sq_diff_dc, expected_sq_diff_lc, verify_moment_ordering, InjectionModel, MomentKind,
};
use crate::powerflow::{InjectionVector, LinearModel, LinearSweep};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, failure: Option<String>, ok_detail: impl Into<String>) {
        let passed = failure.is_none();
        self.checks.push(CheckResult {
            name,
            passed,
            detail: failure.unwrap_or_else(|| ok_detail.into()),
        });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Dense grids above this many loads skip the O(N³) inverse checks.
const DENSE_LIMIT: usize = 400;

/// Structural and model checks on an operational forest: incidence and
/// Laplacian inverses against dense oracles, the sweep solver against the
/// dense linear solve, the injection-positivity hypothesis, moment ordering
/// and the adjacent-pair squared-difference identities.
pub fn validate(forest: &ForestConfig, model: Option<&InjectionModel>) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    let grid = forest.grid();
    let n = grid.load_count();
    report.push(
        "forest",
        None,
        format!("{} trees cover {n} loads", forest.tree_count()),
    );

    if n <= DENSE_LIMIT {
        let inc = build_reduced_incidence(forest);
        let path = inc.path_inverse(forest);
        let failure = match inc.matrix().clone().try_inverse() {
            None => Some("reduced incidence matrix is singular".to_string()),
            Some(inv) => {
                let off = inv
                    .iter()
                    .find(|v| ![-1.0, 0.0, 1.0].iter().any(|u| (*v - u).abs() < 1e-9));
                let gap = (&inv - &path).amax();
                match off {
                    Some(v) => Some(format!("inverse entry {v} outside {{-1, 0, 1}}")),
                    None if gap > 1e-9 => Some(format!(
                        "dense inverse differs from root-path form by {gap:e}"
                    )),
                    None => None,
                }
            }
        };
        report.push(
            "incidence_inverse",
            failure,
            "entries in {-1, 0, 1}, equal to root paths",
        );

        let laps = WeightedLaplacians::new(forest, &inc);
        let order = laps.node_order();
        let mut worst = 0.0f64;
        let mut failure = None;
        for kind in WeightKind::ALL {
            let weights = grid.weights(kind);
            let Some(inv) = laps.get(kind).clone().try_inverse() else {
                failure = Some(format!("{kind:?} Laplacian is singular"));
                break;
            };
            for (i, &a) in order.iter().enumerate() {
                for (j, &b) in order.iter().enumerate() {
                    worst = worst.max(rel(
                        laplacian_inverse_entry(forest, &weights, a, b)?,
                        inv[(i, j)],
                    ));
                }
            }
        }
        if failure.is_none() && worst > 1e-10 {
            failure = Some(format!(
                "path-sum inverse deviates from dense inverse by {worst:e} (relative)"
            ));
        }
        report.push(
            "laplacian_inverse",
            failure,
            format!("max relative deviation {worst:e}"),
        );
    } else {
        report
            .warnings
            .push(format!("{n} loads: dense inverse checks skipped"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let inj = InjectionVector {
        p: (0..n).map(|_| rng.random_range(-0.01..0.0)).collect(),
        q: (0..n).map(|_| rng.random_range(-0.005..0.0)).collect(),
    };
    let state = LinearSweep::new(forest, LinearModel::Lc).solve(&inj);
    let (r, x) = (
        resistance_path_matrix(forest),
        reactance_path_matrix(forest),
    );
    let p = nalgebra::DVector::from_column_slice(&inj.p);
    let q = nalgebra::DVector::from_column_slice(&inj.q);
    let dense_eps = &r * &p + &x * &q;
    let dense_theta = &x * &p - &r * &q;
    let theta = state.theta.expect("LC yields phases");
    let gap = (0..n)
        .map(|i| rel(state.eps[i], dense_eps[i]).max(rel(theta[i], dense_theta[i])))
        .fold(0.0, f64::max);
    report.push(
        "lc_sweep",
        (gap > 1e-10).then(|| format!("sweep differs from dense solve by {gap:e} (relative)")),
        format!("max relative deviation {gap:e}"),
    );

    let Some(model) = model else {
        return Ok(report);
    };
    let labels = forest.tree_labels();
    for v in model.positivity_violations(&labels, &[MomentKind::P, MomentKind::Q, MomentKind::Pq]) {
        let loads = grid.loads();
        report.warnings.push(format!(
            "{}({}, {}) = {:e} is not positive: ordering guarantees do not apply",
            v.moment, loads[v.a], loads[v.b], v.value
        ));
    }
    for (name, kind) in [
        ("ordering_lc", LinearModel::Lc),
        ("ordering_dc", LinearModel::DcResistive),
    ] {
        match verify_moment_ordering(forest, model, kind) {
            Ok(v) if v.is_empty() => {
                report.push(name, None, "every descendant exceeds its ancestors")
            }
            Ok(v) => report.push(
                name,
                Some(format!(
                    "{} violations, first: Σε({d},{d}) = {:e} ≤ Σε({a},{a}) = {:e}",
                    v.len(),
                    v[0].descendant_value,
                    v[0].ancestor_value,
                    d = v[0].descendant,
                    a = v[0].ancestor
                )),
                "",
            ),
            Err(Error::Precondition(msg)) => report.warnings.push(format!("{name} skipped: {msg}")),
            Err(e) => return Err(e),
        }
    }

    // Differences straight from the linear maps; reading them off Σε cancels
    // too much on deep feeders to test anything.
    let lc = ModelMoments::new(forest, model, LinearModel::Lc)?;
    let dc = ModelMoments::new(forest, model, LinearModel::DcResistive)?;
    let mut worst = 0.0f64;
    for (a, b) in forest.parent_map() {
        let ia = grid.load_index(a).expect("child is a load");
        let ib = grid.load_index(b);
        worst = worst.max(rel(
            expected_sq_diff_lc(forest, model, a, b)?,
            lc.sq_diff(ia, ib),
        ));
        worst = worst.max(rel(
            expected_sq_diff_dc(forest, model, a, b)?,
            dc.sq_diff(ia, ib),
        ));
    }
    report.push(
        "sq_diff_identity",
        (worst > 1e-10).then(|| format!("relative deviation {worst:e}")),
        format!("max relative deviation {worst:e}"),
    );
    Ok(report)
}
