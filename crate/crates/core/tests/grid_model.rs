use nalgebra::DMatrix;
use proptest::prelude::*;

use gridtop_core::grid_model::{
    build_reduced_incidence, inverse_incidence_entry, laplacian_inverse_entry,
    laplacian_row_difference,
};
use gridtop_core::harness::{generate_random_grid, random_spanning_forest, GeneratorSpec};
use gridtop_core::{ForestConfig, NodeId};

fn arb_forest() -> impl Strategy<Value = ForestConfig> {
    (2usize..50, 1usize..4, any::<u64>(), any::<bool>())
        .prop_filter("substations ≤ loads", |(n, k, _, _)| k <= n)
        .prop_map(|(n, k, seed, reforest)| {
            let spec = GeneratorSpec {
                loads: n,
                substations: k,
                tie_switches: k - 1,
                extra_lines: n / 3,
                ..Default::default()
            };
            let (grid, forest) = generate_random_grid(&spec, seed).unwrap();
            if reforest {
                random_spanning_forest(&grid, !seed).unwrap()
            } else {
                forest
            }
        })
}

/// Random positive weights indexed by edge id.
fn weights(forest: &ForestConfig, seed: u64) -> Vec<f64> {
    (0..forest.grid().lines().len())
        .map(|e| {
            0.5 + ((e as u64 + 1).wrapping_mul(seed | 1) >> 40) as f64 / (1u64 << 24) as f64 * 20.0
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn incidence_inverse_is_combinatorial(forest in arb_forest()) {
        let inc = build_reduced_incidence(&forest);
        let m = inc.matrix();
        let inv = m.clone().try_inverse().expect("reduced incidence is invertible");
        prop_assert!((m * &inv - DMatrix::identity(m.nrows(), m.nrows())).amax() < 1e-12);
        // rows of M are edges, columns are nodes, so M⁻¹ is node × edge
        for (i, &a) in inc.node_order().iter().enumerate() {
            for (j, &e) in inc.edge_order().iter().enumerate() {
                prop_assert_eq!(inv[(i, j)].round() as i8, inverse_incidence_entry(&forest, a, e).unwrap());
            }
        }
    }

    #[test]
    fn laplacian_inverse_is_a_shared_path_sum(forest in arb_forest(), seed in any::<u64>()) {
        let inc = build_reduced_incidence(&forest);
        let w = weights(&forest, seed);
        let m = inc.matrix();
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            m.nrows(),
            inc.edge_order().iter().map(|e| w[e.0]),
        ));
        let dense = (m.transpose() * diag * m).try_inverse().unwrap();
        let order = inc.node_order();
        for (i, &a) in order.iter().enumerate() {
            for (j, &b) in order.iter().enumerate() {
                let entry = laplacian_inverse_entry(&forest, &w, a, b).unwrap();
                if forest.tree_of(a).unwrap() != forest.tree_of(b).unwrap() {
                    prop_assert_eq!(entry, 0.0);
                }
                prop_assert!((entry - dense[(i, j)]).abs() <= 1e-10 * dense[(i, j)].abs().max(dense.amax() * 1e-6));
            }
        }
    }

    #[test]
    fn row_difference_is_a_descendant_indicator(forest in arb_forest(), seed in any::<u64>()) {
        let w = weights(&forest, seed);
        let grid = forest.grid();
        for (a, b) in forest.parent_map() {
            let line = w[grid.edge_between(a, b).unwrap().0];
            let below = forest.descendants(a).unwrap();
            for &c in grid.loads() {
                let got = laplacian_row_difference(&forest, &w, a, b, c).unwrap();
                let want = if below.contains(&c) { 1.0 / line } else { 0.0 };
                prop_assert_eq!(got, want);
                if !grid.is_substation(b) {
                    let diff = laplacian_inverse_entry(&forest, &w, a, c).unwrap()
                        - laplacian_inverse_entry(&forest, &w, b, c).unwrap();
                    prop_assert!((got - diff).abs() <= 1e-12 * laplacian_inverse_entry(&forest, &w, a, a).unwrap());
                }
            }
        }
    }

    #[test]
    fn descendant_sets_nest(forest in arb_forest()) {
        let grid = forest.grid();
        for (a, b) in forest.parent_map() {
            let da = forest.descendants(a).unwrap();
            let db = forest.descendants(b).unwrap();
            prop_assert!(da.contains(&a));
            prop_assert!(da.iter().all(|c| db.contains(c)));
        }
        for node in grid.nodes() {
            let kids = forest.children(node.id).unwrap();
            let mut seen: Vec<NodeId> = Vec::new();
            for k in kids {
                for d in forest.descendants(k).unwrap() {
                    prop_assert!(!seen.contains(&d), "siblings share {d:?}");
                    seen.push(d);
                }
            }
        }
        for &s in grid.substations() {
            let tree = forest.tree_of(s).unwrap();
            let all: Vec<NodeId> = grid.nodes().iter().map(|n| n.id).filter(|&v| forest.tree_of(v).unwrap() == tree).collect();
            let mut d = forest.descendants(s).unwrap();
            d.sort();
            prop_assert_eq!(d, all);
        }
    }
}
