use proptest::prelude::*;

use gridtop_core::harness::{
    generate_random_grid, load_fixture, parse_grid_str, random_spanning_forest, read_samples,
    serialize_grid, validate, write_samples, GeneratorSpec,
};
use gridtop_core::learner::{
    reconstruct, reconstruct_from, Candidates, LearnerConfig, ModelMoments, Variant,
};
use gridtop_core::moments::{sample_injections, InjectionModel, ModelSpec, VoltageSamples};
use gridtop_core::powerflow::{LinearModel, LinearSweep};
use gridtop_core::ForestConfig;

fn random_case(loads: usize, subs: usize, extra: usize, seed: u64, reforest: bool) -> ForestConfig {
    let spec = GeneratorSpec {
        loads,
        substations: subs,
        tie_switches: subs - 1,
        extra_lines: extra,
        chain_bias: 0.6,
        ..Default::default()
    };
    let (grid, forest) = generate_random_grid(&spec, seed).unwrap();
    if reforest {
        random_spanning_forest(&grid, seed.rotate_left(17)).unwrap()
    } else {
        forest
    }
}

fn default_model(forest: &ForestConfig) -> InjectionModel {
    ModelSpec::default()
        .build(forest.grid(), Some(&forest.tree_labels()))
        .unwrap()
}

fn simulate(forest: &ForestConfig, model: &InjectionModel, m: usize, seed: u64) -> VoltageSamples {
    let sweep = LinearSweep::new(forest, LinearModel::Lc);
    let mut samples = VoltageSamples::new(forest.grid().loads().to_vec());
    let mut eps = vec![0.0; model.dim()];
    for inj in sample_injections(model, m, seed).unwrap() {
        sweep.solve_into(&inj.p, &inj.q, &mut eps, None);
        samples.push_row(&eps).unwrap();
    }
    samples
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn analytic_moments_recover_the_forest(
        loads in 3usize..60,
        subs in 1usize..4,
        seed in any::<u64>(),
        reforest in any::<bool>(),
        dc in any::<bool>(),
        all_pairs in any::<bool>(),
    ) {
        prop_assume!(subs <= loads);
        let forest = random_case(loads, subs, loads / 3, seed, reforest);
        let model = default_model(&forest);
        let (kind, variant) = if dc { (LinearModel::DcResistive, Variant::Dc) } else { (LinearModel::Lc, Variant::Lc) };
        let source = ModelMoments::new(&forest, &model, kind).unwrap();
        let config = LearnerConfig {
            variant,
            candidates: if all_pairs { Candidates::AllPairs } else { Candidates::Grid },
            ..LearnerConfig::with_tau(1e-9)
        };
        let result = reconstruct_from(&source, &model, forest.grid(), &config).unwrap();
        prop_assert_eq!(result.relative_error(&forest), 0.0);
        prop_assert!(result.unattached.is_empty());
        prop_assert_eq!(result.parent_map, forest.parent_map());
        prop_assert_eq!(result.pop_order.len(), forest.grid().nodes().len());
    }

    #[test]
    fn grid_files_round_trip(loads in 2usize..50, subs in 1usize..4, seed in any::<u64>()) {
        prop_assume!(subs <= loads);
        let forest = random_case(loads, subs, loads / 2, seed, false);
        let text = serialize_grid("g", forest.grid(), Some(&forest));
        let back = parse_grid_str(&text).unwrap();
        prop_assert_eq!(back.grid.lines(), forest.grid().lines());
        prop_assert_eq!(back.require_forest().unwrap().closed_edges(), forest.closed_edges());
        prop_assert_eq!(serialize_grid("g", &back.grid, back.forest.as_ref()), text);
    }
}

/// Samples written to CSV and read back learn exactly the same forest as the
/// in-memory samples.
#[test]
fn simulate_write_read_learn() {
    let forest = load_fixture("bus_13_3").unwrap().forest.unwrap();
    let model = default_model(&forest);
    let samples = simulate(&forest, &model, 2000, 21);

    let mut buf = Vec::new();
    write_samples(&samples, &mut buf).unwrap();
    let back = read_samples(buf.as_slice()).unwrap();
    assert_eq!(back, samples);

    let config = LearnerConfig::with_tau(0.05);
    let direct = reconstruct(&samples, &model, forest.grid(), &config).unwrap();
    let via_file = reconstruct(&back, &model, forest.grid(), &config).unwrap();
    assert_eq!(direct, via_file);
    assert_eq!(direct.relative_error(&forest), 0.0);
}

#[test]
fn too_few_samples_lose_edges() {
    let forest = load_fixture("bus_13_3").unwrap().forest.unwrap();
    let model = ModelSpec {
        cv: 1.0,
        ..Default::default()
    }
    .build(forest.grid(), Some(&forest.tree_labels()))
    .unwrap();
    let samples = simulate(&forest, &model, 20, 1);
    let result = reconstruct(
        &samples,
        &model,
        forest.grid(),
        &LearnerConfig::with_tau(0.05),
    )
    .unwrap();
    assert!(result.relative_error(&forest) > 0.0);
}

#[test]
fn trace_csv_has_one_row_per_test() {
    let forest = load_fixture("bus_13_3").unwrap().forest.unwrap();
    let model = default_model(&forest);
    let source = ModelMoments::new(&forest, &model, LinearModel::Lc).unwrap();
    let result = reconstruct_from(
        &source,
        &model,
        forest.grid(),
        &LearnerConfig::with_tau(1e-6),
    )
    .unwrap();
    let mut buf = Vec::new();
    result.write_trace_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("leaf,candidate,lhs,rhs,deviation,accepted")
    );
    assert_eq!(lines.count(), result.trace.len());
}

#[test]
fn fixtures_pass_validation() {
    for name in ["bus_13_3", "bus_29_1", "bus_83_11", "bus_13_3_x50"] {
        let forest = load_fixture(name).unwrap().forest.unwrap();
        let model = default_model(&forest);
        let report = validate(&forest, Some(&model)).unwrap();
        assert!(report.passed(), "{name}: {report:?}");
    }
}

#[test]
fn invalid_tau_is_rejected() {
    let forest = load_fixture("bus_13_3").unwrap().forest.unwrap();
    let model = default_model(&forest);
    let source = ModelMoments::new(&forest, &model, LinearModel::Lc).unwrap();
    for tau in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(reconstruct_from(
            &source,
            &model,
            forest.grid(),
            &LearnerConfig::with_tau(tau)
        )
        .is_err());
    }
}
