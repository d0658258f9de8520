//! Shared inputs for the benchmarks.

use gridtop_core::harness::{generate_random_grid, GeneratorSpec};
use gridtop_core::moments::{InjectionModel, ModelSpec};
use gridtop_core::powerflow::InjectionVector;
use gridtop_core::ForestConfig;

/// A single feeder with `n` loads in a line, plus its default injection model.
pub fn chain(n: usize) -> (ForestConfig, InjectionModel) {
    let (_, forest) =
        generate_random_grid(&GeneratorSpec::chain(n), n as u64).expect("chain spec is feasible");
    let model = default_model(&forest);
    (forest, model)
}

/// A meshed multi-feeder grid with `n` loads in its declared forest.
pub fn feeders(n: usize, seed: u64) -> (ForestConfig, InjectionModel) {
    let spec = GeneratorSpec {
        loads: n,
        substations: 4,
        tie_switches: 6,
        extra_lines: n / 4,
        ..Default::default()
    };
    let (_, forest) = generate_random_grid(&spec, seed).expect("feeder spec is feasible");
    let model = default_model(&forest);
    (forest, model)
}

pub fn default_model(forest: &ForestConfig) -> InjectionModel {
    ModelSpec::default()
        .build(forest.grid(), Some(&forest.tree_labels()))
        .expect("default model builds")
}

/// Every load drawing the same small power.
pub fn uniform_load(n: usize) -> InjectionVector {
    InjectionVector::new(vec![-0.005; n], vec![-0.0015; n]).expect("equal lengths")
}
