//! File formats, grid generators, the experiment driver and the
//! validation suite behind the command-line tool.

mod experiment;
mod fixtures;
mod generate;
mod gridfile;
mod samples;
mod validate;

pub use experiment::{
    resolve_forest, run_experiment, Engine, ExperimentPlan, ExperimentReport, ForestSelection,
    GridSource, OutputSpec, SampleCount, SummaryRow, TrialOutcome, TrialRecord,
};
pub use fixtures::{fixture_names, load_fixture, FIXTURES};
pub use generate::{
    augment_with_extra_lines, generate_random_grid, random_spanning_forest, GeneratorSpec,
};
pub use gridfile::{
    parse_grid, parse_grid_str, serialize_grid, EdgeEntry, GridFile, LoadedGrid, Meta, NodeEntry,
};
pub use samples::{align_samples, read_samples, write_samples};
pub use validate::{validate, CheckResult, ValidationReport};
