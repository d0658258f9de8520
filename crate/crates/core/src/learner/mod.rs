//! Bottom-up reconstruction of the operational forest.
//!
//! Nodes are popped in descending order of `Σε(b,b)`. Each popped node is
//! tested as the parent of every current leaf by comparing the observed
//! `E[(ε_a − ε_b)²]` with the value the injection moments predict for the
//! line `(a, b)` and the leaf's descendant set.

mod reconstruct;
mod source;

pub use reconstruct::{
    reconstruct, reconstruct_from, relative_error, Candidates, LearnerConfig, Outcome,
    ReconstructionResult, TraceEntry, Variant,
};
pub use source::{DeviationMoments, MatrixMoments, ModelMoments, SampleMoments};
