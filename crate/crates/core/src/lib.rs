//! Topology identification for radially operated distribution grids.
//!
//! The crate simulates linear coupled power flow (and its DC-resistive and
//! nonlinear DistFlow relatives) on base-constrained spanning forests,
//! evaluates the second moments of voltage deviations that flow induces,
//! and reconstructs the operational forest bottom-up from voltage samples
//! by ordering those moments.

pub mod error;
pub mod grid_model;
pub mod harness;
pub mod learner;
pub mod moments;
pub mod powerflow;

pub use error::{Error, Result};
pub use grid_model::{EdgeId, ForestConfig, GridGraph, Line, Node, NodeId, NodeKind, WeightKind};
