//! Margin-constrained randomized shortest paths (RSP) on weighted directed graphs.
//!
//! The crate solves the relative-entropy-regularized optimal transport problem
//! on a graph: unit flow is injected at input nodes with distribution
//! `sigma_in`, removed at output nodes with distribution `sigma_out`, and the
//! routing policy minimizes expected cost plus `1/theta` times the
//! Kullback-Leibler divergence from the natural random walk.
//!
//! Pipeline:
//!
//! 1. [`graph`]: adjacency/cost storage, natural random walk, strong
//!    connectivity and the stationary distribution.
//! 2. [`extended`]: the single-source/single-target extended graph, with sink
//!    weights either supplied or derived so that the natural walk already
//!    meets the output margins.
//! 3. [`rsp`]: fundamental-matrix quantities of a single source-target RSP
//!    system (partition function, flows, policy, free energy).
//! 4. [`solver`]: block-coordinate ascent on the Lagrangian dual until both
//!    margins hold.
//! 5. [`distances`]: coupling matrix and surprisal distance.
//!
//! Everything is dense and allocation-only; no IO happens here.
//!
//! Index convention: original nodes are `0..N`. On the extended graph the
//! source is `0`, original node `i` is `i + 1` and the target is `N + 1`.

#![no_std]
// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod distances;
pub mod error;
pub mod extended;
pub mod graph;
pub mod linalg;
pub mod rsp;
pub mod solver;

pub use distances::{
    cbop_distance, coupling_matrix, node_weights, surprisal_distance, CbopOutput, CbopWarning,
    CouplingMatrix, DistanceMatrix, NodeWeights, WeightScheme, NEAR_IDENTITY_MASS,
};
pub use error::{Error, Result};
pub use extended::{
    build_extended, compute_alpha, expected_visits_unconstrained, mu_lower_bound,
    weights_from_alpha, ExtendedGraph, MarginSpec, MuPolicy, SinkWiring, WiringMode,
};
pub use graph::{
    load_graph, natural_transitions, stationary_distribution, validate_structure, CostRule,
    EdgeRecord, Graph, TransitionMatrix, ValidationReport,
};
pub use linalg::Matrix;
pub use rsp::{
    build_system, edge_flows, free_energy, optimal_policy, path_sum_oracle, FlowField,
    PathSumOracle, RspSystem,
};
pub use solver::{
    dual_value, expected_costs_match, solve_margins, update_lambda_in, update_lambda_out,
    MarginSolution, SolverConfig,
};
