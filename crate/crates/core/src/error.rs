use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong between loading a graph and computing distances.
///
/// Node indices carried by variants are 0-based original-graph indices unless
/// the field name says otherwise.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("node index {index} out of range for {node_count} nodes")]
    NodeOutOfRange { index: usize, node_count: usize },
    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("edge {src} -> {dst} has non-positive or non-finite weight {weight}")]
    NonPositiveWeight { src: usize, dst: usize, weight: f64 },
    #[error("edge {src} -> {dst} has negative or non-finite cost {cost}")]
    InvalidCost { src: usize, dst: usize, cost: f64 },
    #[error("cost given for missing edge {src} -> {dst}")]
    CostForMissingEdge { src: usize, dst: usize },
    #[error("edge {src} -> {dst} has no cost under the explicit cost rule")]
    MissingCost { src: usize, dst: usize },
    #[error("edge {src} -> {dst} carries a cost but the reciprocal-weight rule derives costs")]
    UnexpectedCost { src: usize, dst: usize },
    #[error("node {node} has no outgoing edge")]
    DanglingNode { node: usize },
    #[error("node {node} has zero degree")]
    IsolatedNode { node: usize },
    #[error("transition matrix row {row} sums to {sum}, expected 1 or 0")]
    NotStochastic { row: usize, sum: f64 },
    #[error("transition matrix entry ({row}, {col}) = {value} is negative or non-finite")]
    InvalidProbability { row: usize, col: usize, value: f64 },
    #[error("Markov chain is reducible ({components} strongly connected components)")]
    Reducible { components: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),

    #[error("invalid margins: {0}")]
    InvalidMargins(String),
    #[error("no input node carries positive sigma_in")]
    EmptyInputSet,
    #[error("no output node carries positive sigma_out")]
    EmptyOutputSet,
    #[error("mu too small: expected visits {visits} at node {node} below sigma_out {sigma_out}")]
    MuTooSmall {
        node: usize,
        visits: f64,
        sigma_out: f64,
    },
    #[error("invalid mu {0}")]
    InvalidMu(f64),
    #[error("infeasible visits vector: alpha = {alpha} at node {node}")]
    InfeasibleVisits { node: usize, alpha: f64 },
    #[error("node {node} would become fully absorbing (alpha = 1)")]
    FullyAbsorbing { node: usize },
    #[error("invalid sink weight {weight} at node {node}")]
    InvalidSinkWeight { node: usize, weight: f64 },

    #[error("theta must be positive and finite, got {0}")]
    InvalidTheta(f64),
    #[error("target unreachable or theta too small for numerical rank: {0}")]
    SingularSystem(&'static str),
    #[error("theta too large; rescale costs (partition function {partition:e} underflows)")]
    Underflow { partition: f64 },
    #[error("extended node {node} cannot reach the target")]
    CannotReachTarget { node: usize },
    #[error("path-sum tail bound {bound:e} exceeds {tolerance:e}; increase max_len")]
    TailBoundTooLarge { bound: f64, tolerance: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("output node {node} not wired to sink")]
    OutputNotWired { node: usize },
    #[error(
        "no convergence after {iterations} iterations (last lambda change {last_change:e}, \
         input residual {residual_in:e}, output residual {residual_out:e})"
    )]
    NotConverged {
        iterations: usize,
        last_change: f64,
        residual_in: f64,
        residual_out: f64,
        lambda_in: Vec<f64>,
        lambda_out: Vec<f64>,
    },
    #[error("dual decreased by {drop:e} at iteration {iteration}; numerical breakdown")]
    DualDecrease { iteration: usize, drop: f64 },
    #[error("margin solution is not converged")]
    NotConvergedSolution,

    #[error("coupling is not square over identical input and output sets")]
    NonSquareCoupling,
    #[error("disconnected pair ({i}, {j}) at this theta")]
    DisconnectedPair { i: usize, j: usize },
}

impl Error {
    /// Numerical failures (as opposed to bad input): non-convergence, underflow,
    /// singular systems and related breakdowns.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem(_)
                | Error::Underflow { .. }
                | Error::CannotReachTarget { .. }
                | Error::NotConverged { .. }
                | Error::DualDecrease { .. }
                | Error::TailBoundTooLarge { .. }
                | Error::DisconnectedPair { .. }
                | Error::NotConvergedSolution
        )
    }
}
