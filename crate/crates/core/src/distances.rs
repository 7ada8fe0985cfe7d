//! Coupling matrix and the margin-constrained bag-of-paths surprisal distance.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::extended::{build_extended, ExtendedGraph, MarginSpec, MuPolicy, WiringMode};
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::solver::{solve_margins, MarginSolution, SolverConfig};

/// `gamma[(a, b)]` is the probability that a path starts at `inputs[a]` and
/// ends at `outputs[b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub gamma: Matrix,
}

impl CouplingMatrix {
    pub fn is_square(&self) -> bool {
        self.inputs == self.outputs
    }

    /// Total mass off the diagonal of a square coupling.
    pub fn off_diagonal_mass(&self) -> f64 {
        let n = self.gamma.rows();
        let diag: f64 = (0..n.min(self.gamma.cols()))
            .map(|i| self.gamma[(i, i)])
            .sum();
        self.gamma.as_slice().iter().sum::<f64>() - diag
    }
}

/// Symmetric, zero-diagonal dissimilarity over `nodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    pub nodes: Vec<usize>,
    pub delta: Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightScheme {
    Uniform,
    Degree,
    InverseDegree,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeWeights {
    pub v: Vec<f64>,
    pub scheme: WeightScheme,
}

/// Node weights from the (weighted out-)degrees, L1-normalized.
pub fn node_weights(g: &Graph, scheme: WeightScheme) -> Result<NodeWeights> {
    let n = g.node_count();
    let degrees: Vec<f64> = (0..n).map(|i| g.out_weight(i)).collect();
    if scheme != WeightScheme::Uniform {
        if let Some(node) = degrees.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::IsolatedNode { node });
        }
    }
    let raw: Vec<f64> = match scheme {
        WeightScheme::Uniform => alloc::vec![1.0; n],
        WeightScheme::Degree => degrees,
        WeightScheme::InverseDegree => degrees.iter().map(|d| 1.0 / d).collect(),
    };
    let total: f64 = raw.iter().sum();
    Ok(NodeWeights {
        v: raw.into_iter().map(|x| x / total).collect(),
        scheme,
    })
}

/// `gamma_ij = w'_1i z'_ij w'_jn / Σ w'_1i' z'_i'j' w'_j'n` on the converged
/// augmented weights. Uses `min(|In|, |Out|)` extra solves against the final
/// factorization.
pub fn coupling_matrix(sol: &MarginSolution) -> Result<CouplingMatrix> {
    if !sol.converged {
        return Err(Error::NotConvergedSolution);
    }
    let sys = &sol.system;
    let w = sys.w();
    let t = sys.target();
    let (ins, outs) = (&sol.inputs, &sol.outputs);
    let mut gamma = Matrix::zeros(ins.len(), outs.len());
    if ins.len() <= outs.len() {
        for (a, &i) in ins.iter().enumerate() {
            let row = sys.fundamental_row(i + 1);
            for (b, &j) in outs.iter().enumerate() {
                gamma[(a, b)] = w[(0, i + 1)] * row[j + 1] * w[(j + 1, t)];
            }
        }
    } else {
        for (b, &j) in outs.iter().enumerate() {
            let col = sys.fundamental_column(j + 1);
            for (a, &i) in ins.iter().enumerate() {
                gamma[(a, b)] = w[(0, i + 1)] * col[i + 1] * w[(j + 1, t)];
            }
        }
    }
    let total: f64 = gamma.as_slice().iter().sum();
    if !(total > 0.0) {
        return Err(Error::Underflow { partition: total });
    }
    for a in 0..ins.len() {
        for v in gamma.row_mut(a) {
            *v /= total;
        }
    }
    Ok(CouplingMatrix {
        inputs: ins.clone(),
        outputs: outs.clone(),
        gamma,
    })
}

/// `Δ_ij = -(log γ_ij + log γ_ji) / 2` off the diagonal, zero on it.
pub fn surprisal_distance(coupling: &CouplingMatrix) -> Result<DistanceMatrix> {
    if !coupling.is_square() {
        return Err(Error::NonSquareCoupling);
    }
    let n = coupling.inputs.len();
    let g = &coupling.gamma;
    let mut delta = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if !(g[(i, j)] > 0.0) || !(g[(j, i)] > 0.0) {
                return Err(Error::DisconnectedPair {
                    i: coupling.inputs[i],
                    j: coupling.inputs[j],
                });
            }
            let d = -0.5 * (libm::log(g[(i, j)]) + libm::log(g[(j, i)]));
            delta[(i, j)] = d;
            delta[(j, i)] = d;
        }
    }
    Ok(DistanceMatrix {
        nodes: coupling.inputs.clone(),
        delta,
    })
}

/// Off-diagonal coupling mass below which distances are flagged as
/// uninformative.
pub const NEAR_IDENTITY_MASS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum CbopWarning {
    /// Inputs and outputs cancel locally; `theta` is too large for the
    /// distance to carry information.
    CouplingNearIdentity { off_diagonal_mass: f64 },
}

#[derive(Clone, Debug)]
pub struct CbopOutput {
    pub distance: DistanceMatrix,
    pub coupling: CouplingMatrix,
    pub weights: NodeWeights,
    pub extended: ExtendedGraph,
    pub solution: MarginSolution,
    pub warnings: Vec<CbopWarning>,
}

/// Every node is both input and output with `sigma_in = sigma_out = v`;
/// consistent extended graph, margin solve, coupling, surprisal distance.
pub fn cbop_distance(
    g: &Graph,
    scheme: WeightScheme,
    cfg: &SolverConfig,
    mu: MuPolicy,
) -> Result<CbopOutput> {
    let weights = node_weights(g, scheme)?;
    let margins = MarginSpec::symmetric(weights.v.clone())?;
    let ext = build_extended(g, &margins, WiringMode::Consistent(mu))?;
    let solution = solve_margins(&ext, cfg)?;
    let coupling = coupling_matrix(&solution)?;
    let mut warnings = Vec::new();
    let off = coupling.off_diagonal_mass();
    if off < NEAR_IDENTITY_MASS {
        warnings.push(CbopWarning::CouplingNearIdentity {
            off_diagonal_mass: off,
        });
    }
    let distance = surprisal_distance(&coupling)?;
    Ok(CbopOutput {
        distance,
        coupling,
        weights,
        extended: ext,
        solution,
        warnings,
    })
}
