//! Randomized shortest paths on a single source/target system.
//!
//! Node `0` is the source and node `n - 1` the absorbing target. With
//! `W = P ∘ exp(-θ C)` the fundamental matrix is `Z = (I - W)⁻¹`; only its
//! first row (forward variables `z_1·`) and last column (backward variables
//! `z_·n`) are needed, so `Z` is never formed. The partition function is
//! `z_1n`, edge flows are `z_1i w_ij z_jn / z_1n` and the optimal policy is
//! `p*_ij = w_ij z_jn / z_in`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::TransitionMatrix;
use crate::linalg::{max_abs, Lu, Matrix};

/// Smallest partition function accepted before declaring underflow.
pub const MIN_PARTITION: f64 = 1e-300;
/// Relative residual accepted on the two linear solves.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct RspSystem {
    theta: f64,
    costs: Matrix,
    w: Matrix,
    lu: Lu,
    z_backward: Vec<f64>,
    z_forward: Vec<f64>,
}

impl RspSystem {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn target(&self) -> usize {
        self.dim() - 1
    }

    /// `w_ij = p_ij exp(-θ c_ij)` on the support of `P`.
    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn costs(&self) -> &Matrix {
        &self.costs
    }

    /// `z_in` for every node `i`.
    pub fn z_backward(&self) -> &[f64] {
        &self.z_backward
    }

    /// `z_1j` for every node `j`.
    pub fn z_forward(&self) -> &[f64] {
        &self.z_forward
    }

    /// `Z = z_1n`.
    pub fn partition(&self) -> f64 {
        self.z_backward[self.source()]
    }

    /// Column `j` of the fundamental matrix, `z_ij` for all `i`.
    pub fn fundamental_column(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[j] = 1.0;
        self.lu.solve(&e)
    }

    /// Row `i` of the fundamental matrix, `z_ij` for all `j`.
    pub fn fundamental_row(&self, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[i] = 1.0;
        self.lu.solve_transpose(&e)
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTheta(theta))
    }
}

pub(crate) fn gibbs_weights(p: &Matrix, c: &Matrix, theta: f64) -> Matrix {
    Matrix::from_fn(p.rows(), p.cols(), |i, j| {
        let pij = p[(i, j)];
        if pij > 0.0 {
            pij * libm::exp(-theta * c[(i, j)])
        } else {
            0.0
        }
    })
}

fn residual_ok(a: &Matrix, x: &[f64], b: &[f64], transpose: bool) -> bool {
    let ax = if transpose {
        a.vec_mul(x)
    } else {
        a.mul_vec(x)
    };
    let r = ax
        .iter()
        .zip(b)
        .fold(0.0, |m: f64, (u, v)| m.max((u - v).abs()));
    let scale = a.norm_inf().max(a.transpose().norm_inf()) * max_abs(x) + max_abs(b);
    r.is_finite() && r <= SOLVE_RESIDUAL_TOL * scale
}

/// Builds `W` from transition matrix `p` and costs `c` (only read on the
/// support of `p`) and solves for the forward and backward variables.
pub fn build_system(p: &TransitionMatrix, c: &Matrix, theta: f64) -> Result<RspSystem> {
    build_system_dense(p.matrix(), c, theta)
}

pub(crate) fn build_system_dense(p: &Matrix, c: &Matrix, theta: f64) -> Result<RspSystem> {
    check_theta(theta)?;
    let n = p.rows();
    if n < 2 || !p.is_square() || c.rows() != n || c.cols() != n {
        return Err(Error::DimensionMismatch(
            "P and C must be matching n x n, n >= 2",
        ));
    }
    let w = gibbs_weights(p, c, theta);
    let a = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - w[(i, j)]);
    let lu = Lu::factor(&a)?;
    let mut e_t = vec![0.0; n];
    e_t[n - 1] = 1.0;
    let mut e_s = vec![0.0; n];
    e_s[0] = 1.0;
    let z_backward = lu.solve(&e_t);
    let z_forward = lu.solve_transpose(&e_s);
    if !residual_ok(&a, &z_backward, &e_t, false) || !residual_ok(&a, &z_forward, &e_s, true) {
        return Err(Error::SingularSystem("linear solve residual too large"));
    }
    let partition = z_backward[0];
    if partition.is_nan() {
        return Err(Error::SingularSystem("partition function is NaN"));
    }
    if partition < MIN_PARTITION {
        // Tiny Z on a graph where the target is structurally reachable means
        // exp(-θc) underflowed; otherwise there is simply no path.
        return if target_reachable(p) {
            Err(Error::Underflow { partition })
        } else {
            Err(Error::CannotReachTarget { node: 0 })
        };
    }
    Ok(RspSystem {
        theta,
        costs: c.clone(),
        w,
        lu,
        z_backward,
        z_forward,
    })
}

fn target_reachable(p: &Matrix) -> bool {
    let n = p.rows();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for (j, &x) in p.row(v).iter().enumerate() {
            if x > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen[n - 1]
}

/// Expected passages, visits, cost and free energy of one RSP system.
#[derive(Clone, Debug)]
pub struct FlowField {
    /// `n̄_ij`
    pub edge_flows: Matrix,
    /// `n̄_j = z_1j z_jn / z_1n`; equals the incoming flow for every node but
    /// the source, whose value is 1.
    pub node_visits: Vec<f64>,
    /// `Σ n̄_ij c_ij`
    pub expected_cost: f64,
    /// `-log(Z) / θ`
    pub free_energy: f64,
}

pub fn edge_flows(sys: &RspSystem) -> FlowField {
    let n = sys.dim();
    let z = sys.partition();
    let (zf, zb) = (sys.z_forward(), sys.z_backward());
    let edge_flows = Matrix::from_fn(n, n, |i, j| {
        let w = sys.w()[(i, j)];
        if w == 0.0 {
            0.0
        } else {
            zf[i] * w * zb[j] / z
        }
    });
    let node_visits = (0..n).map(|j| zf[j] * zb[j] / z).collect();
    FlowField {
        expected_cost: expected_cost_under(&edge_flows, sys.costs()),
        free_energy: free_energy(sys),
        edge_flows,
        node_visits,
    }
}

/// `Σ n̄_ij c_ij` over edges carrying flow.
pub(crate) fn expected_cost_under(flows: &Matrix, costs: &Matrix) -> f64 {
    flows
        .as_slice()
        .iter()
        .zip(costs.as_slice())
        .filter(|(f, _)| **f != 0.0)
        .map(|(f, c)| f * c)
        .sum()
}

/// `p*_ij = w_ij z_jn / z_in`; the target row is left at zero.
pub fn optimal_policy(sys: &RspSystem) -> Result<TransitionMatrix> {
    let n = sys.dim();
    let zb = sys.z_backward();
    let mut p = Matrix::zeros(n, n);
    for i in 0..n - 1 {
        if !(zb[i] > 0.0) {
            return Err(Error::CannotReachTarget { node: i });
        }
        for j in 0..n {
            let w = sys.w()[(i, j)];
            if w != 0.0 {
                p[(i, j)] = w * zb[j] / zb[i];
            }
        }
    }
    Ok(TransitionMatrix::from_dense_unchecked(p))
}

pub fn free_energy(sys: &RspSystem) -> f64 {
    -libm::log(sys.partition()) / sys.theta()
}

/// Truncated series `Σ_{k<=L} Wᵏ` evaluated on the first row and last column.
#[derive(Clone, Debug)]
pub struct PathSumOracle {
    pub z_forward: Vec<f64>,
    pub z_backward: Vec<f64>,
    /// Upper bound on every neglected entry.
    pub tail_bound: f64,
    pub max_len: usize,
}

impl PathSumOracle {
    pub fn partition(&self) -> f64 {
        self.z_backward[0]
    }
}

/// Largest tail bound [`path_sum_oracle`] accepts.
pub const ORACLE_TAIL_TOL: f64 = 1e-8;

/// Sums path weights of length up to `max_len` by repeated products with
/// `W`, with no linear solve involved.
///
/// The neglected tail is bounded by block submultiplicativity: with
/// `s = ‖Wᵐ‖∞` (`m` = node count) and `R = max_{r<m} ‖Wʳ‖∞`, every entry of
/// `Σ_{k>L} Wᵏ` is at most `m R s^⌊(L+1)/m⌋ / (1 - s)`. Using `Wᵐ` rather than
/// `W` keeps the bound finite when some rows of `W` sum to one (a zero-cost
/// source row, say).
pub fn path_sum_oracle(
    p: &Matrix,
    c: &Matrix,
    theta: f64,
    max_len: usize,
) -> Result<PathSumOracle> {
    check_theta(theta)?;
    let n = p.rows();
    if n < 2 || !p.is_square() || c.rows() != n || c.cols() != n {
        return Err(Error::DimensionMismatch(
            "P and C must be matching n x n, n >= 2",
        ));
    }
    let w = gibbs_weights(p, c, theta);

    let mut power = Matrix::identity(n);
    let mut head = 1.0f64;
    for _ in 1..n {
        power = power.matmul(&w);
        head = head.max(power.norm_inf());
    }
    let block = power.matmul(&w).norm_inf();
    let q = (max_len + 1) / n;
    let tail_bound = if block >= 1.0 {
        f64::INFINITY
    } else if block == 0.0 && q >= 1 {
        0.0
    } else {
        n as f64 * head * libm::pow(block, q as f64) / (1.0 - block)
    };
    if !(tail_bound <= ORACLE_TAIL_TOL) {
        return Err(Error::TailBoundTooLarge {
            bound: tail_bound,
            tolerance: ORACLE_TAIL_TOL,
        });
    }

    let mut fwd = vec![0.0; n];
    fwd[0] = 1.0;
    let mut bwd = vec![0.0; n];
    bwd[n - 1] = 1.0;
    let mut z_forward = fwd.clone();
    let mut z_backward = bwd.clone();
    for _ in 0..max_len {
        fwd = w.vec_mul(&fwd);
        bwd = w.mul_vec(&bwd);
        for (acc, v) in z_forward.iter_mut().zip(&fwd) {
            *acc += v;
        }
        for (acc, v) in z_backward.iter_mut().zip(&bwd) {
            *acc += v;
        }
        if fwd.iter().all(|v| *v == 0.0) && bwd.iter().all(|v| *v == 0.0) {
            break;
        }
    }
    Ok(PathSumOracle {
        z_forward,
        z_backward,
        tail_bound,
        max_len,
    })
}
