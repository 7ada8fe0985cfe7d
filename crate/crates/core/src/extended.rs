//! Single-source, single-target extended graph.
//!
//! A source supernode feeds every input node `i` with probability
//! `sigma_in[i]` and every output node is wired to an absorbing target. The
//! sink-edge weights `w` are either supplied by the caller or derived so that
//! the natural (killed) random walk on the extended graph already delivers
//! exactly `sigma_out` to the target. In the derived ("consistent") mode the
//! killing probabilities are
//!
//! ```text
//! n     = (I - Pᵀ)⁺ (sigma_in - Pᵀ sigma_out) + mu * pi
//! alpha = sigma_out / n              (elementwise)
//! ```
//!
//! where `pi` is the equilibrium of `P` and `mu` is a persistence parameter
//! bounded below so that `n >= sigma_out`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{natural_transitions, stationary_distribution, Graph, TransitionMatrix};
use crate::linalg::{pinv, Matrix};

/// Margins must each sum to one within this tolerance.
pub const MARGIN_SUM_TOL: f64 = 1e-12;
/// Slack allowed when checking `n >= sigma_out`.
pub const VISITS_TOL: f64 = 1e-10;
/// Floor applied to the lower bound before scaling by the mu factor.
pub const MU_FLOOR: f64 = 1e-6;

/// Input and output flow distributions over the original nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginSpec {
    sigma_in: Vec<f64>,
    sigma_out: Vec<f64>,
}

impl MarginSpec {
    pub fn new(sigma_in: Vec<f64>, sigma_out: Vec<f64>) -> Result<Self> {
        if sigma_in.len() != sigma_out.len() {
            return Err(Error::InvalidMargins(format!(
                "sigma_in has {} entries, sigma_out has {}",
                sigma_in.len(),
                sigma_out.len()
            )));
        }
        for (name, v) in [("sigma_in", &sigma_in), ("sigma_out", &sigma_out)] {
            if let Some((i, x)) = v
                .iter()
                .enumerate()
                .find(|(_, x)| !(**x >= 0.0) || !x.is_finite())
            {
                return Err(Error::InvalidMargins(format!(
                    "{name}[{}] = {x} is negative or non-finite",
                    i + 1
                )));
            }
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > MARGIN_SUM_TOL {
                return Err(Error::InvalidMargins(format!(
                    "{name} sums to {s}, expected 1"
                )));
            }
        }
        let m = MarginSpec {
            sigma_in,
            sigma_out,
        };
        if m.inputs().is_empty() {
            return Err(Error::EmptyInputSet);
        }
        if m.outputs().is_empty() {
            return Err(Error::EmptyOutputSet);
        }
        Ok(m)
    }

    /// `sigma_in = sigma_out = v`, every positive-weight node being both an
    /// input and an output.
    pub fn symmetric(v: Vec<f64>) -> Result<Self> {
        MarginSpec::new(v.clone(), v)
    }

    pub fn len(&self) -> usize {
        self.sigma_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_in.is_empty()
    }

    pub fn sigma_in(&self) -> &[f64] {
        &self.sigma_in
    }

    pub fn sigma_out(&self) -> &[f64] {
        &self.sigma_out
    }

    /// Original-node indices with positive input flow, ascending.
    pub fn inputs(&self) -> Vec<usize> {
        support(&self.sigma_in)
    }

    /// Original-node indices with positive output flow, ascending.
    pub fn outputs(&self) -> Vec<usize> {
        support(&self.sigma_out)
    }
}

fn support(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `(I - Pᵀ)⁺ (sigma_in - Pᵀ sigma_out)`.
fn particular_visits(p: &TransitionMatrix, m: &MarginSpec) -> Result<Vec<f64>> {
    let n = p.dim();
    if m.len() != n {
        return Err(Error::DimensionMismatch("margins must cover every node"));
    }
    let pm = p.matrix();
    let lap_t = Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - pm[(j, i)]
    });
    let flow_out = pm.vec_mul(m.sigma_out());
    let rhs: Vec<f64> = m
        .sigma_in()
        .iter()
        .zip(&flow_out)
        .map(|(a, b)| a - b)
        .collect();
    Ok(pinv(&lap_t)?.mul_vec(&rhs))
}

/// Smallest persistence `mu` keeping the expected visits above `sigma_out`,
/// floored at zero.
pub fn mu_lower_bound(p: &TransitionMatrix, m: &MarginSpec, pi: &[f64]) -> Result<f64> {
    let part = particular_visits(p, m)?;
    let mut bound: f64 = 0.0;
    for (i, (&s, &x)) in m.sigma_out().iter().zip(&part).enumerate() {
        assert!(
            pi[i] > 0.0,
            "irreducible chains have positive equilibrium mass"
        );
        bound = bound.max((s - x) / pi[i]);
    }
    Ok(bound)
}

/// Expected visits `n = (I - Pᵀ)⁺ (sigma_in - Pᵀ sigma_out) + mu pi` of the
/// walk killed at the output nodes.
pub fn expected_visits_unconstrained(
    p: &TransitionMatrix,
    m: &MarginSpec,
    mu: f64,
    pi: &[f64],
) -> Result<Vec<f64>> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidMu(mu));
    }
    if pi.len() != p.dim() {
        return Err(Error::DimensionMismatch("equilibrium vector length"));
    }
    let mut visits = particular_visits(p, m)?;
    for (v, q) in visits.iter_mut().zip(pi) {
        *v += mu * q;
    }
    for (i, (&v, &s)) in visits.iter().zip(m.sigma_out()).enumerate() {
        if v < s - VISITS_TOL {
            return Err(Error::MuTooSmall {
                node: i,
                visits: v,
                sigma_out: s,
            });
        }
    }
    Ok(visits)
}

/// `alpha_i = sigma_out_i / n_i` where `sigma_out_i > 0`, else zero.
pub fn compute_alpha(visits: &[f64], m: &MarginSpec) -> Result<Vec<f64>> {
    if visits.len() != m.len() {
        return Err(Error::DimensionMismatch("visits vector length"));
    }
    let mut alpha = vec![0.0; visits.len()];
    for (i, (&v, &s)) in visits.iter().zip(m.sigma_out()).enumerate() {
        if s == 0.0 {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::InfeasibleVisits {
                node: i,
                alpha: f64::INFINITY,
            });
        }
        let a = s / v;
        if a > 1.0 + VISITS_TOL {
            return Err(Error::InfeasibleVisits { node: i, alpha: a });
        }
        alpha[i] = a.min(1.0);
    }
    Ok(alpha)
}

/// Sink-edge weights `w_i = alpha_i a_i• / (1 - alpha_i)`.
pub fn weights_from_alpha(alpha: &[f64], g: &Graph) -> Result<Vec<f64>> {
    if alpha.len() != g.node_count() {
        return Err(Error::DimensionMismatch("alpha vector length"));
    }
    alpha
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if a == 0.0 {
                Ok(0.0)
            } else if a >= 1.0 {
                Err(Error::FullyAbsorbing { node: i })
            } else {
                Ok(a * g.out_weight(i) / (1.0 - a))
            }
        })
        .collect()
}

/// How the persistence parameter is chosen in consistent mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MuPolicy {
    /// `mu = factor * max(lower_bound, 1e-6)`.
    Factor(f64),
    /// Use this value as-is.
    Fixed(f64),
}

impl Default for MuPolicy {
    fn default() -> Self {
        MuPolicy::Factor(1.2)
    }
}

/// How the sink edges are weighted.
#[derive(Clone, Debug, PartialEq)]
pub enum WiringMode {
    /// Derive `w` so the natural walk meets `sigma_out` exactly.
    Consistent(MuPolicy),
    /// Caller-supplied sink weights, one per original node.
    UserWeights(Vec<f64>),
}

/// Record of how an [`ExtendedGraph`] was wired.
#[derive(Clone, Debug, PartialEq)]
pub enum SinkWiring {
    Consistent {
        mu: f64,
        mu_lower_bound: f64,
        visits: Vec<f64>,
    },
    UserWeights,
}

#[derive(Clone, Debug)]
pub struct ExtendedGraph {
    adjacency: Matrix,
    costs: Matrix,
    transitions: TransitionMatrix,
    alpha: Vec<f64>,
    sink_weights: Vec<f64>,
    margins: MarginSpec,
    wiring: SinkWiring,
}

impl ExtendedGraph {
    /// Number of nodes including both supernodes.
    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn original_count(&self) -> usize {
        self.node_count() - 2
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn target(&self) -> usize {
        self.node_count() - 1
    }

    /// Extended index of original node `i`.
    pub fn ext_index(&self, i: usize) -> usize {
        i + 1
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn costs(&self) -> &Matrix {
        &self.costs
    }

    pub fn transitions(&self) -> &TransitionMatrix {
        &self.transitions
    }

    /// Killing probabilities `p_in^ext` of the original nodes.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn sink_weights(&self) -> &[f64] {
        &self.sink_weights
    }

    pub fn margins(&self) -> &MarginSpec {
        &self.margins
    }

    pub fn wiring(&self) -> &SinkWiring {
        &self.wiring
    }

    /// Structural problems with the supernode wiring; empty when well formed.
    pub fn wiring_issues(&self) -> Vec<String> {
        let n = self.node_count();
        let (s, t) = (self.source(), self.target());
        let p = self.transitions.matrix();
        let mut issues = Vec::new();
        for (i, &sig) in self.margins.sigma_in().iter().enumerate() {
            if (p[(s, i + 1)] - sig).abs() > 1e-12 {
                issues.push(format!(
                    "source row does not match sigma_in at node {}",
                    i + 1
                ));
            }
        }
        if p[(s, t)] != 0.0 || p[(s, s)] != 0.0 {
            issues.push("source has edges outside the input set".into());
        }
        if !self.transitions.is_absorbing(t) {
            issues.push("target is not absorbing".into());
        }
        if (0..n).any(|i| p[(i, s)] != 0.0) {
            issues.push("source has incoming edges".into());
        }
        for j in self.margins.outputs() {
            if p[(j + 1, t)] <= 0.0 {
                issues.push(format!("output node {} is not wired to the target", j + 1));
            }
        }
        // Everything reachable from the source must be able to reach the target.
        let succ = self.transitions.support_lists();
        let mut from_source = vec![false; n];
        let mut stack = vec![s];
        from_source[s] = true;
        while let Some(v) = stack.pop() {
            for &w in &succ[v] {
                if !from_source[w] {
                    from_source[w] = true;
                    stack.push(w);
                }
            }
        }
        let mut to_target = vec![false; n];
        to_target[t] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for v in 0..n {
                if !to_target[v] && succ[v].iter().any(|&w| to_target[w]) {
                    to_target[v] = true;
                    changed = true;
                }
            }
        }
        for v in 1..n - 1 {
            if from_source[v] && !to_target[v] {
                issues.push(format!(
                    "node {v} is reachable from the source but cannot reach the target"
                ));
            }
        }
        issues
    }
}

pub fn build_extended(g: &Graph, m: &MarginSpec, mode: WiringMode) -> Result<ExtendedGraph> {
    let orig = g.node_count();
    if m.len() != orig {
        return Err(Error::DimensionMismatch("margins must cover every node"));
    }
    if m.inputs().is_empty() {
        return Err(Error::EmptyInputSet);
    }
    if m.outputs().is_empty() {
        return Err(Error::EmptyOutputSet);
    }
    let n = orig + 2;
    let t = n - 1;

    let (alpha, sink_weights, p_ext, wiring) = match mode {
        WiringMode::Consistent(policy) => {
            let p = natural_transitions(g)?;
            let pi = stationary_distribution(&p)?;
            let bound = mu_lower_bound(&p, m, &pi)?;
            let mu = match policy {
                MuPolicy::Factor(f) if f > 0.0 && f.is_finite() => f * bound.max(MU_FLOOR),
                MuPolicy::Factor(f) => return Err(Error::InvalidMu(f)),
                MuPolicy::Fixed(mu) => mu,
            };
            let visits = expected_visits_unconstrained(&p, m, mu, &pi)?;
            let alpha = compute_alpha(&visits, m)?;
            let w = weights_from_alpha(&alpha, g)?;
            let pm = p.matrix();
            let mut p_ext = Matrix::zeros(n, n);
            for (i, &s) in m.sigma_in().iter().enumerate() {
                p_ext[(0, i + 1)] = s;
            }
            for i in 0..orig {
                let keep = 1.0 - alpha[i];
                for j in 0..orig {
                    p_ext[(i + 1, j + 1)] = keep * pm[(i, j)];
                }
                p_ext[(i + 1, t)] = alpha[i];
            }
            let wiring = SinkWiring::Consistent {
                mu,
                mu_lower_bound: bound,
                visits,
            };
            (alpha, w, p_ext, wiring)
        }
        WiringMode::UserWeights(w) => {
            if w.len() != orig {
                return Err(Error::DimensionMismatch("one sink weight per node"));
            }
            for (i, &wi) in w.iter().enumerate() {
                let wired = wi > 0.0 || m.sigma_out()[i] == 0.0;
                if !(wi >= 0.0) || !wi.is_finite() || !wired {
                    return Err(Error::InvalidSinkWeight {
                        node: i,
                        weight: wi,
                    });
                }
            }
            let mut p_ext = Matrix::zeros(n, n);
            for (i, &s) in m.sigma_in().iter().enumerate() {
                p_ext[(0, i + 1)] = s;
            }
            let mut alpha = vec![0.0; orig];
            for i in 0..orig {
                let total = g.out_weight(i) + w[i];
                if !(total > 0.0) {
                    return Err(Error::DanglingNode { node: i });
                }
                for j in 0..orig {
                    p_ext[(i + 1, j + 1)] = g.adjacency()[(i, j)] / total;
                }
                alpha[i] = w[i] / total;
                p_ext[(i + 1, t)] = alpha[i];
            }
            (alpha, w, p_ext, SinkWiring::UserWeights)
        }
    };

    let mut adjacency = Matrix::zeros(n, n);
    let mut costs = Matrix::zeros(n, n);
    for (i, &s) in m.sigma_in().iter().enumerate() {
        adjacency[(0, i + 1)] = s;
    }
    for i in 0..orig {
        for j in 0..orig {
            adjacency[(i + 1, j + 1)] = g.adjacency()[(i, j)];
            costs[(i + 1, j + 1)] = g.costs()[(i, j)];
        }
        adjacency[(i + 1, t)] = sink_weights[i];
    }

    Ok(ExtendedGraph {
        adjacency,
        costs,
        transitions: TransitionMatrix::from_dense_unchecked(p_ext),
        alpha,
        sink_weights,
        margins: m.clone(),
        wiring,
    })
}
