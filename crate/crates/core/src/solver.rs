//! Block-coordinate ascent on the Lagrangian dual of the margin-constrained
//! RSP problem.
//!
//! The margins `n̄_1i = sigma_in_i` and `n̄_jn = sigma_out_j` are enforced by
//! Lagrange multipliers that live on the supernode edges as augmented costs:
//! `c'_1i = lambda_in_i` and `c'_jn = lambda_out_j`. The dual is
//!
//! ```text
//! L(λ) = -log(Z') / θ - λ_inᵀ sigma_in - λ_outᵀ sigma_out
//! ```
//!
//! Each block (inputs, then outputs) has a closed-form maximizer given the
//! backward (resp. forward) variables, which do not depend on that block.
//! Both blocks are shift-invariant and are centered to zero weighted mean.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::extended::{ExtendedGraph, MarginSpec};
use crate::graph::TransitionMatrix;
use crate::linalg::Matrix;
use crate::rsp::{
    build_system_dense, check_theta, edge_flows, expected_cost_under, optimal_policy, FlowField,
    RspSystem,
};

/// Allowed dual decrease per half-step before the solve is aborted.
pub const DUAL_DECREASE_ABORT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub theta: f64,
    /// Convergence threshold on the L∞ change of `(λ_in, λ_out)` over one sweep.
    pub tol: f64,
    pub max_iter: usize,
    pub track_dual: bool,
}

impl SolverConfig {
    pub fn new(theta: f64) -> Self {
        SolverConfig {
            theta,
            tol: 1e-8,
            max_iter: 10_000,
            track_dual: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_dual_tracking(mut self) -> Self {
        self.track_dual = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidConfig("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MarginSolution {
    /// Original-node indices of the inputs, ascending.
    pub inputs: Vec<usize>,
    /// Original-node indices of the outputs, ascending.
    pub outputs: Vec<usize>,
    pub lambda_in: Vec<f64>,
    pub lambda_out: Vec<f64>,
    /// `C'`: the extended costs with multipliers on the supernode edges.
    pub augmented_costs: Matrix,
    /// `C_ext`, kept for evaluating the real expected cost.
    pub base_costs: Matrix,
    pub policy: TransitionMatrix,
    /// RSP system on the final augmented costs.
    pub system: RspSystem,
    pub flows: FlowField,
    pub margins: MarginSpec,
    pub iterations: usize,
    pub converged: bool,
    /// `max_i |n̄_1i - sigma_in_i|` on the final system.
    pub residual_in: f64,
    /// `max_j |n̄_jn - sigma_out_j|` on the final system.
    pub residual_out: f64,
    /// Largest `|Σ λ σ|` seen after any multiplier update.
    pub max_normalization_error: f64,
    /// Dual value after every half-step, starting from `λ = 0`.
    pub dual_trace: Option<Vec<f64>>,
}

impl MarginSolution {
    pub fn theta(&self) -> f64 {
        self.system.theta()
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_in.max(self.residual_out)
    }
}

fn weighted_center(values: &mut [f64], weights: &[f64]) -> f64 {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    for v in values.iter_mut() {
        *v -= mean;
    }
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| v * w)
        .sum::<f64>()
        .abs()
}

/// `λ_k = log(z'_kn) / θ`, centered to `Σ sigma_in_k λ_k = 0`. `z_backward`
/// is indexed by extended node; the result follows `m.inputs()`.
pub fn update_lambda_in(z_backward: &[f64], m: &MarginSpec, theta: f64) -> Result<Vec<f64>> {
    check_theta(theta)?;
    let inputs = m.inputs();
    let mut lambda = Vec::with_capacity(inputs.len());
    for &k in &inputs {
        let z = z_backward[k + 1];
        if !(z > 0.0) {
            return Err(Error::CannotReachTarget { node: k + 1 });
        }
        lambda.push(libm::log(z) / theta);
    }
    let weights: Vec<f64> = inputs.iter().map(|&k| m.sigma_in()[k]).collect();
    weighted_center(&mut lambda, &weights);
    Ok(lambda)
}

/// `λ_l = (log z'_1l - log(sigma_out_l / p_ln)) / θ`, centered to
/// `Σ sigma_out_l λ_l = 0`. `z_forward` and `sink_column` are indexed by
/// extended node; the result follows `m.outputs()`.
pub fn update_lambda_out(
    z_forward: &[f64],
    m: &MarginSpec,
    sink_column: &[f64],
    theta: f64,
) -> Result<Vec<f64>> {
    check_theta(theta)?;
    let outputs = m.outputs();
    let mut lambda = Vec::with_capacity(outputs.len());
    for &l in &outputs {
        let p_ln = sink_column[l + 1];
        if !(p_ln > 0.0) {
            return Err(Error::OutputNotWired { node: l });
        }
        let z = z_forward[l + 1];
        if !(z > 0.0) {
            return Err(Error::CannotReachTarget { node: l + 1 });
        }
        lambda.push((libm::log(z) - libm::log(m.sigma_out()[l] / p_ln)) / theta);
    }
    let weights: Vec<f64> = outputs.iter().map(|&l| m.sigma_out()[l]).collect();
    weighted_center(&mut lambda, &weights);
    Ok(lambda)
}

/// `-log(Z') / θ - λ_inᵀ sigma_in - λ_outᵀ sigma_out` for a system built on
/// the augmented costs.
pub fn dual_value(sys: &RspSystem, lambda_in: &[f64], lambda_out: &[f64], m: &MarginSpec) -> f64 {
    let in_term: f64 = m
        .inputs()
        .iter()
        .zip(lambda_in)
        .map(|(&k, l)| l * m.sigma_in()[k])
        .sum();
    let out_term: f64 = m
        .outputs()
        .iter()
        .zip(lambda_out)
        .map(|(&k, l)| l * m.sigma_out()[k])
        .sum();
    -libm::log(sys.partition()) / sys.theta() - in_term - out_term
}

struct DualMonitor {
    last: Option<f64>,
    trace: Option<Vec<f64>>,
}

impl DualMonitor {
    fn observe(&mut self, value: f64, iteration: usize) -> Result<()> {
        if let Some(prev) = self.last {
            if value < prev - DUAL_DECREASE_ABORT {
                return Err(Error::DualDecrease {
                    iteration,
                    drop: prev - value,
                });
            }
        }
        self.last = Some(value);
        if let Some(t) = self.trace.as_mut() {
            t.push(value);
        }
        Ok(())
    }
}

fn margin_residuals(flows: &Matrix, m: &MarginSpec, target: usize) -> (f64, f64) {
    let r_in = m
        .inputs()
        .iter()
        .map(|&k| (flows[(0, k + 1)] - m.sigma_in()[k]).abs())
        .fold(0.0, f64::max);
    let r_out = m
        .outputs()
        .iter()
        .map(|&l| (flows[(l + 1, target)] - m.sigma_out()[l]).abs())
        .fold(0.0, f64::max);
    (r_in, r_out)
}

/// Alternates input and output multiplier updates until the multipliers move
/// less than `cfg.tol` over a full sweep, then returns the biased policy on
/// the final augmented costs.
pub fn solve_margins(ext: &ExtendedGraph, cfg: &SolverConfig) -> Result<MarginSolution> {
    cfg.validate()?;
    let theta = cfg.theta;
    let m = ext.margins();
    let (inputs, outputs) = (m.inputs(), m.outputs());
    let p = ext.transitions().matrix();
    let target = ext.target();
    let sink_column = p.column(target);
    for &l in &outputs {
        if !(sink_column[l + 1] > 0.0) {
            return Err(Error::OutputNotWired { node: l });
        }
    }

    let mut costs = ext.costs().clone();
    let mut lambda_in = vec![0.0; inputs.len()];
    let mut lambda_out = vec![0.0; outputs.len()];
    let mut monitor = DualMonitor {
        last: None,
        trace: cfg.track_dual.then(Vec::new),
    };
    let mut max_normalization_error: f64 = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;

    let weights_in: Vec<f64> = inputs.iter().map(|&k| m.sigma_in()[k]).collect();
    let weights_out: Vec<f64> = outputs.iter().map(|&l| m.sigma_out()[l]).collect();
    let norm_err = |lambda: &[f64], weights: &[f64]| -> f64 {
        lambda
            .iter()
            .zip(weights)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .abs()
    };

    while iterations < cfg.max_iter {
        iterations += 1;

        let backward = build_system_dense(p, &costs, theta)?;
        monitor.observe(
            dual_value(&backward, &lambda_in, &lambda_out, m),
            iterations,
        )?;
        let new_in = update_lambda_in(backward.z_backward(), m, theta)?;
        max_normalization_error = max_normalization_error.max(norm_err(&new_in, &weights_in));
        for (&k, &l) in inputs.iter().zip(&new_in) {
            costs[(0, k + 1)] = ext.costs()[(0, k + 1)] + l;
        }

        let forward = build_system_dense(p, &costs, theta)?;
        monitor.observe(dual_value(&forward, &new_in, &lambda_out, m), iterations)?;
        let new_out = update_lambda_out(forward.z_forward(), m, &sink_column, theta)?;
        max_normalization_error = max_normalization_error.max(norm_err(&new_out, &weights_out));
        for (&j, &l) in outputs.iter().zip(&new_out) {
            costs[(j + 1, target)] = ext.costs()[(j + 1, target)] + l;
        }

        last_change = new_in
            .iter()
            .zip(&lambda_in)
            .chain(new_out.iter().zip(&lambda_out))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        lambda_in = new_in;
        lambda_out = new_out;
        if last_change < cfg.tol {
            converged = true;
            break;
        }
    }

    let system = build_system_dense(p, &costs, theta)?;
    monitor.observe(dual_value(&system, &lambda_in, &lambda_out, m), iterations)?;
    let flows = edge_flows(&system);
    let (residual_in, residual_out) = margin_residuals(&flows.edge_flows, m, target);
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            last_change,
            residual_in,
            residual_out,
            lambda_in,
            lambda_out,
        });
    }
    let policy = optimal_policy(&system)?;
    Ok(MarginSolution {
        inputs,
        outputs,
        lambda_in,
        lambda_out,
        augmented_costs: costs,
        base_costs: ext.costs().clone(),
        policy,
        system,
        flows,
        margins: m.clone(),
        iterations,
        converged,
        residual_in,
        residual_out,
        max_normalization_error,
        dual_trace: monitor.trace,
    })
}

/// `(⟨c'⟩, ⟨c⟩)`: expected augmented and real costs under the final flows.
/// Centered multipliers make these agree once the margins hold.
pub fn expected_costs_match(sol: &MarginSolution) -> (f64, f64) {
    (
        expected_cost_under(&sol.flows.edge_flows, &sol.augmented_costs),
        expected_cost_under(&sol.flows.edge_flows, &sol.base_costs),
    )
}
