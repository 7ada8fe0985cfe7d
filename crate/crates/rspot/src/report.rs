//! JSON reports written next to the matrix outputs.

use serde::Serialize;

use rspot_core::{MarginSolution, SinkWiring, ValidationReport};

/// A value attached to a 1-based node id.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct NodeValue {
    pub node: usize,
    pub value: f64,
}

pub fn node_values(nodes: &[usize], values: &[f64]) -> Vec<NodeValue> {
    nodes
        .iter()
        .zip(values)
        .map(|(&i, &value)| NodeValue { node: i + 1, value })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub cost_rule: &'static str,
    pub undirected: bool,
    pub strongly_connected: bool,
    pub component_count: usize,
    pub aperiodicity_checked: bool,
    pub aperiodicity_note: &'static str,
    pub issues: Vec<String>,
}

impl GraphSummary {
    pub fn new(
        report: ValidationReport,
        node_count: usize,
        edge_count: usize,
        cost_rule: &'static str,
        undirected: bool,
    ) -> Self {
        GraphSummary {
            node_count,
            edge_count,
            cost_rule,
            undirected,
            strongly_connected: report.strongly_connected,
            component_count: report.component_count,
            aperiodicity_checked: report.aperiodicity_checked,
            aperiodicity_note: report.aperiodicity_note,
            issues: report.issues,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WiringSummary {
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_lower_bound: Option<f64>,
    pub sink_weights: Vec<NodeValue>,
    pub kill_probabilities: Vec<NodeValue>,
    pub well_formed: bool,
    pub issues: Vec<String>,
}

impl WiringSummary {
    pub fn new(ext: &rspot_core::ExtendedGraph) -> Self {
        let (mode, mu, mu_lower_bound) = match ext.wiring() {
            SinkWiring::Consistent {
                mu, mu_lower_bound, ..
            } => ("consistent", Some(*mu), Some(*mu_lower_bound)),
            SinkWiring::UserWeights => ("unit", None, None),
        };
        let outputs = ext.margins().outputs();
        let kill: Vec<f64> = outputs
            .iter()
            .map(|&l| ext.transitions().matrix()[(ext.ext_index(l), ext.target())])
            .collect();
        let sinks: Vec<f64> = outputs.iter().map(|&l| ext.sink_weights()[l]).collect();
        let issues = ext.wiring_issues();
        WiringSummary {
            mode,
            mu,
            mu_lower_bound,
            sink_weights: node_values(&outputs, &sinks),
            kill_probabilities: node_values(&outputs, &kill),
            well_formed: issues.is_empty(),
            issues,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidateReport {
    pub command: &'static str,
    pub graph: GraphSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extended: Option<WiringSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RspReport {
    pub command: &'static str,
    pub theta: f64,
    pub graph: GraphSummary,
    pub wiring: WiringSummary,
    pub partition: f64,
    pub free_energy: f64,
    pub expected_cost: f64,
    pub node_visits: Vec<NodeValue>,
    pub start_flows: Vec<NodeValue>,
    pub end_flows: Vec<NodeValue>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub iterations: usize,
    pub converged: bool,
    pub residual_in: f64,
    pub residual_out: f64,
    pub max_normalization_error: f64,
    pub lambda_in: Vec<NodeValue>,
    pub lambda_out: Vec<NodeValue>,
    pub expected_cost: f64,
    pub expected_augmented_cost: f64,
    pub augmented_free_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_dual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub largest_dual_decrease: Option<f64>,
}

impl SolveSummary {
    pub fn new(sol: &MarginSolution, tol: f64, max_iter: usize) -> Self {
        let (aug, real) = rspot_core::expected_costs_match(sol);
        let trace = sol.dual_trace.as_deref();
        SolveSummary {
            theta: sol.theta(),
            tol,
            max_iter,
            iterations: sol.iterations,
            converged: sol.converged,
            residual_in: sol.residual_in,
            residual_out: sol.residual_out,
            max_normalization_error: sol.max_normalization_error,
            lambda_in: node_values(&sol.inputs, &sol.lambda_in),
            lambda_out: node_values(&sol.outputs, &sol.lambda_out),
            expected_cost: real,
            expected_augmented_cost: aug,
            augmented_free_energy: sol.flows.free_energy,
            final_dual: trace.and_then(|t| t.last().copied()),
            largest_dual_decrease: trace
                .map(|t| t.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub command: &'static str,
    pub graph: GraphSummary,
    pub wiring: WiringSummary,
    pub solve: SolveSummary,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceReport {
    pub command: &'static str,
    pub scheme: &'static str,
    pub graph: GraphSummary,
    pub wiring: WiringSummary,
    pub weights: Vec<NodeValue>,
    pub solve: SolveSummary,
    pub off_diagonal_coupling_mass: f64,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports are plain data");
    s.push('\n');
    s
}
