//! Weighted directed graphs, the natural random walk and its equilibrium.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};

/// How edge costs are obtained when loading a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostRule {
    /// Every record carries its own non-negative cost.
    Explicit,
    /// `c_ij = 1 / a_ij`, as for electrical networks.
    ReciprocalWeight,
}

/// One directed edge, 0-based endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeRecord {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
    pub cost: Option<f64>,
}

impl EdgeRecord {
    pub fn new(src: usize, dst: usize, weight: f64) -> Self {
        EdgeRecord {
            src,
            dst,
            weight,
            cost: None,
        }
    }

    pub fn with_cost(src: usize, dst: usize, weight: f64, cost: f64) -> Self {
        EdgeRecord {
            src,
            dst,
            weight,
            cost: Some(cost),
        }
    }
}

/// Dense adjacency and cost matrices. Costs are only meaningful where
/// `a_ij > 0`; elsewhere they are stored as zero and never read.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
    costs: Matrix,
    cost_rule: CostRule,
}

impl Graph {
    /// Validates `a_ij >= 0` and `c_ij >= 0` on the support.
    pub fn new(adjacency: Matrix, costs: Matrix, cost_rule: CostRule) -> Result<Self> {
        let n = adjacency.rows();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if !adjacency.is_square() || costs.rows() != n || costs.cols() != n {
            return Err(Error::DimensionMismatch(
                "adjacency and costs must be n x n",
            ));
        }
        let mut costs = costs;
        for i in 0..n {
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !(a >= 0.0) || !a.is_finite() {
                    return Err(Error::NonPositiveWeight {
                        src: i,
                        dst: j,
                        weight: a,
                    });
                }
                if a > 0.0 {
                    let c = costs[(i, j)];
                    if !(c >= 0.0) || !c.is_finite() {
                        return Err(Error::InvalidCost {
                            src: i,
                            dst: j,
                            cost: c,
                        });
                    }
                } else {
                    costs[(i, j)] = 0.0;
                }
            }
        }
        Ok(Graph {
            adjacency,
            costs,
            cost_rule,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn costs(&self) -> &Matrix {
        &self.costs
    }

    pub fn cost_rule(&self) -> CostRule {
        self.cost_rule
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] > 0.0
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency
            .as_slice()
            .iter()
            .filter(|a| **a > 0.0)
            .count()
    }

    /// `a_i•`, the weighted out-degree.
    pub fn out_weight(&self, i: usize) -> f64 {
        self.adjacency.row(i).iter().sum()
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .row(i)
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > 0.0)
            .map(|(j, _)| j)
    }

    /// `A <- (A + Aᵀ)/2`. Reciprocal costs are recomputed from the new
    /// weights; explicit costs are averaged over the directions that exist.
    pub fn symmetrized(&self) -> Graph {
        let n = self.node_count();
        let a = &self.adjacency;
        let adjacency = Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        let costs = Matrix::from_fn(n, n, |i, j| {
            if adjacency[(i, j)] == 0.0 {
                return 0.0;
            }
            match self.cost_rule {
                CostRule::ReciprocalWeight => 1.0 / adjacency[(i, j)],
                CostRule::Explicit => match (a[(i, j)] > 0.0, a[(j, i)] > 0.0) {
                    (true, true) => 0.5 * (self.costs[(i, j)] + self.costs[(j, i)]),
                    (true, false) => self.costs[(i, j)],
                    _ => self.costs[(j, i)],
                },
            }
        });
        Graph {
            adjacency,
            costs,
            cost_rule: self.cost_rule,
        }
    }

    pub(crate) fn support_lists(&self) -> Vec<Vec<usize>> {
        (0..self.node_count())
            .map(|i| self.successors(i).collect())
            .collect()
    }
}

/// Builds a graph over `node_count` nodes from edge records.
pub fn load_graph(node_count: usize, edges: &[EdgeRecord], rule: CostRule) -> Result<Graph> {
    if node_count == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut adjacency = Matrix::zeros(node_count, node_count);
    let mut costs = Matrix::zeros(node_count, node_count);
    for e in edges {
        for index in [e.src, e.dst] {
            if index >= node_count {
                return Err(Error::NodeOutOfRange { index, node_count });
            }
        }
        let (src, dst) = (e.src, e.dst);
        if e.weight == 0.0 && e.cost.is_some() {
            return Err(Error::CostForMissingEdge { src, dst });
        }
        if !(e.weight > 0.0) || !e.weight.is_finite() {
            return Err(Error::NonPositiveWeight {
                src,
                dst,
                weight: e.weight,
            });
        }
        if adjacency[(src, dst)] > 0.0 {
            return Err(Error::DuplicateEdge { src, dst });
        }
        let cost = match (rule, e.cost) {
            (CostRule::Explicit, Some(c)) => c,
            (CostRule::Explicit, None) => return Err(Error::MissingCost { src, dst }),
            (CostRule::ReciprocalWeight, None) => 1.0 / e.weight,
            (CostRule::ReciprocalWeight, Some(_)) => {
                return Err(Error::UnexpectedCost { src, dst })
            }
        };
        if !(cost >= 0.0) || !cost.is_finite() {
            return Err(Error::InvalidCost { src, dst, cost });
        }
        adjacency[(src, dst)] = e.weight;
        costs[(src, dst)] = cost;
    }
    Graph::new(adjacency, costs, rule)
}

/// Row-stochastic matrix; rows summing to zero are absorbing.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    p: Matrix,
}

/// Row-sum tolerance for transition matrices built by this crate.
pub const STOCHASTIC_TOL: f64 = 1e-12;

impl TransitionMatrix {
    /// Accepts a square matrix whose rows each sum to 1 (within `tol`) or are
    /// identically zero.
    pub fn from_dense(p: Matrix, tol: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::DimensionMismatch("transition matrix must be square"));
        }
        for i in 0..p.rows() {
            for (j, &v) in p.row(i).iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidProbability {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            let sum: f64 = p.row(i).iter().sum();
            if sum != 0.0 && (sum - 1.0).abs() > tol {
                return Err(Error::NotStochastic { row: i, sum });
            }
        }
        Ok(TransitionMatrix { p })
    }

    pub(crate) fn from_dense_unchecked(p: Matrix) -> Self {
        TransitionMatrix { p }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn into_matrix(self) -> Matrix {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        self.p.row(i).iter().all(|v| *v == 0.0)
    }

    pub(crate) fn support_lists(&self) -> Vec<Vec<usize>> {
        (0..self.dim())
            .map(|i| {
                self.p
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > 0.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }
}

/// `p_ij = a_ij / a_i•`.
pub fn natural_transitions(g: &Graph) -> Result<TransitionMatrix> {
    row_normalize(g.adjacency()).map(TransitionMatrix::from_dense_unchecked)
}

pub(crate) fn row_normalize(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut p = a.clone();
    for i in 0..n {
        let s: f64 = a.row(i).iter().sum();
        if !(s > 0.0) {
            return Err(Error::DanglingNode { node: i });
        }
        for v in p.row_mut(i) {
            *v /= s;
        }
    }
    Ok(p)
}

/// Diagnostic summary of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub strongly_connected: bool,
    pub component_count: usize,
    /// Always `false`: periodic chains are accepted.
    pub aperiodicity_checked: bool,
    pub aperiodicity_note: &'static str,
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

pub fn validate_structure(g: &Graph) -> ValidationReport {
    let n = g.node_count();
    let succ = g.support_lists();
    let comp = strongly_connected_components(&succ);
    let component_count = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut issues = Vec::new();
    let mut has_pred = vec![false; n];
    for (i, s) in succ.iter().enumerate() {
        if s.is_empty() {
            issues.push(format!("node {} has no outgoing edge", i + 1));
        }
        for &j in s {
            if j != i {
                has_pred[j] = true;
            }
        }
    }
    for (j, p) in has_pred.iter().enumerate() {
        if !p && n > 1 {
            issues.push(format!(
                "node {} has no incoming edge from another node",
                j + 1
            ));
        }
    }
    let strongly_connected = component_count == 1;
    if !strongly_connected {
        issues.push(format!(
            "graph is not strongly connected ({component_count} strongly connected components)"
        ));
    }
    ValidationReport {
        strongly_connected,
        component_count,
        aperiodicity_checked: false,
        aperiodicity_note:
            "aperiodicity is not required; the equilibrium is computed by a direct solve",
        issues,
    }
}

/// Kosaraju's algorithm with explicit stacks. Returns a component id per node.
pub(crate) fn strongly_connected_components(succ: &[Vec<usize>]) -> Vec<usize> {
    let n = succ.len();
    let mut pred = vec![Vec::new(); n];
    for (i, s) in succ.iter().enumerate() {
        for &j in s {
            pred[j].push(i);
        }
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&w) = succ[v].get(*next) {
                *next += 1;
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = count;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &w in &pred[v] {
                if comp[w] == usize::MAX {
                    comp[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    comp
}

/// Equilibrium distribution `πᵀ P = πᵀ`, `Σ π = 1`, by a direct solve of
/// `(I - Pᵀ) π = 0` with one equation replaced by the normalization.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = p.dim();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let comp = strongly_connected_components(&p.support_lists());
    let components = comp.iter().copied().max().map_or(0, |m| m + 1);
    if components != 1 || (0..n).any(|i| p.is_absorbing(i)) {
        return Err(Error::Reducible { components });
    }
    let pm = p.matrix();
    let mut a = Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - pm[(j, i)]
    });
    for v in a.row_mut(n - 1) {
        *v = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut pi = Lu::factor(&a)?.solve(&b);
    for v in pi.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = pi.iter().sum();
    for v in pi.iter_mut() {
        *v /= s;
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(edges: &[(usize, usize)], n: usize) -> Graph {
        let recs: Vec<_> = edges
            .iter()
            .map(|&(i, j)| EdgeRecord::with_cost(i, j, 1.0, 1.0))
            .collect();
        load_graph(n, &recs, CostRule::Explicit).unwrap()
    }

    #[test]
    fn reciprocal_rule() {
        let g = load_graph(2, &[EdgeRecord::new(0, 1, 2.0)], CostRule::ReciprocalWeight).unwrap();
        assert_eq!(g.adjacency()[(0, 1)], 2.0);
        assert_eq!(g.costs()[(0, 1)], 0.5);
    }

    #[test]
    fn explicit_symmetric_pair() {
        let g = load_graph(
            2,
            &[
                EdgeRecord::with_cost(0, 1, 1.0, 3.0),
                EdgeRecord::with_cost(1, 0, 1.0, 3.0),
            ],
            CostRule::Explicit,
        )
        .unwrap();
        assert_eq!(g.adjacency(), &g.adjacency().transpose());
        assert_eq!(g.costs()[(1, 0)], 3.0);
    }

    #[test]
    fn load_errors() {
        let dup = [EdgeRecord::new(0, 1, 1.0), EdgeRecord::new(0, 1, 2.0)];
        assert_eq!(
            load_graph(2, &dup, CostRule::ReciprocalWeight),
            Err(Error::DuplicateEdge { src: 0, dst: 1 })
        );
        assert!(matches!(
            load_graph(
                2,
                &[EdgeRecord::new(0, 1, -1.0)],
                CostRule::ReciprocalWeight
            ),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert_eq!(
            load_graph(
                2,
                &[EdgeRecord::with_cost(0, 1, 0.0, 1.0)],
                CostRule::Explicit
            ),
            Err(Error::CostForMissingEdge { src: 0, dst: 1 })
        );
        assert_eq!(
            load_graph(2, &[EdgeRecord::new(0, 1, 1.0)], CostRule::Explicit),
            Err(Error::MissingCost { src: 0, dst: 1 })
        );
        assert!(matches!(
            load_graph(
                2,
                &[EdgeRecord::with_cost(0, 1, 1.0, -0.5)],
                CostRule::Explicit
            ),
            Err(Error::InvalidCost { .. })
        ));
        assert!(matches!(
            load_graph(2, &[EdgeRecord::new(0, 5, 1.0)], CostRule::ReciprocalWeight),
            Err(Error::NodeOutOfRange { index: 5, .. })
        ));
    }

    #[test]
    fn transitions_single_and_fork() {
        let g = load_graph(
            3,
            &[
                EdgeRecord::new(0, 1, 5.0),
                EdgeRecord::new(1, 0, 1.0),
                EdgeRecord::new(1, 2, 1.0),
                EdgeRecord::new(2, 0, 1.0),
            ],
            CostRule::ReciprocalWeight,
        )
        .unwrap();
        let p = natural_transitions(&g).unwrap();
        assert_eq!(p.matrix()[(0, 1)], 1.0);
        assert_eq!(p.matrix()[(1, 0)], 0.5);
        assert_eq!(p.matrix()[(1, 2)], 0.5);
    }

    #[test]
    fn dangling_node_is_named() {
        let g = unit(&[(0, 1)], 2);
        assert_eq!(
            natural_transitions(&g),
            Err(Error::DanglingNode { node: 1 })
        );
    }

    #[test]
    fn strong_connectivity() {
        assert!(validate_structure(&unit(&[(0, 1), (1, 0)], 2)).strongly_connected);
        let chain = validate_structure(&unit(&[(0, 1)], 2));
        assert!(!chain.strongly_connected);
        assert!(!chain.is_ok());
    }

    #[test]
    fn self_loops_allowed() {
        let g = unit(&[(0, 0), (0, 1), (1, 0)], 2);
        let p = natural_transitions(&g).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        // pi_0 = 0.5 pi_0 + pi_1, pi_1 = 0.5 pi_0
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_cycles() {
        let p2 = natural_transitions(&unit(&[(0, 1), (1, 0)], 2)).unwrap();
        let pi = stationary_distribution(&p2).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15 && (pi[1] - 0.5).abs() < 1e-15);
        let p3 = natural_transitions(&unit(&[(0, 1), (1, 2), (2, 0)], 3)).unwrap();
        let pi = stationary_distribution(&p3).unwrap();
        assert!(pi.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn stationary_rejects_reducible() {
        let p = TransitionMatrix::from_dense(
            Matrix::from_rows(&[[0.5, 0.5], [0.0, 1.0]]),
            STOCHASTIC_TOL,
        )
        .unwrap();
        assert!(matches!(
            stationary_distribution(&p),
            Err(Error::Reducible { components: 2 })
        ));
    }

    #[test]
    fn symmetrize_reciprocal_recomputes_costs() {
        let g = load_graph(
            2,
            &[EdgeRecord::new(0, 1, 2.0), EdgeRecord::new(1, 0, 4.0)],
            CostRule::ReciprocalWeight,
        )
        .unwrap();
        let s = g.symmetrized();
        assert_eq!(s.adjacency()[(0, 1)], 3.0);
        assert_eq!(s.adjacency()[(1, 0)], 3.0);
        assert!((s.costs()[(0, 1)] - 1.0 / 3.0).abs() < 1e-16);
    }
}
