#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use rspot_core::{
    expected_costs_match, load_graph, CostRule, EdgeRecord, ExtendedGraph, Graph, MarginSolution,
    MarginSpec, Matrix, WiringMode,
};

/// Demo graph edges, labelled 2..=8 as in its drawing.
pub const DEMO_EDGES: [(usize, usize); 12] = [
    (2, 3),
    (2, 4),
    (2, 5),
    (3, 5),
    (3, 6),
    (5, 4),
    (4, 7),
    (5, 6),
    (5, 7),
    (5, 8),
    (6, 8),
    (8, 7),
];

/// Drawing label to 0-based original index.
pub fn label(l: usize) -> usize {
    l - 2
}

pub fn demo_graph() -> Graph {
    let edges: Vec<EdgeRecord> = DEMO_EDGES
        .iter()
        .map(|&(a, b)| EdgeRecord::new(label(a), label(b), 1.0))
        .collect();
    load_graph(7, &edges, CostRule::ReciprocalWeight).unwrap()
}

/// In = {2, 3}, Out = {7, 8}, half the mass on each.
pub fn demo_margins() -> MarginSpec {
    let mut s_in = vec![0.0; 7];
    let mut s_out = vec![0.0; 7];
    s_in[label(2)] = 0.5;
    s_in[label(3)] = 0.5;
    s_out[label(7)] = 0.5;
    s_out[label(8)] = 0.5;
    MarginSpec::new(s_in, s_out).unwrap()
}

/// Unit sink edges on the output nodes; the graph is not strongly connected
/// so the consistent construction does not apply.
pub fn demo_wiring() -> WiringMode {
    let mut w = vec![0.0; 7];
    w[label(7)] = 1.0;
    w[label(8)] = 1.0;
    WiringMode::UserWeights(w)
}

pub fn demo_extended() -> ExtendedGraph {
    rspot_core::build_extended(&demo_graph(), &demo_margins(), demo_wiring()).unwrap()
}

pub fn undirected(n: usize, edges: &[(usize, usize)]) -> Graph {
    let mut recs = Vec::new();
    for &(a, b) in edges {
        recs.push(EdgeRecord::new(a, b, 1.0));
        recs.push(EdgeRecord::new(b, a, 1.0));
    }
    load_graph(n, &recs, CostRule::ReciprocalWeight).unwrap()
}

/// Triangles {0,1,2} and {3,4,5} joined by the bridge 2-3.
pub fn barbell() -> Graph {
    undirected(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
}

pub fn cycle(n: usize) -> Graph {
    let closing = usize::from(n > 2);
    let edges: Vec<(usize, usize)> = (0..n - 1 + closing).map(|i| (i, (i + 1) % n)).collect();
    undirected(n, &edges)
}

/// Random Hamiltonian cycle plus extra arcs with probability `p_extra`;
/// weights in [0.5, 2], explicit costs in `cost_range`.
pub fn random_strong_graph<R: Rng>(
    rng: &mut R,
    n: usize,
    p_extra: f64,
    cost_range: (f64, f64),
) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut present = vec![vec![false; n]; n];
    for k in 0..n {
        present[order[k]][order[(k + 1) % n]] = true;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && !present[i][j] && rng.random::<f64>() < p_extra {
                present[i][j] = true;
            }
        }
    }
    let mut recs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if present[i][j] {
                let w = rng.random_range(0.5..2.0);
                let c = rng.random_range(cost_range.0..cost_range.1);
                recs.push(EdgeRecord::with_cost(i, j, w, c));
            }
        }
    }
    load_graph(n, &recs, CostRule::Explicit).unwrap()
}

/// Random undirected connected graph: a random spanning tree plus extra edges.
pub fn random_undirected<R: Rng>(rng: &mut R, n: usize, p_extra: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.contains(&(i, j)) && rng.random::<f64>() < p_extra {
                edges.push((i, j));
            }
        }
    }
    undirected(n, &edges)
}

fn random_distribution<R: Rng>(rng: &mut R, n: usize, support: usize) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let mut v = vec![0.0; n];
    for &i in idx.iter().take(support.max(1)) {
        v[i] = rng.random_range(0.2..1.0);
    }
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

pub fn random_margins<R: Rng>(rng: &mut R, n: usize) -> MarginSpec {
    let k_in = rng.random_range(1..=n.min(3));
    let k_out = rng.random_range(1..=n.min(3));
    MarginSpec::new(
        random_distribution(rng, n, k_in),
        random_distribution(rng, n, k_out),
    )
    .unwrap()
}

/// Checks the two identities every converged solve must satisfy: centered
/// multipliers, and equal expected augmented and real costs.
pub fn assert_solution_identities(sol: &MarginSolution) {
    assert!(
        sol.max_normalization_error <= 1e-10,
        "normalization error {}",
        sol.max_normalization_error
    );
    let (aug, real) = expected_costs_match(sol);
    assert!((aug - real).abs() <= 1e-8, "augmented {aug} vs real {real}");
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Central finite difference of `-(1/θ) log Z` with respect to `c_ij`.
pub fn fd_flow(p: &Matrix, c: &Matrix, theta: f64, i: usize, j: usize, h: f64) -> f64 {
    let tp = rspot_core::TransitionMatrix::from_dense(p.clone(), 1e-12).unwrap();
    let phi = |delta: f64| {
        let mut cc = c.clone();
        cc[(i, j)] += delta;
        let sys = rspot_core::build_system(&tp, &cc, theta).unwrap();
        rspot_core::free_energy(&sys)
    };
    (phi(h) - phi(-h)) / (2.0 * h)
}
