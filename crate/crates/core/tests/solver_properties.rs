mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rspot_core::{
    build_extended, coupling_matrix, load_graph, solve_margins, CostRule, EdgeRecord, Error,
    MarginSolution, MarginSpec, MuPolicy, SolverConfig, WiringMode,
};

fn demo_solution(theta: f64) -> MarginSolution {
    let cfg = SolverConfig::new(theta).with_tol(1e-8).with_dual_tracking();
    let sol = solve_margins(&demo_extended(), &cfg).unwrap();
    assert_solution_identities(&sol);
    sol
}

#[test]
fn demo_flows_meet_margins() {
    let sol = demo_solution(1.0);
    let e = &sol.flows.edge_flows;
    let t = sol.system.target();
    for l in [2, 3] {
        assert!((e[(0, label(l) + 1)] - 0.5).abs() < 1e-6);
    }
    for l in [7, 8] {
        assert!((e[(label(l) + 1, t)] - 0.5).abs() < 1e-6);
    }
    assert!(sol.max_residual() <= 1e-7);
    let trace = sol.dual_trace.as_ref().unwrap();
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-10));

    let gamma = coupling_matrix(&sol).unwrap();
    let rows = gamma.gamma.row_sums();
    let cols = gamma.gamma.col_sums();
    assert!(max_abs_diff(&rows, &[0.5, 0.5]) < 1e-8);
    assert!(max_abs_diff(&cols, &[0.5, 0.5]) < 1e-8);
}

#[test]
fn asymmetric_inputs_keep_cost_identity() {
    let mut s_in = vec![0.0; 7];
    s_in[label(2)] = 0.9;
    s_in[label(3)] = 0.1;
    let m = MarginSpec::new(s_in, demo_margins().sigma_out().to_vec()).unwrap();
    let ext = build_extended(&demo_graph(), &m, demo_wiring()).unwrap();
    let sol = solve_margins(&ext, &SolverConfig::new(1.0)).unwrap();
    assert_solution_identities(&sol);
    assert!(sol.max_residual() <= 1e-7);
}

#[test]
fn point_margins_need_no_multipliers() {
    let g = cycle(4);
    let m = MarginSpec::new(vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]).unwrap();
    let ext = build_extended(&g, &m, WiringMode::Consistent(MuPolicy::default())).unwrap();
    let sol = solve_margins(&ext, &SolverConfig::new(1.0)).unwrap();
    assert_eq!(sol.lambda_in, vec![0.0]);
    assert_eq!(sol.lambda_out, vec![0.0]);
    let gamma = coupling_matrix(&sol).unwrap();
    assert!((gamma.gamma[(0, 0)] - 1.0).abs() < 1e-15);
    assert_solution_identities(&sol);
}

#[test]
fn symmetric_two_by_two_coupling() {
    // C_4 with inputs {0, 2} and outputs {1, 3}: both reflections are
    // automorphisms that respect the margins, so all four entries agree.
    let g = cycle(4);
    let m = MarginSpec::new(vec![0.5, 0.0, 0.5, 0.0], vec![0.0, 0.5, 0.0, 0.5]).unwrap();
    let ext = build_extended(&g, &m, WiringMode::UserWeights(vec![0.0, 1.0, 0.0, 1.0])).unwrap();
    let sol = solve_margins(&ext, &SolverConfig::new(1.0)).unwrap();
    let gamma = coupling_matrix(&sol).unwrap().gamma;
    for v in gamma.as_slice() {
        assert!((v - 0.25).abs() < 1e-9, "{v}");
    }
}

#[test]
fn output_without_sink_edge_is_rejected() {
    let g = cycle(3);
    let m = MarginSpec::new(vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5]).unwrap();
    let err = build_extended(&g, &m, WiringMode::UserWeights(vec![0.0, 1.0, 0.0]));
    assert!(err.is_err());
}

#[test]
fn iteration_cap_reports_state() {
    let cfg = SolverConfig::new(1.0).with_tol(1e-14).with_max_iter(2);
    match solve_margins(&demo_extended(), &cfg) {
        Err(Error::NotConverged {
            iterations,
            lambda_in,
            lambda_out,
            ..
        }) => {
            assert_eq!(iterations, 2);
            assert_eq!(lambda_in.len(), 2);
            assert_eq!(lambda_out.len(), 2);
        }
        other => panic!("expected NotConverged, got {other:?}"),
    }
}

/// Every source-to-target path of at most `max_len` edges on the extended
/// graph: checks that the policy probability of each equals its Gibbs weight
/// under the augmented costs.
#[test]
fn policy_realizes_gibbs_distribution() {
    let edges = [
        EdgeRecord::with_cost(0, 1, 1.0, 0.5),
        EdgeRecord::with_cost(1, 2, 2.0, 1.0),
        EdgeRecord::with_cost(2, 3, 1.0, 0.3),
        EdgeRecord::with_cost(3, 0, 1.0, 1.5),
        EdgeRecord::with_cost(1, 3, 1.0, 0.7),
        EdgeRecord::with_cost(2, 0, 1.0, 0.2),
    ];
    let g = load_graph(4, &edges, CostRule::Explicit).unwrap();
    let m = MarginSpec::new(vec![0.6, 0.4, 0.0, 0.0], vec![0.0, 0.0, 0.3, 0.7]).unwrap();
    let ext = build_extended(&g, &m, WiringMode::Consistent(MuPolicy::default())).unwrap();
    assert_eq!(ext.node_count(), 6);
    let theta = 0.8;
    let sol = solve_margins(&ext, &SolverConfig::new(theta)).unwrap();
    assert_solution_identities(&sol);

    let p_ref = ext.transitions().matrix();
    let policy = sol.policy.matrix();
    let cost = &sol.augmented_costs;
    let z = sol.system.partition();
    let t = ext.target();
    let mut covered = 0.0;
    let mut worst: f64 = 0.0;
    let mut stack = vec![(0usize, 1.0f64, 1.0f64, 0.0f64, 0usize)];
    while let Some((node, p_star, p_ref_prod, c_sum, len)) = stack.pop() {
        if node == t {
            let gibbs = p_ref_prod * (-theta * c_sum).exp() / z;
            worst = worst.max((p_star - gibbs).abs() / gibbs);
            covered += p_star;
            continue;
        }
        if len == 10 {
            continue;
        }
        for j in 0..ext.node_count() {
            if p_ref[(node, j)] > 0.0 {
                stack.push((
                    j,
                    p_star * policy[(node, j)],
                    p_ref_prod * p_ref[(node, j)],
                    c_sum + cost[(node, j)],
                    len + 1,
                ));
            }
        }
    }
    assert!(worst < 1e-10, "relative mismatch {worst}");
    assert!(covered > 0.5 && covered <= 1.0 + 1e-12, "covered {covered}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_instances_converge(seed in any::<u64>(), n in 3usize..9, theta in 0.1f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_strong_graph(&mut rng, n, 0.3, (0.1, 2.0));
        let m = random_margins(&mut rng, n);
        let ext = build_extended(&g, &m, WiringMode::Consistent(MuPolicy::default())).unwrap();
        let cfg = SolverConfig::new(theta).with_tol(1e-9).with_dual_tracking();
        let sol = solve_margins(&ext, &cfg).unwrap();
        prop_assert!(sol.max_residual() <= 1e-8, "residual {}", sol.max_residual());
        prop_assert!(sol.max_normalization_error <= 1e-10);
        let (aug, real) = rspot_core::expected_costs_match(&sol);
        prop_assert!((aug - real).abs() <= 1e-8);
        let trace = sol.dual_trace.as_ref().unwrap();
        prop_assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-10));
        let pm = sol.policy.matrix();
        let t = sol.system.target();
        for i in 0..t {
            prop_assert!((pm.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        let gamma = coupling_matrix(&sol).unwrap();
        let rows = gamma.gamma.row_sums();
        let cols = gamma.gamma.col_sums();
        let want_in: Vec<f64> = sol.inputs.iter().map(|&k| m.sigma_in()[k]).collect();
        let want_out: Vec<f64> = sol.outputs.iter().map(|&l| m.sigma_out()[l]).collect();
        prop_assert!(max_abs_diff(&rows, &want_in) <= 1e-8);
        prop_assert!(max_abs_diff(&cols, &want_out) <= 1e-8);
    }
}
