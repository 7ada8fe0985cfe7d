mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rspot_core::{
    build_extended, build_system, edge_flows, free_energy, optimal_policy, path_sum_oracle,
    ExtendedGraph, MuPolicy, WiringMode,
};

#[test]
fn demo_partition_matches_path_sums() {
    let ext = demo_extended();
    let sys = build_system(ext.transitions(), ext.costs(), 1.0).unwrap();
    // The demo graph plus supernodes is a DAG, so the series terminates.
    let oracle = path_sum_oracle(ext.transitions().matrix(), ext.costs(), 1.0, 40).unwrap();
    assert_eq!(oracle.tail_bound, 0.0);
    assert!((sys.partition() - oracle.partition()).abs() < 1e-14);
    assert!((free_energy(&sys) + oracle.partition().ln()).abs() < 1e-12);
}

#[test]
fn demo_flow_is_gradient_of_free_energy() {
    let ext = demo_extended();
    for theta in [0.5, 1.0, 2.0] {
        let sys = build_system(ext.transitions(), ext.costs(), theta).unwrap();
        let flows = edge_flows(&sys);
        let p = ext.transitions().matrix();
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                if p[(i, j)] > 0.0 {
                    let fd = fd_flow(p, ext.costs(), theta, i, j, 1e-6);
                    assert!(
                        (fd - flows.edge_flows[(i, j)]).abs() < 1e-5,
                        "({i},{j}) theta {theta}"
                    );
                }
            }
        }
    }
}

#[test]
fn expected_cost_decreases_with_theta() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let ext = random_extended(&mut rng, 6);
        let mut last = f64::INFINITY;
        for theta in [0.01, 0.1, 1.0, 10.0] {
            let sys = build_system(ext.transitions(), ext.costs(), theta).unwrap();
            let c = edge_flows(&sys).expected_cost;
            assert!(c <= last + 1e-10, "{c} > {last} at theta {theta}");
            last = c;
        }
    }
}

fn random_extended(rng: &mut ChaCha8Rng, n: usize) -> ExtendedGraph {
    let g = random_strong_graph(rng, n, 0.3, (0.1, 2.0));
    let m = random_margins(rng, n);
    build_extended(&g, &m, WiringMode::Consistent(MuPolicy::default())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flows_conserve_and_policy_matches(seed in any::<u64>(), n in 3usize..9, theta in 0.05f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ext = random_extended(&mut rng, n);
        let sys = build_system(ext.transitions(), ext.costs(), theta).unwrap();
        let f = edge_flows(&sys);
        let e = &f.edge_flows;
        let dim = ext.node_count();
        let t = dim - 1;
        let out = e.row_sums();
        let inflow = e.col_sums();
        prop_assert!((out[0] - 1.0).abs() < 1e-10);
        prop_assert!((inflow[t] - 1.0).abs() < 1e-10);
        for j in 1..t {
            prop_assert!((out[j] - inflow[j]).abs() < 1e-10);
            prop_assert!((f.node_visits[j] - inflow[j]).abs() < 1e-10);
        }
        let policy = optimal_policy(&sys).unwrap();
        let pm = policy.matrix();
        for i in 0..t {
            prop_assert!((pm.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for j in 0..dim {
                if pm[(i, j)] > 0.0 {
                    prop_assert!(ext.transitions().matrix()[(i, j)] > 0.0);
                }
                prop_assert!((pm[(i, j)] * f.node_visits[i] - e[(i, j)]).abs() < 1e-10);
            }
        }
        prop_assert!(pm.row(t).iter().all(|x| *x == 0.0));
        prop_assert!((f.free_energy - free_energy(&sys)).abs() < 1e-15);
    }

    #[test]
    fn linear_solve_matches_series(seed in any::<u64>(), theta in 0.5f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ext = random_extended(&mut rng, 8);
        let sys = build_system(ext.transitions(), ext.costs(), theta).unwrap();
        let oracle = path_sum_oracle(ext.transitions().matrix(), ext.costs(), theta, 4096).unwrap();
        let pairs = sys.z_backward().iter().zip(&oracle.z_backward)
            .chain(sys.z_forward().iter().zip(&oracle.z_forward));
        for (lin, ser) in pairs {
            prop_assert!((lin - ser).abs() <= oracle.tail_bound + 1e-12 * lin.abs().max(1.0));
        }
    }
}
