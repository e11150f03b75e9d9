mod common;

use common::{graph_strategy, rk4_sir};
use epiprofile::{
    generate_erdos_renyi, hop_distances, simulate, synthesize_dataset, EpidemicParams,
    InitialCondition, Network, Observable, SimulationConfig,
};
use proptest::prelude::*;

fn noise_off(t_end: f64) -> SimulationConfig {
    SimulationConfig {
        t_end,
        noise: false,
        ..SimulationConfig::default()
    }
}

fn parameter_sets() -> [EpidemicParams; 3] {
    [
        EpidemicParams::new(0.16, 0.04, 0.2).unwrap(),
        EpidemicParams::new(0.133, 0.067, 0.2).unwrap(),
        EpidemicParams::new(0.11, 0.09, 0.2).unwrap(),
    ]
}

#[test]
fn deterministic_runs_conserve_population() {
    for params in parameter_sets() {
        for seed in 0..5 {
            let net = generate_erdos_renyi(100, 2.0, seed).unwrap();
            let init = InitialCondition::new(seed as usize % 100);
            let traj = simulate(&net, params, init, noise_off(100.0), seed).unwrap();
            let n0 = traj.states[0].total_population();
            for (t, st) in traj.times.iter().zip(&traj.states) {
                let rel = (st.total_population() - n0).abs() / n0;
                assert!(rel <= 1e-6, "drift {rel} at t={t} for {params:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cumulative_cases_never_decrease(
        (n, edges) in graph_strategy(12),
        seed in any::<u64>(),
        noise in any::<bool>(),
        alpha in 0.0..0.5f64,
        beta in 0.01..0.5f64,
    ) {
        let net = Network::from_edges(n, &edges).unwrap();
        let params = EpidemicParams::new(alpha, beta, 0.2).unwrap();
        let config = SimulationConfig { t_end: 40.0, noise, ..SimulationConfig::default() };
        let init = InitialCondition { source: seed as usize % n, index_cases: 20.0, population: 1e6 };
        let traj = simulate(&net, params, init, config, seed).unwrap();
        for w in traj.states.windows(2) {
            for k in 0..n {
                prop_assert!(w[1].j[k] >= w[0].j[k]);
                prop_assert!(w[1].s[k] >= 0.0 && w[1].i[k] >= 0.0 && w[1].r[k] >= 0.0);
            }
        }
    }

    #[test]
    fn same_seed_gives_identical_trajectory((n, edges) in graph_strategy(10), seed in any::<u64>()) {
        let net = Network::from_edges(n, &edges).unwrap();
        let params = EpidemicParams::new(0.16, 0.04, 0.2).unwrap();
        let config = SimulationConfig { t_end: 30.0, ..SimulationConfig::default() };
        let a = simulate(&net, params, InitialCondition::new(0), config, seed).unwrap();
        let b = simulate(&net, params, InitialCondition::new(0), config, seed).unwrap();
        prop_assert_eq!(a.checksum(), b.checksum());
        prop_assert_eq!(a, b);
    }
}

#[test]
fn single_node_matches_classical_sir() {
    let net = Network::from_edges(1, &[]).unwrap();
    let params = EpidemicParams::new(0.16, 0.04, 0.0).unwrap();
    let traj = simulate(&net, params, InitialCondition::new(0), noise_off(600.0), 0).unwrap();
    let reference = rk4_sir(0.16, 0.04, 1e8 - 20.0, 20.0, 0.001, 600.0);

    let peak = traj.states.iter().map(|s| s.i[0]).fold(0.0, f64::max);
    let ref_peak = reference.iter().map(|p| p.1).fold(0.0, f64::max);
    let final_size = 1e8 - traj.states.last().unwrap().s[0];
    let ref_final = 1e8 - reference.last().unwrap().0;

    assert!(
        (peak - ref_peak).abs() / ref_peak < 0.005,
        "peak {peak} vs {ref_peak}"
    );
    assert!(
        (final_size - ref_final).abs() / ref_final < 0.005,
        "final size {final_size} vs {ref_final}"
    );
}

#[test]
fn halving_step_barely_moves_infectious_count() {
    let params = EpidemicParams::new(0.16, 0.04, 0.2).unwrap();
    for seed in 0..5 {
        let net = generate_erdos_renyi(100, 2.0, seed).unwrap();
        let init = InitialCondition::new(7);
        let coarse = simulate(&net, params, init, noise_off(50.0), 0).unwrap();
        let fine_cfg = SimulationConfig {
            sim_dt: 0.025,
            ..noise_off(50.0)
        };
        let fine = simulate(&net, params, init, fine_cfg, 0).unwrap();
        let a: f64 = coarse.state_at(50.0).unwrap().i.iter().sum();
        let b: f64 = fine.state_at(50.0).unwrap().i.iter().sum();
        assert!((a - b).abs() / b < 0.01, "seed {seed}: I(50) {a} vs {b}");
        let src_a = coarse.state_at(50.0).unwrap().i[7];
        let src_b = fine.state_at(50.0).unwrap().i[7];
        assert!(
            (src_a - src_b).abs() / src_b < 0.01,
            "seed {seed}: source I(50) {src_a} vs {src_b}"
        );
    }
}

#[test]
fn outbreak_grows_at_source_then_spreads() {
    let net = generate_erdos_renyi(100, 2.0, 11).unwrap();
    let dist = hop_distances(&net);
    let source = (0..100)
        .max_by_key(|&i| dist.row(i).iter().flatten().count())
        .unwrap();
    let params = EpidemicParams::new(0.16, 0.04, 0.2).unwrap();
    let traj = simulate(
        &net,
        params,
        InitialCondition::new(source),
        SimulationConfig::default(),
        3,
    )
    .unwrap();

    let delta_j = |t: f64| synthesize_dataset(&traj, t, 1.0, Observable::DeltaJ).unwrap();
    assert!(delta_j(40.0).values()[source] > 10.0 * delta_j(0.0).values()[source]);

    let reached = |t: f64| {
        traj.state_at(t)
            .unwrap()
            .j
            .iter()
            .filter(|&&j| j >= 1.0)
            .count()
    };
    let component = dist.row(source).iter().flatten().count();
    assert!(reached(10.0) < reached(60.0));
    assert!(
        reached(100.0) * 2 > component,
        "{} of {component} reached",
        reached(100.0)
    );
}
