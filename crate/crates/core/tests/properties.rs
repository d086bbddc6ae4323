use dimesim::engine::replicate_graph;
use dimesim::network::generate_holme_kim;
use dimesim::rng::network_rng;
use dimesim::signal::collective_reframe;
use dimesim::{
    ActivationTie, AgentState, AgentType, Dime, DimeCoefficients, DimeDistributionTable,
    GraphSource, InitialCondition, ModelParams, NetworkParams, RunOptions, Signal, Simulation,
    SocialGraph, Tactic,
};
use proptest::prelude::*;

fn signal() -> impl Strategy<Value = Signal> {
    prop_oneof![Just(Signal::Success), Just(Signal::Failure)]
}

fn tactic() -> impl Strategy<Value = Tactic> {
    prop_oneof![Just(Tactic::Conventional), Just(Tactic::Radical)]
}

fn coefficients() -> impl Strategy<Value = DimeCoefficients> {
    let c = || prop::array::uniform4(-50.0f64..50.0);
    (c(), c(), c()).prop_map(|(beta, lambda, gamma)| DimeCoefficients {
        beta,
        lambda,
        gamma,
    })
}

fn graph(max_nodes: usize) -> impl Strategy<Value = SocialGraph> {
    (2..=max_nodes).prop_flat_map(|n| {
        prop::collection::vec(prop::bool::weighted(0.35), n * (n - 1) / 2).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if bits[k] {
                        edges.push((i, j));
                    }
                    k += 1;
                }
            }
            SocialGraph::from_edges(n, edges).unwrap()
        })
    })
}

fn signals_for(g: &SocialGraph) -> impl Strategy<Value = Vec<Signal>> {
    prop::collection::vec(signal(), g.node_count())
}

fn successes(s: &[Signal]) -> Vec<bool> {
    s.iter().map(|x| x.is_success()).collect()
}

fn superset(a: &[Signal], b: &[Signal]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| x.is_success() || !y.is_success())
}

proptest! {
    #[test]
    fn dime_stays_in_range(
        start in prop::array::uniform4(-20.0f64..120.0),
        coeffs in coefficients(),
        steps in prop::collection::vec((signal(), tactic(), prop::array::uniform4(-1.0f64..1.0)), 1..50),
    ) {
        let mut a = AgentState::new(Dime(start), true, false, Tactic::Conventional);
        prop_assert!(a.dime.in_range());
        for (s, t, noise) in steps {
            a.orientation = t;
            a.update_dime(&coeffs, s, noise);
            prop_assert!(a.dime.in_range(), "{:?}", a.dime);
        }
    }

    #[test]
    fn reframing_never_removes_success(g in graph(9).prop_flat_map(|g| (signals_for(&g), Just(g))), phi in 0.0f64..1.0, r in 1u32..12) {
        let (initial, g) = g;
        let out = collective_reframe(&initial, &g, phi, r);
        prop_assert!(superset(&out, &initial));
    }

    #[test]
    fn reframing_is_monotone_in_rounds_threshold_and_input(
        g in graph(9).prop_flat_map(|g| (signals_for(&g), signals_for(&g), Just(g))),
        phi in 0.0f64..1.0,
        dphi in 0.0f64..0.5,
        r in 1u32..8,
    ) {
        let (a, extra, g) = g;
        let more = collective_reframe(&a, &g, phi, r + 1);
        let fewer = collective_reframe(&a, &g, phi, r);
        prop_assert!(superset(&more, &fewer));

        let strict = collective_reframe(&a, &g, (phi + dphi).min(1.0), r);
        prop_assert!(superset(&fewer, &strict));

        let bigger: Vec<Signal> = a.iter().zip(&extra)
            .map(|(x, y)| if x.is_success() || y.is_success() { Signal::Success } else { Signal::Failure })
            .collect();
        let from_bigger = collective_reframe(&bigger, &g, phi, r);
        prop_assert!(superset(&from_bigger, &fewer));
    }

    #[test]
    fn rounds_beyond_node_count_change_nothing(g in graph(9).prop_flat_map(|g| (signals_for(&g), Just(g))), phi in 0.0f64..1.0, extra in 0u32..20) {
        let (initial, g) = g;
        let n = g.node_count() as u32;
        let settled = collective_reframe(&initial, &g, phi, n);
        prop_assert_eq!(successes(&settled), successes(&collective_reframe(&initial, &g, phi, n + extra)));
        prop_assert_eq!(successes(&settled), successes(&collective_reframe(&settled, &g, phi, 1)));
    }

    #[test]
    fn decision_rules_are_strict(i in 0.0f64..100.0, m in 0.0f64..100.0, e in 0.0f64..100.0) {
        let mean = (i + m + e) / 3.0;
        let at = Dime([mean, i, m, e]);
        prop_assert!(decide_is_active(&at));
        let innov_tie = (m + e) / 2.0;
        let d = dimesim::model::decide(&Dime([0.0, innov_tie, m, e]), ActivationTie::Strict);
        prop_assert!(!d.will_innovate);
    }

    #[test]
    fn holme_kim_output_is_simple(n0 in 2usize..15, m in 1usize..6, frac in 0.0f64..=1.0, extra in 0usize..80, seed: u64) {
        prop_assume!(n0 >= m);
        let params = NetworkParams { nodes: n0 + extra, edges_per_node: m, triad_edges: frac * m as f64, seed_clique: n0 };
        let g = generate_holme_kim(&params, &mut network_rng(seed)).unwrap();
        prop_assert!(g.is_simple_undirected());
        prop_assert_eq!(g.edge_count(), n0 * (n0 - 1) / 2 + extra * m);
    }

    #[test]
    fn fractions_sum_to_one_every_step(
        p in 0.0f64..=1.0, f in 0.0f64..=1.0, phi in 0.0f64..=1.0, r in 1u32..5, seed: u64,
        ic in prop::sample::select(InitialCondition::ALL.to_vec()),
    ) {
        let params = ModelParams {
            failure_prob: p, individual_threshold: f, collective_threshold: phi, rounds: r,
            agents: 40, steps: 30, seed, initial_condition: ic, ..Default::default()
        };
        let g = replicate_graph(&NetworkParams { nodes: 40, edges_per_node: 3, triad_edges: 2.0, seed_clique: 4 }, seed).unwrap();
        let mut sim = Simulation::new(&params, &g, &DimeDistributionTable::default()).unwrap();
        for _ in 0..params.steps {
            let s = sim.step();
            let total: f64 = s.type_fractions.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(s.type_fractions.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!(sim.agents().iter().all(|a| a.dime.in_range()));
        }
    }
}

fn decide_is_active(d: &Dime) -> bool {
    dimesim::model::decide(d, ActivationTie::Strict).will_act
}

#[test]
fn activation_boundary_examples() {
    // D equal to the mean of I, M, E stays active; a hair above goes latent
    let d = dimesim::model::decide(&Dime([50.0, 40.0, 50.0, 60.0]), ActivationTie::Strict);
    assert!(d.will_act);
    let d = dimesim::model::decide(&Dime([50.000001, 40.0, 50.0, 60.0]), ActivationTie::Strict);
    assert!(!d.will_act);
    let d = dimesim::model::decide(&Dime([50.0, 40.0, 50.0, 60.0]), ActivationTie::Inclusive);
    assert!(!d.will_act);
    // I equal to the mean of M, E does not innovate
    assert!(
        !dimesim::model::decide(&Dime([0.0, 55.0, 50.0, 60.0]), ActivationTie::Strict)
            .will_innovate
    );
    assert!(
        dimesim::model::decide(&Dime([0.0, 55.000001, 50.0, 60.0]), ActivationTie::Strict)
            .will_innovate
    );
}

#[test]
fn classification_is_total() {
    let mut seen = std::collections::BTreeSet::new();
    for act in [false, true] {
        for innovate in [false, true] {
            for last in [Tactic::Conventional, Tactic::Radical] {
                let ty = AgentType::classify(act, innovate, last);
                seen.insert(ty);
                let name = ty.name();
                assert_eq!(name.starts_with("active"), act, "{name}");
                assert_eq!(name.ends_with("innovator"), innovate, "{name}");
            }
        }
    }
    assert_eq!(seen.len(), 6);
}

#[test]
fn success_broadcast_reaches_everyone() {
    let params = ModelParams {
        failure_prob: 0.0,
        individual_threshold: 1.0,
        collective_threshold: 1.0,
        agents: 60,
        steps: 200,
        seed: 4,
        ..Default::default()
    };
    let g = replicate_graph(
        &NetworkParams {
            nodes: 60,
            edges_per_node: 3,
            triad_edges: 2.0,
            seed_clique: 4,
        },
        4,
    )
    .unwrap();
    let mut sim = Simulation::new(&params, &g, &DimeDistributionTable::default()).unwrap();
    for _ in 0..params.steps {
        let s = sim.step();
        assert_eq!(s.authority_signal, -1.0);
        assert_eq!(s.success_fraction, 1.0);
        assert!(sim.agents().iter().all(|a| a.perceived == Signal::Success));
    }
}

#[test]
fn replicates_do_not_depend_on_worker_count() {
    let params = ModelParams {
        agents: 80,
        steps: 150,
        seed: 21,
        ..Default::default()
    };
    let net = NetworkParams {
        nodes: 80,
        edges_per_node: 4,
        triad_edges: 3.0,
        seed_clique: 6,
    };
    let table = DimeDistributionTable::default();
    let runs: Vec<_> = [1, 2, 3]
        .into_iter()
        .map(|w| {
            let options = RunOptions {
                steady_window: 50,
                workers: Some(w),
            };
            dimesim::run_replicates(&params, 5, &table, GraphSource::Generate(net), &options)
                .unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}
