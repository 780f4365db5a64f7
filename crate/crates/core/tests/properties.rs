use proptest::prelude::*;
use sue_core::{
    parse_demands, parse_network, solve, DemandSet, Link, Network, NodeId, OdDemand, SolverConfig,
    SolverKind,
};

fn link(from: u32, to: u32, alpha: f64, beta: f64) -> Link {
    Link {
        from: NodeId::new(from).unwrap(),
        to: NodeId::new(to).unwrap(),
        alpha,
        beta,
    }
}

/// Random strongly connected network: a ring 1..n in both directions plus
/// random chords.
fn networks() -> impl Strategy<Value = Network> {
    (3u32..8)
        .prop_flat_map(|n| {
            let params = prop::collection::vec((1.0f64..40.0, 0.0f64..0.05), 2 * n as usize);
            let chords = prop::collection::vec((1..=n, 1..=n, 1.0f64..40.0), 0..6);
            (Just(n), params, chords)
        })
        .prop_map(|(n, params, chords)| {
            let mut links = Vec::new();
            for i in 1..=n {
                let j = i % n + 1;
                let (a, b) = params[2 * (i as usize - 1)];
                links.push(link(i, j, a, b));
                let (a, b) = params[2 * (i as usize - 1) + 1];
                links.push(link(j, i, a, b));
            }
            for (i, j, a) in chords {
                if i != j && !links.iter().any(|l| l.from.get() == i && l.to.get() == j) {
                    links.push(link(i, j, a, 0.001));
                }
            }
            Network::new(links).unwrap()
        })
}

proptest! {
    #[test]
    fn bpr_is_monotone(alpha in 0.1f64..100.0, beta in 0.0f64..1.0, x in 0.0f64..100.0, dx in 0.0f64..10.0) {
        let l = link(1, 2, alpha, beta);
        prop_assert!(l.cost(x + dx) >= l.cost(x));
        prop_assert!(l.cost(x) >= alpha);
        // The closed-form integral grows at rate t(x).
        prop_assert!(l.cost_integral(x + dx) - l.cost_integral(x) >= l.cost(x) * dx - 1e-9 * (1.0 + l.cost_integral(x + dx)));
    }

    #[test]
    fn network_csv_round_trip(net in networks()) {
        let back = parse_network(&net.to_csv()).unwrap();
        prop_assert_eq!(back.links(), net.links());
    }

    #[test]
    fn demand_csv_round_trip(rates in prop::collection::vec(0.01f64..100.0, 1..5)) {
        let demands: Vec<OdDemand> = rates
            .iter()
            .enumerate()
            .map(|(i, &rate)| OdDemand {
                origin: NodeId::new(1).unwrap(),
                destination: NodeId::new(i as u32 + 2).unwrap(),
                rate,
            })
            .collect();
        let set = DemandSet::new(demands).unwrap();
        let back = parse_demands(&set.to_csv()).unwrap();
        prop_assert_eq!(back.demands(), set.demands());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solvers_are_reproducible(net in networks(), seed in any::<u64>(), physarum in any::<bool>()) {
        let demands = DemandSet::new(vec![OdDemand {
            origin: NodeId::new(1).unwrap(),
            destination: NodeId::new(2).unwrap(),
            rate: 5.0,
        }]).unwrap();
        let kind = if physarum { SolverKind::Physarum } else { SolverKind::Msa };
        let mut config = SolverConfig::new(kind, seed);
        config.max_outer = 200;
        let a = solve(&net, &demands, &config).unwrap();
        let b = solve(&net, &demands, &config).unwrap();
        prop_assert_eq!(&a.link_flows, &b.link_flows);
        prop_assert_eq!(a.epsilon_trace(), b.epsilon_trace());
        prop_assert_eq!(a.truncation_count, b.truncation_count);
        for &x in &a.link_flows {
            prop_assert!((0.0..=5.0 + 1e-9).contains(&x));
        }
    }
}
