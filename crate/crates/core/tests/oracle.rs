//! Brute-force and independent-implementation checks of the oracles and of
//! the pressure solve.

use nalgebra::{DMatrix, DVector};
use sue_core::data::{EXAMPLE1_DEMANDS, SHEFFI12_NETWORK};
use sue_core::oracle::{
    dijkstra, enumerate_paths, link_flows_from_paths, path_costs, probit_path_probabilities_mc,
    sue_objective_estimate, williams_gradient_check, PathSet,
};
use sue_core::physarum::{InjectionVector, PhysarumState};
use sue_core::probit::two_link_choice_probability;
use sue_core::solvers::{all_or_nothing, msa_stochastic_loading};
use sue_core::{
    parse_demands, parse_network, solve, Gamma, Network, NodeId, RngStream, SolverConfig,
    SolverKind,
};

fn n(i: u32) -> NodeId {
    NodeId::new(i).unwrap()
}

fn gamma() -> Gamma {
    Gamma::new(0.3).unwrap()
}

fn sheffi() -> Network {
    parse_network(SHEFFI12_NETWORK).unwrap()
}

fn two_routes(t1: f64, t2: f64) -> Network {
    parse_network(&format!(
        "from,to,alpha,beta\n1,2,{t1},0\n1,3,{t2},0\n3,2,1e-9,0\n"
    ))
    .unwrap()
}

/// Dense Laplacian built straight from the link list, solved by LU with
/// the reference row and column removed.
fn reference_pressures(
    net: &Network,
    state: &PhysarumState,
    inj: &[f64],
    reference: NodeId,
) -> Vec<f64> {
    let nn = net.node_count();
    let mut lap = DMatrix::<f64>::zeros(nn, nn);
    for (a, l) in net.links().iter().enumerate() {
        let g = state.conductivity[a] / state.lengths[a];
        let (i, j) = (l.from.slot(), l.to.slot());
        lap[(i, i)] += g;
        lap[(j, j)] += g;
        lap[(i, j)] -= g;
        lap[(j, i)] -= g;
    }
    let keep: Vec<usize> = (0..nn).filter(|&v| v != reference.slot()).collect();
    let reduced = DMatrix::from_fn(keep.len(), keep.len(), |r, c| lap[(keep[r], keep[c])]);
    // sum_i g (p_i - p_j) = inj(j)  is  -L p = inj.
    let rhs = DVector::from_iterator(keep.len(), keep.iter().map(|&v| -inj[v]));
    let x = reduced.lu().solve(&rhs).expect("nonsingular");
    let mut p = vec![0.0; nn];
    for (k, &v) in keep.iter().enumerate() {
        p[v] = x[k];
    }
    p
}

#[test]
fn pressure_solve_matches_lu() {
    let net = sheffi();
    let mut rng = RngStream::new(17);
    for trial in 0..20 {
        let conductivity: Vec<f64> = (0..net.link_count())
            .map(|_| rng.uniform_in(1e-3, 5.0))
            .collect();
        let lengths: Vec<f64> = (0..net.link_count())
            .map(|_| rng.uniform_in(1.0, 40.0))
            .collect();
        let state = PhysarumState::new(&net, conductivity, lengths);
        let mut inj = vec![0.0; 12];
        inj[0] = -20.0;
        inj[11] = 12.0;
        inj[7] = 8.0;
        let reference = n(8);
        let sol = state
            .solve_pressures(&net, &InjectionVector::new(inj.clone()).unwrap(), reference)
            .unwrap();
        let want = reference_pressures(&net, &state, &inj, reference);
        for (got, want) in sol.pressures.iter().zip(&want) {
            assert!(
                (got - want).abs() <= 1e-8 * (1.0 + want.abs()),
                "trial {trial}: {got} vs {want}"
            );
        }
        assert!(sol.residual < 1e-9, "residual {}", sol.residual);
    }
}

/// Recursive count of simple paths, written independently of the
/// iterative enumerator.
fn count_paths(
    net: &Network,
    at: NodeId,
    target: NodeId,
    hops_left: usize,
    visited: &mut Vec<bool>,
) -> usize {
    if at == target {
        return 1;
    }
    if hops_left == 0 {
        return 0;
    }
    visited[at.slot()] = true;
    let mut total = 0;
    for l in net.links().iter().filter(|l| l.from == at) {
        if !visited[l.to.slot()] {
            total += count_paths(net, l.to, target, hops_left - 1, visited);
        }
    }
    visited[at.slot()] = false;
    total
}

#[test]
fn path_count_matches_recount() {
    let net = sheffi();
    for (o, d, hops) in [(1, 12, 11), (1, 8, 11), (6, 3, 11), (1, 12, 7)] {
        let set = enumerate_paths(&net, n(o), n(d), hops).unwrap();
        let mut visited = vec![false; 12];
        assert_eq!(
            set.len(),
            count_paths(&net, n(o), n(d), hops, &mut visited),
            "{o}->{d}"
        );
    }
}

#[test]
fn enumerated_paths_are_simple_and_ordered() {
    let net = sheffi();
    let set = enumerate_paths(&net, n(1), n(12), 11).unwrap();
    for w in set.paths.windows(2) {
        assert!(w[0] < w[1], "not lexicographic: {:?} then {:?}", w[0], w[1]);
    }
    for (nodes, links) in set.paths.iter().zip(&set.path_links) {
        assert_eq!(nodes.first(), Some(&n(1)));
        assert_eq!(nodes.last(), Some(&n(12)));
        let mut sorted = nodes.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), nodes.len());
        assert_eq!(links.len(), nodes.len() - 1);
    }
    // Incidence column sums equal path lengths.
    let inc = set.incidence_matrix();
    for k in 0..set.len() {
        let col: usize = inc.iter().map(|row| row[k] as usize).sum();
        assert_eq!(col, set.path_links[k].len());
    }
}

#[test]
fn path_costs_equal_incidence_transpose() {
    let net = sheffi();
    let set = enumerate_paths(&net, n(1), n(12), 11).unwrap();
    let t = net.link_costs(&vec![3.0; net.link_count()]);
    let inc = set.incidence_matrix();
    let costs = path_costs(&set, &t);
    for k in 0..set.len() {
        let by_matrix: f64 = (0..net.link_count()).map(|a| inc[a][k] as f64 * t[a]).sum();
        assert!((costs[k] - by_matrix).abs() < 1e-9);
    }
}

fn brute_min(set: &PathSet, lengths: &[f64]) -> f64 {
    path_costs(set, lengths)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn dijkstra_equals_brute_force_minimum() {
    let net = sheffi();
    let mut rng = RngStream::new(4);
    for _ in 0..10 {
        let lengths: Vec<f64> = (0..net.link_count())
            .map(|_| rng.uniform_in(1.0, 30.0))
            .collect();
        for source in [1, 6, 12] {
            let tree = dijkstra(&net, &lengths, n(source));
            for target in 1..=12 {
                if target == source {
                    continue;
                }
                let set = enumerate_paths(&net, n(source), n(target), 11).unwrap();
                let d = tree.distance(n(target)).unwrap();
                assert!((d - brute_min(&set, &lengths)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn probabilities_match_closed_form() {
    let net = two_routes(18.0, 20.0);
    let set = enumerate_paths(&net, n(1), n(2), 2).unwrap();
    assert_eq!(set.len(), 2);
    let ff = net.free_flow_costs();
    let mut rng = RngStream::new(8);
    let probs = probit_path_probabilities_mc(&set, &ff, &ff, gamma(), 1_000_000, &mut rng).unwrap();
    let exact = two_link_choice_probability(18.0, 20.0, 18.0, 20.0, gamma());
    assert!((probs.probabilities[0] - exact).abs() < 0.002);
    assert!((probs.probabilities[0] - 0.7232).abs() < 0.002);
}

#[test]
fn symmetric_and_overlapping_routes_split_evenly() {
    let same = two_routes(15.0, 15.0);
    let set = enumerate_paths(&same, n(1), n(2), 2).unwrap();
    let ff = same.free_flow_costs();
    let p =
        probit_path_probabilities_mc(&set, &ff, &ff, gamma(), 1_000_000, &mut RngStream::new(2))
            .unwrap();
    assert!((p.probabilities[0] - 0.5).abs() < 0.002);

    // Shared trunk 1-2-3, then two equal branches into 4.
    let overlap =
        parse_network("from,to,alpha,beta\n1,2,30,0\n2,3,30,0\n3,4,5,0\n3,5,5,0\n5,4,1e-9,0\n")
            .unwrap();
    let set = enumerate_paths(&overlap, n(1), n(4), 4).unwrap();
    assert_eq!(set.len(), 2);
    let ff = overlap.free_flow_costs();
    let p =
        probit_path_probabilities_mc(&set, &ff, &ff, gamma(), 1_000_000, &mut RngStream::new(3))
            .unwrap();
    assert!(
        (p.probabilities[0] - 0.5).abs() < 0.002,
        "{:?}",
        p.probabilities
    );
}

#[test]
fn normalization_and_error_scaling() {
    let net = sheffi();
    let set = enumerate_paths(&net, n(1), n(12), 11).unwrap();
    let ff = net.free_flow_costs();
    let small =
        probit_path_probabilities_mc(&set, &ff, &ff, gamma(), 2_000, &mut RngStream::new(1))
            .unwrap();
    let large =
        probit_path_probabilities_mc(&set, &ff, &ff, gamma(), 200_000, &mut RngStream::new(1))
            .unwrap();
    for p in [&small, &large] {
        let total: f64 = p.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(p.probabilities.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
    // The most likely path: errors shrink by sqrt(100) = 10.
    let k = (0..set.len())
        .max_by(|&a, &b| large.probabilities[a].total_cmp(&large.probabilities[b]))
        .unwrap();
    let ratio = small.std_errors[k] / large.std_errors[k];
    assert!((ratio - 10.0).abs() < 1.5, "ratio {ratio}");
}

#[test]
fn stochastic_loading_agrees_with_path_probabilities() {
    // Diamond with a cross link: four paths, two overlapping pairs.
    let net = parse_network(
        "from,to,alpha,beta\n1,2,10,0.01\n2,4,11,0.01\n1,3,12,0.01\n3,4,9,0.01\n2,3,2,0.01\n",
    )
    .unwrap();
    let demands = parse_demands("origin,destination,demand\n1,4,6\n").unwrap();
    let costs = net.link_costs(&[3.0, 2.0, 2.5, 3.5, 1.0]);
    let ff = net.free_flow_costs();
    let draws = 200_000;
    let set = enumerate_paths(&net, n(1), n(4), 3).unwrap();
    assert_eq!(set.len(), 3);
    let probs =
        probit_path_probabilities_mc(&set, &costs, &ff, gamma(), draws, &mut RngStream::new(5))
            .unwrap();
    let expected = link_flows_from_paths(&set, &probs.probabilities, 6.0);
    let loading = msa_stochastic_loading(
        &net,
        &costs,
        &demands,
        draws,
        gamma(),
        &mut RngStream::new(6),
    )
    .unwrap();
    for (a, (&x, &y)) in loading.flows.iter().zip(&expected).enumerate() {
        let p = y / 6.0;
        let se = 6.0 * (2.0 * p * (1.0 - p) / draws as f64).sqrt();
        assert!(
            (x - y).abs() <= 3.0 * se + 1e-12,
            "link {a}: {x} vs {y} (se {se})"
        );
    }
}

#[test]
fn williams_fixtures() {
    let draws = 1_000_000;
    let cases = [
        (two_routes(15.0, 15.0), 0.3, 0.5),
        (two_routes(18.0, 20.0), 0.3, 0.7232),
        (two_routes(5.0, 40.0), 0.01, 1.0),
    ];
    for (i, (net, g, want)) in cases.into_iter().enumerate() {
        let set = enumerate_paths(&net, n(1), n(2), 2).unwrap();
        let ff = net.free_flow_costs();
        let check = williams_gradient_check(
            &set,
            &ff,
            &ff,
            Gamma::new(g).unwrap(),
            0,
            None,
            draws,
            &mut RngStream::new(100 + i as u64),
        )
        .unwrap();
        assert!(
            (check.gradient - want).abs() < 0.01,
            "fixture {i}: {check:?}"
        );
        assert!(check.discrepancy < 0.01, "fixture {i}: {check:?}");
    }
}

#[test]
fn single_link_objective_closed_form() {
    let net = parse_network("from,to,alpha,beta\n1,2,4,0.02\n").unwrap();
    let demands = parse_demands("origin,destination,demand\n1,2,5\n").unwrap();
    let set = enumerate_paths(&net, n(1), n(2), 1).unwrap();
    let x = 5.0;
    let link = net.link(0);
    // E[min] over one path is the mean cost; floor truncation is negligible.
    let exact = -5.0 * link.cost(x) + x * link.cost(x) - link.cost_integral(x);
    let z = sue_objective_estimate(
        &net,
        &[x],
        &demands,
        &[set],
        gamma(),
        200_000,
        &mut RngStream::new(1),
    )
    .unwrap();
    assert!(
        (z.value - exact).abs() <= 3.0 * z.std_error.max(1e-12),
        "{z:?} vs {exact}"
    );
    assert!((exact + (4.0 * 5.0 + 0.02 * 5f64.powi(5) / 5.0)).abs() < 1e-9);
}

#[test]
fn empty_problem_objective_is_zero() {
    let net = parse_network("from,to,alpha,beta\n1,2,4,0.02\n").unwrap();
    let demands = parse_demands("origin,destination,demand\n").unwrap();
    let z = sue_objective_estimate(
        &net,
        &[0.0],
        &demands,
        &[],
        gamma(),
        10,
        &mut RngStream::new(1),
    )
    .unwrap();
    assert_eq!(z.value, 0.0);
}

#[test]
fn equilibrium_improves_objective() {
    let net = sheffi();
    let demands = parse_demands(EXAMPLE1_DEMANDS).unwrap();
    let set = enumerate_paths(&net, n(1), n(12), 11).unwrap();
    let solution = solve(&net, &demands, &SolverConfig::new(SolverKind::Physarum, 0)).unwrap();
    let mut naive = vec![0.0; net.link_count()];
    all_or_nothing(&net, &net.free_flow_costs(), &demands, &mut naive);
    let sets = [set];
    let at_solution = sue_objective_estimate(
        &net,
        &solution.link_flows,
        &demands,
        &sets,
        gamma(),
        50_000,
        &mut RngStream::new(1),
    )
    .unwrap();
    let at_naive = sue_objective_estimate(
        &net,
        &naive,
        &demands,
        &sets,
        gamma(),
        50_000,
        &mut RngStream::new(1),
    )
    .unwrap();
    let se = at_solution.std_error.hypot(at_naive.std_error);
    assert!(
        at_solution.value + 3.0 * se <= at_naive.value,
        "{at_solution:?} vs {at_naive:?}"
    );
}
