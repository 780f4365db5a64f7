//! Brute-force references for small networks: exact shortest paths, simple
//! path enumeration, Monte Carlo probit path probabilities, the SUE
//! objective estimator and a finite-difference check of the identity
//! `d E[min_k C_k] / d c_k = P_k`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::network::{DemandSet, Network, NodeId};
use crate::probit::{sample_into, Gamma, RngStream};

/// Enumeration aborts beyond this many paths.
pub const MAX_ENUMERATED_PATHS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(
        "more than {limit} paths from {origin} to {destination} (aborted after counting {counted})"
    )]
    TooManyPaths {
        origin: NodeId,
        destination: NodeId,
        limit: usize,
        counted: usize,
    },
    #[error("path set from {origin} to {destination} is empty")]
    NoPaths { origin: NodeId, destination: NodeId },
    #[error("path index {index} out of range for {count} paths")]
    PathIndex { index: usize, count: usize },
    #[error("no path set supplied for demand {origin}->{destination}")]
    MissingPathSet { origin: NodeId, destination: NodeId },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: NodeId,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // Min-heap on distance, then on node index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPathTree {
    pub source: NodeId,
    dist: Vec<f64>,
    pred: Vec<Option<usize>>,
}

impl ShortestPathTree {
    /// `None` when `node` is unreachable.
    pub fn distance(&self, node: NodeId) -> Option<f64> {
        let d = self.dist[node.slot()];
        d.is_finite().then_some(d)
    }

    /// Link index entering `node` on its shortest path.
    pub fn predecessor(&self, node: NodeId) -> Option<usize> {
        self.pred[node.slot()]
    }

    /// Links from the source to `target`, in travel order.
    pub fn path_links(&self, network: &Network, target: NodeId) -> Option<Vec<usize>> {
        self.distance(target)?;
        let mut links = Vec::new();
        let mut node = target;
        while let Some(a) = self.pred[node.slot()] {
            links.push(a);
            node = network.link(a).from;
        }
        links.reverse();
        Some(links)
    }
}

/// Exact shortest distances from `source`. Among equal-length
/// alternatives the predecessor with the smallest node index wins.
pub fn dijkstra(network: &Network, lengths: &[f64], source: NodeId) -> ShortestPathTree {
    assert_eq!(lengths.len(), network.link_count());
    let n = network.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source.slot()] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        node: source,
    });
    while let Some(Frontier { dist: d, node }) = heap.pop() {
        if done[node.slot()] {
            continue;
        }
        done[node.slot()] = true;
        for &a in network.outgoing(node) {
            let next = network.link(a).to;
            if done[next.slot()] {
                continue;
            }
            let candidate = d + lengths[a];
            let slot = next.slot();
            let better = candidate < dist[slot]
                || (candidate == dist[slot]
                    && pred[slot].is_some_and(|p| node < network.link(p).from));
            if better {
                let improved = candidate < dist[slot];
                dist[slot] = candidate;
                pred[slot] = Some(a);
                if improved {
                    heap.push(Frontier {
                        dist: candidate,
                        node: next,
                    });
                }
            }
        }
    }
    ShortestPathTree { source, dist, pred }
}

/// Simple directed paths for one OD pair with their link incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub origin: NodeId,
    pub destination: NodeId,
    /// Node sequences, lexicographically ordered.
    pub paths: Vec<Vec<NodeId>>,
    /// Link indices of each path, in travel order.
    pub path_links: Vec<Vec<usize>>,
    link_count: usize,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn link_count(&self) -> usize {
        self.link_count
    }

    /// `delta_{a,k}`: 1 when path `k` uses link `a`.
    pub fn incidence(&self, link: usize, path: usize) -> u8 {
        u8::from(self.path_links[path].contains(&link))
    }

    /// Link-by-path incidence matrix, row-major by link.
    pub fn incidence_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.link_count)
            .map(|a| (0..self.len()).map(|k| self.incidence(a, k)).collect())
            .collect()
    }
}

/// All simple paths from `origin` to `destination` with at most
/// `max_hops` links, in lexicographic node-sequence order.
pub fn enumerate_paths(
    network: &Network,
    origin: NodeId,
    destination: NodeId,
    max_hops: usize,
) -> Result<PathSet, OracleError> {
    if max_hops == 0 {
        return Err(OracleError::NonPositive("max_hops"));
    }
    // Out-links of every node sorted by head node give lexicographic order.
    let sorted: Vec<Vec<usize>> = network
        .nodes()
        .map(|v| {
            let mut out = network.outgoing(v).to_vec();
            out.sort_by_key(|&a| network.link(a).to);
            out
        })
        .collect();

    let mut paths = Vec::new();
    let mut path_links = Vec::new();
    let mut on_path = vec![false; network.node_count()];
    let mut nodes = vec![origin];
    let mut links: Vec<usize> = Vec::new();
    // Each frame holds the position in the current node's sorted out-list.
    let mut cursor = vec![0usize];
    on_path[origin.slot()] = true;

    while let Some(pos) = cursor.last_mut() {
        let here = *nodes.last().expect("nonempty path");
        let out = &sorted[here.slot()];
        if here == destination || links.len() == max_hops || *pos >= out.len() {
            if here == destination {
                if paths.len() == MAX_ENUMERATED_PATHS {
                    return Err(OracleError::TooManyPaths {
                        origin,
                        destination,
                        limit: MAX_ENUMERATED_PATHS,
                        counted: paths.len() + 1,
                    });
                }
                paths.push(nodes.clone());
                path_links.push(links.clone());
            }
            cursor.pop();
            on_path[here.slot()] = false;
            nodes.pop();
            links.pop();
            continue;
        }
        let a = out[*pos];
        *pos += 1;
        let next = network.link(a).to;
        if on_path[next.slot()] {
            continue;
        }
        on_path[next.slot()] = true;
        nodes.push(next);
        links.push(a);
        cursor.push(0);
    }

    Ok(PathSet {
        origin,
        destination,
        paths,
        path_links,
        link_count: network.link_count(),
    })
}

/// `c_k = sum_a t_a delta_{a,k}` for every path.
pub fn path_costs(pathset: &PathSet, link_costs: &[f64]) -> Vec<f64> {
    assert_eq!(link_costs.len(), pathset.link_count);
    pathset
        .path_links
        .iter()
        .map(|links| links.iter().map(|&a| link_costs[a]).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathProbabilities {
    pub probabilities: Vec<f64>,
    /// Binomial standard error of each entry.
    pub std_errors: Vec<f64>,
    pub draws: usize,
}

fn argmin(costs: &[f64]) -> usize {
    // First index wins ties.
    let mut best = 0;
    for (k, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = k;
        }
    }
    best
}

fn check_draws(draws: usize) -> Result<(), OracleError> {
    if draws == 0 {
        Err(OracleError::NonPositive("draws"))
    } else {
        Ok(())
    }
}

/// Frequency with which each path is perceived cheapest. Overlapping paths
/// share their link draws, which is what correlates probit path costs.
pub fn probit_path_probabilities_mc(
    pathset: &PathSet,
    mean_link_costs: &[f64],
    free_flow: &[f64],
    gamma: Gamma,
    draws: usize,
    rng: &mut RngStream,
) -> Result<PathProbabilities, OracleError> {
    if pathset.is_empty() {
        return Err(OracleError::NoPaths {
            origin: pathset.origin,
            destination: pathset.destination,
        });
    }
    check_draws(draws)?;
    let mut wins = vec![0usize; pathset.len()];
    let mut link_draw = vec![0.0; mean_link_costs.len()];
    for _ in 0..draws {
        sample_into(mean_link_costs, free_flow, gamma, rng, &mut link_draw);
        wins[argmin(&path_costs(pathset, &link_draw))] += 1;
    }
    let total = draws as f64;
    let probabilities: Vec<f64> = wins.iter().map(|&w| w as f64 / total).collect();
    let std_errors = probabilities
        .iter()
        .map(|p| (p * (1.0 - p) / total).sqrt())
        .collect();
    Ok(PathProbabilities {
        probabilities,
        std_errors,
        draws,
    })
}

/// Link flows implied by `f_k = q * P_k`, aggregated over the OD's paths.
pub fn link_flows_from_paths(pathset: &PathSet, probabilities: &[f64], demand: f64) -> Vec<f64> {
    let mut flows = vec![0.0; pathset.link_count];
    for (links, p) in pathset.path_links.iter().zip(probabilities) {
        for &a in links {
            flows[a] += demand * p;
        }
    }
    flows
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of the probit SUE objective
///
/// `Z(x) = -sum_rs q_rs E[min_k C_k | t(x)] + sum_a (x_a t_a(x_a) - int_0^{x_a} t_a)`
///
/// with `pathsets[i]` the enumerated paths of `demands[i]`. Each draw
/// shares one link realization across all OD pairs.
pub fn sue_objective_estimate(
    network: &Network,
    flows: &[f64],
    demands: &DemandSet,
    pathsets: &[PathSet],
    gamma: Gamma,
    draws: usize,
    rng: &mut RngStream,
) -> Result<Estimate, OracleError> {
    check_draws(draws)?;
    let mut sets = Vec::with_capacity(demands.demands().len());
    for d in demands.demands() {
        let set = pathsets
            .iter()
            .find(|p| p.origin == d.origin && p.destination == d.destination)
            .ok_or(OracleError::MissingPathSet {
                origin: d.origin,
                destination: d.destination,
            })?;
        if set.is_empty() {
            return Err(OracleError::NoPaths {
                origin: d.origin,
                destination: d.destination,
            });
        }
        sets.push((d.rate, set));
    }

    let link_term: f64 = network
        .links()
        .iter()
        .zip(flows)
        .map(|(l, &x)| x * l.cost(x) - l.cost_integral(x))
        .sum();

    let (mut sum, mut sum_sq) = (0.0, 0.0);
    if !sets.is_empty() {
        let mean = network.link_costs(flows);
        let free_flow = network.free_flow_costs();
        let mut link_draw = vec![0.0; mean.len()];
        for _ in 0..draws {
            sample_into(&mean, &free_flow, gamma, rng, &mut link_draw);
            let sample: f64 = sets
                .iter()
                .map(|(q, set)| {
                    let costs = path_costs(set, &link_draw);
                    q * costs.iter().copied().fold(f64::INFINITY, f64::min)
                })
                .sum();
            sum += sample;
            sum_sq += sample * sample;
        }
    }
    let n = draws as f64;
    let mean_min = sum / n;
    let variance = if draws > 1 {
        ((sum_sq - n * mean_min * mean_min) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(Estimate {
        value: -mean_min + link_term,
        std_error: (variance / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilliamsCheck {
    /// Centered finite difference of `E[min_k C_k]` in path `k`'s cost.
    pub gradient: f64,
    pub gradient_std_error: f64,
    /// Monte Carlo probability that path `k` is cheapest.
    pub probability: f64,
    pub probability_std_error: f64,
    pub discrepancy: f64,
}

/// Default finite-difference step: this fraction of the path's mean cost.
pub const WILLIAMS_STEP_FRACTION: f64 = 1e-2;

/// Compares the finite-difference derivative of `E[min]` with respect to
/// path `path_index`'s cost against that path's choice probability.
///
/// Both sides of the difference reuse the same link draws. `step` defaults
/// to 1% of the path's mean cost.
#[allow(clippy::too_many_arguments)]
pub fn williams_gradient_check(
    pathset: &PathSet,
    mean_link_costs: &[f64],
    free_flow: &[f64],
    gamma: Gamma,
    path_index: usize,
    step: Option<f64>,
    draws: usize,
    rng: &mut RngStream,
) -> Result<WilliamsCheck, OracleError> {
    if path_index >= pathset.len() {
        return Err(OracleError::PathIndex {
            index: path_index,
            count: pathset.len(),
        });
    }
    check_draws(draws)?;
    let step = step.unwrap_or_else(|| {
        WILLIAMS_STEP_FRACTION * path_costs(pathset, mean_link_costs)[path_index]
    });
    if !(step > 0.0) {
        return Err(OracleError::NonPositive("step"));
    }

    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut link_draw = vec![0.0; mean_link_costs.len()];
    for _ in 0..draws {
        sample_into(mean_link_costs, free_flow, gamma, rng, &mut link_draw);
        let mut costs = path_costs(pathset, &link_draw);
        let base = costs[path_index];
        costs[path_index] = base + step / 2.0;
        let upper = costs.iter().copied().fold(f64::INFINITY, f64::min);
        costs[path_index] = base - step / 2.0;
        let lower = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let diff = (upper - lower) / step;
        sum += diff;
        sum_sq += diff * diff;
    }
    let n = draws as f64;
    let gradient = sum / n;
    let variance = ((sum_sq - n * gradient * gradient) / (n - 1.0).max(1.0)).max(0.0);

    let probs =
        probit_path_probabilities_mc(pathset, mean_link_costs, free_flow, gamma, draws, rng)?;
    let probability = probs.probabilities[path_index];
    Ok(WilliamsCheck {
        gradient,
        gradient_std_error: (variance / n).sqrt(),
        probability,
        probability_std_error: probs.std_errors[path_index],
        discrepancy: (gradient - probability).abs(),
    })
}
