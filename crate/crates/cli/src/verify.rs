//! Solution checks behind `sue verify`.

use sue_core::oracle::{
    enumerate_paths, link_flows_from_paths, probit_path_probabilities_mc, OracleError,
};
use sue_core::solvers::msa_stochastic_loading;
use sue_core::{DemandSet, Gamma, Network, NodeId, RngStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Largest allowed net flow at nodes that are neither origin nor destination.
    pub conservation: f64,
    /// Largest allowed gap between an OD node's net flow and its demand.
    pub demand: f64,
    /// Flow above which a link counts as used.
    pub reverse: f64,
    /// Standard errors allowed between the two loadings at `t(flows)`.
    pub loading_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            conservation: 0.25,
            demand: 1.0,
            reverse: 0.05,
            loading_sigmas: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    /// Reported, never fails.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl Check {
    fn judged(name: &'static str, passed: bool, detail: String) -> Self {
        let status = if passed { Status::Pass } else { Status::Fail };
        Check {
            name,
            status,
            detail,
        }
    }
}

/// Net outflow expected at every node from the demands alone.
fn expected_balance(network: &Network, demands: &DemandSet) -> (Vec<f64>, Vec<bool>) {
    let mut balance = vec![0.0; network.node_count()];
    let mut is_od = vec![false; network.node_count()];
    for d in demands.demands() {
        balance[d.origin.slot()] += d.rate;
        balance[d.destination.slot()] -= d.rate;
        is_od[d.origin.slot()] = true;
        is_od[d.destination.slot()] = true;
    }
    (balance, is_od)
}

pub fn conservation(network: &Network, demands: &DemandSet, flows: &[f64], tol: f64) -> Check {
    let (_, is_od) = expected_balance(network, demands);
    let net = network.net_outflow(flows);
    let worst = net
        .iter()
        .enumerate()
        .filter(|(v, _)| !is_od[*v])
        .map(|(v, x)| (NodeId::from_slot(v), x.abs()))
        .fold(None, |acc: Option<(NodeId, f64)>, cur| match acc {
            Some(best) if best.1 >= cur.1 => Some(best),
            _ => Some(cur),
        });
    match worst {
        None => Check::judged("conservation", true, "no intermediate nodes".into()),
        Some((v, x)) => Check::judged(
            "conservation",
            x <= tol,
            format!("largest imbalance {x:.4} at node {v} (tolerance {tol})"),
        ),
    }
}

pub fn demand_satisfaction(
    network: &Network,
    demands: &DemandSet,
    flows: &[f64],
    tol: f64,
) -> Check {
    let (expected, is_od) = expected_balance(network, demands);
    let net = network.net_outflow(flows);
    let mut worst = (NodeId::from_slot(0), 0.0);
    for v in 0..network.node_count() {
        let gap = (net[v] - expected[v]).abs();
        if is_od[v] && gap > worst.1 {
            worst = (NodeId::from_slot(v), gap);
        }
    }
    Check::judged(
        "demand satisfaction",
        worst.1 <= tol,
        format!(
            "largest gap {:.4} at node {} (tolerance {tol})",
            worst.1, worst.0
        ),
    )
}

/// At most one direction of each node pair carries flow above `tol`.
pub fn reverse_links(network: &Network, flows: &[f64], tol: f64) -> Check {
    let mut offenders = Vec::new();
    for (a, link) in network.links().iter().enumerate() {
        if link.from < link.to {
            if let Some(b) = network.find_link(link.to, link.from) {
                if flows[a] > tol && flows[b] > tol {
                    offenders.push(format!("{}<->{}", link.from, link.to));
                }
            }
        }
    }
    let detail = if offenders.is_empty() {
        format!("no two-way flow above {tol}")
    } else {
        format!("two-way flow above {tol} on {}", offenders.join(", "))
    };
    Check::judged("reverse-link structure", offenders.is_empty(), detail)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadingOptions {
    pub gamma: Gamma,
    pub draws: usize,
    pub seed: u64,
    /// Skip when any OD pair has more simple paths than this.
    pub max_paths: usize,
}

/// Link flows `q * P` from enumerated paths, one vector per demand, or
/// why they are unavailable.
fn path_loading(
    network: &Network,
    demands: &DemandSet,
    costs: &[f64],
    options: LoadingOptions,
) -> Result<Vec<Vec<f64>>, (Status, String)> {
    let free_flow = network.free_flow_costs();
    let master = RngStream::new(options.seed);
    let mut per_demand = Vec::new();
    for (i, d) in demands.demands().iter().enumerate() {
        let paths =
            match enumerate_paths(network, d.origin, d.destination, network.node_count() - 1) {
                Ok(p) if p.len() <= options.max_paths => p,
                Ok(p) => {
                    let why = format!("{} paths for {} -> {}", p.len(), d.origin, d.destination);
                    return Err((Status::Skipped, why));
                }
                Err(OracleError::TooManyPaths { .. }) => {
                    let why = format!("too many paths for {} -> {}", d.origin, d.destination);
                    return Err((Status::Skipped, why));
                }
                Err(e) => return Err((Status::Fail, e.to_string())),
            };
        let mut rng = master.derive(i as u64 + 1);
        let probs = probit_path_probabilities_mc(
            &paths,
            costs,
            &free_flow,
            options.gamma,
            options.draws,
            &mut rng,
        )
        .map_err(|e| (Status::Fail, e.to_string()))?;
        per_demand.push(link_flows_from_paths(&paths, &probs.probabilities, d.rate));
    }
    Ok(per_demand)
}

fn summed(per_demand: &[Vec<f64>], links: usize) -> Vec<f64> {
    let mut total = vec![0.0; links];
    for v in per_demand {
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
    }
    total
}

fn largest_gap(a: &[f64], b: &[f64]) -> (usize, f64) {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc })
}

/// Checks the stochastic loading used by the solvers against path-based
/// probit probabilities, both at the travel times `t(flows)`. Each link
/// must agree within `sigmas` combined standard errors.
pub fn loading_agreement(
    network: &Network,
    demands: &DemandSet,
    flows: &[f64],
    options: LoadingOptions,
    sigmas: f64,
) -> Check {
    let name = "loading agreement";
    let costs = network.link_costs(flows);
    let per_demand = match path_loading(network, demands, &costs, options) {
        Ok(r) => r,
        Err((status, detail)) => {
            return Check {
                name,
                status,
                detail,
            }
        }
    };
    let reference = summed(&per_demand, network.link_count());
    let mut rng = RngStream::new(options.seed);
    let sampled = match msa_stochastic_loading(
        network,
        &costs,
        demands,
        options.draws,
        options.gamma,
        &mut rng,
    ) {
        Ok(l) => l.flows,
        Err(e) => return Check::judged(name, false, e.to_string()),
    };
    // Binomial errors per demand, added in standard deviation since the
    // sampled loading shares draws across demands. The variance floor of
    // one draw keeps shares near 0 or 1 from demanding exact agreement.
    let n = options.draws as f64;
    let mut worst = (0, 0.0, 0.0);
    for a in 0..network.link_count() {
        let mut sd = 0.0;
        for (d, loads) in demands.demands().iter().zip(&per_demand) {
            let p = (loads[a] / d.rate).clamp(0.0, 1.0);
            sd += d.rate * ((p * (1.0 - p)).max(1.0 / n) / n).sqrt();
        }
        let gap = (sampled[a] - reference[a]).abs();
        let combined = std::f64::consts::SQRT_2 * sd;
        let z = if gap == 0.0 {
            0.0
        } else if combined > 0.0 {
            gap / combined
        } else {
            f64::INFINITY
        };
        if z > worst.2 {
            worst = (a, gap, z);
        }
    }
    let link = network.link(worst.0);
    Check::judged(
        name,
        worst.2 <= sigmas,
        format!(
            "largest gap {:.4} ({:.2} standard errors) on {} -> {} over {} draws (limit {sigmas})",
            worst.1, worst.2, link.from, link.to, options.draws
        ),
    )
}

/// Distance from the fixed point `x = q * P(t(x))`. Reported only: on
/// congested links the loading map is steep, so approximate equilibria
/// show large residuals.
pub fn fixed_point_residual(
    network: &Network,
    demands: &DemandSet,
    flows: &[f64],
    options: LoadingOptions,
) -> Check {
    let name = "fixed-point residual";
    let costs = network.link_costs(flows);
    match path_loading(network, demands, &costs, options) {
        Ok(per_demand) => {
            let loaded = summed(&per_demand, network.link_count());
            let (a, gap) = largest_gap(&loaded, flows);
            let link = network.link(a);
            Check {
                name,
                status: Status::Info,
                detail: format!(
                    "largest |x - qP(t(x))| {gap:.4} on {} -> {}",
                    link.from, link.to
                ),
            }
        }
        Err((_, detail)) => Check {
            name,
            status: Status::Skipped,
            detail,
        },
    }
}

pub fn run_all(
    network: &Network,
    demands: &DemandSet,
    flows: &[f64],
    tol: &Tolerances,
    loading: LoadingOptions,
) -> Vec<Check> {
    vec![
        conservation(network, demands, flows, tol.conservation),
        demand_satisfaction(network, demands, flows, tol.demand),
        reverse_links(network, flows, tol.reverse),
        loading_agreement(network, demands, flows, loading, tol.loading_sigmas),
        fixed_point_residual(network, demands, flows, loading),
    ]
}
