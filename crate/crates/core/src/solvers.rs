//! Probit SUE solvers: the Method of Successive Averages over Monte Carlo
//! all-or-nothing loadings, and the Physarum flow-adaptation solver that
//! replaces the all-or-nothing step with persistent Physarum dynamics.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::network::{validate, DemandSet, Diagnostic, Network};
use crate::oracle::dijkstra;
use crate::physarum::{PhysarumError, PhysarumSystem};
use crate::probit::{sample_into, Gamma, RngStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid problem: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("vectors misaligned: {0} versus {1} entries")]
    Misaligned(usize, usize),
    #[error(transparent)]
    Physarum(#[from] PhysarumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Physarum,
    Msa,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Physarum => "physarum",
            SolverKind::Msa => "msa",
        })
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "physarum" => Ok(SolverKind::Physarum),
            "msa" => Ok(SolverKind::Msa),
            other => Err(format!(
                "unknown solver `{other}` (expected physarum or msa)"
            )),
        }
    }
}

/// Which flows drive the Physarum length update `C <- (C + t(x)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostUpdateSource {
    /// The previous outer iteration's auxiliary flows. With several inner
    /// draws per outer iteration this feedback overshoots and the outer
    /// average settles away from the equilibrium.
    Auxiliary,
    /// The running outer average (the current solution).
    #[default]
    Averaged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: Gamma,
    /// Outer stopping tolerance.
    pub epsilon0: f64,
    /// Monte Carlo draws per outer iteration.
    pub inner_iterations: usize,
    pub seed: u64,
    pub max_outer: usize,
    pub solver_kind: SolverKind,
    pub cost_update: CostUpdateSource,
}

impl SolverConfig {
    pub const DEFAULT_GAMMA: f64 = 0.3;
    pub const DEFAULT_EPSILON: f64 = 0.1;
    pub const DEFAULT_INNER: usize = 1;
    pub const DEFAULT_MAX_OUTER: usize = 100_000;

    pub fn new(solver_kind: SolverKind, seed: u64) -> Self {
        SolverConfig {
            gamma: Gamma::new(Self::DEFAULT_GAMMA).expect("positive"),
            epsilon0: Self::DEFAULT_EPSILON,
            inner_iterations: Self::DEFAULT_INNER,
            seed,
            max_outer: Self::DEFAULT_MAX_OUTER,
            solver_kind,
            cost_update: CostUpdateSource::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.epsilon0 > 0.0) || !self.epsilon0.is_finite() {
            return Err(SolverError::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon0
            )));
        }
        if self.inner_iterations == 0 {
            return Err(SolverError::Config(
                "inner iterations must be at least 1".into(),
            ));
        }
        if self.max_outer == 0 {
            return Err(SolverError::Config(
                "max outer iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Bookkeeping for one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterRecord {
    pub epsilon: f64,
    pub elapsed_ms: f64,
    pub truncations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub link_flows: Vec<f64>,
    pub outer_iterations: usize,
    /// Wall time in seconds.
    pub elapsed: f64,
    pub trace: Vec<OuterRecord>,
    pub truncation_count: usize,
    /// False when `max_outer` stopped the run.
    pub converged: bool,
}

impl FlowSolution {
    pub fn epsilon_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.epsilon).collect()
    }

    pub fn final_epsilon(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.epsilon)
    }
}

/// Euclidean distance between two flow vectors.
pub fn convergence_metric(prev: &[f64], curr: &[f64]) -> Result<f64, SolverError> {
    if prev.len() != curr.len() {
        return Err(SolverError::Misaligned(prev.len(), curr.len()));
    }
    Ok(euclidean(prev, curr))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_problem(network: &Network, demands: &DemandSet) -> Result<(), SolverError> {
    let diagnostics = validate(network, demands);
    if diagnostics.is_empty() {
        Ok(())
    } else {
        Err(SolverError::Invalid(diagnostics))
    }
}

/// Loads each OD's full demand on its shortest path under `lengths`.
/// Adds into `flows`.
pub fn all_or_nothing(network: &Network, lengths: &[f64], demands: &DemandSet, flows: &mut [f64]) {
    for origin in demands.origins() {
        let tree = dijkstra(network, lengths, origin);
        for d in demands.from_origin(origin) {
            let path = tree
                .path_links(network, d.destination)
                .expect("destination reachable under positive lengths");
            for a in path {
                flows[a] += d.rate;
            }
        }
    }
}

/// Auxiliary flows of one stochastic loading, plus truncation count.
#[derive(Debug, Clone, PartialEq)]
pub struct Loading {
    pub flows: Vec<f64>,
    pub truncations: usize,
}

/// Averages `inner_iterations` all-or-nothing loadings, each on a fresh
/// draw of perceived link times around `mean_costs`.
pub fn msa_stochastic_loading(
    network: &Network,
    mean_costs: &[f64],
    demands: &DemandSet,
    inner_iterations: usize,
    gamma: Gamma,
    rng: &mut RngStream,
) -> Result<Loading, SolverError> {
    check_problem(network, demands)?;
    if mean_costs.len() != network.link_count() {
        return Err(SolverError::Misaligned(
            mean_costs.len(),
            network.link_count(),
        ));
    }
    Ok(stochastic_loading(
        network,
        mean_costs,
        &network.free_flow_costs(),
        demands,
        inner_iterations,
        gamma,
        rng,
    ))
}

fn stochastic_loading(
    network: &Network,
    mean_costs: &[f64],
    free_flow: &[f64],
    demands: &DemandSet,
    inner_iterations: usize,
    gamma: Gamma,
    rng: &mut RngStream,
) -> Loading {
    let m = network.link_count();
    let mut average = vec![0.0; m];
    let mut draw = vec![0.0; m];
    let mut loading = vec![0.0; m];
    let mut truncations = 0;
    for i in 1..=inner_iterations {
        truncations += sample_into(mean_costs, free_flow, gamma, rng, &mut draw);
        loading.fill(0.0);
        all_or_nothing(network, &draw, demands, &mut loading);
        let w = 1.0 / i as f64;
        for (avg, y) in average.iter_mut().zip(&loading) {
            *avg += w * (y - *avg);
        }
    }
    Loading {
        flows: average,
        truncations,
    }
}

/// Per-iteration hook: outer iteration number and the current flows.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &[f64]);

pub fn msa_solve(
    network: &Network,
    demands: &DemandSet,
    config: &SolverConfig,
) -> Result<FlowSolution, SolverError> {
    msa_solve_observed(network, demands, config, &mut |_, _| {})
}

/// MSA with the step `x <- x + (y - x) / n`, stopping once
/// `|x^(n+1) - y^n| <= epsilon0`.
///
/// At `n = 1` the unit step makes the new flows equal the auxiliary flows,
/// so the distance is identically zero; the stopping test starts at `n = 2`.
pub fn msa_solve_observed(
    network: &Network,
    demands: &DemandSet,
    config: &SolverConfig,
    observer: Observer<'_>,
) -> Result<FlowSolution, SolverError> {
    config.validate()?;
    check_problem(network, demands)?;
    let start = Instant::now();
    let mut rng = RngStream::new(config.seed);
    let free_flow = network.free_flow_costs();
    let initial = stochastic_loading(
        network,
        &free_flow,
        &free_flow,
        demands,
        config.inner_iterations,
        config.gamma,
        &mut rng,
    );
    let mut flows = initial.flows;
    let mut truncation_count = initial.truncations;
    let mut trace = Vec::new();
    let mut converged = false;

    for n in 1..=config.max_outer {
        let costs = network.link_costs(&flows);
        let aux = stochastic_loading(
            network,
            &costs,
            &free_flow,
            demands,
            config.inner_iterations,
            config.gamma,
            &mut rng,
        );
        let step = 1.0 / n as f64;
        for (x, y) in flows.iter_mut().zip(&aux.flows) {
            *x += step * (y - *x);
        }
        let epsilon = euclidean(&flows, &aux.flows);
        truncation_count += aux.truncations;
        trace.push(OuterRecord {
            epsilon,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            truncations: aux.truncations,
        });
        observer(n, &flows);
        if n >= 2 && epsilon <= config.epsilon0 {
            converged = true;
            break;
        }
    }

    Ok(FlowSolution {
        link_flows: flows,
        outer_iterations: trace.len(),
        elapsed: start.elapsed().as_secs_f64(),
        trace,
        truncation_count,
        converged,
    })
}

/// One Monte Carlo pass of the Physarum solver: every draw samples link
/// lengths around `current_lengths`, advances the persistent dynamics by a
/// single step and folds the resulting fluxes into a running average.
pub fn physarum_inner(
    network: &Network,
    current_lengths: &[f64],
    inner_iterations: usize,
    gamma: Gamma,
    system: &mut PhysarumSystem,
    rng: &mut RngStream,
) -> Result<Loading, SolverError> {
    let m = network.link_count();
    if current_lengths.len() != m {
        return Err(SolverError::Misaligned(current_lengths.len(), m));
    }
    let free_flow = network.free_flow_costs();
    let mut average = vec![0.0; m];
    let mut lengths = vec![0.0; m];
    let mut truncations = 0;
    for i in 1..=inner_iterations {
        truncations += sample_into(current_lengths, &free_flow, gamma, rng, &mut lengths);
        let report = system.step(network, &lengths)?;
        let w = 1.0 / i as f64;
        for (avg, q) in average.iter_mut().zip(&report.fluxes) {
            *avg += w * (q - *avg);
        }
    }
    Ok(Loading {
        flows: average,
        truncations,
    })
}

pub fn physarum_sue_solve(
    network: &Network,
    demands: &DemandSet,
    config: &SolverConfig,
) -> Result<FlowSolution, SolverError> {
    physarum_sue_solve_observed(network, demands, config, &mut |_, _| {})
}

/// Physarum SUE: lengths relax toward the current travel times,
/// `C^n = (C^(n-1) + t(Q))/2` with `C^0` the free-flow times and `Q` chosen
/// by `config.cost_update`, and the
/// auxiliary fluxes are averaged over outer iterations. Conductivities are
/// initialized once and carried across all iterations. Stops when the
/// outer average moves by at most `epsilon0`.
pub fn physarum_sue_solve_observed(
    network: &Network,
    demands: &DemandSet,
    config: &SolverConfig,
    observer: Observer<'_>,
) -> Result<FlowSolution, SolverError> {
    config.validate()?;
    check_problem(network, demands)?;
    let start = Instant::now();
    let mut rng = RngStream::new(config.seed);
    let m = network.link_count();
    let mut lengths = network.free_flow_costs();
    let mut system = PhysarumSystem::new(network, demands, &lengths, &mut rng)?;
    let mut auxiliary = vec![0.0; m];
    let mut average = vec![0.0; m];
    let mut trace = Vec::new();
    let mut truncation_count = 0;
    let mut converged = false;

    for n in 1..=config.max_outer {
        let driver = match config.cost_update {
            CostUpdateSource::Auxiliary => &auxiliary,
            CostUpdateSource::Averaged => &average,
        };
        for ((c, link), &x) in lengths.iter_mut().zip(network.links()).zip(driver) {
            *c = (*c + link.cost(x)) / 2.0;
        }
        let aux = physarum_inner(
            network,
            &lengths,
            config.inner_iterations,
            config.gamma,
            &mut system,
            &mut rng,
        )?;
        auxiliary = aux.flows;
        let w = 1.0 / n as f64;
        let mut epsilon_sq = 0.0;
        for (avg, q) in average.iter_mut().zip(&auxiliary) {
            let delta = w * (q - *avg);
            *avg += delta;
            epsilon_sq += delta * delta;
        }
        let epsilon = epsilon_sq.sqrt();
        truncation_count += aux.truncations;
        trace.push(OuterRecord {
            epsilon,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            truncations: aux.truncations,
        });
        observer(n, &average);
        if epsilon <= config.epsilon0 {
            converged = true;
            break;
        }
    }

    Ok(FlowSolution {
        link_flows: average,
        outer_iterations: trace.len(),
        elapsed: start.elapsed().as_secs_f64(),
        trace,
        truncation_count,
        converged,
    })
}

/// Dispatches on `config.solver_kind`.
pub fn solve(
    network: &Network,
    demands: &DemandSet,
    config: &SolverConfig,
) -> Result<FlowSolution, SolverError> {
    match config.solver_kind {
        SolverKind::Physarum => physarum_sue_solve(network, demands, config),
        SolverKind::Msa => msa_solve(network, demands, config),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub differences: Vec<f64>,
    pub max: f64,
}

/// Elementwise absolute difference of two link-flow vectors.
pub fn compare_solutions(a: &[f64], b: &[f64]) -> Result<Comparison, SolverError> {
    if a.len() != b.len() {
        return Err(SolverError::Misaligned(a.len(), b.len()));
    }
    let differences: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    let max = differences.iter().copied().fold(0.0, f64::max);
    Ok(Comparison { differences, max })
}
