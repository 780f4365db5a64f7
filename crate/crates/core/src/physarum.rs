//! Directed two-way Physarum dynamics.
//!
//! Each directed link carries its own conductivity `D` and length `L`. A
//! node pair `{i, j}` couples the pressure system through the combined
//! conductance `D_ij/L_ij + D_ji/L_ji` (an absent direction contributes
//! nothing), while the reported flux on link `i -> j` keeps only the
//! positive part of `D_ij/L_ij * (p_i - p_j)`. Conductivities then relax
//! halfway toward their flux: `D <- (D + Q) / 2`.
//!
//! Injections follow the Poisson sign convention: for every node `j`,
//! `sum_i g_ij (p_i - p_j) = injection(j)`, with `-I` at origins and `+I`
//! at destinations. Origins therefore sit at the highest pressure.

use thiserror::Error;

use crate::linalg::{cholesky_solve, DenseMatrix};
use crate::network::{validate, DemandSet, Diagnostic, Network, NodeId};
use crate::probit::RngStream;

/// Lower bound on every conductivity. Links at the floor are dead tubes.
pub const CONDUCTIVITY_FLOOR: f64 = 1e-12;
pub const DEFAULT_FLUX_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_STEPS: usize = 10_000;
/// Relative residual bound for a pressure solve: `1e-10 * (1 + |b|)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysarumError {
    #[error("injections must sum to zero, got {0:e}")]
    Unbalanced(f64),
    #[error("injection vector has {found} entries, network has {expected} nodes")]
    InjectionLength { expected: usize, found: usize },
    #[error("pressure system singular: nodes {nodes:?} are disconnected from reference node {reference}")]
    Disconnected {
        reference: NodeId,
        nodes: Vec<NodeId>,
    },
    #[error("pressure system not positive definite at node {0}")]
    Indefinite(NodeId),
    #[error("pressure residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("invalid problem: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("no convergence within {steps} steps (last flux change {last_change:e})")]
    NotConverged { steps: usize, last_change: f64 },
}

/// Net nodal inflow driving one pressure solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionVector(Vec<f64>);

impl InjectionVector {
    pub fn new(values: Vec<f64>) -> Result<Self, PhysarumError> {
        let sum: f64 = values.iter().sum();
        let scale: f64 = values.iter().map(|v| v.abs()).sum();
        if sum.abs() > 1e-12 * (1.0 + scale) {
            return Err(PhysarumError::Unbalanced(sum));
        }
        Ok(InjectionVector(values))
    }

    /// `+q` at each destination of `origin`, minus their total at `origin`.
    pub fn for_origin(network: &Network, demands: &DemandSet, origin: NodeId) -> Self {
        let mut values = vec![0.0; network.node_count()];
        let mut total = 0.0;
        for d in demands.from_origin(origin) {
            values[d.destination.slot()] += d.rate;
            total += d.rate;
        }
        values[origin.slot()] -= total;
        InjectionVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Independent uniform draw on [0.5, 1] per directed link, in link order.
pub fn init_conductivity(network: &Network, rng: &mut RngStream) -> Vec<f64> {
    (0..network.link_count())
        .map(|_| rng.uniform_in(0.5, 1.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureSolution {
    pub pressures: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysarumState {
    pub conductivity: Vec<f64>,
    pub lengths: Vec<f64>,
    pub pressures: Vec<f64>,
    pub fluxes: Vec<f64>,
}

impl PhysarumState {
    pub fn new(network: &Network, conductivity: Vec<f64>, lengths: Vec<f64>) -> Self {
        assert_eq!(conductivity.len(), network.link_count());
        assert_eq!(lengths.len(), network.link_count());
        PhysarumState {
            conductivity,
            lengths,
            pressures: vec![0.0; network.node_count()],
            fluxes: vec![0.0; network.link_count()],
        }
    }

    fn conductance(&self, link: usize) -> f64 {
        self.conductivity[link] / self.lengths[link]
    }

    /// Solves the pressure system with `p(reference) = 0`.
    ///
    /// Nodes outside the reference node's component carry no injection and
    /// are pinned to zero pressure; an injected node outside it is an error.
    pub fn solve_pressures(
        &self,
        network: &Network,
        injections: &InjectionVector,
        reference: NodeId,
    ) -> Result<PressureSolution, PhysarumError> {
        let n = network.node_count();
        let b = injections.values();
        if b.len() != n {
            return Err(PhysarumError::InjectionLength {
                expected: n,
                found: b.len(),
            });
        }

        let component = undirected_component(network, reference);
        let stranded: Vec<NodeId> = (0..n)
            .filter(|&v| !component[v] && b[v] != 0.0)
            .map(NodeId::from_slot)
            .collect();
        if !stranded.is_empty() {
            return Err(PhysarumError::Disconnected {
                reference,
                nodes: stranded,
            });
        }

        // Unknowns: component nodes other than the reference.
        let mut unknown = vec![usize::MAX; n];
        let mut order = Vec::new();
        for v in (0..n).filter(|&v| component[v] && v != reference.slot()) {
            unknown[v] = order.len();
            order.push(v);
        }

        // sum_i g (p_i - p_j) = b_j  <=>  (L p)_j = -b_j with L the weighted Laplacian.
        let mut lap = DenseMatrix::zeros(order.len());
        for (a, link) in network.links().iter().enumerate() {
            let g = self.conductance(a);
            let (i, j) = (unknown[link.from.slot()], unknown[link.to.slot()]);
            if i != usize::MAX {
                lap.add(i, i, g);
            }
            if j != usize::MAX {
                lap.add(j, j, g);
            }
            if i != usize::MAX && j != usize::MAX {
                lap.add(i, j, -g);
                lap.add(j, i, -g);
            }
        }
        let mut rhs: Vec<f64> = order.iter().map(|&v| -b[v]).collect();
        cholesky_solve(lap, &mut rhs)
            .map_err(|e| PhysarumError::Indefinite(NodeId::from_slot(order[e.0])))?;

        let mut pressures = vec![0.0; n];
        for (k, &v) in order.iter().enumerate() {
            pressures[v] = rhs[k];
        }

        let residual = self.residual(network, &pressures, b);
        let tolerance = RESIDUAL_TOLERANCE * (1.0 + injections.norm());
        if !(residual <= tolerance) {
            return Err(PhysarumError::Residual {
                residual,
                tolerance,
            });
        }
        Ok(PressureSolution {
            pressures,
            residual,
        })
    }

    /// Euclidean norm of `sum_i g_ij (p_i - p_j) - b_j` over all nodes.
    pub fn residual(&self, network: &Network, pressures: &[f64], b: &[f64]) -> f64 {
        let inflow = self.unclipped_net_inflow(network, pressures);
        inflow
            .iter()
            .zip(b)
            .map(|(f, b)| (f - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Signed per-link flow `D/L * (p_from - p_to)` before clipping.
    pub fn unclipped_flows(&self, network: &Network, pressures: &[f64]) -> Vec<f64> {
        network
            .links()
            .iter()
            .enumerate()
            .map(|(a, l)| self.conductance(a) * (pressures[l.from.slot()] - pressures[l.to.slot()]))
            .collect()
    }

    /// Net inflow at every node carried by the unclipped flows.
    pub fn unclipped_net_inflow(&self, network: &Network, pressures: &[f64]) -> Vec<f64> {
        let flows = self.unclipped_flows(network, pressures);
        network
            .net_outflow(&flows)
            .into_iter()
            .map(|x| -x)
            .collect()
    }

    /// Positive-part flux per directed link.
    pub fn compute_fluxes(&self, network: &Network, pressures: &[f64]) -> Vec<f64> {
        self.unclipped_flows(network, pressures)
            .into_iter()
            .map(|q| q.max(0.0))
            .collect()
    }

    /// `D <- max((D + Q) / 2, floor)`.
    pub fn update_conductivity(&mut self, fluxes: &[f64]) {
        assert_eq!(fluxes.len(), self.conductivity.len());
        for (d, &q) in self.conductivity.iter_mut().zip(fluxes) {
            debug_assert!(q >= 0.0);
            *d = ((*d + q) / 2.0).max(CONDUCTIVITY_FLOOR);
        }
    }

    /// Solve, clip, adapt. Stores pressures and fluxes; returns the residual.
    pub fn step(
        &mut self,
        network: &Network,
        injections: &InjectionVector,
        reference: NodeId,
    ) -> Result<f64, PhysarumError> {
        let solution = self.solve_pressures(network, injections, reference)?;
        let fluxes = self.compute_fluxes(network, &solution.pressures);
        self.update_conductivity(&fluxes);
        self.pressures = solution.pressures;
        self.fluxes = fluxes;
        Ok(solution.residual)
    }

    /// Links whose conductivity sits at the floor.
    pub fn dead_links(&self) -> Vec<usize> {
        self.conductivity
            .iter()
            .enumerate()
            .filter(|(_, &d)| d <= CONDUCTIVITY_FLOOR)
            .map(|(a, _)| a)
            .collect()
    }
}

fn undirected_component(network: &Network, start: NodeId) -> Vec<bool> {
    let mut seen = vec![false; network.node_count()];
    let mut stack = vec![start];
    seen[start.slot()] = true;
    while let Some(v) = stack.pop() {
        let neighbours = network
            .outgoing(v)
            .iter()
            .map(|&a| network.link(a).to)
            .chain(network.incoming(v).iter().map(|&a| network.link(a).from));
        for w in neighbours {
            if !seen[w.slot()] {
                seen[w.slot()] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// One pressure system per distinct origin, each with its own conductivities.
#[derive(Debug, Clone)]
pub struct OriginSolve {
    pub origin: NodeId,
    pub reference: NodeId,
    pub injections: InjectionVector,
    pub state: PhysarumState,
}

/// Result of advancing every origin's state by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Clipped fluxes summed over origins, per link.
    pub fluxes: Vec<f64>,
    /// Largest pressure residual among the origin solves.
    pub residual: f64,
}

/// Per-origin decomposition of a multi-OD Physarum problem. Flows of
/// different origins are summed in ascending origin order.
#[derive(Debug, Clone)]
pub struct PhysarumSystem {
    solves: Vec<OriginSolve>,
    link_count: usize,
}

impl PhysarumSystem {
    /// Initializes conductivities for each origin, in ascending origin order.
    pub fn new(
        network: &Network,
        demands: &DemandSet,
        lengths: &[f64],
        rng: &mut RngStream,
    ) -> Result<Self, PhysarumError> {
        let diagnostics = validate(network, demands);
        if !diagnostics.is_empty() {
            return Err(PhysarumError::Invalid(diagnostics));
        }
        let solves = demands
            .origins()
            .into_iter()
            .map(|origin| {
                let reference = demands
                    .from_origin(origin)
                    .map(|d| d.destination)
                    .min()
                    .expect("origin has at least one demand");
                let conductivity = init_conductivity(network, rng);
                OriginSolve {
                    origin,
                    reference,
                    injections: InjectionVector::for_origin(network, demands, origin),
                    state: PhysarumState::new(network, conductivity, lengths.to_vec()),
                }
            })
            .collect();
        Ok(PhysarumSystem {
            solves,
            link_count: network.link_count(),
        })
    }

    pub fn solves(&self) -> &[OriginSolve] {
        &self.solves
    }

    /// Sets `lengths` on every origin state and advances each by one step.
    pub fn step(
        &mut self,
        network: &Network,
        lengths: &[f64],
    ) -> Result<StepReport, PhysarumError> {
        let mut fluxes = vec![0.0; self.link_count];
        let mut residual: f64 = 0.0;
        for solve in &mut self.solves {
            solve.state.lengths.copy_from_slice(lengths);
            let r = solve
                .state
                .step(network, &solve.injections, solve.reference)?;
            residual = residual.max(r);
            for (total, q) in fluxes.iter_mut().zip(&solve.state.fluxes) {
                *total += q;
            }
        }
        Ok(StepReport { fluxes, residual })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub flows: Vec<f64>,
    pub steps: usize,
    pub final_change: f64,
}

/// Runs the fixed-length dynamics until the max-norm flux change between
/// consecutive steps is at most `flux_tolerance`.
pub fn physarum_load(
    network: &Network,
    lengths: &[f64],
    demands: &DemandSet,
    rng: &mut RngStream,
    max_steps: usize,
    flux_tolerance: f64,
) -> Result<LoadOutcome, PhysarumError> {
    let mut system = PhysarumSystem::new(network, demands, lengths, rng)?;
    let mut previous = vec![0.0; network.link_count()];
    let mut change = f64::INFINITY;
    for step in 1..=max_steps {
        let report = system.step(network, lengths)?;
        change = max_abs_diff(&report.fluxes, &previous);
        previous = report.fluxes;
        if change <= flux_tolerance {
            return Ok(LoadOutcome {
                flows: previous,
                steps: step,
                final_change: change,
            });
        }
    }
    Err(PhysarumError::NotConverged {
        steps: max_steps,
        last_change: change,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
