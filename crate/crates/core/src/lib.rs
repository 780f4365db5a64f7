//! Probit stochastic user equilibrium (SUE) traffic assignment.
//!
//! Two solvers share the probit perception model and BPR link costs:
//! a Physarum-inspired solver ([`solvers::physarum_sue_solve`]) that loads
//! traffic through adaptive pressure-driven flow networks, and the Method of
//! Successive Averages ([`solvers::msa_solve`]) over Monte Carlo
//! all-or-nothing loadings. [`oracle`] holds brute-force references used to
//! check both.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod physarum;
pub mod probit;
pub mod solvers;

pub use network::{
    link_cost, parse_demands, parse_network, validate, DemandSet, Link, Network, NodeId, OdDemand,
};
pub use probit::{Gamma, RngStream};
pub use solvers::{
    compare_solutions, msa_solve, msa_solve_observed, physarum_sue_solve,
    physarum_sue_solve_observed, solve, FlowSolution, SolverConfig, SolverKind,
};
