//! Problem instances: directed road networks with BPR link costs and
//! origin-destination demand rates.
//!
//! Both file formats are comma-separated with a fixed header line. Blank
//! lines and lines starting with `#` are skipped. Node ids are 1-based and
//! the node set of a network is `1..=max id` seen in its links.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

pub const NETWORK_HEADER: &str = "from,to,alpha,beta";
pub const DEMAND_HEADER: &str = "origin,destination,demand";

/// 1-based node identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    /// Returns `None` for 0.
    pub fn new(index: u32) -> Option<Self> {
        (index >= 1).then_some(NodeId(index))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Position of this node in per-node vectors.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_slot(slot: usize) -> Self {
        NodeId(slot as u32 + 1)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed link with BPR cost `alpha + beta * flow^4`.
///
/// `alpha` is the free-flow travel time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("link flow must be nonnegative, got {0}")]
pub struct NegativeFlow(pub f64);

impl Link {
    /// Travel time at `flow`.
    ///
    /// Panics if `flow` is negative; see [`Link::try_cost`].
    pub fn cost(&self, flow: f64) -> f64 {
        assert!(flow >= 0.0, "link flow must be nonnegative, got {flow}");
        self.alpha + self.beta * flow.powi(4)
    }

    pub fn try_cost(&self, flow: f64) -> Result<f64, NegativeFlow> {
        if flow >= 0.0 {
            Ok(self.cost(flow))
        } else {
            Err(NegativeFlow(flow))
        }
    }

    pub fn free_flow_cost(&self) -> f64 {
        self.alpha
    }

    /// Closed form of the integral of the cost from 0 to `flow`.
    pub fn cost_integral(&self, flow: f64) -> f64 {
        self.alpha * flow + self.beta * flow.powi(5) / 5.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate link {0}->{1}")]
    DuplicateLink(NodeId, NodeId),
    #[error("alpha must be positive on link {from}->{to}, got {alpha}")]
    NonPositiveAlpha {
        from: NodeId,
        to: NodeId,
        alpha: f64,
    },
    #[error("beta must be nonnegative on link {from}->{to}, got {beta}")]
    NegativeBeta { from: NodeId, to: NodeId, beta: f64 },
    #[error("duplicate demand {0}->{1}")]
    DuplicateDemand(NodeId, NodeId),
    #[error("demand origin equals destination ({0})")]
    SameOriginDestination(NodeId),
    #[error("demand rate must be positive for {origin}->{destination}, got {rate}")]
    NonPositiveRate {
        origin: NodeId,
        destination: NodeId,
        rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("missing header line `{expected}`")]
    MissingHeader { expected: &'static str },
    #[error("line {line}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        line: u64,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid {field} `{value}`")]
    InvalidField {
        line: u64,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: {source}")]
    Invalid { line: u64, source: NetworkError },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
}

impl ParseError {
    /// 1-based line the error was reported at, if any.
    pub fn line(&self) -> Option<u64> {
        match self {
            ParseError::MissingHeader { .. } => None,
            ParseError::BadHeader { line, .. }
            | ParseError::ColumnCount { line, .. }
            | ParseError::InvalidField { line, .. }
            | ParseError::Invalid { line, .. }
            | ParseError::Csv { line, .. } => Some(*line),
        }
    }
}

/// Directed network. Immutable once built; link order is ingestion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    node_count: usize,
    links: Vec<Link>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    by_pair: HashMap<(NodeId, NodeId), usize>,
}

impl Network {
    pub fn new(links: Vec<Link>) -> Result<Self, NetworkError> {
        let mut by_pair = HashMap::with_capacity(links.len());
        for (idx, link) in links.iter().enumerate() {
            check_link(link)?;
            if by_pair.insert((link.from, link.to), idx).is_some() {
                return Err(NetworkError::DuplicateLink(link.from, link.to));
            }
        }
        let node_count = links
            .iter()
            .map(|l| l.from.get().max(l.to.get()) as usize)
            .max()
            .unwrap_or(0);
        let mut outgoing = vec![Vec::new(); node_count];
        let mut incoming = vec![Vec::new(); node_count];
        for (idx, link) in links.iter().enumerate() {
            outgoing[link.from.slot()].push(idx);
            incoming[link.to.slot()].push(idx);
        }
        Ok(Network {
            node_count,
            links,
            outgoing,
            incoming,
            by_pair,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, idx: usize) -> &Link {
        &self.links[idx]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId::from_slot)
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        node.slot() < self.node_count
    }

    /// Indices of links leaving `node`, in ingestion order.
    pub fn outgoing(&self, node: NodeId) -> &[usize] {
        &self.outgoing[node.slot()]
    }

    /// Indices of links entering `node`, in ingestion order.
    pub fn incoming(&self, node: NodeId) -> &[usize] {
        &self.incoming[node.slot()]
    }

    pub fn find_link(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.by_pair.get(&(from, to)).copied()
    }

    pub fn free_flow_costs(&self) -> Vec<f64> {
        self.links.iter().map(Link::free_flow_cost).collect()
    }

    /// Per-link travel times at `flows`. Panics on a negative flow.
    pub fn link_costs(&self, flows: &[f64]) -> Vec<f64> {
        assert_eq!(flows.len(), self.links.len(), "flows misaligned with links");
        self.links
            .iter()
            .zip(flows)
            .map(|(l, &x)| l.cost(x))
            .collect()
    }

    /// Net outflow (out minus in) at every node under `flows`.
    pub fn net_outflow(&self, flows: &[f64]) -> Vec<f64> {
        let mut net = vec![0.0; self.node_count];
        for (link, &x) in self.links.iter().zip(flows) {
            net[link.from.slot()] += x;
            net[link.to.slot()] -= x;
        }
        net
    }

    /// Nodes reachable from `source` along directed links.
    pub fn reachable_from(&self, source: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        if !self.contains_node(source) {
            return seen;
        }
        let mut queue = VecDeque::from([source]);
        seen[source.slot()] = true;
        while let Some(node) = queue.pop_front() {
            for &idx in self.outgoing(node) {
                let next = self.links[idx].to;
                if !seen[next.slot()] {
                    seen[next.slot()] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// Serializes to the network file format. Reparsing yields an equal network.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(NETWORK_HEADER);
        out.push('\n');
        for l in &self.links {
            out.push_str(&format!("{},{},{},{}\n", l.from, l.to, l.alpha, l.beta));
        }
        out
    }
}

fn check_link(link: &Link) -> Result<(), NetworkError> {
    if link.from == link.to {
        return Err(NetworkError::SelfLoop(link.from));
    }
    if !(link.alpha > 0.0) || !link.alpha.is_finite() {
        return Err(NetworkError::NonPositiveAlpha {
            from: link.from,
            to: link.to,
            alpha: link.alpha,
        });
    }
    if !(link.beta >= 0.0) || !link.beta.is_finite() {
        return Err(NetworkError::NegativeBeta {
            from: link.from,
            to: link.to,
            beta: link.beta,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdDemand {
    pub origin: NodeId,
    pub destination: NodeId,
    pub rate: f64,
}

/// Ordered OD demands with no repeated pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemandSet {
    demands: Vec<OdDemand>,
}

impl DemandSet {
    pub fn new(demands: Vec<OdDemand>) -> Result<Self, NetworkError> {
        let mut seen = HashSet::with_capacity(demands.len());
        for d in &demands {
            check_demand(d)?;
            if !seen.insert((d.origin, d.destination)) {
                return Err(NetworkError::DuplicateDemand(d.origin, d.destination));
            }
        }
        Ok(DemandSet { demands })
    }

    pub fn demands(&self) -> &[OdDemand] {
        &self.demands
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    /// Distinct origins in ascending node order.
    pub fn origins(&self) -> Vec<NodeId> {
        let mut origins: Vec<NodeId> = self.demands.iter().map(|d| d.origin).collect();
        origins.sort_unstable();
        origins.dedup();
        origins
    }

    pub fn from_origin(&self, origin: NodeId) -> impl Iterator<Item = &OdDemand> {
        self.demands.iter().filter(move |d| d.origin == origin)
    }

    pub fn total_from(&self, origin: NodeId) -> f64 {
        self.from_origin(origin).map(|d| d.rate).sum()
    }

    pub fn total(&self) -> f64 {
        self.demands.iter().map(|d| d.rate).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(DEMAND_HEADER);
        out.push('\n');
        for d in &self.demands {
            out.push_str(&format!("{},{},{}\n", d.origin, d.destination, d.rate));
        }
        out
    }
}

fn check_demand(d: &OdDemand) -> Result<(), NetworkError> {
    if d.origin == d.destination {
        return Err(NetworkError::SameOriginDestination(d.origin));
    }
    if !(d.rate > 0.0) || !d.rate.is_finite() {
        return Err(NetworkError::NonPositiveRate {
            origin: d.origin,
            destination: d.destination,
            rate: d.rate,
        });
    }
    Ok(())
}

/// Data rows of a headered CSV document with their 1-based line numbers.
fn data_rows(
    text: &str,
    header: &'static str,
    columns: usize,
) -> Result<Vec<(u64, Vec<String>)>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut saw_header = false;
    for record in reader.records() {
        let record = record.map_err(|e| ParseError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if !saw_header {
            let found = record.iter().collect::<Vec<_>>().join(",");
            if found != header {
                return Err(ParseError::BadHeader {
                    line,
                    expected: header,
                    found,
                });
            }
            saw_header = true;
            continue;
        }
        if record.len() != columns {
            return Err(ParseError::ColumnCount {
                line,
                expected: columns,
                found: record.len(),
            });
        }
        rows.push((line, record.iter().map(str::to_owned).collect()));
    }
    if !saw_header {
        return Err(ParseError::MissingHeader { expected: header });
    }
    Ok(rows)
}

fn parse_node(line: u64, field: &'static str, value: &str) -> Result<NodeId, ParseError> {
    value
        .parse::<u32>()
        .ok()
        .and_then(NodeId::new)
        .ok_or_else(|| ParseError::InvalidField {
            line,
            field,
            value: value.to_owned(),
        })
}

fn parse_real(line: u64, field: &'static str, value: &str) -> Result<f64, ParseError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ParseError::InvalidField {
            line,
            field,
            value: value.to_owned(),
        })
}

/// Parses a `from,to,alpha,beta` network file.
pub fn parse_network(text: &str) -> Result<Network, ParseError> {
    let mut links = Vec::new();
    let mut seen = HashSet::new();
    for (line, row) in data_rows(text, NETWORK_HEADER, 4)? {
        let link = Link {
            from: parse_node(line, "from", &row[0])?,
            to: parse_node(line, "to", &row[1])?,
            alpha: parse_real(line, "alpha", &row[2])?,
            beta: parse_real(line, "beta", &row[3])?,
        };
        check_link(&link).map_err(|source| ParseError::Invalid { line, source })?;
        if !seen.insert((link.from, link.to)) {
            return Err(ParseError::Invalid {
                line,
                source: NetworkError::DuplicateLink(link.from, link.to),
            });
        }
        links.push(link);
    }
    // Rows were checked individually above, so construction cannot fail.
    Ok(Network::new(links).expect("validated rows"))
}

/// Parses an `origin,destination,demand` file.
pub fn parse_demands(text: &str) -> Result<DemandSet, ParseError> {
    let mut demands = Vec::new();
    let mut seen = HashSet::new();
    for (line, row) in data_rows(text, DEMAND_HEADER, 3)? {
        let demand = OdDemand {
            origin: parse_node(line, "origin", &row[0])?,
            destination: parse_node(line, "destination", &row[1])?,
            rate: parse_real(line, "demand", &row[2])?,
        };
        check_demand(&demand).map_err(|source| ParseError::Invalid { line, source })?;
        if !seen.insert((demand.origin, demand.destination)) {
            return Err(ParseError::Invalid {
                line,
                source: NetworkError::DuplicateDemand(demand.origin, demand.destination),
            });
        }
        demands.push(demand);
    }
    Ok(DemandSet::new(demands).expect("validated rows"))
}

/// Travel time `alpha + beta * flow^4`, rejecting negative flow.
pub fn link_cost(link: &Link, flow: f64) -> Result<f64, NegativeFlow> {
    link.try_cost(flow)
}

pub fn free_flow_cost(link: &Link) -> f64 {
    link.free_flow_cost()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnknownNode { demand: usize, node: NodeId },
    Unreachable { origin: NodeId, destination: NodeId },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UnknownNode { demand, node } => {
                write!(f, "demand #{} references unknown node {node}", demand + 1)
            }
            Diagnostic::Unreachable {
                origin,
                destination,
            } => write!(
                f,
                "destination {destination} is unreachable from origin {origin}"
            ),
        }
    }
}

/// Checks that every demand refers to existing nodes and that each
/// destination is reachable from its origin. Empty means valid.
pub fn validate(network: &Network, demands: &DemandSet) -> Vec<Diagnostic> {
    let mut diagnostics = Vec::new();
    let mut reach: HashMap<NodeId, Vec<bool>> = HashMap::new();
    for (i, d) in demands.demands().iter().enumerate() {
        let mut known = true;
        for node in [d.origin, d.destination] {
            if !network.contains_node(node) {
                diagnostics.push(Diagnostic::UnknownNode { demand: i, node });
                known = false;
            }
        }
        if !known {
            continue;
        }
        let seen = reach
            .entry(d.origin)
            .or_insert_with(|| network.reachable_from(d.origin));
        if !seen[d.destination.slot()] {
            diagnostics.push(Diagnostic::Unreachable {
                origin: d.origin,
                destination: d.destination,
            });
        }
    }
    diagnostics
}
