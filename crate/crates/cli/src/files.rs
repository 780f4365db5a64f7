//! On-disk formats: flows and trace CSV files and the run manifest.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sue_core::solvers::{CostUpdateSource, FlowSolution};
use sue_core::{
    parse_demands, parse_network, DemandSet, Network, NodeId, SolverConfig, SolverKind,
};

pub const FLOWS_HEADER: &str = "from,to,flow,flow_exact";
pub const TRACE_HEADER: &str = "outer_iter,epsilon,elapsed_ms,truncations";

pub fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} file {}", path.display()))
}

pub fn load_network(path: &Path) -> Result<Network> {
    let text = read_text(path, "network")?;
    parse_network(&text).with_context(|| format!("network file {}", path.display()))
}

pub fn load_demands(path: &Path) -> Result<DemandSet> {
    let text = read_text(path, "demands")?;
    parse_demands(&text).with_context(|| format!("demands file {}", path.display()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Flows to 4 decimals plus the shortest round-trip representation.
pub fn format_flows(network: &Network, flows: &[f64]) -> String {
    let mut out = String::from(FLOWS_HEADER);
    out.push('\n');
    for (link, &x) in network.links().iter().zip(flows) {
        // Avoid printing "-0.0000" for tiny negative round-off.
        let x = if x == 0.0 { 0.0 } else { x };
        writeln!(out, "{},{},{:.4},{}", link.from, link.to, x, x).unwrap();
    }
    out
}

/// Elapsed times are left blank unless `wall_clock` is set, so that
/// repeated runs produce identical files.
pub fn format_trace(solution: &FlowSolution, wall_clock: bool) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (i, r) in solution.trace.iter().enumerate() {
        let elapsed = if wall_clock {
            format!("{:.3}", r.elapsed_ms)
        } else {
            String::new()
        };
        writeln!(out, "{},{},{},{}", i + 1, r.epsilon, elapsed, r.truncations).unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRow {
    pub from: NodeId,
    pub to: NodeId,
    pub flow: f64,
}

/// Reads a flows file. `flow_exact` is preferred over the rounded column
/// when present.
pub fn read_flows(path: &Path) -> Result<Vec<FlowRow>> {
    let text = read_text(path, "flows")?;
    parse_flows(&text).with_context(|| format!("flows file {}", path.display()))
}

pub fn parse_flows(text: &str) -> Result<Vec<FlowRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (from_col, to_col) = match (column("from"), column("to")) {
        (Some(f), Some(t)) => (f, t),
        _ => bail!("header must contain `from` and `to` columns"),
    };
    let flow_col = column("flow_exact")
        .or_else(|| column("flow"))
        .ok_or_else(|| anyhow!("header must contain a `flow` column"))?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize| {
            record
                .get(col)
                .ok_or_else(|| anyhow!("line {line}: missing column {}", col + 1))
        };
        let node = |col: usize| -> Result<NodeId> {
            let raw = field(col)?;
            raw.parse::<u32>()
                .ok()
                .and_then(NodeId::new)
                .ok_or_else(|| anyhow!("line {line}: invalid node `{raw}`"))
        };
        let raw = field(flow_col)?;
        let flow: f64 = raw
            .parse()
            .map_err(|_| anyhow!("line {line}: invalid flow `{raw}`"))?;
        if !flow.is_finite() || flow < 0.0 {
            bail!("line {line}: flow must be finite and nonnegative, got {flow}");
        }
        rows.push(FlowRow {
            from: node(from_col)?,
            to: node(to_col)?,
            flow,
        });
    }
    if rows.is_empty() {
        bail!("no flow rows");
    }
    Ok(rows)
}

/// Orders `rows` to match the network's link order. Every link must appear
/// exactly once.
pub fn align_flows(network: &Network, rows: &[FlowRow]) -> Result<Vec<f64>> {
    let mut flows = vec![None; network.link_count()];
    for r in rows {
        let a = network
            .find_link(r.from, r.to)
            .ok_or_else(|| anyhow!("link {} -> {} is not in the network", r.from, r.to))?;
        if flows[a].replace(r.flow).is_some() {
            bail!("link {} -> {} listed twice", r.from, r.to);
        }
    }
    flows
        .into_iter()
        .enumerate()
        .map(|(a, f)| {
            let l = network.link(a);
            f.ok_or_else(|| anyhow!("link {} -> {} missing from flows", l.from, l.to))
        })
        .collect()
}

/// Aligns two flows files by link. Link sets must be equal.
pub fn pair_flows(a: &[FlowRow], b: &[FlowRow]) -> Result<Vec<(NodeId, NodeId, f64, f64)>> {
    let index: HashMap<(NodeId, NodeId), f64> =
        b.iter().map(|r| ((r.from, r.to), r.flow)).collect();
    if index.len() != b.len() {
        bail!("second flows file lists a link twice");
    }
    if a.len() != b.len() {
        bail!("link sets differ ({} versus {} links)", a.len(), b.len());
    }
    let mut pairs = Vec::with_capacity(a.len());
    for r in a {
        let other = index
            .get(&(r.from, r.to))
            .ok_or_else(|| anyhow!("link {} -> {} only in the first file", r.from, r.to))?;
        pairs.push((r.from, r.to, r.flow, *other));
    }
    let distinct: HashSet<_> = a.iter().map(|r| (r.from, r.to)).collect();
    if distinct.len() != a.len() {
        bail!("first flows file lists a link twice");
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub solver: String,
    pub gamma: f64,
    pub epsilon: f64,
    pub inner: usize,
    pub seed: u64,
    pub max_outer: usize,
    pub cost_update: String,
}

/// Everything needed to rerun a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub network: PathBuf,
    pub demands: PathBuf,
    pub config: ManifestConfig,
    pub tool_version: String,
    pub rng_algorithm: String,
}

pub fn cost_update_name(c: CostUpdateSource) -> &'static str {
    match c {
        CostUpdateSource::Averaged => "averaged",
        CostUpdateSource::Auxiliary => "auxiliary",
    }
}

impl RunManifest {
    pub fn new(network: PathBuf, demands: PathBuf, config: &SolverConfig) -> Self {
        RunManifest {
            network,
            demands,
            config: ManifestConfig {
                solver: config.solver_kind.to_string(),
                gamma: config.gamma.get(),
                epsilon: config.epsilon0,
                inner: config.inner_iterations,
                seed: config.seed,
                max_outer: config.max_outer,
                cost_update: cost_update_name(config.cost_update).to_string(),
            },
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            rng_algorithm: sue_core::probit::RNG_ALGORITHM.to_string(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = read_text(path, "manifest")?;
        serde_json::from_str(&text).with_context(|| format!("manifest {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let c = &self.config;
        let kind: SolverKind = c.solver.parse().map_err(|e: String| anyhow!(e))?;
        let mut config = SolverConfig::new(kind, c.seed);
        config.gamma = sue_core::Gamma::new(c.gamma)?;
        config.epsilon0 = c.epsilon;
        config.inner_iterations = c.inner;
        config.max_outer = c.max_outer;
        config.cost_update = match c.cost_update.as_str() {
            "averaged" => CostUpdateSource::Averaged,
            "auxiliary" => CostUpdateSource::Auxiliary,
            other => bail!("unknown cost update `{other}`"),
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Network {
        parse_network("from,to,alpha,beta\n1,2,3,0.1\n2,1,3,0.1\n2,3,1,0\n").unwrap()
    }

    #[test]
    fn flows_round_trip() {
        let network = net();
        let flows = [1.0 / 3.0, 0.0, 2.5];
        let text = format_flows(&network, &flows);
        assert!(text.starts_with("from,to,flow,flow_exact\n1,2,0.3333,0.3333333333333333\n"));
        let rows = parse_flows(&text).unwrap();
        assert_eq!(align_flows(&network, &rows).unwrap(), flows);
    }

    #[test]
    fn rounded_column_used_without_exact() {
        let rows = parse_flows("from,to,flow\n2,3,1.5\n").unwrap();
        assert_eq!(rows[0].flow, 1.5);
    }

    #[test]
    fn flows_mismatch_rejected() {
        let network = net();
        assert!(parse_flows("from,to,flow\n").is_err());
        assert!(parse_flows("from,to,flow\n1,2,-1\n").is_err());
        let rows = parse_flows("from,to,flow\n1,2,1\n2,1,0\n").unwrap();
        assert!(align_flows(&network, &rows).is_err());
        let rows = parse_flows("from,to,flow\n1,2,1\n2,1,0\n2,3,1\n3,2,0\n").unwrap();
        assert!(align_flows(&network, &rows).is_err());
    }

    #[test]
    fn pairing_requires_equal_link_sets() {
        let a = parse_flows("from,to,flow\n1,2,1\n2,3,2\n").unwrap();
        let b = parse_flows("from,to,flow\n2,3,2.5\n1,2,1\n").unwrap();
        let pairs = pair_flows(&a, &b).unwrap();
        assert_eq!(pairs[1].3, 2.5);
        let c = parse_flows("from,to,flow\n1,2,1\n").unwrap();
        assert!(pair_flows(&a, &c).is_err());
        assert!(pair_flows(&c, &a).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let mut config = SolverConfig::new(SolverKind::Msa, 9);
        config.inner_iterations = 10;
        let m = RunManifest::new("n.csv".into(), "d.csv".into(), &config);
        let back: RunManifest = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.solver_config().unwrap(), config);
    }
}
