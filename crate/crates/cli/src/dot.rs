//! Graphviz export of a network, optionally overlaid with link flows.

use std::fmt::Write as _;

use sue_core::Network;

/// Flows below this are drawn dashed.
pub const ZERO_FLOW: f64 = 0.05;
const MIN_PEN: f64 = 1.0;
const MAX_PEN: f64 = 6.0;

/// Edge labels carry `alpha/beta`; with flows, pen width scales linearly
/// with flow up to the largest one.
pub fn render(network: &Network, flows: Option<&[f64]>) -> String {
    let mut out = String::from("digraph network {\n    node [shape=circle];\n");
    for v in network.nodes() {
        writeln!(out, "    {v};").unwrap();
    }
    let peak = flows.map_or(0.0, |f| f.iter().copied().fold(0.0, f64::max));
    for (a, link) in network.links().iter().enumerate() {
        let params = format!("{}/{}", link.alpha, link.beta);
        match flows {
            None => writeln!(
                out,
                "    {} -> {} [label=\"{params}\"];",
                link.from, link.to
            )
            .unwrap(),
            Some(f) => {
                let x = f[a];
                let width = if peak > 0.0 {
                    MIN_PEN + (MAX_PEN - MIN_PEN) * x / peak
                } else {
                    MIN_PEN
                };
                let style = if x < ZERO_FLOW { "dashed" } else { "solid" };
                writeln!(
                    out,
                    "    {} -> {} [label=\"{params}\\n{x:.2}\", penwidth={width:.2}, style={style}];",
                    link.from, link.to
                )
                .unwrap();
            }
        }
    }
    out.push_str("}\n");
    out
}
