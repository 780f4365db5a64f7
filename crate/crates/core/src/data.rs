//! Bundled problem instances: the 12-node, 34-link Sheffi-Powell test
//! network and the two demand scenarios run against it.

/// Network file for the 12-node test network.
pub const SHEFFI12_NETWORK: &str = include_str!("../data/sheffi12.net.csv");
/// Single OD pair: 20 vehicles per unit time from node 1 to node 12.
pub const EXAMPLE1_DEMANDS: &str = include_str!("../data/example1.od.csv");
/// Two OD pairs from node 1: 10 to node 12 and 10 to node 8.
pub const EXAMPLE2_DEMANDS: &str = include_str!("../data/example2.od.csv");
