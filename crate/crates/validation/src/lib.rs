//! Published reference flows for the two bundled demand scenarios and
//! helpers shared by the acceptance suite.

use sue_core::data::{EXAMPLE1_DEMANDS, EXAMPLE2_DEMANDS, SHEFFI12_NETWORK};
use sue_core::{
    parse_demands, parse_network, solve, DemandSet, FlowSolution, Network, SolverConfig, SolverKind,
};

/// Link flows reported for one link by each solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub from: u32,
    pub to: u32,
    pub msa: f64,
    pub physarum: f64,
}

impl Reference {
    pub fn for_solver(&self, kind: SolverKind) -> f64 {
        match kind {
            SolverKind::Msa => self.msa,
            SolverKind::Physarum => self.physarum,
        }
    }
}

/// Demand 20 from node 1 to node 12, one inner iteration. Same link order
/// as the bundled network file.
pub const EXAMPLE1_REFERENCE: [Reference; 34] = [
    Reference {
        from: 1,
        to: 2,
        msa: 10.3639,
        physarum: 10.2070,
    },
    Reference {
        from: 1,
        to: 5,
        msa: 9.6361,
        physarum: 9.5445,
    },
    Reference {
        from: 2,
        to: 1,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 2,
        to: 6,
        msa: 4.4459,
        physarum: 4.4894,
    },
    Reference {
        from: 2,
        to: 3,
        msa: 5.9180,
        physarum: 5.7079,
    },
    Reference {
        from: 3,
        to: 2,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 3,
        to: 7,
        msa: 2.7803,
        physarum: 2.5665,
    },
    Reference {
        from: 3,
        to: 4,
        msa: 3.1377,
        physarum: 3.1324,
    },
    Reference {
        from: 4,
        to: 3,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 4,
        to: 8,
        msa: 3.1377,
        physarum: 3.1328,
    },
    Reference {
        from: 5,
        to: 1,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 5,
        to: 6,
        msa: 4.9213,
        physarum: 4.7524,
    },
    Reference {
        from: 5,
        to: 9,
        msa: 4.7148,
        physarum: 4.7896,
    },
    Reference {
        from: 6,
        to: 2,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 6,
        to: 5,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 6,
        to: 7,
        msa: 5.6918,
        physarum: 5.4874,
    },
    Reference {
        from: 6,
        to: 10,
        msa: 3.6754,
        physarum: 3.7607,
    },
    Reference {
        from: 7,
        to: 3,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 7,
        to: 6,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 7,
        to: 8,
        msa: 7.6230,
        physarum: 7.5404,
    },
    Reference {
        from: 7,
        to: 11,
        msa: 0.8492,
        physarum: 0.5210,
    },
    Reference {
        from: 8,
        to: 4,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 8,
        to: 7,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 8,
        to: 12,
        msa: 10.7607,
        physarum: 10.6752,
    },
    Reference {
        from: 9,
        to: 5,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 9,
        to: 10,
        msa: 4.7148,
        physarum: 4.7948,
    },
    Reference {
        from: 10,
        to: 9,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 10,
        to: 6,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 10,
        to: 11,
        msa: 8.3902,
        physarum: 8.5612,
    },
    Reference {
        from: 11,
        to: 10,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 11,
        to: 7,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 11,
        to: 12,
        msa: 9.2393,
        physarum: 9.0669,
    },
    Reference {
        from: 12,
        to: 8,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 12,
        to: 11,
        msa: 0.0,
        physarum: 0.0,
    },
];

/// Demands 10 from node 1 to node 12 and 10 from node 1 to node 8, ten
/// inner iterations.
pub const EXAMPLE2_REFERENCE: [Reference; 34] = [
    Reference {
        from: 1,
        to: 2,
        msa: 10.3988,
        physarum: 10.1945,
    },
    Reference {
        from: 1,
        to: 5,
        msa: 9.6058,
        physarum: 9.4830,
    },
    Reference {
        from: 2,
        to: 1,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 2,
        to: 6,
        msa: 3.6292,
        physarum: 3.5431,
    },
    Reference {
        from: 2,
        to: 3,
        msa: 6.7686,
        physarum: 6.6450,
    },
    Reference {
        from: 3,
        to: 2,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 3,
        to: 7,
        msa: 2.2849,
        physarum: 2.1953,
    },
    Reference {
        from: 3,
        to: 4,
        msa: 4.4803,
        physarum: 4.4454,
    },
    Reference {
        from: 4,
        to: 3,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 4,
        to: 8,
        msa: 4.4803,
        physarum: 4.4424,
    },
    Reference {
        from: 5,
        to: 1,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 5,
        to: 6,
        msa: 5.1153,
        physarum: 4.7598,
    },
    Reference {
        from: 5,
        to: 9,
        msa: 4.4905,
        physarum: 4.7273,
    },
    Reference {
        from: 6,
        to: 2,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 6,
        to: 5,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 6,
        to: 7,
        msa: 6.4263,
        physarum: 6.3017,
    },
    Reference {
        from: 6,
        to: 10,
        msa: 2.3182,
        physarum: 1.9937,
    },
    Reference {
        from: 7,
        to: 3,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 7,
        to: 6,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 7,
        to: 8,
        msa: 8.7109,
        physarum: 8.4797,
    },
    Reference {
        from: 7,
        to: 11,
        msa: 0.0,
        physarum: 0.0325,
    },
    Reference {
        from: 8,
        to: 4,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 8,
        to: 7,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 8,
        to: 12,
        msa: 3.2044,
        physarum: 3.0647,
    },
    Reference {
        from: 9,
        to: 5,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 9,
        to: 10,
        msa: 4.4905,
        physarum: 4.7273,
    },
    Reference {
        from: 10,
        to: 9,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 10,
        to: 6,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 10,
        to: 11,
        msa: 6.8088,
        physarum: 6.7691,
    },
    Reference {
        from: 11,
        to: 10,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 11,
        to: 7,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 11,
        to: 12,
        msa: 6.8088,
        physarum: 6.7691,
    },
    Reference {
        from: 12,
        to: 8,
        msa: 0.0,
        physarum: 0.0,
    },
    Reference {
        from: 12,
        to: 11,
        msa: 0.0,
        physarum: 0.0,
    },
];

/// Outer iterations each solver needed in the published runs, as
/// `(msa, physarum)`.
pub const EXAMPLE1_ITERATIONS: (usize, usize) = (12233, 236);
pub const EXAMPLE2_ITERATIONS: (usize, usize) = (686, 179);

/// Seeds averaged over when comparing against the reference tables.
pub const SEEDS: std::ops::Range<u64> = 0..5;

/// One of the two bundled demand scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    One,
    Two,
}

impl Example {
    pub fn network(self) -> Network {
        parse_network(SHEFFI12_NETWORK).expect("bundled network parses")
    }

    pub fn demands(self) -> DemandSet {
        let text = match self {
            Example::One => EXAMPLE1_DEMANDS,
            Example::Two => EXAMPLE2_DEMANDS,
        };
        parse_demands(text).expect("bundled demands parse")
    }

    pub fn reference(self) -> &'static [Reference; 34] {
        match self {
            Example::One => &EXAMPLE1_REFERENCE,
            Example::Two => &EXAMPLE2_REFERENCE,
        }
    }

    pub fn inner_iterations(self) -> usize {
        match self {
            Example::One => 1,
            Example::Two => 10,
        }
    }

    /// Tolerance on each averaged link flow against the reference.
    pub fn tolerance(self) -> f64 {
        match self {
            Example::One => 0.5,
            Example::Two => 0.6,
        }
    }

    pub fn config(self, kind: SolverKind, seed: u64) -> SolverConfig {
        let mut config = SolverConfig::new(kind, seed);
        config.inner_iterations = self.inner_iterations();
        config
    }
}

/// Runs of one solver over several seeds and their mean link flows.
#[derive(Debug, Clone)]
pub struct SeedRuns {
    pub runs: Vec<FlowSolution>,
    pub mean: Vec<f64>,
}

impl SeedRuns {
    pub fn max_elapsed(&self) -> f64 {
        self.runs.iter().map(|r| r.elapsed).fold(0.0, f64::max)
    }
}

pub fn run_seeds(
    network: &Network,
    demands: &DemandSet,
    config: &SolverConfig,
    seeds: impl IntoIterator<Item = u64>,
) -> SeedRuns {
    let runs: Vec<FlowSolution> = seeds
        .into_iter()
        .map(|seed| {
            let config = SolverConfig {
                seed,
                ..config.clone()
            };
            solve(network, demands, &config).expect("bundled problem solves")
        })
        .collect();
    let mut mean = vec![0.0; network.link_count()];
    for run in &runs {
        for (m, x) in mean.iter_mut().zip(&run.link_flows) {
            *m += x / runs.len() as f64;
        }
    }
    SeedRuns { runs, mean }
}

/// Largest absolute deviation from the reference column, with the link
/// index where it occurs.
pub fn max_deviation(flows: &[f64], reference: &[Reference], kind: SolverKind) -> (usize, f64) {
    flows
        .iter()
        .zip(reference)
        .map(|(x, r)| (x - r.for_solver(kind)).abs())
        .enumerate()
        .fold(
            (0, 0.0),
            |best, (a, d)| if d > best.1 { (a, d) } else { best },
        )
}
