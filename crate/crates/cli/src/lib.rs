//! Command-line front end for `sue`: run probit SUE solvers on CSV
//! networks, compare and check solutions, export Graphviz drawings.
//!
//! Exit codes: 0 success, 1 input error, 2 solver stopped at the outer
//! iteration cap, 3 comparison or verification failure.

pub mod dot;
pub mod files;
pub mod verify;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sue_core::data::{EXAMPLE1_DEMANDS, EXAMPLE2_DEMANDS, SHEFFI12_NETWORK};
use sue_core::solvers::CostUpdateSource;
use sue_core::{compare_solutions, solve, Gamma, SolverConfig, SolverKind};

use files::RunManifest;
use verify::{LoadingOptions, Status, Tolerances};

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sue",
    version,
    about = "Probit stochastic user equilibrium traffic assignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for equilibrium link flows.
    #[command(allow_negative_numbers = true)]
    Solve(SolveArgs),
    /// Compare two flows files link by link.
    #[command(allow_negative_numbers = true)]
    Compare(CompareArgs),
    /// Check a flows file against conservation, demand and probit loading.
    #[command(allow_negative_numbers = true)]
    Verify(VerifyArgs),
    /// Write a Graphviz DOT drawing of a network.
    ExportDot(DotArgs),
    /// Write the bundled 12-node network and its two demand sets.
    Examples {
        /// Target directory (created if missing).
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Physarum,
    Msa,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostUpdate {
    /// Relax lengths toward travel times at the averaged flows.
    Averaged,
    /// Relax lengths toward travel times at the last auxiliary flows.
    Auxiliary,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, required_unless_present = "manifest")]
    network: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    demands: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "physarum")]
    solver: Solver,
    /// Perception variance scale: Var[T] = gamma * free-flow time.
    #[arg(long, default_value_t = SolverConfig::DEFAULT_GAMMA, value_parser = positive_real)]
    gamma: f64,
    /// Outer stopping tolerance.
    #[arg(long, default_value_t = SolverConfig::DEFAULT_EPSILON, value_parser = positive_real)]
    epsilon: f64,
    /// Monte Carlo draws per outer iteration.
    #[arg(long, default_value_t = SolverConfig::DEFAULT_INNER, value_parser = positive_count)]
    inner: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SolverConfig::DEFAULT_MAX_OUTER, value_parser = positive_count)]
    max_outer: usize,
    /// Flows driving the Physarum length update.
    #[arg(long, value_enum, default_value = "averaged")]
    cost_update: CostUpdate,
    /// Flows file. The manifest goes next to it as `<stem>.manifest.json`.
    #[arg(long, default_value = "flows.csv")]
    out: PathBuf,
    /// Trace file [default: `<stem>.trace.csv` next to the flows file].
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also write a DOT drawing of the solution.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Record elapsed times in the trace (makes it run-dependent).
    #[arg(long)]
    wall_clock: bool,
    /// Rerun the configuration recorded in a manifest.
    #[arg(long, conflicts_with_all = [
        "network", "demands", "solver", "gamma", "epsilon", "inner", "seed", "max_outer", "cost_update",
    ])]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    first: PathBuf,
    second: PathBuf,
    /// Largest acceptable per-link difference.
    #[arg(long, default_value_t = 0.5, value_parser = nonnegative_real)]
    tol: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    demands: PathBuf,
    #[arg(long)]
    flows: PathBuf,
    #[arg(long, default_value_t = SolverConfig::DEFAULT_GAMMA, value_parser = positive_real)]
    gamma: f64,
    /// Draws per OD pair for the loading check.
    #[arg(long, default_value_t = 20_000, value_parser = positive_count)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Tolerances::default().conservation, value_parser = nonnegative_real)]
    conservation_tol: f64,
    #[arg(long, default_value_t = Tolerances::default().demand, value_parser = nonnegative_real)]
    demand_tol: f64,
    #[arg(long, default_value_t = Tolerances::default().reverse, value_parser = nonnegative_real)]
    reverse_tol: f64,
    /// Standard errors allowed in the loading agreement check.
    #[arg(long, default_value_t = Tolerances::default().loading_sigmas, value_parser = positive_real)]
    loading_sigmas: f64,
    /// Skip the loading check above this many paths per OD pair.
    #[arg(long, default_value_t = 10_000, value_parser = positive_count)]
    max_paths: usize,
}

#[derive(Args)]
struct DotArgs {
    #[arg(long)]
    network: PathBuf,
    /// Overlay link flows: pen width by flow, near-zero flows dashed.
    #[arg(long)]
    flows: Option<PathBuf>,
    /// Output file [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn positive_real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be positive and finite, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn nonnegative_real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be nonnegative and finite, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or("flows".into(), |s| s.to_string_lossy());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(path).with_context(|| format!("cannot resolve {}", path.display()))
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let manifest = match &args.manifest {
        Some(path) => RunManifest::read(path)?,
        None => {
            let kind = match args.solver {
                Solver::Physarum => SolverKind::Physarum,
                Solver::Msa => SolverKind::Msa,
            };
            let mut config = SolverConfig::new(kind, args.seed);
            config.gamma = Gamma::new(args.gamma)?;
            config.epsilon0 = args.epsilon;
            config.inner_iterations = args.inner;
            config.max_outer = args.max_outer;
            config.cost_update = match args.cost_update {
                CostUpdate::Averaged => CostUpdateSource::Averaged,
                CostUpdate::Auxiliary => CostUpdateSource::Auxiliary,
            };
            let network = args.network.as_deref().expect("required by clap");
            let demands = args.demands.as_deref().expect("required by clap");
            RunManifest::new(absolute(network)?, absolute(demands)?, &config)
        }
    };
    let config = manifest.solver_config()?;
    let network = files::load_network(&manifest.network)?;
    let demands = files::load_demands(&manifest.demands)?;

    let solution = solve(&network, &demands, &config)?;

    files::write_file(
        &args.out,
        &files::format_flows(&network, &solution.link_flows),
    )?;
    let trace = args
        .trace
        .clone()
        .unwrap_or_else(|| sibling(&args.out, ".trace.csv"));
    files::write_file(&trace, &files::format_trace(&solution, args.wall_clock))?;
    files::write_file(&sibling(&args.out, ".manifest.json"), &manifest.to_json())?;
    if let Some(dot) = &args.dot {
        files::write_file(dot, &dot::render(&network, Some(&solution.link_flows)))?;
    }

    println!(
        "{}: {} outer iterations, final epsilon {:.6}, elapsed {:.3} s, {} truncated draws, {}",
        config.solver_kind,
        solution.outer_iterations,
        solution.final_epsilon(),
        solution.elapsed,
        solution.truncation_count,
        if solution.converged {
            "converged"
        } else {
            "stopped at the outer iteration cap"
        }
    );
    Ok(if solution.converged {
        0
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn cmd_compare(args: CompareArgs) -> Result<u8> {
    let a = files::read_flows(&args.first)?;
    let b = files::read_flows(&args.second)?;
    let pairs = files::pair_flows(&a, &b)?;
    let first: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let second: Vec<f64> = pairs.iter().map(|p| p.3).collect();
    let comparison = compare_solutions(&first, &second)?;
    let mut report = String::from("from,to,first,second,difference\n");
    for ((from, to, x, y), d) in pairs.iter().zip(&comparison.differences) {
        writeln!(report, "{from},{to},{x:.4},{y:.4},{d:.4}").unwrap();
    }
    print!("{report}");
    println!(
        "max difference {:.4} (tolerance {})",
        comparison.max, args.tol
    );
    Ok(if comparison.max <= args.tol {
        0
    } else {
        EXIT_CHECK_FAILED
    })
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let network = files::load_network(&args.network)?;
    let demands = files::load_demands(&args.demands)?;
    let rows = files::read_flows(&args.flows)?;
    let flows = files::align_flows(&network, &rows)
        .with_context(|| format!("flows file {}", args.flows.display()))?;
    let tolerances = Tolerances {
        conservation: args.conservation_tol,
        demand: args.demand_tol,
        reverse: args.reverse_tol,
        loading_sigmas: args.loading_sigmas,
    };
    let loading = LoadingOptions {
        gamma: Gamma::new(args.gamma)?,
        draws: args.draws,
        seed: args.seed,
        max_paths: args.max_paths,
    };
    let checks = verify::run_all(&network, &demands, &flows, &tolerances, loading);
    let mut failed = false;
    for c in &checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed = true;
                "FAIL"
            }
            Status::Skipped => "SKIP",
            Status::Info => "INFO",
        };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    Ok(if failed { EXIT_CHECK_FAILED } else { 0 })
}

fn cmd_export_dot(args: DotArgs) -> Result<u8> {
    let network = files::load_network(&args.network)?;
    let flows = match &args.flows {
        Some(path) => {
            let rows = files::read_flows(path)?;
            Some(
                files::align_flows(&network, &rows)
                    .with_context(|| format!("flows file {}", path.display()))?,
            )
        }
        None => None,
    };
    let text = dot::render(&network, flows.as_deref());
    match &args.out {
        Some(path) => files::write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_examples(dir: &Path) -> Result<u8> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (name, text) in [
        ("sheffi12.net.csv", SHEFFI12_NETWORK),
        ("example1.od.csv", EXAMPLE1_DEMANDS),
        ("example2.od.csv", EXAMPLE2_DEMANDS),
    ] {
        files::write_file(&dir.join(name), text)?;
    }
    Ok(0)
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let rendered = e.to_string();
            eprintln!("{}", rendered.lines().next().unwrap_or("invalid arguments"));
            return EXIT_INPUT;
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Verify(args) => cmd_verify(args),
        Command::ExportDot(args) => cmd_export_dot(args),
        Command::Examples { dir } => cmd_examples(&dir),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}
