//! Argument parsing, run configuration and command dispatch.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use rspot_core::{
    build_extended, build_system, cbop_distance, coupling_matrix, edge_flows, optimal_policy,
    solve_margins, validate_structure, CbopWarning, CostRule, ExtendedGraph, Graph, MarginSpec,
    MuPolicy, SolverConfig, WeightScheme, WiringMode,
};

use crate::io::{self, IoError};
use crate::report::{self, node_values, GraphSummary, SolveSummary, WiringSummary};

#[derive(Parser, Debug)]
#[command(
    name = "rspot",
    version,
    about = "Margin-constrained randomized shortest paths on graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check graph structure and, with --margins, the extended-graph wiring.
    Validate(RunArgs),
    /// Plain randomized shortest paths from the source supernode to the sink.
    Rsp(RunArgs),
    /// Solve for the biased policy that meets both margins.
    Solve(RunArgs),
    /// Solve, then write the input/output coupling matrix.
    Coupling(RunArgs),
    /// Surprisal distance with every node as both input and output.
    Distance(RunArgs),
}

#[derive(clap::Args, Debug, Clone)]
pub struct RunArgs {
    /// Edge list, `src dst weight [cost]`, 1-based node ids.
    #[arg(long)]
    pub graph: PathBuf,
    /// Margins table, `node sigma_in sigma_out`.
    #[arg(long)]
    pub margins: Option<PathBuf>,
    /// Inverse temperature.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Stop once no multiplier moves more than this over a sweep.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// mu = factor * max(lower bound, 1e-6) in consistent wiring.
    #[arg(long, default_value_t = 1.2)]
    pub mu_factor: f64,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Replace A by (A + Aᵀ)/2 before anything else.
    #[arg(long)]
    pub undirected: bool,
    #[arg(long, value_enum, default_value_t = WiringArg::Auto)]
    pub wiring: WiringArg,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeArg {
    Uniform,
    Degree,
    Invdeg,
}

impl SchemeArg {
    fn scheme(self) -> WeightScheme {
        match self {
            SchemeArg::Uniform => WeightScheme::Uniform,
            SchemeArg::Degree => WeightScheme::Degree,
            SchemeArg::Invdeg => WeightScheme::InverseDegree,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SchemeArg::Uniform => "uniform",
            SchemeArg::Degree => "degree",
            SchemeArg::Invdeg => "invdeg",
        }
    }
}

/// How sink edges are weighted.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiringArg {
    /// Consistent if the graph is strongly connected, unit otherwise.
    Auto,
    /// Sink weights derived so the natural walk meets sigma_out.
    Consistent,
    /// Unit sink weight on every output node.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    Rsp,
    Solve,
    Coupling,
    Distance,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Validate => "validate",
            CommandKind::Rsp => "rsp",
            CommandKind::Solve => "solve",
            CommandKind::Coupling => "coupling",
            CommandKind::Distance => "distance",
        }
    }
}

/// Validated, mutually consistent settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub graph: PathBuf,
    pub margins: Option<PathBuf>,
    pub theta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub mu_factor: f64,
    pub scheme: SchemeArg,
    pub undirected: bool,
    pub wiring: WiringArg,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
}

#[derive(thiserror::Error, Debug)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Input,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Input => 1,
            ErrorKind::Numerical => 2,
        }
    }

    /// `rspot: error[input]: ...` on a single line.
    pub fn one_line(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Input => "input",
            ErrorKind::Numerical => "numerical",
        };
        let flat: String = self
            .message
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        format!("rspot: error[{kind}]: {flat}")
    }
}

impl From<rspot_core::Error> for CliError {
    fn from(e: rspot_core::Error) -> Self {
        CliError {
            kind: if e.is_numerical() {
                ErrorKind::Numerical
            } else {
                ErrorKind::Input
            },
            message: e.to_string(),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let kind = match &e {
            IoError::Core { source, .. } if source.is_numerical() => ErrorKind::Numerical,
            _ => ErrorKind::Input,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let (command, args) = match cli.command {
            Command::Validate(a) => (CommandKind::Validate, a),
            Command::Rsp(a) => (CommandKind::Rsp, a),
            Command::Solve(a) => (CommandKind::Solve, a),
            Command::Coupling(a) => (CommandKind::Coupling, a),
            Command::Distance(a) => (CommandKind::Distance, a),
        };
        let name = command.name();
        let is_validate = command == CommandKind::Validate;
        let is_distance = command == CommandKind::Distance;

        if args.scheme.is_some() && !is_distance {
            return Err(CliError::input(format!(
                "--scheme only applies to `distance`, not `{name}`"
            )));
        }
        if is_distance && args.margins.is_some() {
            return Err(CliError::input(
                "`distance` derives its margins from --scheme; drop --margins",
            ));
        }
        if is_distance && args.wiring == WiringArg::Unit {
            return Err(CliError::input("`distance` needs consistent wiring"));
        }
        if !is_validate && !is_distance && args.margins.is_none() {
            return Err(CliError::input(format!("`{name}` requires --margins")));
        }
        match (is_validate, args.theta) {
            (true, Some(_)) => return Err(CliError::input("`validate` takes no --theta")),
            (false, None) => return Err(CliError::input(format!("`{name}` requires --theta"))),
            (false, Some(t)) if !(t > 0.0 && t.is_finite()) => {
                return Err(CliError::input(format!(
                    "--theta must be positive, got {t}"
                )))
            }
            _ => {}
        }
        if !is_validate && args.out.is_none() {
            return Err(CliError::input(format!("`{name}` requires --out")));
        }
        if !(args.tol > 0.0 && args.tol.is_finite()) {
            return Err(CliError::input(format!(
                "--tol must be positive, got {}",
                args.tol
            )));
        }
        if args.max_iter == 0 {
            return Err(CliError::input("--max-iter must be at least 1"));
        }
        if !(args.mu_factor > 0.0 && args.mu_factor.is_finite()) {
            return Err(CliError::input(format!(
                "--mu-factor must be positive, got {}",
                args.mu_factor
            )));
        }
        Ok(RunConfig {
            command,
            graph: args.graph,
            margins: args.margins,
            theta: args.theta,
            tol: args.tol,
            max_iter: args.max_iter,
            mu_factor: args.mu_factor,
            scheme: args.scheme.unwrap_or(SchemeArg::Uniform),
            undirected: args.undirected,
            wiring: args.wiring,
            out: args.out,
        })
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig::new(self.theta.expect("validated"))
            .with_tol(self.tol)
            .with_max_iter(self.max_iter)
            .with_dual_tracking()
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    /// Printed to stdout.
    pub summary: String,
}

struct Loaded {
    graph: Graph,
    summary: GraphSummary,
}

fn load(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let raw = io::read_edge_list(&cfg.graph)?;
    let edge_count = raw.edge_count();
    let graph = if cfg.undirected {
        raw.symmetrized()
    } else {
        raw
    };
    let rule = match graph.cost_rule() {
        CostRule::Explicit => "explicit",
        CostRule::ReciprocalWeight => "reciprocal_weight",
    };
    let summary = GraphSummary::new(
        validate_structure(&graph),
        graph.node_count(),
        if cfg.undirected {
            graph.edge_count()
        } else {
            edge_count
        },
        rule,
        cfg.undirected,
    );
    Ok(Loaded { graph, summary })
}

fn wiring_mode(cfg: &RunConfig, g: &Graph, m: &MarginSpec, strongly_connected: bool) -> WiringMode {
    let consistent = match cfg.wiring {
        WiringArg::Consistent => true,
        WiringArg::Unit => false,
        WiringArg::Auto => strongly_connected,
    };
    if consistent {
        WiringMode::Consistent(MuPolicy::Factor(cfg.mu_factor))
    } else {
        let w = m
            .sigma_out()
            .iter()
            .map(|&s| if s > 0.0 { 1.0 } else { 0.0 })
            .collect::<Vec<_>>();
        debug_assert_eq!(w.len(), g.node_count());
        WiringMode::UserWeights(w)
    }
}

fn extended(cfg: &RunConfig, loaded: &Loaded) -> Result<ExtendedGraph, CliError> {
    let path = cfg.margins.as_ref().expect("validated");
    let m = io::read_margins(path, loaded.graph.node_count())?;
    let mode = wiring_mode(cfg, &loaded.graph, &m, loaded.summary.strongly_connected);
    Ok(build_extended(&loaded.graph, &m, mode)?)
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    let dir = cfg.out.as_deref().expect("validated");
    fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn file_names(files: &[PathBuf]) -> Vec<String> {
    files
        .iter()
        .filter_map(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .collect()
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    match cfg.command {
        CommandKind::Validate => run_validate(cfg),
        CommandKind::Rsp => run_rsp(cfg),
        CommandKind::Solve | CommandKind::Coupling => run_solve(cfg),
        CommandKind::Distance => run_distance(cfg),
    }
}

fn run_validate(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let loaded = load(cfg)?;
    let wiring = match cfg.margins {
        Some(_) => Some(WiringSummary::new(&extended(cfg, &loaded)?)),
        None => None,
    };
    let rep = report::ValidateReport {
        command: "validate",
        graph: loaded.summary,
        extended: wiring,
    };
    let json = report::to_json(&rep);
    let mut out = RunOutput::default();
    match &cfg.out {
        Some(_) => {
            let path = out_dir(cfg)?.join("report.json");
            io::write_text(&path, &json)?;
            out.files.push(path);
            out.summary = format!(
                "strongly_connected={} wiring_well_formed={}",
                rep.graph.strongly_connected,
                rep.extended
                    .as_ref()
                    .map_or("n/a".to_string(), |w| w.well_formed.to_string())
            );
        }
        None => out.summary = json.trim_end().to_string(),
    }
    Ok(out)
}

fn run_rsp(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let loaded = load(cfg)?;
    let ext = extended(cfg, &loaded)?;
    let theta = cfg.theta.expect("validated");
    let sys = build_system(ext.transitions(), ext.costs(), theta)?;
    let flows = edge_flows(&sys);
    let policy = optimal_policy(&sys)?;
    let dir = out_dir(cfg)?;
    let labels = io::extended_labels(ext.original_count());
    let files = vec![
        dir.join("policy.csv"),
        dir.join("flows.csv"),
        dir.join("report.json"),
    ];
    io::write_matrix_csv(&files[0], &labels, &labels, policy.matrix())?;
    io::write_matrix_csv(&files[1], &labels, &labels, &flows.edge_flows)?;

    let n = ext.original_count();
    let nodes: Vec<usize> = (0..n).collect();
    let visits: Vec<f64> = (0..n).map(|i| flows.node_visits[i + 1]).collect();
    let start: Vec<f64> = (0..n).map(|i| flows.edge_flows[(0, i + 1)]).collect();
    let end: Vec<f64> = (0..n)
        .map(|i| flows.edge_flows[(i + 1, ext.target())])
        .collect();
    let rep = report::RspReport {
        command: "rsp",
        theta,
        graph: loaded.summary,
        wiring: WiringSummary::new(&ext),
        partition: sys.partition(),
        free_energy: flows.free_energy,
        expected_cost: flows.expected_cost,
        node_visits: node_values(&nodes, &visits),
        start_flows: node_values(&nodes, &start),
        end_flows: node_values(&nodes, &end),
        files: file_names(&files[..2]),
    };
    io::write_text(&files[2], &report::to_json(&rep))?;
    Ok(RunOutput {
        summary: format!(
            "Z={:.10e} free_energy={:.10e} expected_cost={:.10e}",
            rep.partition, rep.free_energy, rep.expected_cost
        ),
        files,
    })
}

fn run_solve(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let loaded = load(cfg)?;
    let ext = extended(cfg, &loaded)?;
    let sol = solve_margins(&ext, &cfg.solver_config())?;
    let dir = out_dir(cfg)?;
    let labels = io::extended_labels(ext.original_count());
    let mut files = vec![dir.join("policy.csv")];
    io::write_matrix_csv(&files[0], &labels, &labels, sol.policy.matrix())?;
    if cfg.command == CommandKind::Coupling {
        let gamma = coupling_matrix(&sol)?;
        let path = dir.join("coupling.csv");
        io::write_matrix_csv(
            &path,
            &io::node_labels(gamma.inputs.iter().copied()),
            &io::node_labels(gamma.outputs.iter().copied()),
            &gamma.gamma,
        )?;
        files.push(path);
    }
    let solve = SolveSummary::new(&sol, cfg.tol, cfg.max_iter);
    let rep = report::SolveReport {
        command: cfg.command.name(),
        graph: loaded.summary,
        wiring: WiringSummary::new(&ext),
        files: file_names(&files),
        solve,
    };
    let path = dir.join("report.json");
    io::write_text(&path, &report::to_json(&rep))?;
    files.push(path);
    Ok(RunOutput {
        summary: format!(
            "converged in {} iterations, residual_in={:.3e} residual_out={:.3e}",
            rep.solve.iterations, rep.solve.residual_in, rep.solve.residual_out
        ),
        files,
    })
}

fn run_distance(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let loaded = load(cfg)?;
    if cfg.wiring == WiringArg::Auto && !loaded.summary.strongly_connected {
        return Err(CliError::input(
            "`distance` needs a strongly connected graph (try --undirected)",
        ));
    }
    let out = cbop_distance(
        &loaded.graph,
        cfg.scheme.scheme(),
        &cfg.solver_config(),
        MuPolicy::Factor(cfg.mu_factor),
    )?;
    let dir = out_dir(cfg)?;
    let labels = io::node_labels(out.distance.nodes.iter().copied());
    let files = vec![dir.join("distance.csv"), dir.join("coupling.csv")];
    io::write_matrix_csv(&files[0], &labels, &labels, &out.distance.delta)?;
    io::write_matrix_csv(&files[1], &labels, &labels, &out.coupling.gamma)?;
    let warnings: Vec<String> = out
        .warnings
        .iter()
        .map(|w| match w {
            CbopWarning::CouplingNearIdentity { off_diagonal_mass } => format!(
                "off-diagonal coupling mass {off_diagonal_mass:.3e} is below {:e}; theta is too large for informative distances",
                rspot_core::NEAR_IDENTITY_MASS
            ),
        })
        .collect();
    let nodes: Vec<usize> = (0..loaded.graph.node_count()).collect();
    let rep = report::DistanceReport {
        command: "distance",
        scheme: cfg.scheme.name(),
        graph: loaded.summary,
        wiring: WiringSummary::new(&out.extended),
        weights: node_values(&nodes, &out.weights.v),
        solve: SolveSummary::new(&out.solution, cfg.tol, cfg.max_iter),
        off_diagonal_coupling_mass: out.coupling.off_diagonal_mass(),
        warnings: warnings.clone(),
        files: file_names(&files),
    };
    let path = dir.join("report.json");
    io::write_text(&path, &report::to_json(&rep))?;
    let mut files = files;
    files.push(path);
    let mut summary = format!(
        "{} nodes, converged in {} iterations",
        nodes.len(),
        rep.solve.iterations
    );
    for w in warnings {
        summary.push_str("\nwarning: ");
        summary.push_str(&w);
    }
    Ok(RunOutput { files, summary })
}

/// Parses `args`, runs, and returns the process exit code. Diagnostics go to
/// stderr, summaries to stdout.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                CliError::input(first.trim_start_matches("error: ")).one_line()
            );
            return 1;
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(out) => {
            if !out.summary.is_empty() {
                println!("{}", out.summary);
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.one_line());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(args: &[&str]) -> Result<RunConfig, CliError> {
        let mut full = vec!["rspot"];
        full.extend_from_slice(args);
        RunConfig::from_cli(Cli::try_parse_from(full).unwrap())
    }

    #[test]
    fn defaults_follow_solver_defaults() {
        let cfg = config(&[
            "solve",
            "--graph",
            "g",
            "--margins",
            "m",
            "--theta",
            "1",
            "--out",
            "o",
        ])
        .unwrap();
        assert_eq!(cfg.tol, 1e-8);
        assert_eq!(cfg.max_iter, 10_000);
        assert_eq!(cfg.mu_factor, 1.2);
        assert_eq!(cfg.wiring, WiringArg::Auto);
        assert_eq!(cfg.scheme, SchemeArg::Uniform);
    }

    #[test]
    fn inconsistent_flags_are_input_errors() {
        let bad: [&[&str]; 6] = [
            &[
                "solve",
                "--graph",
                "g",
                "--margins",
                "m",
                "--theta",
                "1",
                "--scheme",
                "degree",
                "--out",
                "o",
            ],
            &[
                "distance",
                "--graph",
                "g",
                "--margins",
                "m",
                "--theta",
                "1",
                "--out",
                "o",
            ],
            &[
                "distance", "--graph", "g", "--theta", "1", "--wiring", "unit", "--out", "o",
            ],
            &["coupling", "--graph", "g", "--theta", "1", "--out", "o"],
            &[
                "rsp",
                "--graph",
                "g",
                "--margins",
                "m",
                "--theta",
                "0",
                "--out",
                "o",
            ],
            &[
                "solve",
                "--graph",
                "g",
                "--margins",
                "m",
                "--theta",
                "1",
                "--out",
                "o",
                "--mu-factor=-1",
            ],
        ];
        for args in bad {
            let err = config(args).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{args:?}");
        }
        assert!(config(&[
            "distance", "--graph", "g", "--theta", "1", "--scheme", "invdeg", "--out", "o"
        ])
        .is_ok());
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        let numerical: CliError = rspot_core::Error::Underflow { partition: 0.0 }.into();
        assert_eq!(numerical.exit_code(), 2);
        let input: CliError = rspot_core::Error::EmptyGraph.into();
        assert_eq!(input.exit_code(), 1);
        let multi = CliError::input("first\nsecond");
        assert_eq!(multi.one_line(), "rspot: error[input]: first second");
    }
}
