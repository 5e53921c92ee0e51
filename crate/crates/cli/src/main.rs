use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pathls::bench::{
    self, commodity_count, generate_commodities, generate_mesh, generate_random_connected, run_benchmark,
    run_solver, BenchError, BenchmarkSpec, GraphSource, Solver,
};
use pathls::dump::{verify, SolutionDump};
use pathls::edp::EdpInstance;
use pathls::{Commodity, Graph};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_FILE: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "pathls", version, about = "Edge-disjoint paths by local search over spanning trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated graph or commodity list to a file.
    #[command(subcommand)]
    Generate(Generate),
    /// Solve one instance and print the solution dump.
    Solve(SolveArgs),
    /// Run a benchmark spec and write aggregate and raw CSV.
    Bench(BenchArgs),
    /// Check a solution dump against its instance.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum Generate {
    /// 4-neighbor grid graph.
    Mesh {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random connected graph.
    Random {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        edges: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random commodity pairs for a graph.
    Commodities {
        #[arg(long)]
        graph: String,
        /// Number of commodities.
        #[arg(long, conflicts_with = "ratio", required_unless_present = "ratio")]
        count: Option<usize>,
        /// Number of commodities as a fraction of the node count.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Graph file, or `mesh:WxH` / `random:N:M:SEED`.
    #[arg(long)]
    graph: String,
    #[arg(long)]
    commodities: PathBuf,
    #[arg(long, default_value = "ls", value_parser = parse_solver)]
    solver: Solver,
    #[arg(long, default_value_t = 10.0)]
    time_limit: f64,
    #[arg(long)]
    iter_cap: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Aggregate CSV destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance CSV destination.
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    graph: String,
    #[arg(long)]
    commodities: PathBuf,
    #[arg(long)]
    solution: PathBuf,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_solver(s: &str) -> Result<Solver, String> {
    Solver::parse(s).ok_or_else(|| format!("unknown solver `{s}` (expected ls or msga)"))
}

/// Failure classes with their own exit codes.
enum Failure {
    Usage(String),
    File(anyhow::Error),
    Verify(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io { .. } => Failure::File(e.into()),
            BenchError::Spec { .. } | BenchError::Infeasible(_) | BenchError::Generator(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Other(other.into()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    bench::read_file(path).map_err(Failure::from)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(Failure::File),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_graph(spec: &str) -> Result<Graph, Failure> {
    let source = GraphSource::parse(spec).map_err(Failure::Usage)?;
    source.load().map_err(Failure::from)
}

fn load_instance(graph: &str, commodities: &Path) -> Result<EdpInstance, Failure> {
    let g = load_graph(graph)?;
    let text = read(commodities)?;
    let list = Commodity::parse_list(&text, &g)
        .with_context(|| format!("{}", commodities.display()))
        .map_err(Failure::File)?;
    EdpInstance::new(Arc::new(g), list).map_err(|e| Failure::Usage(format!("invalid instance: {e}")))
}

fn generate(cmd: Generate) -> Result<(), Failure> {
    match cmd {
        Generate::Mesh { width, height, out } => {
            let g = generate_mesh(width, height)?;
            write_output(out.as_deref(), &g.to_text())
        }
        Generate::Random {
            nodes,
            edges,
            seed,
            out,
        } => {
            let g = generate_random_connected(nodes, edges, seed)?;
            write_output(out.as_deref(), &g.to_text())
        }
        Generate::Commodities {
            graph,
            count,
            ratio,
            seed,
            out,
        } => {
            let g = load_graph(&graph)?;
            let count = match (count, ratio) {
                (Some(c), _) => c,
                (None, Some(r)) if r > 0.0 && r <= 1.0 => commodity_count(g.node_count(), r),
                (None, Some(r)) => return Err(Failure::Usage(format!("ratio {r} outside (0, 1]"))),
                (None, None) => return Err(Failure::Usage("either --count or --ratio is required".into())),
            };
            let list = generate_commodities(&g, count, seed)?;
            write_output(out.as_deref(), &Commodity::list_to_text(&list))
        }
    }
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    if !(args.time_limit > 0.0 && args.time_limit.is_finite()) {
        return Err(Failure::Usage("--time-limit must be positive".into()));
    }
    let inst = load_instance(&args.graph, &args.commodities)?;
    let sol = run_solver(
        &inst,
        args.solver,
        Duration::from_secs_f64(args.time_limit),
        args.iter_cap,
        args.seed,
    )?;
    let dump = SolutionDump::from_solution(&inst, &sol);
    write_output(args.out.as_deref(), &dump.to_text())
}

fn bench_cmd(args: BenchArgs) -> Result<(), Failure> {
    let spec = BenchmarkSpec::parse(&read(&args.spec)?)?;
    let results = run_benchmark(&spec, args.workers)?;
    if let Some(raw) = &args.raw {
        write_output(Some(raw), &results.raw_csv())?;
    }
    write_output(args.out.as_deref(), &results.aggregate_csv())
}

fn verify_cmd(args: VerifyArgs) -> Result<(), Failure> {
    let inst = load_instance(&args.graph, &args.commodities)?;
    let text = read(&args.solution)?;
    let dump = SolutionDump::parse(&text)
        .with_context(|| format!("{}", args.solution.display()))
        .map_err(Failure::Verify)?;
    verify(&inst, &dump)
        .context("solution rejected")
        .map_err(Failure::Verify)?;
    println!("ok: {} of {} commodities routed", dump.objective, inst.k());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(g) => generate(g),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Verify(a) => verify_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (EXIT_USAGE, m),
                Failure::File(e) => (EXIT_FILE, format!("{e:#}")),
                Failure::Verify(e) => (EXIT_VERIFY, format!("{e:#}")),
                Failure::Other(e) => (EXIT_FAILURE, format!("{e:#}")),
            };
            eprintln!("pathls: {msg}");
            ExitCode::from(code)
        }
    }
}
