//! Instance generation and the benchmark harness.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::edp::{solve_ls, solve_msga, Budget, EdpError, EdpInstance};
use crate::graph::{content_lines, Commodity, Graph, GraphError, WEIGHT_SCALE};
use crate::search::SearchConfig;
use crate::tree::InitStrategy;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("spec line {line}: {message}")]
    Spec { line: usize, message: String },
    #[error("{0}")]
    Generator(String),
    #[error("infeasible benchmark: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Edp(#[from] EdpError),
}

/// 4-neighbor `width x height` grid with unit weights; node `(x, y)` is `y * width + x`.
pub fn generate_mesh(width: usize, height: usize) -> Result<Graph, BenchError> {
    if width < 2 || height < 2 {
        return Err(BenchError::Generator(format!(
            "mesh dimensions must be at least 2x2, got {width}x{height}"
        )));
    }
    let mut edges = Vec::with_capacity(2 * width * height);
    for y in 0..height {
        for x in 0..width {
            let u = y * width + x;
            if x + 1 < width {
                edges.push((u, u + 1));
            }
            if y + 1 < height {
                edges.push((u, u + width));
            }
        }
    }
    let weights = vec![vec![WEIGHT_SCALE]; edges.len()];
    Ok(Graph::with_weights(width * height, &edges, weights)?)
}

/// Random connected graph: a random spanning tree plus `edge_count - (n - 1)`
/// distinct extra edges, unit weights.
pub fn generate_random_connected(
    node_count: usize,
    edge_count: usize,
    seed: u64,
) -> Result<Graph, BenchError> {
    let max_edges = node_count * node_count.saturating_sub(1) / 2;
    if node_count < 2 || edge_count + 1 < node_count || edge_count > max_edges {
        return Err(BenchError::Generator(format!(
            "cannot build a connected simple graph with {node_count} nodes and {edge_count} edges"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..node_count).collect();
    order.shuffle(&mut rng);
    let mut present = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(edge_count);
    for i in 1..node_count {
        let (u, v) = (order[i], order[rng.gen_range(0..i)]);
        present.insert((u.min(v), u.max(v)));
        edges.push((u, v));
    }
    while edges.len() < edge_count {
        let (u, v) = (rng.gen_range(0..node_count), rng.gen_range(0..node_count));
        if u != v && present.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
        }
    }
    let weights = vec![vec![WEIGHT_SCALE]; edges.len()];
    Ok(Graph::with_weights(node_count, &edges, weights)?)
}

/// `count` distinct ordered pairs `(s, t)`, `s != t`, sampled uniformly.
pub fn generate_commodities(g: &Graph, count: usize, seed: u64) -> Result<Vec<Commodity>, BenchError> {
    let n = g.node_count();
    let available = n * n.saturating_sub(1);
    if count > available {
        return Err(BenchError::Generator(format!(
            "{count} commodities requested but only {available} ordered pairs exist"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, available, count)
        .into_iter()
        .map(|i| {
            let s = i / (n - 1);
            let r = i % (n - 1);
            Commodity::new(s, if r < s { r } else { r + 1 })
        })
        .collect())
}

/// Commodity count for a ratio of the node count, rounded down.
pub fn commodity_count(node_count: usize, ratio: f64) -> usize {
    (node_count as f64 * ratio + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    File(PathBuf),
    Mesh { width: usize, height: usize },
    Random { nodes: usize, edges: usize, seed: u64 },
}

impl GraphSource {
    /// `mesh:WxH`, `random:N:M:SEED`, `file:PATH`, or a bare path.
    pub fn parse(text: &str) -> Result<Self, String> {
        if let Some(dims) = text.strip_prefix("mesh:") {
            let (w, h) = dims.split_once('x').ok_or("mesh spec must be mesh:WxH")?;
            let num = |s: &str| s.parse::<usize>().map_err(|_| format!("bad mesh dimension `{s}`"));
            return Ok(GraphSource::Mesh {
                width: num(w)?,
                height: num(h)?,
            });
        }
        if let Some(rest) = text.strip_prefix("random:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let [n, m, seed] = parts.as_slice() else {
                return Err("random spec must be random:N:M:SEED".into());
            };
            let num = |s: &str| s.parse::<u64>().map_err(|_| format!("bad number `{s}`"));
            return Ok(GraphSource::Random {
                nodes: num(n)? as usize,
                edges: num(m)? as usize,
                seed: num(seed)?,
            });
        }
        let path = text.strip_prefix("file:").unwrap_or(text);
        if path.is_empty() {
            return Err("empty graph path".into());
        }
        Ok(GraphSource::File(PathBuf::from(path)))
    }

    pub fn label(&self) -> String {
        match self {
            GraphSource::File(p) => p
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            GraphSource::Mesh { width, height } => format!("mesh{width}x{height}"),
            GraphSource::Random { nodes, edges, seed } => format!("random{nodes}-{edges}-{seed}"),
        }
    }

    pub fn load(&self) -> Result<Graph, BenchError> {
        match self {
            GraphSource::File(p) => {
                let text = read_file(p)?;
                Graph::parse(&text).map_err(|e| BenchError::Io {
                    path: p.clone(),
                    message: e.to_string(),
                })
            }
            GraphSource::Mesh { width, height } => generate_mesh(*width, *height),
            GraphSource::Random { nodes, edges, seed } => generate_random_connected(*nodes, *edges, *seed),
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|e| BenchError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Solver {
    Ls,
    Msga,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Ls => "ls",
            Solver::Msga => "msga",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ls" => Some(Solver::Ls),
            "msga" => Some(Solver::Msga),
            _ => None,
        }
    }
}

/// Best objective and time-to-best of one solver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub objective: usize,
    pub time_to_best: f64,
}

/// Runs one solver on one instance with the shared budget conventions.
pub fn run_solver(
    inst: &EdpInstance,
    solver: Solver,
    time_limit: Duration,
    iteration_cap: Option<u64>,
    seed: u64,
) -> Result<crate::edp::EdpSolution, BenchError> {
    Ok(match solver {
        Solver::Ls => {
            let cfg = ls_config(time_limit, iteration_cap, seed);
            solve_ls(inst, &cfg)?.0
        }
        Solver::Msga => {
            let budget = Budget {
                time_limit,
                iteration_cap,
                seed,
            };
            solve_msga(inst, budget).0
        }
    })
}

/// Search settings used by the harness and the CLI for the local search
/// solver: short stalls, light kicks on conflicting trees only, small joint
/// move budgets and shortest-path-tree initialization.
pub fn ls_config(time_limit: Duration, iteration_cap: Option<u64>, seed: u64) -> SearchConfig {
    SearchConfig {
        time_limit,
        iteration_cap,
        seed,
        max_stall_iterations: 1,
        two_move_samples: 20,
        pair_move_samples: 50,
        pair_trees: 2,
        perturbation_moves: 1,
        perturb_contributing_only: true,
        init: InitStrategy::RandomBreadthFirst,
        ..SearchConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub graphs: Vec<GraphSource>,
    pub ratios: Vec<f64>,
    /// One instance per seed in each (graph, ratio) cell.
    pub seeds: Vec<u64>,
    pub time_limit: Duration,
    pub iteration_cap: Option<u64>,
    pub solvers: Vec<Solver>,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            graphs: Vec::new(),
            ratios: vec![0.10, 0.25, 0.40],
            seeds: (0..20).collect(),
            time_limit: Duration::from_secs(1800),
            iteration_cap: None,
            solvers: vec![Solver::Msga, Solver::Ls],
        }
    }
}

impl BenchmarkSpec {
    /// Line-oriented `key=value` format. Keys: `graph` (repeatable),
    /// `ratios`, `instances`, `seeds`, `time_limit`, `iter_cap`, `solvers`.
    /// `instances=N` is shorthand for `seeds=0,...,N-1`.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut spec = BenchmarkSpec::default();
        let mut seeds_set = false;
        let mut instances: Option<(usize, usize)> = None;
        for (line, content) in content_lines(text) {
            let err = |message: String| BenchError::Spec { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err("expected key=value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let list = || value.split(',').map(str::trim).filter(|s| !s.is_empty());
            match key {
                "graph" => spec.graphs.push(GraphSource::parse(value).map_err(err)?),
                "ratios" => {
                    spec.ratios = list()
                        .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad ratio `{s}`"))))
                        .collect::<Result<_, _>>()?;
                }
                "instances" => {
                    let n = value.parse().map_err(|_| err(format!("bad instance count `{value}`")))?;
                    instances = Some((line, n));
                }
                "seeds" => {
                    spec.seeds = list()
                        .map(|s| s.parse::<u64>().map_err(|_| err(format!("bad seed `{s}`"))))
                        .collect::<Result<_, _>>()?;
                    seeds_set = true;
                }
                "time_limit" => {
                    let secs: f64 = value.parse().map_err(|_| err(format!("bad time limit `{value}`")))?;
                    if !(secs > 0.0 && secs.is_finite()) {
                        return Err(err("time limit must be positive".into()));
                    }
                    spec.time_limit = Duration::from_secs_f64(secs);
                }
                "iter_cap" => {
                    spec.iteration_cap =
                        Some(value.parse().map_err(|_| err(format!("bad iteration cap `{value}`")))?);
                }
                "solvers" => {
                    spec.solvers = list()
                        .map(|s| Solver::parse(s).ok_or_else(|| err(format!("unknown solver `{s}`"))))
                        .collect::<Result<_, _>>()?;
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        if let Some((line, n)) = instances {
            if seeds_set && spec.seeds.len() != n {
                return Err(BenchError::Spec {
                    line,
                    message: format!("instances={n} disagrees with {} seeds", spec.seeds.len()),
                });
            }
            if !seeds_set {
                spec.seeds = (0..n as u64).collect();
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Infeasible(m.into()));
        if self.graphs.is_empty() {
            return bad("no graphs");
        }
        if self.ratios.is_empty() || self.ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return bad("ratios must lie in (0, 1]");
        }
        if self.seeds.is_empty() {
            return bad("at least one instance per cell is required");
        }
        if self.solvers.is_empty() {
            return bad("no solvers");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub graph: String,
    pub ratio: f64,
    pub k: usize,
    pub solver: Solver,
    pub seed: u64,
    pub objective: usize,
    pub time_to_best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub graph: String,
    pub ratio: f64,
    pub k: usize,
    pub solver: Solver,
    pub q_mean: f64,
    pub t_mean: f64,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchResults {
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggregateRow>,
}

pub const AGGREGATE_HEADER: &str = "graph,ratio,k,solver,q_mean,t_mean_s,instances";
pub const RAW_HEADER: &str = "graph,ratio,k,solver,seed,q,t_s";

impl BenchResults {
    pub fn aggregate_csv(&self) -> String {
        let mut out = format!("{AGGREGATE_HEADER}\n");
        for r in &self.aggregate {
            writeln!(
                out,
                "{},{},{},{},{:.3},{:.3},{}",
                r.graph,
                r.ratio,
                r.k,
                r.solver.name(),
                r.q_mean,
                r.t_mean,
                r.instances
            )
            .unwrap();
        }
        out
    }

    pub fn raw_csv(&self) -> String {
        let mut out = format!("{RAW_HEADER}\n");
        for r in &self.raw {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.3}",
                r.graph,
                r.ratio,
                r.k,
                r.solver.name(),
                r.seed,
                r.objective,
                r.time_to_best
            )
            .unwrap();
        }
        out
    }
}

/// Solver seed, derived from the instance seed and the solver so that the
/// schedule of parallel workers never influences results.
pub fn solver_seed(instance_seed: u64, solver: Solver) -> u64 {
    let tag = match solver {
        Solver::Ls => 0x5bd1_e995,
        Solver::Msga => 0x2545_f491,
    };
    instance_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(tag)
}

struct Job {
    cell: usize,
    graph: String,
    ratio: f64,
    instance: Arc<EdpInstance>,
    seed: u64,
    solver: Solver,
}

/// Runs every solver on every instance of every cell using up to `workers`
/// threads, then aggregates per (graph, ratio, solver).
pub fn run_benchmark(spec: &BenchmarkSpec, workers: usize) -> Result<BenchResults, BenchError> {
    spec.validate()?;
    let mut jobs = Vec::new();
    let mut cell = 0;
    for source in &spec.graphs {
        let graph = Arc::new(source.load()?);
        let label = source.label();
        for &ratio in &spec.ratios {
            let k = commodity_count(graph.node_count(), ratio);
            if k == 0 {
                return Err(BenchError::Infeasible(format!(
                    "ratio {ratio} yields no commodities on {label}"
                )));
            }
            for &seed in &spec.seeds {
                let commodities = generate_commodities(&graph, k, seed)?;
                let instance = Arc::new(EdpInstance::new(graph.clone(), commodities)?);
                for &solver in &spec.solvers {
                    jobs.push(Job {
                        cell,
                        graph: label.clone(),
                        ratio,
                        instance: instance.clone(),
                        seed,
                        solver,
                    });
                }
            }
            cell += 1;
        }
    }

    let results = run_parallel(&jobs, workers.max(1), |job| {
        let sol = run_solver(
            &job.instance,
            job.solver,
            spec.time_limit,
            spec.iteration_cap,
            solver_seed(job.seed, job.solver),
        )?;
        Ok(RunOutcome {
            objective: sol.objective(),
            time_to_best: sol.time_to_best,
        })
    })?;

    let raw: Vec<RawRow> = jobs
        .iter()
        .zip(&results)
        .map(|(job, out)| RawRow {
            graph: job.graph.clone(),
            ratio: job.ratio,
            k: job.instance.k(),
            solver: job.solver,
            seed: job.seed,
            objective: out.objective,
            time_to_best: out.time_to_best,
        })
        .collect();

    let mut aggregate = Vec::new();
    for c in 0..cell {
        for &solver in &spec.solvers {
            let rows: Vec<&RawRow> = jobs
                .iter()
                .zip(&raw)
                .filter(|(j, _)| j.cell == c && j.solver == solver)
                .map(|(_, r)| r)
                .collect();
            let count = rows.len() as f64;
            aggregate.push(AggregateRow {
                graph: rows[0].graph.clone(),
                ratio: rows[0].ratio,
                k: rows[0].k,
                solver,
                q_mean: rows.iter().map(|r| r.objective as f64).sum::<f64>() / count,
                t_mean: rows.iter().map(|r| r.time_to_best).sum::<f64>() / count,
                instances: rows.len(),
            });
        }
    }
    Ok(BenchResults { raw, aggregate })
}

fn run_parallel<T: Sync, R: Send>(
    jobs: &[T],
    workers: usize,
    f: impl Fn(&T) -> Result<R, BenchError> + Sync,
) -> Result<Vec<R>, BenchError> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<R, BenchError>>>> =
        jobs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every job ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::bfs_distances;

    #[test]
    fn mesh_sizes() {
        for (w, h, m) in [(2, 2, 4), (25, 25, 1200), (15, 15, 420), (3, 3, 12), (10, 10, 180)] {
            let g = generate_mesh(w, h).unwrap();
            assert_eq!(g.node_count(), w * h);
            assert_eq!(g.edge_count(), m);
            assert_eq!(g.edge_count(), 2 * w * h - w - h);
        }
        assert!(generate_mesh(1, 5).is_err());
    }

    #[test]
    fn random_graphs_are_connected() {
        for seed in 0..10 {
            let g = generate_random_connected(30, 60, seed).unwrap();
            assert_eq!(g.edge_count(), 60);
            assert!(bfs_distances(&g, 0, |_| false).iter().all(Option::is_some));
        }
        assert!(generate_random_connected(5, 3, 0).is_err());
        assert!(generate_random_connected(4, 7, 0).is_err());
    }

    #[test]
    fn commodity_sampling() {
        let g = generate_mesh(25, 25).unwrap();
        let k = commodity_count(625, 0.10);
        assert_eq!(k, 62);
        assert_eq!(commodity_count(625, 0.25), 156);
        assert_eq!(commodity_count(625, 0.40), 250);
        assert_eq!(commodity_count(225, 0.10), 22);
        assert_eq!(commodity_count(225, 0.25), 56);
        assert_eq!(commodity_count(225, 0.40), 90);
        let cs = generate_commodities(&g, k, 5).unwrap();
        assert_eq!(cs.len(), 62);
        assert!(cs.iter().all(|c| c.source != c.target && c.source < 625 && c.target < 625));
        let mut dedup = cs.clone();
        dedup.sort_by_key(|c| (c.source, c.target));
        dedup.dedup();
        assert_eq!(dedup.len(), 62);
        assert_eq!(generate_commodities(&g, k, 5).unwrap(), cs);
        assert_eq!(generate_commodities(&g, 1, 1).unwrap().len(), 1);

        let tiny = generate_mesh(2, 2).unwrap();
        assert_eq!(generate_commodities(&tiny, 12, 0).unwrap().len(), 12);
        assert!(generate_commodities(&tiny, 13, 0).is_err());
    }

    #[test]
    fn spec_parsing() {
        let spec = BenchmarkSpec::parse(
            "# desk scale\ngraph=mesh:10x10\ngraph=random:20:40:3\nratios=0.1, 0.25\ninstances=2\ntime_limit=0.5\niter_cap=10\nsolvers=msga\n",
        )
        .unwrap();
        assert_eq!(spec.graphs.len(), 2);
        assert_eq!(spec.graphs[0], GraphSource::Mesh { width: 10, height: 10 });
        assert_eq!(spec.ratios, vec![0.1, 0.25]);
        assert_eq!(spec.seeds, vec![0, 1]);
        assert_eq!(spec.iteration_cap, Some(10));
        assert_eq!(spec.solvers, vec![Solver::Msga]);
        assert!(BenchmarkSpec::parse("graph=mesh:3x3\nratios=1.5\n").is_err());
        assert!(BenchmarkSpec::parse("ratios=0.5\n").is_err());
        assert!(matches!(
            BenchmarkSpec::parse("graph=mesh:3x3\nbogus=1\n"),
            Err(BenchError::Spec { line: 2, .. })
        ));
        assert!(BenchmarkSpec::parse("graph=mesh:3x3\nseeds=1,2\ninstances=3\n").is_err());
    }

    #[test]
    fn msga_benchmark_rows() {
        let spec = BenchmarkSpec {
            graphs: vec![GraphSource::Mesh { width: 4, height: 4 }],
            ratios: vec![0.25],
            seeds: vec![1, 2],
            time_limit: Duration::from_secs(1),
            iteration_cap: Some(20),
            solvers: vec![Solver::Msga],
        };
        let results = run_benchmark(&spec, 2).unwrap();
        assert_eq!(results.raw.len(), 2);
        assert_eq!(results.aggregate.len(), 1);
        let mean = results.raw.iter().map(|r| r.objective as f64).sum::<f64>() / 2.0;
        assert!((results.aggregate[0].q_mean - mean).abs() < 1e-12);
        let csv = results.aggregate_csv();
        assert_eq!(csv.lines().next().unwrap(), AGGREGATE_HEADER);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(results.raw_csv().lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("mesh4x4,0.25,4,msga,"));
    }

    #[test]
    fn missing_graph_file_is_reported() {
        let spec = BenchmarkSpec {
            graphs: vec![GraphSource::File("/nonexistent/graph.txt".into())],
            ..BenchmarkSpec::default()
        };
        assert!(matches!(run_benchmark(&spec, 1), Err(BenchError::Io { .. })));
    }
}
