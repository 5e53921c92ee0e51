//! Maximum edge-disjoint paths.
//!
//! The local search model holds one tree variable per commodity and a single
//! [`PathEdgeDisjoint`] constraint. The search minimizes its violation; a
//! feasible routing is read off the current paths by dropping the most
//! conflicting paths and greedily rerouting the dropped commodities.

use std::ops::ControlFlow;
use std::sync::Arc;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::differentiable::{DiffId, Model, ModelError, PathEdgeDisjoint, TreeId, Value};
use crate::graph::{shortest_path_avoiding, Commodity, EdgeId, Graph};
use crate::search::{self, Clock, SearchConfig, SearchError, SearchTrace};
use crate::tree::{InitStrategy, RootedSpanningTree, TreeError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EdpError {
    #[error("instance has no commodities")]
    NoCommodities,
    #[error("commodity {index} is invalid: {reason}")]
    InvalidCommodity { index: usize, reason: String },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone)]
pub struct EdpInstance {
    pub graph: Arc<Graph>,
    pub commodities: Vec<Commodity>,
}

impl EdpInstance {
    pub fn new(graph: Arc<Graph>, commodities: Vec<Commodity>) -> Result<Self, EdpError> {
        if commodities.is_empty() {
            return Err(EdpError::NoCommodities);
        }
        let n = graph.node_count();
        for (index, c) in commodities.iter().enumerate() {
            let reason = if c.source >= n || c.target >= n {
                "node out of range"
            } else if c.source == c.target {
                "source equals target"
            } else {
                continue;
            };
            return Err(EdpError::InvalidCommodity {
                index,
                reason: reason.into(),
            });
        }
        Ok(EdpInstance { graph, commodities })
    }

    pub fn k(&self) -> usize {
        self.commodities.len()
    }
}

/// Per-commodity route, `None` when the commodity is not served.
pub type Routing = Vec<Option<Vec<EdgeId>>>;

pub fn routed_count(routes: &Routing) -> usize {
    routes.iter().filter(|r| r.is_some()).count()
}

#[derive(Debug, Clone)]
pub struct EdpSolution {
    /// Tree variables at the time of the best routing (empty for MSGA).
    pub trees: Vec<RootedSpanningTree>,
    /// Candidate path per commodity the routing was derived from.
    pub paths: Vec<Vec<EdgeId>>,
    /// The feasible, mutually edge-disjoint routing.
    pub routes: Routing,
    /// Non-disjointness of `paths`.
    pub violation: Value,
    /// Seconds (iterations in capped mode) until this routing was found.
    pub time_to_best: f64,
}

impl EdpSolution {
    pub fn objective(&self) -> usize {
        routed_count(&self.routes)
    }

    /// Indices of served commodities.
    pub fn disjoint_subset(&self) -> Vec<usize> {
        (0..self.routes.len()).filter(|&i| self.routes[i].is_some()).collect()
    }
}

/// The local search model: one tree per commodity, one disjointness constraint.
pub struct EdpModel {
    pub model: Model,
    pub trees: Vec<TreeId>,
    pub disjoint: DiffId,
}

impl EdpModel {
    pub fn violation(&self) -> Value {
        self.model.value(self.disjoint)
    }
}

pub fn build_model(inst: &EdpInstance, seed: u64, init: InitStrategy) -> Result<EdpModel, EdpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trees = inst
        .commodities
        .iter()
        .map(|c| init.build(inst.graph.clone(), c.source, c.target, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    assemble(inst, trees)
}

/// Model whose trees induce the given paths (one per commodity).
pub fn build_model_on_paths(
    inst: &EdpInstance,
    paths: &[Vec<EdgeId>],
    seed: u64,
) -> Result<EdpModel, EdpError> {
    assert_eq!(paths.len(), inst.k());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trees = inst
        .commodities
        .iter()
        .zip(paths)
        .map(|(c, p)| {
            RootedSpanningTree::init_around_path(inst.graph.clone(), c.source, c.target, p, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    assemble(inst, trees)
}

fn assemble(inst: &EdpInstance, trees: Vec<RootedSpanningTree>) -> Result<EdpModel, EdpError> {
    let mut model = Model::new(inst.graph.clone());
    let ids = trees
        .into_iter()
        .map(|t| model.add_tree(t))
        .collect::<Result<Vec<_>, _>>()?;
    let disjoint = model.register(PathEdgeDisjoint::new(&model, &ids)?);
    Ok(EdpModel {
        model,
        trees: ids,
        disjoint,
    })
}

/// Indices of paths kept after repeatedly dropping the path with the most
/// edges shared with other kept paths. Ties drop the higher index.
pub fn extract_disjoint(paths: &[Vec<EdgeId>], edge_count: usize) -> Vec<usize> {
    let mut load = vec![0u32; edge_count];
    for p in paths {
        for &e in p {
            load[e] += 1;
        }
    }
    let mut kept = vec![true; paths.len()];
    loop {
        let mut worst: Option<(usize, usize)> = None;
        for (i, p) in paths.iter().enumerate().filter(|&(i, _)| kept[i]) {
            let shared = p.iter().filter(|&&e| load[e] >= 2).count();
            if shared > 0 && worst.map_or(true, |(_, s)| shared >= s) {
                worst = Some((i, shared));
            }
        }
        let Some((i, _)) = worst else {
            break;
        };
        kept[i] = false;
        for &e in &paths[i] {
            load[e] -= 1;
        }
    }
    (0..paths.len()).filter(|&i| kept[i]).collect()
}

/// Routes every unserved commodity, in index order, on a minimum-hop path
/// avoiding all edges already in use. Served commodities are left untouched.
pub fn greedy_complete(g: &Graph, commodities: &[Commodity], mut routes: Routing) -> Routing {
    assert_eq!(routes.len(), commodities.len());
    let mut used = vec![false; g.edge_count()];
    for r in routes.iter().flatten() {
        for &e in r {
            used[e] = true;
        }
    }
    for (c, route) in commodities.iter().zip(routes.iter_mut()) {
        if route.is_some() {
            continue;
        }
        if let Some(p) = shortest_path_avoiding(g, c.source, c.target, &used) {
            for &e in &p {
                used[e] = true;
            }
            *route = Some(p);
        }
    }
    routes
}

/// Feasible routing derived from candidate paths: extraction, then completion.
pub fn evaluate_paths(inst: &EdpInstance, paths: &[Vec<EdgeId>]) -> Routing {
    let kept = extract_disjoint(paths, inst.graph.edge_count());
    let mut routes: Routing = vec![None; paths.len()];
    for i in kept {
        routes[i] = Some(paths[i].clone());
    }
    greedy_complete(&inst.graph, &inst.commodities, routes)
}

/// Objective of the current model state.
pub fn evaluate(inst: &EdpInstance, model: &EdpModel) -> usize {
    routed_count(&evaluate_paths(inst, model.model.paths()))
}

/// Hop-count greedy routing of all commodities in the given order.
pub fn greedy_route(inst: &EdpInstance, order: &[usize]) -> Routing {
    let g = &inst.graph;
    let mut used = vec![false; g.edge_count()];
    let mut routes: Routing = vec![None; inst.k()];
    for &i in order {
        let c = inst.commodities[i];
        if let Some(p) = shortest_path_avoiding(g, c.source, c.target, &used) {
            for &e in &p {
                used[e] = true;
            }
            routes[i] = Some(p);
        }
    }
    routes
}

/// Local search minimizing non-disjointness, tracking the best extracted routing.
pub fn solve_ls(inst: &EdpInstance, cfg: &SearchConfig) -> Result<(EdpSolution, SearchTrace), EdpError> {
    let mut edp = build_model(inst, cfg.seed.wrapping_add(0x9e37_79b9), cfg.init)?;
    let k = inst.k();
    let mut best: Option<EdpSolution> = None;
    let disjoint = edp.disjoint;
    let trace = search::run(&mut edp.model, disjoint, cfg, |model, _event, now| {
        let routes = evaluate_paths(inst, model.paths());
        let objective = routed_count(&routes);
        if best.as_ref().map_or(true, |b| objective > b.objective()) {
            best = Some(EdpSolution {
                trees: model.trees().to_vec(),
                paths: model.paths().to_vec(),
                routes,
                violation: model.value(disjoint),
                time_to_best: now,
            });
        }
        if objective == k {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    let best = best.expect("the search reports its starting point");
    Ok((best, trace))
}

/// Budget for the multi-start greedy baseline.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub time_limit: Duration,
    /// Deterministic mode: number of greedy passes, time measured in passes.
    pub iteration_cap: Option<u64>,
    pub seed: u64,
}

/// Multi-start simple greedy: random commodity orders, hop-count routing on
/// the residual graph, best pass kept.
pub fn solve_msga(inst: &EdpInstance, budget: Budget) -> (EdpSolution, SearchTrace) {
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let clock = Clock::for_cap(budget.iteration_cap);
    let k = inst.k();
    let mut order: Vec<usize> = (0..k).collect();
    let mut trace = SearchTrace::default();
    let mut best: Option<(Routing, f64)> = None;
    loop {
        if best.is_some() && clock.exhausted(trace.iterations, budget.time_limit, budget.iteration_cap) {
            break;
        }
        order.shuffle(&mut rng);
        let routes = greedy_route(inst, &order);
        trace.iterations += 1;
        let objective = routed_count(&routes);
        if best.as_ref().map_or(true, |(b, _)| objective > routed_count(b)) {
            let now = clock.now(trace.iterations);
            trace.best_value = objective as Value;
            trace.best_time = now;
            trace.improvements.push((now, objective as Value));
            best = Some((routes, now));
            if objective == k {
                break;
            }
        }
    }
    let (routes, time_to_best) = best.unwrap();
    let paths: Vec<Vec<EdgeId>> = routes.iter().map(|r| r.clone().unwrap_or_default()).collect();
    let solution = EdpSolution {
        trees: Vec::new(),
        paths,
        routes,
        violation: 0,
        time_to_best,
    };
    (solution, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generate_mesh;

    fn instance(g: Graph, pairs: &[(usize, usize)]) -> EdpInstance {
        let cs = pairs.iter().map(|&(s, t)| Commodity::new(s, t)).collect();
        EdpInstance::new(Arc::new(g), cs).unwrap()
    }

    #[test]
    fn instance_validation() {
        let g = Arc::new(Graph::new(2, &[(0, 1)]).unwrap());
        assert_eq!(
            EdpInstance::new(g.clone(), vec![]).unwrap_err(),
            EdpError::NoCommodities
        );
        assert!(matches!(
            EdpInstance::new(g, vec![Commodity::new(1, 1)]),
            Err(EdpError::InvalidCommodity { index: 0, .. })
        ));
    }

    #[test]
    fn single_commodity_never_conflicts() {
        let inst = instance(generate_mesh(4, 4).unwrap(), &[(0, 15)]);
        for seed in 0..5 {
            let m = build_model(&inst, seed, InitStrategy::RandomDepthFirst).unwrap();
            assert_eq!(m.violation(), 0);
            assert_eq!(evaluate(&inst, &m), 1);
        }
    }

    #[test]
    fn disjoint_paths_give_zero_violation() {
        // Rows of a 4x3 mesh: 0-1-2-3, 4-5-6-7, 8-9-10-11.
        let g = generate_mesh(4, 3).unwrap();
        let inst = instance(g, &[(0, 3), (4, 7), (8, 11)]);
        let none = vec![false; inst.graph.edge_count()];
        let paths: Vec<Vec<EdgeId>> = inst
            .commodities
            .iter()
            .map(|c| shortest_path_avoiding(&inst.graph, c.source, c.target, &none).unwrap())
            .collect();
        let m = build_model_on_paths(&inst, &paths, 1).unwrap();
        assert_eq!(m.violation(), 0);
        assert_eq!(evaluate(&inst, &m), 3);
    }

    #[test]
    fn extraction_examples() {
        assert_eq!(extract_disjoint(&[vec![0], vec![1], vec![2]], 3), vec![0, 1, 2]);
        // p1 shares an edge with p0 and another with p2.
        let paths = vec![vec![0, 1], vec![1, 2, 3], vec![3, 4]];
        assert_eq!(extract_disjoint(&paths, 5), vec![0, 2]);
        assert_eq!(extract_disjoint(&[vec![0, 1], vec![0, 1]], 2), vec![0]);
        assert_eq!(extract_disjoint(&[], 2), Vec::<usize>::new());
    }

    #[test]
    fn completion_reroutes_around_congestion() {
        // Square 0-1-2-3: commodity 1 is dropped from the shared edge and
        // rerouted the long way around.
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let inst = instance(g, &[(0, 1), (0, 1)]);
        let routes = greedy_complete(&inst.graph, &inst.commodities, vec![Some(vec![0]), None]);
        assert_eq!(routes[1], Some(vec![3, 2, 1]));
        assert_eq!(routed_count(&routes), 2);
        let untouched = greedy_complete(&inst.graph, &inst.commodities, vec![Some(vec![0]), Some(vec![3, 2, 1])]);
        assert_eq!(routed_count(&untouched), 2);
    }

    #[test]
    fn completion_on_saturated_bridge_adds_nothing() {
        // Two triangles joined by the bridge (2,3).
        let g = Graph::new(6, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]).unwrap();
        let inst = instance(g, &[(0, 5), (1, 4)]);
        let first = shortest_path_avoiding(&inst.graph, 0, 5, &[false; 7]).unwrap();
        let routes = greedy_complete(&inst.graph, &inst.commodities, vec![Some(first), None]);
        assert_eq!(routed_count(&routes), 1);
    }

    #[test]
    fn msga_single_commodity() {
        let inst = instance(generate_mesh(3, 3).unwrap(), &[(0, 8)]);
        let budget = Budget {
            time_limit: Duration::from_millis(50),
            iteration_cap: Some(3),
            seed: 1,
        };
        let (sol, _) = solve_msga(&inst, budget);
        assert_eq!(sol.objective(), 1);
        assert_eq!(sol.routes[0].as_ref().unwrap().len(), 4);
    }

    #[test]
    fn msga_finds_the_better_order() {
        // Main line 0-1-2-3 and a longer detour 0-4-5-6-3. Routing (0,3)
        // first takes the main line and blocks (1,2); the other order serves both.
        let g = Graph::new(7, &[(0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6), (6, 3)]).unwrap();
        let inst = instance(g, &[(0, 3), (1, 2)]);
        let a = routed_count(&greedy_route(&inst, &[0, 1]));
        let b = routed_count(&greedy_route(&inst, &[1, 0]));
        assert_eq!((a, b), (1, 2));
        let budget = Budget {
            time_limit: Duration::from_secs(1),
            iteration_cap: Some(50),
            seed: 4,
        };
        let (sol, trace) = solve_msga(&inst, budget);
        assert_eq!(sol.objective(), 2);
        assert!(trace.improvements.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn ls_routes_a_perfectly_routable_mesh() {
        let inst = instance(generate_mesh(5, 5).unwrap(), &[(0, 4), (20, 24), (10, 14), (2, 22)]);
        let cfg = SearchConfig {
            iteration_cap: Some(2000),
            seed: 3,
            ..SearchConfig::default()
        };
        let (sol, trace) = solve_ls(&inst, &cfg).unwrap();
        assert_eq!(sol.objective(), 4);
        assert!(trace.best_value <= sol.violation || sol.objective() == 4);
    }

    #[test]
    fn ls_capped_runs_are_reproducible() {
        let inst = instance(generate_mesh(4, 4).unwrap(), &[(0, 15), (3, 12), (5, 10), (1, 14), (4, 7)]);
        let cfg = SearchConfig {
            iteration_cap: Some(300),
            seed: 9,
            ..SearchConfig::default()
        };
        let (a, ta) = solve_ls(&inst, &cfg).unwrap();
        let (b, tb) = solve_ls(&inst, &cfg).unwrap();
        assert_eq!(a.routes, b.routes);
        assert_eq!(a.time_to_best, b.time_to_best);
        assert_eq!(ta, tb);
    }
}
