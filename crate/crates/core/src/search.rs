//! First-improvement local search over the tree variables of a [`Model`].
//!
//! Moves come only from the preferred (path-changing) neighborhoods. Each
//! iteration walks the move portfolio in order and takes the first strictly
//! improving move. After `max_stall_iterations` fruitless iterations the
//! engine diversifies, alternating between a random perturbation of every
//! tree and a fresh start of the worst-contributing tree.

use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::differentiable::{DiffId, Kind, Model, ModelError, TreeId, Value};
use crate::tree::{BasicMove, ComplexMove, InitStrategy, Neighborhood};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("pair moves need two distinct trees (got {0} twice)")]
    SameTree(TreeId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    /// One basic move on one tree.
    OneMove,
    /// Two independent basic moves on one tree.
    TwoMove,
    /// One basic move on each of two trees, evaluated jointly.
    PairMove,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub time_limit: Duration,
    pub seed: u64,
    pub max_stall_iterations: u64,
    pub portfolio: Vec<MoveKind>,
    /// Deterministic mode: stop after this many iterations and measure time in
    /// iterations instead of reading the wall clock.
    pub iteration_cap: Option<u64>,
    pub two_move_samples: usize,
    pub pair_move_samples: usize,
    /// Tree pairs tried per iteration by the pair-move phase.
    pub pair_trees: usize,
    pub perturbation_moves: usize,
    /// Perturb only trees contributing to the objective instead of all trees.
    pub perturb_contributing_only: bool,
    /// Growth rule for fresh trees (initial trees and restarts).
    pub init: InitStrategy,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            time_limit: Duration::from_secs(10),
            seed: 0,
            max_stall_iterations: 10,
            portfolio: vec![MoveKind::OneMove, MoveKind::TwoMove, MoveKind::PairMove],
            iteration_cap: None,
            two_move_samples: 200,
            pair_move_samples: 400,
            pair_trees: 4,
            perturbation_moves: 3,
            perturb_contributing_only: false,
            init: InitStrategy::RandomDepthFirst,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.iteration_cap.is_none() && self.time_limit.is_zero() {
            return Err(SearchError::Config("time limit must be positive".into()));
        }
        if self.portfolio.is_empty() {
            return Err(SearchError::Config("move portfolio is empty".into()));
        }
        if self.max_stall_iterations == 0 {
            return Err(SearchError::Config("max_stall_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchEvent {
    /// The guiding value reached a new best.
    NewBest,
    /// No move in the portfolio improved; the engine is about to diversify.
    LocalOptimum,
    /// Periodic checkpoint.
    Interval,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchTrace {
    pub best_value: Value,
    /// Seconds (or iterations in capped mode) until `best_value` was reached.
    pub best_time: f64,
    pub iterations: u64,
    pub accepted_moves: u64,
    /// `(time, value)` at every new best, strictly decreasing in value.
    pub improvements: Vec<(f64, Value)>,
    /// `(time, value)` right after each diversification step.
    pub perturbations: Vec<(f64, Value)>,
}

impl SearchTrace {
    /// `time_s,value` lines, one per improvement.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,value\n");
        for (t, v) in &self.improvements {
            out.push_str(&format!("{t:.6},{v}\n"));
        }
        out
    }
}

/// Wall clock, or a logical clock counting iterations.
#[derive(Debug, Clone, Copy)]
pub enum Clock {
    Wall(Instant),
    Iterations,
}

impl Clock {
    pub fn for_cap(iteration_cap: Option<u64>) -> Self {
        match iteration_cap {
            Some(_) => Clock::Iterations,
            None => Clock::Wall(Instant::now()),
        }
    }

    pub fn now(&self, iterations: u64) -> f64 {
        match self {
            Clock::Wall(start) => start.elapsed().as_secs_f64(),
            Clock::Iterations => iterations as f64,
        }
    }

    /// Whether the budget is spent after `iterations` iterations.
    pub fn exhausted(&self, iterations: u64, time_limit: Duration, cap: Option<u64>) -> bool {
        match (self, cap) {
            (Clock::Iterations, Some(cap)) => iterations >= cap,
            (Clock::Wall(start), _) => start.elapsed() >= time_limit,
            (Clock::Iterations, None) => true,
        }
    }
}

/// Indices `0..n` in random order.
fn shuffled(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}

/// First strictly improving basic move on `tree`, scanning in random order.
pub fn explore_one_move(
    model: &Model,
    tree: TreeId,
    objective: DiffId,
    rng: &mut impl Rng,
) -> Result<Option<BasicMove>, SearchError> {
    let nb = model.tree(tree).neighborhood();
    for i in shuffled(nb.replacing_count(), rng) {
        let (e_in, outs) = nb.entry(i);
        let offset = rng.gen_range(0..outs.len());
        for j in 0..outs.len() {
            let m = BasicMove::new(e_in, outs[(j + offset) % outs.len()]);
            if model.replace_edge_delta(objective, tree, m)? < 0 {
                return Ok(Some(m));
            }
        }
    }
    Ok(None)
}

/// Candidate index pairs: all pairs in random order when there are at most
/// `budget` of them, otherwise `budget` random draws.
fn pair_candidates(a: usize, b: usize, same: bool, budget: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    if budget == 0 || a == 0 || b == 0 {
        return Vec::new();
    }
    let total = if same { a * (a - 1) / 2 } else { a * b };
    if total <= budget {
        let mut all = Vec::with_capacity(total);
        for i in 0..a {
            let start = if same { i + 1 } else { 0 };
            for j in start..b {
                all.push((i, j));
            }
        }
        all.shuffle(rng);
        all
    } else {
        (0..budget)
            .map(|_| {
                let i = rng.gen_range(0..a);
                let mut j = rng.gen_range(0..b);
                if same {
                    while j == i {
                        j = rng.gen_range(0..b);
                    }
                }
                (i, j)
            })
            .collect()
    }
}

/// The `keep` moves of `nb` with the smallest individual delta, ties in
/// random order.
fn ranked_moves(
    model: &Model,
    tree: TreeId,
    objective: DiffId,
    nb: &Neighborhood,
    keep: usize,
    rng: &mut impl Rng,
) -> Result<Vec<BasicMove>, SearchError> {
    let mut scored = Vec::with_capacity(nb.move_count());
    for m in nb.moves() {
        scored.push((model.replace_edge_delta(objective, tree, m)?, m));
    }
    scored.shuffle(rng);
    scored.sort_by_key(|&(d, _)| d);
    scored.truncate(keep);
    Ok(scored.into_iter().map(|(_, m)| m).collect())
}

/// Smallest `n` with `n * n >= x`.
fn ceil_sqrt(x: usize) -> usize {
    let mut n = (x as f64).sqrt() as usize;
    while n * n < x {
        n += 1;
    }
    n
}

/// Improving pair of independent basic moves on one tree. Candidates are
/// pairs drawn from the individually best moves, about `samples` in total.
pub fn explore_two_move(
    model: &Model,
    tree: TreeId,
    objective: DiffId,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Option<ComplexMove>, SearchError> {
    if samples == 0 {
        return Ok(None);
    }
    let nb = model.tree(tree).neighborhood();
    let ranked = ranked_moves(model, tree, objective, &nb, ceil_sqrt(2 * samples) + 1, rng)?;
    for (i, j) in pair_candidates(ranked.len(), ranked.len(), true, samples, rng) {
        let (a, b) = (ranked[i], ranked[j]);
        if a.e_in == b.e_in || a.e_out == b.e_out {
            continue;
        }
        let cm = ComplexMove::new(vec![a, b]);
        match model.complex_delta(objective, tree, &cm) {
            Ok(d) if d < 0 => return Ok(Some(cm)),
            Ok(_) | Err(ModelError::Tree(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(None)
}

/// Improving coordinated moves on two distinct trees, judged jointly.
pub fn explore_pair_move(
    model: &Model,
    tree_a: TreeId,
    tree_b: TreeId,
    objective: DiffId,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Option<(BasicMove, BasicMove)>, SearchError> {
    if tree_a == tree_b {
        return Err(SearchError::SameTree(tree_a));
    }
    let na = model.tree(tree_a).neighborhood();
    let nb = model.tree(tree_b).neighborhood();
    explore_pair_with(model, (tree_a, &na), (tree_b, &nb), objective, samples, rng)
}

fn explore_pair_with(
    model: &Model,
    (tree_a, na): (TreeId, &Neighborhood),
    (tree_b, nb): (TreeId, &Neighborhood),
    objective: DiffId,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Option<(BasicMove, BasicMove)>, SearchError> {
    if samples == 0 {
        return Ok(None);
    }
    let keep = ceil_sqrt(samples);
    let ra = ranked_moves(model, tree_a, objective, na, keep, rng)?;
    let rb = ranked_moves(model, tree_b, objective, nb, keep, rng)?;
    for (i, j) in pair_candidates(ra.len(), rb.len(), false, samples, rng) {
        let (ma, mb) = (ra[i], rb[j]);
        if model.replace_edge_delta_multi(objective, &[(tree_a, ma), (tree_b, mb)])? < 0 {
            return Ok(Some((ma, mb)));
        }
    }
    Ok(None)
}

/// Local search driver state.
struct Engine<'a, F> {
    model: &'a mut Model,
    objective: DiffId,
    cfg: &'a SearchConfig,
    rng: ChaCha8Rng,
    clock: Clock,
    trace: SearchTrace,
    observer: F,
    stopped: bool,
}

const INTERVAL_ITERATIONS: u64 = 1000;

impl<'a, F: FnMut(&Model, SearchEvent, f64) -> ControlFlow<()>> Engine<'a, F> {
    fn now(&self) -> f64 {
        self.clock.now(self.trace.iterations)
    }

    fn trees(&self) -> Vec<TreeId> {
        let d = self.model.diff(self.objective);
        (0..self.model.tree_count()).filter(|&t| d.depends_on(t)).collect()
    }

    /// Trees that can improve the objective by themselves, in random order.
    fn candidates(&mut self) -> Vec<TreeId> {
        let mut c: Vec<TreeId> = self
            .trees()
            .into_iter()
            .filter(|&t| self.model.contribution(self.objective, t) > 0)
            .collect();
        if c.is_empty() {
            c = self.trees();
        }
        c.shuffle(&mut self.rng);
        c
    }

    fn try_kind(&mut self, kind: MoveKind, candidates: &[TreeId]) -> Result<bool, SearchError> {
        match kind {
            MoveKind::OneMove => {
                for &t in candidates {
                    if let Some(m) = explore_one_move(self.model, t, self.objective, &mut self.rng)? {
                        let _ = self.model.apply(t, m)?;
                        return Ok(true);
                    }
                }
            }
            MoveKind::TwoMove => {
                for &t in candidates {
                    let samples = self.cfg.two_move_samples;
                    if let Some(cm) =
                        explore_two_move(self.model, t, self.objective, samples, &mut self.rng)?
                    {
                        let _ = self.model.apply_complex(t, &cm)?;
                        return Ok(true);
                    }
                }
            }
            MoveKind::PairMove => {
                let all = self.trees();
                if all.len() < 2 || candidates.is_empty() {
                    return Ok(false);
                }
                for _ in 0..self.cfg.pair_trees {
                    let a = candidates[self.rng.gen_range(0..candidates.len())];
                    // Partner drawn from the other candidates when possible.
                    let pool: Vec<TreeId> = if candidates.len() >= 2 {
                        candidates.iter().copied().filter(|&t| t != a).collect()
                    } else {
                        all.iter().copied().filter(|&t| t != a).collect()
                    };
                    let b = pool[self.rng.gen_range(0..pool.len())];
                    let samples = self.cfg.pair_move_samples;
                    if let Some((ma, mb)) =
                        explore_pair_move(self.model, a, b, self.objective, samples, &mut self.rng)?
                    {
                        let _ = self.model.apply(a, ma)?;
                        let _ = self.model.apply(b, mb)?;
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    fn perturb(&mut self) -> Result<(), SearchError> {
        let targets = if self.cfg.perturb_contributing_only {
            self.candidates()
        } else {
            self.trees()
        };
        for t in targets {
            for _ in 0..self.cfg.perturbation_moves {
                let nb = self.model.tree(t).neighborhood();
                let count = nb.move_count();
                if count == 0 {
                    break;
                }
                let m = nb.nth_move(self.rng.gen_range(0..count)).unwrap();
                let _ = self.model.apply(t, m)?;
            }
        }
        Ok(())
    }

    fn restart_worst(&mut self) -> Result<(), SearchError> {
        let trees = self.trees();
        let mut worst = Vec::new();
        let mut worst_value = Value::MIN;
        for t in trees {
            let c = self.model.contribution(self.objective, t);
            if c > worst_value {
                worst_value = c;
                worst.clear();
            }
            if c == worst_value {
                worst.push(t);
            }
        }
        let Some(&t) = worst.choose(&mut self.rng) else {
            return Ok(());
        };
        let old = self.model.tree(t);
        let fresh = self.cfg.init.build(
            old.graph().clone(),
            old.source(),
            old.root(),
            &mut self.rng,
        )
        .map_err(ModelError::from)?;
        self.model.replace_tree(t, fresh)?;
        Ok(())
    }

    fn notify(&mut self, event: SearchEvent, now: f64) {
        if (self.observer)(self.model, event, now).is_break() {
            self.stopped = true;
        }
    }

    fn record_best(&mut self) {
        let value = self.model.value(self.objective);
        if value < self.trace.best_value {
            let now = self.now();
            self.trace.best_value = value;
            self.trace.best_time = now;
            self.trace.improvements.push((now, value));
            self.notify(SearchEvent::NewBest, now);
        }
    }

    fn solved(&self) -> bool {
        let d = self.model.diff(self.objective);
        d.kind() == Kind::Constraint && d.value() == 0
    }

    fn run(mut self) -> Result<SearchTrace, SearchError> {
        let start_value = self.model.value(self.objective);
        self.trace.best_value = start_value;
        self.trace.improvements.push((0.0, start_value));
        self.notify(SearchEvent::NewBest, 0.0);
        let (limit, cap) = (self.cfg.time_limit, self.cfg.iteration_cap);
        let mut stall = 0u64;
        let mut stall_events = 0u64;
        while !self.stopped && !self.solved() && !self.clock.exhausted(self.trace.iterations, limit, cap) {
            self.trace.iterations += 1;
            let candidates = self.candidates();
            let mut improved = false;
            for i in 0..self.cfg.portfolio.len() {
                if self.try_kind(self.cfg.portfolio[i], &candidates)? {
                    improved = true;
                    break;
                }
            }
            if improved {
                self.trace.accepted_moves += 1;
                stall = 0;
                self.record_best();
            } else {
                stall += 1;
            }
            if stall >= self.cfg.max_stall_iterations {
                let now = self.now();
                self.notify(SearchEvent::LocalOptimum, now);
                stall_events += 1;
                if stall_events % 2 == 1 {
                    self.perturb()?;
                } else {
                    self.restart_worst()?;
                }
                stall = 0;
                let now = self.now();
                self.trace
                    .perturbations
                    .push((now, self.model.value(self.objective)));
                self.record_best();
            }
            if self.trace.iterations % INTERVAL_ITERATIONS == 0 {
                let now = self.now();
                self.notify(SearchEvent::Interval, now);
            }
        }
        Ok(self.trace)
    }
}

/// Minimizes `objective` over the trees of `model`, leaving the final state
/// in `model`. `observer` sees every new best, local optimum and checkpoint,
/// and may stop the run by returning `ControlFlow::Break`.
pub fn run(
    model: &mut Model,
    objective: DiffId,
    cfg: &SearchConfig,
    observer: impl FnMut(&Model, SearchEvent, f64) -> ControlFlow<()>,
) -> Result<SearchTrace, SearchError> {
    cfg.validate()?;
    if objective >= model.diff_count() {
        return Err(ModelError::UnknownDiff(objective).into());
    }
    let engine = Engine {
        model,
        objective,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        clock: Clock::for_cap(cfg.iteration_cap),
        trace: SearchTrace::default(),
        observer,
        stopped: false,
    };
    engine.run()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::differentiable::{PathCost, PathEdgeDisjoint};
    use crate::graph::Graph;
    use crate::tree::RootedSpanningTree;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn config_validation() {
        let mut cfg = SearchConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.portfolio.clear();
        assert!(cfg.validate().is_err());
        let cfg = SearchConfig {
            time_limit: Duration::ZERO,
            ..SearchConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_improving_move_is_found() {
        // Square 0-1-2-3 with a heavy edge (2,3): tree path 0-1-2-3 and
        // the only shortcut is the edge (0,3).
        let g = Arc::new(
            Graph::with_weights(
                4,
                &[(0, 1), (1, 2), (2, 3), (0, 3)],
                vec![vec![1], vec![1], vec![9], vec![1]],
            )
            .unwrap(),
        );
        let tr = RootedSpanningTree::from_tree_edges(g.clone(), 0, 3, &[0, 1, 2]).unwrap();
        let mut model = Model::new(g);
        let t = model.add_tree(tr).unwrap();
        let cost = model.register(PathCost::new(&model, t, 0).unwrap());
        let m = explore_one_move(&model, t, cost, &mut rng()).unwrap().unwrap();
        assert_eq!(m.e_in, 3);
        let _ = model.apply(t, m).unwrap();
        assert_eq!(model.value(cost), 1);
        assert_eq!(explore_one_move(&model, t, cost, &mut rng()).unwrap(), None);
    }

    #[test]
    fn tree_shaped_graph_has_no_moves() {
        let g = Arc::new(Graph::with_weights(3, &[(0, 1), (1, 2)], vec![vec![1]; 2]).unwrap());
        let tr = RootedSpanningTree::init_seeded(g.clone(), 0, 2, 1).unwrap();
        let mut model = Model::new(g);
        let t = model.add_tree(tr).unwrap();
        let cost = model.register(PathCost::new(&model, t, 0).unwrap());
        assert_eq!(explore_one_move(&model, t, cost, &mut rng()).unwrap(), None);
        assert_eq!(explore_two_move(&model, t, cost, 100, &mut rng()).unwrap(), None);
    }

    #[test]
    fn zero_samples_finds_nothing() {
        let g = Arc::new(crate::bench::generate_mesh(3, 3).unwrap());
        let tr = RootedSpanningTree::init_seeded(g.clone(), 0, 8, 1).unwrap();
        let mut model = Model::new(g);
        let t = model.add_tree(tr).unwrap();
        let cost = model.register(PathCost::new(&model, t, 0).unwrap());
        assert_eq!(explore_two_move(&model, t, cost, 0, &mut rng()).unwrap(), None);
    }

    #[test]
    fn pair_move_rejects_same_tree() {
        let g = Arc::new(Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        let tr = RootedSpanningTree::init_seeded(g.clone(), 0, 2, 1).unwrap();
        let mut model = Model::new(g);
        let t = model.add_tree(tr).unwrap();
        let ed = model.register(PathEdgeDisjoint::new(&model, &[t]).unwrap());
        assert_eq!(
            explore_pair_move(&model, t, t, ed, 10, &mut rng()),
            Err(SearchError::SameTree(t))
        );
    }

    #[test]
    fn capped_runs_are_deterministic_and_monotone() {
        let g = Arc::new(crate::bench::generate_mesh(5, 5).unwrap());
        let make = || {
            let mut model = Model::new(g.clone());
            let pairs = [(0, 24), (4, 20), (2, 22), (10, 14)];
            let ids: Vec<TreeId> = pairs
                .iter()
                .enumerate()
                .map(|(i, &(s, t))| {
                    let tr = RootedSpanningTree::init_seeded(g.clone(), s, t, i as u64).unwrap();
                    model.add_tree(tr).unwrap()
                })
                .collect();
            let ed = model.register(PathEdgeDisjoint::new(&model, &ids).unwrap());
            (model, ed)
        };
        let cfg = SearchConfig {
            iteration_cap: Some(200),
            seed: 11,
            ..SearchConfig::default()
        };
        let (mut m1, ed1) = make();
        let t1 = run(&mut m1, ed1, &cfg, |_, _, _| ControlFlow::Continue(())).unwrap();
        let (mut m2, ed2) = make();
        let t2 = run(&mut m2, ed2, &cfg, |_, _, _| ControlFlow::Continue(())).unwrap();
        assert_eq!(t1, t2);
        assert!(t1.improvements.windows(2).all(|w| w[1].1 < w[0].1));
        assert_eq!(m1.value(ed1), m1.evaluate(ed1));
    }

    #[test]
    fn tiny_time_limit_still_reports_start() {
        let g = Arc::new(crate::bench::generate_mesh(4, 4).unwrap());
        let mut model = Model::new(g.clone());
        let a = model.add_tree(RootedSpanningTree::init_seeded(g.clone(), 0, 15, 1).unwrap()).unwrap();
        let b = model.add_tree(RootedSpanningTree::init_seeded(g.clone(), 3, 12, 2).unwrap()).unwrap();
        let ed = model.register(PathEdgeDisjoint::new(&model, &[a, b]).unwrap());
        let cfg = SearchConfig {
            time_limit: Duration::from_nanos(1),
            ..SearchConfig::default()
        };
        let trace = run(&mut model, ed, &cfg, |_, _, _| ControlFlow::Continue(())).unwrap();
        assert!(!trace.improvements.is_empty());
        assert!(trace.to_csv().starts_with("time_s,value\n0.000000,"));
    }
}
