//! Differentiable constraints and objectives over tree variables.
//!
//! Every quantity here depends on trees only through their induced paths,
//! so a "what if" query is answered by handing the differentiable the
//! simulated new path of each touched tree. The [`Model`] owns the trees,
//! caches their paths and notifies registered differentiables on commit.

use std::sync::Arc;

use thiserror::Error;

use crate::graph::{EdgeId, Graph, NodeId};
use crate::tree::{BasicMove, ComplexMove, ComplexUndoToken, RootedSpanningTree, TreeError, UndoToken};

pub type TreeId = usize;
pub type DiffId = usize;
/// Exact value of an objective, or violation degree of a constraint.
pub type Value = i64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("weight index {k} out of range ({available} weights per edge)")]
    InvalidWeightIndex { k: usize, available: usize },
    #[error("unknown tree {0}")]
    UnknownTree(TreeId),
    #[error("unknown differentiable {0}")]
    UnknownDiff(DiffId),
    #[error("tree {0} is not registered with this differentiable")]
    UnregisteredTree(TreeId),
    #[error("tree {0} appears more than once")]
    DuplicateTree(TreeId),
    #[error("tree {0} was mutated without a commit")]
    Stale(TreeId),
    #[error("tree is over a different graph")]
    ForeignGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Objective,
    Constraint,
}

/// Committed induced paths, as seen by differentiables.
#[derive(Clone, Copy)]
pub struct State<'a> {
    pub graph: &'a Graph,
    pub paths: &'a [Vec<EdgeId>],
}

/// A candidate induced path for one tree.
#[derive(Debug, Clone, Copy)]
pub struct PathChange<'a> {
    pub tree: TreeId,
    pub path: &'a [EdgeId],
}

impl<'a> State<'a> {
    /// The path of `tree` once `changes` are applied.
    pub fn path_after(&self, tree: TreeId, changes: &[PathChange<'a>]) -> &'a [EdgeId] {
        changes
            .iter()
            .find(|c| c.tree == tree)
            .map(|c| c.path)
            .unwrap_or(&self.paths[tree])
    }
}

pub trait Differentiable: Send + Sync {
    fn kind(&self) -> Kind;

    fn depends_on(&self, tree: TreeId) -> bool;

    /// Cached value as of the last commit.
    fn value(&self) -> Value;

    /// From-scratch evaluation over `state`; never touches the cache.
    fn evaluate(&self, state: &State) -> Value;

    /// `value(after changes) - value()`, exactly.
    fn delta(&self, state: &State, changes: &[PathChange]) -> Value;

    /// Re-synchronizes the cache from scratch.
    fn reset(&mut self, state: &State);

    /// `state.paths[tree]` replaced `old_path`; update the cache.
    fn commit(&mut self, state: &State, tree: TreeId, old_path: &[EdgeId]);

    /// How much of the current value is attributable to `tree`. Zero means no
    /// change of that tree alone can improve the value.
    fn contribution(&self, _state: &State, tree: TreeId) -> Value {
        Value::from(self.depends_on(tree))
    }
}

fn check_weight(graph: &Graph, k: usize) -> Result<(), ModelError> {
    if k >= graph.weight_count() {
        return Err(ModelError::InvalidWeightIndex {
            k,
            available: graph.weight_count(),
        });
    }
    Ok(())
}

macro_rules! single_tree_leaf {
    ($name:ident, $eval:expr) => {
        impl Differentiable for $name {
            fn kind(&self) -> Kind {
                Kind::Objective
            }

            fn depends_on(&self, tree: TreeId) -> bool {
                tree == self.tree
            }

            fn value(&self) -> Value {
                self.cached
            }

            fn evaluate(&self, state: &State) -> Value {
                let f: fn(&Self, &Graph, &[EdgeId]) -> Value = $eval;
                f(self, state.graph, &state.paths[self.tree])
            }

            fn delta(&self, state: &State, changes: &[PathChange]) -> Value {
                match changes.iter().find(|c| c.tree == self.tree) {
                    Some(c) => {
                        let f: fn(&Self, &Graph, &[EdgeId]) -> Value = $eval;
                        f(self, state.graph, c.path) - self.cached
                    }
                    None => 0,
                }
            }

            fn reset(&mut self, state: &State) {
                self.cached = self.evaluate(state);
            }

            fn commit(&mut self, state: &State, _tree: TreeId, _old_path: &[EdgeId]) {
                self.reset(state);
            }
        }
    };
}

/// Total `k`-th weight along the induced path.
#[derive(Debug, Clone)]
pub struct PathCost {
    tree: TreeId,
    k: usize,
    cached: Value,
}

impl PathCost {
    pub fn new(model: &Model, tree: TreeId, k: usize) -> Result<Self, ModelError> {
        model.check_tree(tree)?;
        check_weight(model.graph(), k)?;
        Ok(PathCost { tree, k, cached: 0 })
    }
}

single_tree_leaf!(PathCost, |d, g, path| path.iter().map(|&e| g.weight(e, d.k)).sum());

/// Smallest `k`-th weight along the induced path (0 on an empty path).
#[derive(Debug, Clone)]
pub struct MinEdgeCost {
    tree: TreeId,
    k: usize,
    cached: Value,
}

impl MinEdgeCost {
    pub fn new(model: &Model, tree: TreeId, k: usize) -> Result<Self, ModelError> {
        model.check_tree(tree)?;
        check_weight(model.graph(), k)?;
        Ok(MinEdgeCost { tree, k, cached: 0 })
    }
}

single_tree_leaf!(MinEdgeCost, |d, g, path| path
    .iter()
    .map(|&e| g.weight(e, d.k))
    .min()
    .unwrap_or(0));

/// Largest `k`-th weight along the induced path (0 on an empty path).
#[derive(Debug, Clone)]
pub struct MaxEdgeCost {
    tree: TreeId,
    k: usize,
    cached: Value,
}

impl MaxEdgeCost {
    pub fn new(model: &Model, tree: TreeId, k: usize) -> Result<Self, ModelError> {
        model.check_tree(tree)?;
        check_weight(model.graph(), k)?;
        Ok(MaxEdgeCost { tree, k, cached: 0 })
    }
}

single_tree_leaf!(MaxEdgeCost, |d, g, path| path
    .iter()
    .map(|&e| g.weight(e, d.k))
    .max()
    .unwrap_or(0));

/// Number of nodes of a set visited by the induced path, endpoints included.
#[derive(Debug, Clone)]
pub struct NodesVisited {
    tree: TreeId,
    source: NodeId,
    members: Vec<bool>,
    cached: Value,
}

impl NodesVisited {
    pub fn new(model: &Model, tree: TreeId, nodes: &[NodeId]) -> Result<Self, ModelError> {
        model.check_tree(tree)?;
        let n = model.graph().node_count();
        let mut members = vec![false; n];
        for &u in nodes {
            if u >= n {
                return Err(TreeError::NodeOutOfRange(u).into());
            }
            members[u] = true;
        }
        Ok(NodesVisited {
            tree,
            source: model.tree(tree).source(),
            members,
            cached: 0,
        })
    }

    fn count(&self, g: &Graph, path: &[EdgeId]) -> Value {
        let mut cur = self.source;
        let mut count = Value::from(self.members[cur]);
        for &e in path {
            cur = g.opposite(e, cur);
            count += Value::from(self.members[cur]);
        }
        count
    }
}

single_tree_leaf!(NodesVisited, |d, g, path| d.count(g, path));

/// Mutual edge-disjointness of the induced paths of several trees.
///
/// Violation is `sum over edges of max(0, load(e) - 1)`, where `load(e)` is
/// the number of registered paths through `e`.
#[derive(Debug, Clone)]
pub struct PathEdgeDisjoint {
    trees: Vec<TreeId>,
    member: Vec<bool>,
    load: Vec<u32>,
    violation: Value,
}

fn excess(load: i64) -> Value {
    (load - 1).max(0)
}

impl PathEdgeDisjoint {
    pub fn new(model: &Model, trees: &[TreeId]) -> Result<Self, ModelError> {
        let mut member = vec![false; model.tree_count()];
        for &t in trees {
            model.check_tree(t)?;
            if member[t] {
                return Err(ModelError::DuplicateTree(t));
            }
            member[t] = true;
        }
        Ok(PathEdgeDisjoint {
            trees: trees.to_vec(),
            member,
            load: vec![0; model.graph().edge_count()],
            violation: 0,
        })
    }

    pub fn trees(&self) -> &[TreeId] {
        &self.trees
    }

    /// Number of registered paths through each edge.
    pub fn load(&self) -> &[u32] {
        &self.load
    }

    fn is_member(&self, tree: TreeId) -> bool {
        self.member.get(tree).copied().unwrap_or(false)
    }

    /// Net load change per edge implied by `changes`, sorted by edge.
    fn load_changes(&self, state: &State, changes: &[PathChange]) -> Vec<(EdgeId, i64)> {
        let mut diff: Vec<(EdgeId, i64)> = Vec::new();
        for c in changes.iter().filter(|c| self.is_member(c.tree)) {
            diff.extend(state.paths[c.tree].iter().map(|&e| (e, -1)));
            diff.extend(c.path.iter().map(|&e| (e, 1)));
        }
        diff.sort_unstable_by_key(|&(e, _)| e);
        let mut merged: Vec<(EdgeId, i64)> = Vec::with_capacity(diff.len());
        for (e, d) in diff {
            match merged.last_mut() {
                Some((last, total)) if *last == e => *total += d,
                _ => merged.push((e, d)),
            }
        }
        merged.retain(|&(_, d)| d != 0);
        merged
    }
}

impl Differentiable for PathEdgeDisjoint {
    fn kind(&self) -> Kind {
        Kind::Constraint
    }

    fn depends_on(&self, tree: TreeId) -> bool {
        self.is_member(tree)
    }

    fn value(&self) -> Value {
        self.violation
    }

    fn evaluate(&self, state: &State) -> Value {
        let mut load = vec![0i64; state.graph.edge_count()];
        for &t in &self.trees {
            for &e in &state.paths[t] {
                load[e] += 1;
            }
        }
        load.into_iter().map(excess).sum()
    }

    fn delta(&self, state: &State, changes: &[PathChange]) -> Value {
        self.load_changes(state, changes)
            .into_iter()
            .map(|(e, d)| {
                let l = i64::from(self.load[e]);
                excess(l + d) - excess(l)
            })
            .sum()
    }

    fn reset(&mut self, state: &State) {
        self.load.iter_mut().for_each(|l| *l = 0);
        for &t in &self.trees {
            for &e in &state.paths[t] {
                self.load[e] += 1;
            }
        }
        self.violation = self.load.iter().map(|&l| excess(i64::from(l))).sum();
    }

    fn commit(&mut self, state: &State, tree: TreeId, old_path: &[EdgeId]) {
        if !self.is_member(tree) {
            return;
        }
        for &e in old_path {
            self.violation -= excess(i64::from(self.load[e]));
            self.load[e] -= 1;
            self.violation += excess(i64::from(self.load[e]));
        }
        for &e in &state.paths[tree] {
            self.violation -= excess(i64::from(self.load[e]));
            self.load[e] += 1;
            self.violation += excess(i64::from(self.load[e]));
        }
    }

    /// Number of edges on the tree's path that other paths also use.
    fn contribution(&self, state: &State, tree: TreeId) -> Value {
        if !self.is_member(tree) {
            return 0;
        }
        state.paths[tree].iter().filter(|&&e| self.load[e] >= 2).count() as Value
    }
}

/// Right-hand side of a combinator.
pub enum Operand {
    Diff(Box<dyn Differentiable>),
    Const(Value),
}

impl Operand {
    fn value(&self) -> Value {
        match self {
            Operand::Diff(d) => d.value(),
            Operand::Const(c) => *c,
        }
    }

    fn evaluate(&self, state: &State) -> Value {
        match self {
            Operand::Diff(d) => d.evaluate(state),
            Operand::Const(c) => *c,
        }
    }

    fn delta(&self, state: &State, changes: &[PathChange]) -> Value {
        match self {
            Operand::Diff(d) if changes.iter().any(|c| d.depends_on(c.tree)) => {
                d.delta(state, changes)
            }
            _ => 0,
        }
    }

    fn depends_on(&self, tree: TreeId) -> bool {
        matches!(self, Operand::Diff(d) if d.depends_on(tree))
    }

    fn reset(&mut self, state: &State) {
        if let Operand::Diff(d) = self {
            d.reset(state);
        }
    }

    fn commit(&mut self, state: &State, tree: TreeId, old_path: &[EdgeId]) {
        if let Operand::Diff(d) = self {
            if d.depends_on(tree) {
                d.commit(state, tree, old_path);
            }
        }
    }

    fn contribution(&self, state: &State, tree: TreeId) -> Value {
        match self {
            Operand::Diff(d) => d.contribution(state, tree),
            Operand::Const(_) => 0,
        }
    }
}

impl From<Value> for Operand {
    fn from(c: Value) -> Self {
        Operand::Const(c)
    }
}

impl<D: Differentiable + 'static> From<D> for Operand {
    fn from(d: D) -> Self {
        Operand::Diff(Box::new(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
}

impl Op {
    fn apply(self, a: Value, b: Value) -> Value {
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
        }
    }
}

/// `a op b` over differentiables and constants.
pub struct Combine {
    a: Operand,
    op: Op,
    b: Operand,
    cached: Value,
}

pub fn combine(a: impl Into<Operand>, op: Op, b: impl Into<Operand>) -> Combine {
    Combine {
        a: a.into(),
        op,
        b: b.into(),
        cached: 0,
    }
}

/// `factor * a`.
pub fn scale(a: impl Into<Operand>, factor: Value) -> Combine {
    combine(a, Op::Mul, Operand::Const(factor))
}

impl Differentiable for Combine {
    fn kind(&self) -> Kind {
        Kind::Objective
    }

    fn depends_on(&self, tree: TreeId) -> bool {
        self.a.depends_on(tree) || self.b.depends_on(tree)
    }

    fn value(&self) -> Value {
        self.cached
    }

    fn evaluate(&self, state: &State) -> Value {
        self.op.apply(self.a.evaluate(state), self.b.evaluate(state))
    }

    fn delta(&self, state: &State, changes: &[PathChange]) -> Value {
        let da = self.a.delta(state, changes);
        let db = self.b.delta(state, changes);
        match self.op {
            Op::Add => da + db,
            Op::Sub => da - db,
            Op::Mul => {
                let (a, b) = (self.a.value(), self.b.value());
                (a + da) * (b + db) - a * b
            }
        }
    }

    fn reset(&mut self, state: &State) {
        self.a.reset(state);
        self.b.reset(state);
        self.cached = self.op.apply(self.a.value(), self.b.value());
    }

    fn commit(&mut self, state: &State, tree: TreeId, old_path: &[EdgeId]) {
        self.a.commit(state, tree, old_path);
        self.b.commit(state, tree, old_path);
        self.cached = self.op.apply(self.a.value(), self.b.value());
    }

    fn contribution(&self, state: &State, tree: TreeId) -> Value {
        Value::from(self.a.contribution(state, tree) != 0 || self.b.contribution(state, tree) != 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn violation(self, a: Value, b: Value) -> Value {
        match self {
            Relation::Le => (a - b).max(0),
            Relation::Ge => (b - a).max(0),
            Relation::Eq => (a - b).abs(),
        }
    }
}

/// Constraint `a rel b`, violated by the size of the deficit.
pub struct Compare {
    a: Operand,
    rel: Relation,
    b: Operand,
    cached: Value,
}

pub fn compare(a: impl Into<Operand>, rel: Relation, b: impl Into<Operand>) -> Compare {
    Compare {
        a: a.into(),
        rel,
        b: b.into(),
        cached: 0,
    }
}

impl Differentiable for Compare {
    fn kind(&self) -> Kind {
        Kind::Constraint
    }

    fn depends_on(&self, tree: TreeId) -> bool {
        self.a.depends_on(tree) || self.b.depends_on(tree)
    }

    fn value(&self) -> Value {
        self.cached
    }

    fn evaluate(&self, state: &State) -> Value {
        self.rel.violation(self.a.evaluate(state), self.b.evaluate(state))
    }

    fn delta(&self, state: &State, changes: &[PathChange]) -> Value {
        let a = self.a.value() + self.a.delta(state, changes);
        let b = self.b.value() + self.b.delta(state, changes);
        self.rel.violation(a, b) - self.cached
    }

    fn reset(&mut self, state: &State) {
        self.a.reset(state);
        self.b.reset(state);
        self.cached = self.rel.violation(self.a.value(), self.b.value());
    }

    fn commit(&mut self, state: &State, tree: TreeId, old_path: &[EdgeId]) {
        self.a.commit(state, tree, old_path);
        self.b.commit(state, tree, old_path);
        self.cached = self.rel.violation(self.a.value(), self.b.value());
    }

    fn contribution(&self, _state: &State, tree: TreeId) -> Value {
        if self.cached == 0 {
            0
        } else {
            Value::from(self.depends_on(tree))
        }
    }
}

/// Owner of tree variables and the differentiables stated over them.
pub struct Model {
    graph: Arc<Graph>,
    trees: Vec<RootedSpanningTree>,
    paths: Vec<Vec<EdgeId>>,
    committed: Vec<u64>,
    diffs: Vec<Box<dyn Differentiable>>,
}

impl Model {
    pub fn new(graph: Arc<Graph>) -> Self {
        Model {
            graph,
            trees: Vec::new(),
            paths: Vec::new(),
            committed: Vec::new(),
            diffs: Vec::new(),
        }
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn add_tree(&mut self, tree: RootedSpanningTree) -> Result<TreeId, ModelError> {
        if !Arc::ptr_eq(tree.graph(), &self.graph) && **tree.graph() != *self.graph {
            return Err(ModelError::ForeignGraph);
        }
        self.paths.push(tree.induced_path());
        self.committed.push(tree.version());
        self.trees.push(tree);
        for d in &mut self.diffs {
            d.reset(&State {
                graph: &self.graph,
                paths: &self.paths,
            });
        }
        Ok(self.trees.len() - 1)
    }

    /// Registers a differentiable and synchronizes its cache.
    pub fn register(&mut self, d: impl Differentiable + 'static) -> DiffId {
        let mut d: Box<dyn Differentiable> = Box::new(d);
        d.reset(&self.state());
        self.diffs.push(d);
        self.diffs.len() - 1
    }

    pub fn state(&self) -> State<'_> {
        State {
            graph: &self.graph,
            paths: &self.paths,
        }
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn tree(&self, id: TreeId) -> &RootedSpanningTree {
        &self.trees[id]
    }

    pub fn trees(&self) -> &[RootedSpanningTree] {
        &self.trees
    }

    /// Raw mutable access; call [`Model::commit`] after mutating.
    pub fn tree_mut(&mut self, id: TreeId) -> &mut RootedSpanningTree {
        &mut self.trees[id]
    }

    /// Committed induced path of a tree.
    pub fn path(&self, id: TreeId) -> &[EdgeId] {
        &self.paths[id]
    }

    pub fn paths(&self) -> &[Vec<EdgeId>] {
        &self.paths
    }

    pub fn diff(&self, id: DiffId) -> &dyn Differentiable {
        self.diffs[id].as_ref()
    }

    pub fn diff_count(&self) -> usize {
        self.diffs.len()
    }

    pub fn value(&self, id: DiffId) -> Value {
        self.diffs[id].value()
    }

    /// From-scratch evaluation, bypassing the cache.
    pub fn evaluate(&self, id: DiffId) -> Value {
        self.diffs[id].evaluate(&self.state())
    }

    pub fn check_tree(&self, id: TreeId) -> Result<(), ModelError> {
        if id < self.trees.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownTree(id))
        }
    }

    fn check_synced(&self, id: TreeId) -> Result<(), ModelError> {
        self.check_tree(id)?;
        if self.trees[id].version() != self.committed[id] {
            return Err(ModelError::Stale(id));
        }
        Ok(())
    }

    fn check_diff(&self, diff: DiffId, tree: TreeId) -> Result<&dyn Differentiable, ModelError> {
        let d = self.diffs.get(diff).ok_or(ModelError::UnknownDiff(diff))?;
        self.check_synced(tree)?;
        if !d.depends_on(tree) {
            return Err(ModelError::UnregisteredTree(tree));
        }
        Ok(d.as_ref())
    }

    /// Propagates the current state of tree `id` to every differentiable.
    pub fn commit(&mut self, id: TreeId) {
        if self.trees[id].version() == self.committed[id] {
            return;
        }
        let new_path = self.trees[id].induced_path();
        let old_path = std::mem::replace(&mut self.paths[id], new_path);
        self.committed[id] = self.trees[id].version();
        if old_path == self.paths[id] {
            return;
        }
        let state = State {
            graph: &self.graph,
            paths: &self.paths,
        };
        for d in self.diffs.iter_mut().filter(|d| d.depends_on(id)) {
            d.commit(&state, id, &old_path);
        }
    }

    pub fn apply(&mut self, id: TreeId, m: BasicMove) -> Result<UndoToken, ModelError> {
        self.check_synced(id)?;
        let token = self.trees[id].apply(m)?;
        self.commit(id);
        Ok(token)
    }

    pub fn undo(&mut self, id: TreeId, token: UndoToken) {
        self.trees[id].undo(token);
        self.commit(id);
    }

    pub fn apply_complex(
        &mut self,
        id: TreeId,
        cm: &ComplexMove,
    ) -> Result<ComplexUndoToken, ModelError> {
        self.check_synced(id)?;
        let token = self.trees[id].apply_complex(cm)?;
        self.commit(id);
        Ok(token)
    }

    pub fn undo_complex(&mut self, id: TreeId, token: ComplexUndoToken) {
        self.trees[id].undo_complex(token);
        self.commit(id);
    }

    /// Swaps in a fresh tree for the same commodity.
    pub fn replace_tree(&mut self, id: TreeId, tree: RootedSpanningTree) -> Result<(), ModelError> {
        self.check_tree(id)?;
        if tree.source() != self.trees[id].source() || tree.root() != self.trees[id].root() {
            return Err(ModelError::ForeignGraph);
        }
        // Keep versions monotone across the swap.
        let floor = self.trees[id].version() + 1;
        self.trees[id] = tree;
        self.trees[id].bump_version_to(floor);
        self.commit(id);
        Ok(())
    }

    /// Delta of `diff` if the given trees took the given induced paths.
    pub fn path_delta(&self, diff: DiffId, changes: &[PathChange]) -> Result<Value, ModelError> {
        let mut seen = Vec::with_capacity(changes.len());
        let mut relevant = false;
        for c in changes {
            self.check_synced(c.tree)?;
            if seen.contains(&c.tree) {
                return Err(ModelError::DuplicateTree(c.tree));
            }
            seen.push(c.tree);
            relevant |= self.diffs.get(diff).ok_or(ModelError::UnknownDiff(diff))?.depends_on(c.tree);
        }
        if !relevant {
            if let Some(c) = changes.first() {
                return Err(ModelError::UnregisteredTree(c.tree));
            }
            return Ok(0);
        }
        Ok(self.diffs[diff].delta(&self.state(), changes))
    }

    /// Variation of `diff` if `m` were applied to tree `tree`.
    pub fn replace_edge_delta(
        &self,
        diff: DiffId,
        tree: TreeId,
        m: BasicMove,
    ) -> Result<Value, ModelError> {
        let d = self.check_diff(diff, tree)?;
        let path = self.trees[tree].simulate_path(m)?;
        Ok(d.delta(
            &self.state(),
            &[PathChange { tree, path: &path }],
        ))
    }

    /// Joint variation of `diff` for one basic move on each of several trees.
    pub fn replace_edge_delta_multi(
        &self,
        diff: DiffId,
        moves: &[(TreeId, BasicMove)],
    ) -> Result<Value, ModelError> {
        let mut paths = Vec::with_capacity(moves.len());
        for &(t, m) in moves {
            self.check_synced(t)?;
            paths.push(self.trees[t].simulate_path(m)?);
        }
        let changes: Vec<PathChange> = moves
            .iter()
            .zip(&paths)
            .map(|(&(tree, _), path)| PathChange { tree, path })
            .collect();
        self.path_delta(diff, &changes)
    }

    /// Variation of `diff` if the complex move were applied to tree `tree`.
    pub fn complex_delta(
        &self,
        diff: DiffId,
        tree: TreeId,
        cm: &ComplexMove,
    ) -> Result<Value, ModelError> {
        let d = self.check_diff(diff, tree)?;
        let path = self.trees[tree].simulate_complex_path(cm)?;
        Ok(d.delta(
            &self.state(),
            &[PathChange { tree, path: &path }],
        ))
    }

    pub fn contribution(&self, diff: DiffId, tree: TreeId) -> Value {
        self.diffs[diff].contribution(&self.state(), tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path graph 0-1-2-3 plus a chord, weights on column 0.
    fn weighted_model() -> (Model, TreeId) {
        let g = Graph::with_weights(
            4,
            &[(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)],
            vec![vec![2], vec![5], vec![3], vec![20], vec![2]],
        )
        .unwrap();
        let g = Arc::new(g);
        let tr = RootedSpanningTree::from_tree_edges(g.clone(), 0, 3, &[0, 1, 2]).unwrap();
        let mut model = Model::new(g);
        let t = model.add_tree(tr).unwrap();
        (model, t)
    }

    #[test]
    fn leaf_values() {
        let (mut model, t) = weighted_model();
        let cost = PathCost::new(&model, t, 0).unwrap();
        let min = MinEdgeCost::new(&model, t, 0).unwrap();
        let max = MaxEdgeCost::new(&model, t, 0).unwrap();
        let visited = NodesVisited::new(&model, t, &[2]).unwrap();
        let none = NodesVisited::new(&model, t, &[]).unwrap();
        let all = NodesVisited::new(&model, t, &[0, 1, 2, 3]).unwrap();
        let ids: Vec<DiffId> = vec![
            model.register(cost),
            model.register(min),
            model.register(max),
            model.register(visited),
            model.register(none),
            model.register(all),
        ];
        let values: Vec<Value> = ids.iter().map(|&d| model.value(d)).collect();
        assert_eq!(values, vec![10, 2, 5, 1, 0, 4]);
    }

    #[test]
    fn invalid_weight_index() {
        let (model, t) = weighted_model();
        assert_eq!(
            PathCost::new(&model, t, 1).unwrap_err(),
            ModelError::InvalidWeightIndex { k: 1, available: 1 }
        );
    }

    #[test]
    fn swapping_heavy_edge_for_light_one() {
        let (mut model, t) = weighted_model();
        let cost = model.register(PathCost::new(&model, t, 0).unwrap());
        // Insert (1,3) weight 2, drop (1,2) weight 5: 2+5+3 -> 2+2.
        let m = BasicMove::new(4, 1);
        assert_eq!(model.replace_edge_delta(cost, t, m).unwrap(), -6);
        let m = BasicMove::new(4, 2);
        assert_eq!(model.replace_edge_delta(cost, t, m).unwrap(), -6);
        let _ = model.apply(t, m).unwrap();
        assert_eq!(model.value(cost), 4);
        assert_eq!(model.evaluate(cost), 4);
    }

    #[test]
    fn path_preserving_move_has_zero_delta() {
        // Star around 0 plus spokes: moves re-hang a leaf away from the path.
        let g = Arc::new(
            Graph::with_weights(4, &[(0, 1), (1, 2), (0, 2), (2, 3)], vec![vec![1]; 4]).unwrap(),
        );
        let tr = RootedSpanningTree::from_tree_edges(g.clone(), 3, 2, &[0, 1, 3]).unwrap();
        let mut model = Model::new(g);
        let t = model.add_tree(tr).unwrap();
        let cost = model.register(PathCost::new(&model, t, 0).unwrap());
        let m = BasicMove::new(2, 0);
        assert_eq!(model.tree(t).simulate_path(m).unwrap(), model.tree(t).induced_path());
        assert_eq!(model.replace_edge_delta(cost, t, m).unwrap(), 0);
    }

    #[test]
    fn comparison_violation() {
        let (mut model, t) = weighted_model();
        let le10 = model.register(compare(PathCost::new(&model, t, 0).unwrap(), Relation::Le, 10));
        let le7 = model.register(compare(PathCost::new(&model, t, 0).unwrap(), Relation::Le, 7));
        let ge13 = model.register(compare(PathCost::new(&model, t, 0).unwrap(), Relation::Ge, 13));
        let eq4 = model.register(compare(PathCost::new(&model, t, 0).unwrap(), Relation::Eq, 4));
        assert_eq!(model.value(le10), 0);
        assert_eq!(model.value(le7), 3);
        assert_eq!(model.value(ge13), 3);
        assert_eq!(model.value(eq4), 6);
        assert_eq!(model.diff(le7).kind(), Kind::Constraint);
    }

    #[test]
    fn combinators_compose() {
        let (mut model, t) = weighted_model();
        let sum = combine(
            PathCost::new(&model, t, 0).unwrap(),
            Op::Add,
            MaxEdgeCost::new(&model, t, 0).unwrap(),
        );
        let sum = model.register(sum);
        let scaled = model.register(scale(PathCost::new(&model, t, 0).unwrap(), 3));
        let product = model.register(combine(
            PathCost::new(&model, t, 0).unwrap(),
            Op::Mul,
            MinEdgeCost::new(&model, t, 0).unwrap(),
        ));
        assert_eq!(model.value(sum), 15);
        assert_eq!(model.value(scaled), 30);
        assert_eq!(model.value(product), 20);
        let m = BasicMove::new(4, 1);
        let deltas: Vec<Value> = [sum, scaled, product]
            .iter()
            .map(|&d| model.replace_edge_delta(d, t, m).unwrap())
            .collect();
        let _ = model.apply(t, m).unwrap();
        assert_eq!(deltas, vec![4 + 2 - 15, 12 - 30, 8 - 20]);
        for d in [sum, scaled, product] {
            assert_eq!(model.value(d), model.evaluate(d));
        }
    }

    fn two_paths_model() -> (Model, Vec<TreeId>) {
        // 0-1-2-3 line with a bypass 1-4-2: both commodities share (1,2).
        let g = Arc::new(Graph::new(5, &[(0, 1), (1, 2), (2, 3), (1, 4), (4, 2)]).unwrap());
        let a = RootedSpanningTree::from_tree_edges(g.clone(), 0, 3, &[0, 1, 2, 3]).unwrap();
        let b = RootedSpanningTree::from_tree_edges(g.clone(), 1, 2, &[0, 1, 2, 3]).unwrap();
        let mut model = Model::new(g);
        let ids = vec![model.add_tree(a).unwrap(), model.add_tree(b).unwrap()];
        (model, ids)
    }

    #[test]
    fn disjointness_violation() {
        let (mut model, ids) = two_paths_model();
        let ed = model.register(PathEdgeDisjoint::new(&model, &ids).unwrap());
        assert_eq!(model.value(ed), 1);
        assert_eq!(model.contribution(ed, ids[0]), 1);
        let m = BasicMove::new(4, 1);
        assert_eq!(model.replace_edge_delta(ed, ids[1], m).unwrap(), -1);
        let _ = model.apply(ids[1], m).unwrap();
        assert_eq!(model.value(ed), 0);
        assert_eq!(model.evaluate(ed), 0);
        assert_eq!(model.contribution(ed, ids[0]), 0);

        let empty = model.register(PathEdgeDisjoint::new(&model, &[]).unwrap());
        assert_eq!(model.value(empty), 0);
        assert_eq!(
            PathEdgeDisjoint::new(&model, &[0, 0]).unwrap_err(),
            ModelError::DuplicateTree(0)
        );
    }

    #[test]
    fn multi_delta_rejects_duplicate_trees() {
        let (mut model, ids) = two_paths_model();
        let ed = model.register(PathEdgeDisjoint::new(&model, &ids).unwrap());
        let m = BasicMove::new(4, 1);
        assert_eq!(
            model.replace_edge_delta_multi(ed, &[(ids[1], m), (ids[1], m)]),
            Err(ModelError::DuplicateTree(ids[1]))
        );
    }

    #[test]
    fn unregistered_and_stale_trees() {
        let (mut model, ids) = two_paths_model();
        let cost_graph_has_no_weights = PathCost::new(&model, ids[0], 0);
        assert!(cost_graph_has_no_weights.is_err());
        let visits = model.register(NodesVisited::new(&model, ids[0], &[1]).unwrap());
        let m = BasicMove::new(4, 1);
        assert_eq!(
            model.replace_edge_delta(visits, ids[1], m),
            Err(ModelError::UnregisteredTree(ids[1]))
        );
        let _ = model.tree_mut(ids[1]).apply(m).unwrap();
        assert_eq!(
            model.replace_edge_delta_multi(visits, &[(ids[1], BasicMove::new(1, 3))]),
            Err(ModelError::Stale(ids[1]))
        );
        model.commit(ids[1]);
        assert!(model.check_synced(ids[1]).is_ok());
    }
}
