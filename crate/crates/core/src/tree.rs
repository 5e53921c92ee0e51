//! The rooted spanning tree variable.
//!
//! A tree rooted at `t` with a designated source `s` encodes exactly one
//! elementary `s -> t` path: follow father pointers from `s`. Local moves
//! insert a non-tree edge and drop one edge of the cycle it closes, which
//! yields another spanning tree and possibly another induced path.
//!
//! Removing a tree edge `(x, father(x))` detaches the subtree below `x`,
//! so a move changes the induced path iff `s` sits in that subtree, i.e.
//! iff the dropped edge lies on the induced path. The preferred edge sets
//! are built from that characterization.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{EdgeId, Graph, NodeId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("source and root must differ (both {0})")]
    SameEndpoints(NodeId),
    #[error("node {0} out of range")]
    NodeOutOfRange(NodeId),
    #[error("edge {0} out of range")]
    EdgeOutOfRange(EdgeId),
    #[error("edge {0} is already a tree edge")]
    NotReplacing(EdgeId),
    #[error("edge {e_out} is not on the tree cycle closed by edge {e_in}")]
    NotReplacable { e_in: EdgeId, e_out: EdgeId },
    #[error("basic moves {0} and {1} are not independent")]
    NotIndependent(usize, usize),
    #[error("edge set is not a spanning tree: {0}")]
    NotSpanning(String),
    #[error("tree invariant violated: {0}")]
    Corrupt(String),
}

/// Insert `e_in` (a replacing edge) and remove `e_out` (one of its replacable edges).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasicMove {
    pub e_in: EdgeId,
    pub e_out: EdgeId,
}

impl BasicMove {
    pub fn new(e_in: EdgeId, e_out: EdgeId) -> Self {
        BasicMove { e_in, e_out }
    }
}

/// A set of pairwise independent basic moves on one tree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComplexMove {
    pub moves: Vec<BasicMove>,
}

impl ComplexMove {
    pub fn new(moves: Vec<BasicMove>) -> Self {
        ComplexMove { moves }
    }
}

/// Restores the tree state preceding the move that produced it.
#[must_use = "dropping an undo token makes the move permanent"]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UndoToken {
    applied: BasicMove,
}

#[must_use = "dropping an undo token makes the move permanent"]
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexUndoToken {
    tokens: Vec<UndoToken>,
}

/// The position of every node relative to the induced path.
///
/// `position[w]` is the index on the path (0 = source, len = root) of the
/// first path node reached when walking from `w` towards the root.
#[derive(Debug, Clone)]
pub struct PathIndex {
    pub path: Vec<EdgeId>,
    pub position: Vec<usize>,
}

/// The reduced neighborhood of one tree state: every replacing edge whose
/// cycle crosses the induced path, with the crossed path segment.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    version: u64,
    path: Vec<EdgeId>,
    /// `(e_in, lo, hi)`: preferred replacable edges of `e_in` are `path[lo..hi]`.
    entries: Vec<(EdgeId, usize, usize)>,
}

impl Neighborhood {
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn replacing(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.entries.iter().map(|&(e, _, _)| e)
    }

    pub fn replacing_count(&self) -> usize {
        self.entries.len()
    }

    /// The `i`-th preferred replacing edge and its preferred replacable edges.
    pub fn entry(&self, i: usize) -> (EdgeId, &[EdgeId]) {
        let (e, lo, hi) = self.entries[i];
        (e, &self.path[lo..hi])
    }

    pub fn replacable(&self, e_in: EdgeId) -> &[EdgeId] {
        self.entries
            .iter()
            .find(|&&(e, _, _)| e == e_in)
            .map(|&(_, lo, hi)| &self.path[lo..hi])
            .unwrap_or(&[])
    }

    /// Total number of preferred basic moves.
    pub fn move_count(&self) -> usize {
        self.entries.iter().map(|&(_, lo, hi)| hi - lo).sum()
    }

    pub fn moves(&self) -> impl Iterator<Item = BasicMove> + '_ {
        self.entries.iter().flat_map(move |&(e_in, lo, hi)| {
            self.path[lo..hi]
                .iter()
                .map(move |&e_out| BasicMove::new(e_in, e_out))
        })
    }

    /// The `i`-th move of [`Neighborhood::moves`], without iterating.
    pub fn nth_move(&self, mut i: usize) -> Option<BasicMove> {
        for &(e_in, lo, hi) in &self.entries {
            if i < hi - lo {
                return Some(BasicMove::new(e_in, self.path[lo + i]));
            }
            i -= hi - lo;
        }
        None
    }
}

/// How fresh random trees are grown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// Depth-first growth from the root over shuffled adjacency.
    #[default]
    RandomDepthFirst,
    /// Breadth-first growth from the root over shuffled adjacency; every
    /// tree path to the root is then a minimum-hop path.
    RandomBreadthFirst,
}

impl InitStrategy {
    pub fn build<R: Rng + ?Sized>(
        self,
        graph: Arc<Graph>,
        source: NodeId,
        root: NodeId,
        rng: &mut R,
    ) -> Result<RootedSpanningTree, TreeError> {
        match self {
            InitStrategy::RandomDepthFirst => RootedSpanningTree::init_random(graph, source, root, rng),
            InitStrategy::RandomBreadthFirst => RootedSpanningTree::init_breadth_first(graph, source, root, rng),
        }
    }
}

/// A dynamic spanning tree of `graph` rooted at `root`, with designated source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedSpanningTree {
    graph: Arc<Graph>,
    root: NodeId,
    source: NodeId,
    father: Vec<Option<NodeId>>,
    father_edge: Vec<Option<EdgeId>>,
    depth: Vec<usize>,
    in_tree: Vec<bool>,
    version: u64,
}

impl RootedSpanningTree {
    fn check_endpoints(graph: &Graph, source: NodeId, root: NodeId) -> Result<(), TreeError> {
        for node in [source, root] {
            if node >= graph.node_count() {
                return Err(TreeError::NodeOutOfRange(node));
            }
        }
        if source == root {
            return Err(TreeError::SameEndpoints(source));
        }
        Ok(())
    }

    fn empty(graph: Arc<Graph>, source: NodeId, root: NodeId) -> Self {
        let n = graph.node_count();
        let m = graph.edge_count();
        RootedSpanningTree {
            graph,
            root,
            source,
            father: vec![None; n],
            father_edge: vec![None; n],
            depth: vec![0; n],
            in_tree: vec![false; m],
            version: 0,
        }
    }

    /// Random spanning tree grown depth-first from the root over shuffled adjacency.
    pub fn init_random<R: Rng + ?Sized>(
        graph: Arc<Graph>,
        source: NodeId,
        root: NodeId,
        rng: &mut R,
    ) -> Result<Self, TreeError> {
        Self::init_around_path(graph, source, root, &[], rng)
    }

    /// Random shortest-path tree: breadth-first growth with shuffled adjacency.
    pub fn init_breadth_first<R: Rng + ?Sized>(
        graph: Arc<Graph>,
        source: NodeId,
        root: NodeId,
        rng: &mut R,
    ) -> Result<Self, TreeError> {
        Self::check_endpoints(&graph, source, root)?;
        let mut tree = Self::empty(graph.clone(), source, root);
        let mut visited = vec![false; graph.node_count()];
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let mut adj = graph.neighbors(u).to_vec();
            adj.shuffle(rng);
            for (v, e) in adj {
                if !visited[v] {
                    visited[v] = true;
                    tree.link(v, u, e);
                    tree.depth[v] = tree.depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(TreeError::NotSpanning("graph is disconnected".into()));
        }
        Ok(tree)
    }

    pub fn init_seeded(
        graph: Arc<Graph>,
        source: NodeId,
        root: NodeId,
        seed: u64,
    ) -> Result<Self, TreeError> {
        Self::init_random(graph, source, root, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Random spanning tree that contains `path` (an elementary `source -> root`
    /// edge path, or empty), so that `path` becomes the induced path.
    pub fn init_around_path<R: Rng + ?Sized>(
        graph: Arc<Graph>,
        source: NodeId,
        root: NodeId,
        path: &[EdgeId],
        rng: &mut R,
    ) -> Result<Self, TreeError> {
        Self::check_endpoints(&graph, source, root)?;
        let mut tree = Self::empty(graph.clone(), source, root);
        let n = graph.node_count();
        let mut visited = vec![false; n];
        visited[root] = true;
        let mut seeds = vec![root];
        if !path.is_empty() {
            // Attach the path from the root side towards the source.
            let nodes = crate::graph::path_nodes(&graph, source, path);
            if *nodes.last().unwrap() != root {
                return Err(TreeError::NotSpanning("path does not end at the root".into()));
            }
            for i in (0..path.len()).rev() {
                let (child, parent) = (nodes[i], nodes[i + 1]);
                if visited[child] {
                    return Err(TreeError::NotSpanning("path is not elementary".into()));
                }
                visited[child] = true;
                tree.link(child, parent, path[i]);
                seeds.push(child);
            }
        }
        for start in seeds {
            tree.random_dfs(start, &mut visited, rng);
        }
        if visited.iter().any(|v| !v) {
            return Err(TreeError::NotSpanning("graph is disconnected".into()));
        }
        tree.recompute_depths();
        Ok(tree)
    }

    fn link(&mut self, child: NodeId, parent: NodeId, e: EdgeId) {
        self.father[child] = Some(parent);
        self.father_edge[child] = Some(e);
        self.in_tree[e] = true;
    }

    fn random_dfs<R: Rng + ?Sized>(&mut self, start: NodeId, visited: &mut [bool], rng: &mut R) {
        let graph = self.graph.clone();
        let shuffled = |u: NodeId, rng: &mut R| {
            let mut adj = graph.neighbors(u).to_vec();
            adj.shuffle(rng);
            adj
        };
        let mut stack = vec![(start, shuffled(start, rng))];
        while let Some((u, adj)) = stack.last_mut() {
            let u = *u;
            match adj.pop() {
                Some((v, e)) if !visited[v] => {
                    visited[v] = true;
                    self.link(v, u, e);
                    let next = shuffled(v, rng);
                    stack.push((v, next));
                }
                Some(_) => {}
                None => {
                    stack.pop();
                }
            }
        }
    }

    /// Builds the tree spanned by `edges`, oriented towards `root`.
    pub fn from_tree_edges(
        graph: Arc<Graph>,
        source: NodeId,
        root: NodeId,
        edges: &[EdgeId],
    ) -> Result<Self, TreeError> {
        Self::check_endpoints(&graph, source, root)?;
        let n = graph.node_count();
        if edges.len() + 1 != n {
            return Err(TreeError::NotSpanning(format!(
                "{} edges for {} nodes",
                edges.len(),
                n
            )));
        }
        let mut tree = Self::empty(graph.clone(), source, root);
        for &e in edges {
            if e >= graph.edge_count() {
                return Err(TreeError::EdgeOutOfRange(e));
            }
            tree.in_tree[e] = true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, e) in graph.neighbors(u) {
                if tree.in_tree[e] && !seen[v] {
                    seen[v] = true;
                    tree.father[v] = Some(u);
                    tree.father_edge[v] = Some(e);
                    tree.depth[v] = tree.depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(TreeError::NotSpanning("edge set is not connected".into()));
        }
        Ok(tree)
    }

    fn recompute_depths(&mut self) {
        let root = self.root;
        self.depth[root] = 0;
        self.refresh_depths_below(root);
    }

    /// Recomputes depths of the subtree below `top`, given `depth[top]`.
    fn refresh_depths_below(&mut self, top: NodeId) {
        let graph = self.graph.clone();
        let mut queue = VecDeque::from([top]);
        while let Some(w) = queue.pop_front() {
            for &(y, e) in graph.neighbors(w) {
                if self.father_edge[y] == Some(e) && self.father[y] == Some(w) {
                    self.depth[y] = self.depth[w] + 1;
                    queue.push_back(y);
                }
            }
        }
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    /// Revision counter, bumped by every mutation (undo included).
    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn bump_version_to(&mut self, floor: u64) {
        self.version = self.version.max(floor);
    }

    pub fn father(&self, u: NodeId) -> Option<NodeId> {
        self.father[u]
    }

    pub fn father_edge(&self, u: NodeId) -> Option<EdgeId> {
        self.father_edge[u]
    }

    pub fn depth(&self, u: NodeId) -> usize {
        self.depth[u]
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.in_tree[e]
    }

    pub fn edge_mask(&self) -> &[bool] {
        &self.in_tree
    }

    /// Tree edge ids in increasing order.
    pub fn tree_edges(&self) -> Vec<EdgeId> {
        (0..self.in_tree.len()).filter(|&e| self.in_tree[e]).collect()
    }

    /// Edge path from `u` up to the root.
    pub fn path_to_root(&self, mut u: NodeId) -> Vec<EdgeId> {
        let mut path = Vec::with_capacity(self.depth[u]);
        while let Some(e) = self.father_edge[u] {
            path.push(e);
            u = self.father[u].unwrap();
        }
        path
    }

    /// The path from the source to the root.
    pub fn induced_path(&self) -> Vec<EdgeId> {
        self.path_to_root(self.source)
    }

    /// Tree path between two nodes, ordered from `a` to `b`.
    pub fn tree_path(&self, mut a: NodeId, mut b: NodeId) -> Vec<EdgeId> {
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                from_a.push(self.father_edge[a].unwrap());
                a = self.father[a].unwrap();
            } else {
                from_b.push(self.father_edge[b].unwrap());
                b = self.father[b].unwrap();
            }
        }
        from_b.reverse();
        from_a.extend(from_b);
        from_a
    }

    /// Whether `w` lies in the subtree hanging below `x` (inclusive).
    pub fn in_subtree(&self, mut w: NodeId, x: NodeId) -> bool {
        while self.depth[w] > self.depth[x] {
            w = self.father[w].unwrap();
        }
        w == x
    }

    /// Non-tree edges: every edge whose insertion closes a cycle.
    pub fn replacing_edges(&self) -> Vec<EdgeId> {
        (0..self.in_tree.len()).filter(|&e| !self.in_tree[e]).collect()
    }

    /// Tree edges on the cycle closed by `e_in`.
    pub fn replacable_edges(&self, e_in: EdgeId) -> Result<Vec<EdgeId>, TreeError> {
        self.check_replacing(e_in)?;
        let (u, v) = self.graph.endpoints(e_in);
        Ok(self.tree_path(u, v))
    }

    fn check_replacing(&self, e_in: EdgeId) -> Result<(), TreeError> {
        if e_in >= self.in_tree.len() {
            return Err(TreeError::EdgeOutOfRange(e_in));
        }
        if self.in_tree[e_in] {
            return Err(TreeError::NotReplacing(e_in));
        }
        Ok(())
    }

    pub fn path_index(&self) -> PathIndex {
        let path = self.induced_path();
        let n = self.graph.node_count();
        const UNSET: usize = usize::MAX;
        let mut position = vec![UNSET; n];
        let mut cur = self.source;
        position[cur] = 0;
        for (i, &e) in path.iter().enumerate() {
            cur = self.graph.opposite(e, cur);
            position[cur] = i + 1;
        }
        let mut chain = Vec::new();
        for w in 0..n {
            let mut x = w;
            while position[x] == UNSET {
                chain.push(x);
                x = self.father[x].expect("root lies on the induced path");
            }
            let p = position[x];
            for y in chain.drain(..) {
                position[y] = p;
            }
        }
        PathIndex { path, position }
    }

    /// The reduced neighborhood: only moves that change the induced path.
    pub fn neighborhood(&self) -> Neighborhood {
        let PathIndex { path, position } = self.path_index();
        let mut entries = Vec::new();
        for (e, &(u, v)) in self.graph.edges().iter().enumerate() {
            if self.in_tree[e] {
                continue;
            }
            let (pu, pv) = (position[u], position[v]);
            if pu != pv {
                entries.push((e, pu.min(pv), pu.max(pv)));
            }
        }
        Neighborhood {
            version: self.version,
            path,
            entries,
        }
    }

    pub fn preferred_replacing_edges(&self) -> Vec<EdgeId> {
        self.neighborhood().replacing().collect()
    }

    /// Replacable edges of `e_in` whose removal changes the induced path.
    pub fn preferred_replacable_edges(&self, e_in: EdgeId) -> Result<Vec<EdgeId>, TreeError> {
        self.check_replacing(e_in)?;
        Ok(self.neighborhood().replacable(e_in).to_vec())
    }

    /// The endpoint of tree edge `e` that points at the other through its father.
    fn child_endpoint(&self, e: EdgeId) -> NodeId {
        let (a, b) = self.graph.endpoints(e);
        if self.father_edge[a] == Some(e) {
            a
        } else {
            debug_assert_eq!(self.father_edge[b], Some(e));
            b
        }
    }

    /// Returns `(child of e_out, endpoint of e_in inside the detached subtree, outside endpoint)`.
    fn validate(&self, m: BasicMove) -> Result<(NodeId, NodeId, NodeId), TreeError> {
        self.check_replacing(m.e_in)?;
        if m.e_out >= self.in_tree.len() {
            return Err(TreeError::EdgeOutOfRange(m.e_out));
        }
        let not_replacable = TreeError::NotReplacable {
            e_in: m.e_in,
            e_out: m.e_out,
        };
        if !self.in_tree[m.e_out] {
            return Err(not_replacable);
        }
        let x = self.child_endpoint(m.e_out);
        let (u, v) = self.graph.endpoints(m.e_in);
        match (self.in_subtree(u, x), self.in_subtree(v, x)) {
            (true, false) => Ok((x, u, v)),
            (false, true) => Ok((x, v, u)),
            _ => Err(not_replacable),
        }
    }

    pub fn is_valid(&self, m: BasicMove) -> bool {
        self.validate(m).is_ok()
    }

    /// The induced path after `m`, without mutating the tree.
    pub fn simulate_path(&self, m: BasicMove) -> Result<Vec<EdgeId>, TreeError> {
        let (x, inside, outside) = self.validate(m)?;
        if !self.in_subtree(self.source, x) {
            return Ok(self.induced_path());
        }
        let mut path = self.tree_path(self.source, inside);
        path.push(m.e_in);
        path.extend(self.path_to_root(outside));
        Ok(path)
    }

    /// Performs `rep(tr, e_out, e_in)`. Invalid moves leave the tree unchanged.
    pub fn apply(&mut self, m: BasicMove) -> Result<UndoToken, TreeError> {
        let (x, inside, outside) = self.validate(m)?;
        // Reverse the father chain from `inside` up to `x`, then hang it off `outside`.
        let (mut prev, mut prev_edge, mut cur) = (outside, m.e_in, inside);
        loop {
            let next = self.father[cur];
            let next_edge = self.father_edge[cur];
            self.father[cur] = Some(prev);
            self.father_edge[cur] = Some(prev_edge);
            if cur == x {
                break;
            }
            prev = cur;
            prev_edge = next_edge.unwrap();
            cur = next.unwrap();
        }
        self.in_tree[m.e_out] = false;
        self.in_tree[m.e_in] = true;
        self.depth[inside] = self.depth[outside] + 1;
        self.refresh_depths_below(inside);
        self.version += 1;
        debug_assert_eq!(self.check_invariants(), Ok(()));
        Ok(UndoToken {
            applied: BasicMove::new(m.e_out, m.e_in),
        })
    }

    pub fn undo(&mut self, token: UndoToken) {
        let _ = self
            .apply(token.applied)
            .expect("undo token applied to a tree it does not belong to");
    }

    /// Edges of the fundamental cycle of each move: its tree path plus `e_in`.
    fn check_independent(&self, cm: &ComplexMove) -> Result<(), TreeError> {
        let mut owner: Vec<Option<usize>> = vec![None; self.in_tree.len()];
        for (i, &m) in cm.moves.iter().enumerate() {
            self.validate(m)?;
            let mut cycle = self.replacable_edges(m.e_in)?;
            cycle.push(m.e_in);
            for e in cycle {
                if let Some(j) = owner[e] {
                    return Err(TreeError::NotIndependent(j, i));
                }
                owner[e] = Some(i);
            }
        }
        Ok(())
    }

    /// Applies independent basic moves atomically: on rejection nothing changes.
    ///
    /// Moves are independent when their fundamental cycles are pairwise
    /// edge-disjoint; then each move stays valid whatever the others do.
    pub fn apply_complex(&mut self, cm: &ComplexMove) -> Result<ComplexUndoToken, TreeError> {
        self.check_independent(cm)?;
        #[cfg(debug_assertions)]
        let reversed = {
            let mut other = self.clone();
            for &m in cm.moves.iter().rev() {
                let _ = other.apply(m).expect("independent moves commute");
            }
            other.in_tree
        };
        let mut tokens = Vec::with_capacity(cm.moves.len());
        for &m in &cm.moves {
            tokens.push(self.apply(m).expect("validated by the independence check"));
        }
        #[cfg(debug_assertions)]
        debug_assert_eq!(reversed, self.in_tree, "complex move is order dependent");
        Ok(ComplexUndoToken { tokens })
    }

    pub fn undo_complex(&mut self, token: ComplexUndoToken) {
        for t in token.tokens.into_iter().rev() {
            self.undo(t);
        }
    }

    /// Induced path after `cm`, computed on a scratch copy.
    pub fn simulate_complex_path(&self, cm: &ComplexMove) -> Result<Vec<EdgeId>, TreeError> {
        if let [m] = cm.moves.as_slice() {
            return self.simulate_path(*m);
        }
        self.check_independent(cm)?;
        let mut scratch = self.clone();
        for &m in &cm.moves {
            let _ = scratch.apply(m)?;
        }
        Ok(scratch.induced_path())
    }

    /// Full structural check: edge count, orientation, depths and acyclicity.
    pub fn check_invariants(&self) -> Result<(), TreeError> {
        let n = self.graph.node_count();
        let corrupt = |msg: String| Err(TreeError::Corrupt(msg));
        let count = self.in_tree.iter().filter(|&&b| b).count();
        if count + 1 != n {
            return corrupt(format!("{count} tree edges for {n} nodes"));
        }
        if self.father[self.root].is_some() || self.depth[self.root] != 0 {
            return corrupt("root has a father".into());
        }
        let mut seen_edge = vec![false; self.in_tree.len()];
        for u in 0..n {
            if u == self.root {
                continue;
            }
            let (Some(f), Some(e)) = (self.father[u], self.father_edge[u]) else {
                return corrupt(format!("node {u} has no father"));
            };
            if !self.in_tree[e] || self.graph.edge_between(u, f) != Some(e) {
                return corrupt(format!("father edge of {u} is inconsistent"));
            }
            if seen_edge[e] {
                return corrupt(format!("edge {e} used by two nodes"));
            }
            seen_edge[e] = true;
            if self.depth[u] != self.depth[f] + 1 {
                return corrupt(format!("depth of {u} is stale"));
            }
        }
        // Strictly decreasing depths along father pointers rule out cycles.
        Ok(())
    }

    /// One line per node `node father` (`-` for the root), then the induced path.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for u in 0..self.graph.node_count() {
            match self.father[u] {
                Some(f) => writeln!(out, "{u} {f}").unwrap(),
                None => writeln!(out, "{u} -").unwrap(),
            }
        }
        let path: Vec<String> = self
            .induced_path()
            .into_iter()
            .map(|e| {
                let (a, b) = self.graph.endpoints(e);
                format!("({a},{b})")
            })
            .collect();
        writeln!(out, "path {}", path.join(" ")).unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Arc<Graph> {
        Arc::new(Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap())
    }

    #[test]
    fn triangle_random_tree_is_rooted() {
        for seed in 0..10 {
            let tr = RootedSpanningTree::init_seeded(triangle(), 0, 2, seed).unwrap();
            assert_eq!(tr.tree_edges().len(), 2);
            assert_eq!(tr.root(), 2);
            tr.check_invariants().unwrap();
            assert_eq!(tr.tree_edges(), RootedSpanningTree::init_seeded(triangle(), 0, 2, seed).unwrap().tree_edges());
        }
    }

    #[test]
    fn path_graph_has_a_single_tree() {
        let g = Arc::new(Graph::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap());
        for seed in 0..5 {
            let tr = RootedSpanningTree::init_seeded(g.clone(), 0, 3, seed).unwrap();
            assert_eq!(tr.tree_edges(), vec![0, 1, 2]);
            assert_eq!(tr.induced_path(), vec![0, 1, 2]);
            assert!(tr.replacing_edges().is_empty());
            assert!(tr.neighborhood().is_empty());
        }
    }

    #[test]
    fn rejects_equal_endpoints() {
        assert_eq!(
            RootedSpanningTree::init_seeded(triangle(), 1, 1, 0).unwrap_err(),
            TreeError::SameEndpoints(1)
        );
    }

    #[test]
    fn triangle_neighborhood() {
        let tr = RootedSpanningTree::from_tree_edges(triangle(), 0, 2, &[0, 1]).unwrap();
        assert_eq!(tr.induced_path(), vec![0, 1]);
        assert_eq!(tr.replacing_edges(), vec![2]);
        assert_eq!(tr.replacable_edges(2).unwrap(), vec![0, 1]);
        assert_eq!(tr.preferred_replacing_edges(), vec![2]);
        assert_eq!(tr.preferred_replacable_edges(2).unwrap(), vec![0, 1]);
        assert_eq!(tr.replacable_edges(0), Err(TreeError::NotReplacing(0)));

        let tr = RootedSpanningTree::from_tree_edges(triangle(), 1, 2, &[0, 1]).unwrap();
        assert_eq!(tr.induced_path(), vec![1]);
        assert_eq!(tr.preferred_replacable_edges(2).unwrap(), vec![1]);
        // Dropping (0,1) re-hangs node 0 only; the path from 1 is untouched.
        assert_eq!(tr.simulate_path(BasicMove::new(2, 0)).unwrap(), vec![1]);
    }

    #[test]
    fn apply_and_undo_triangle() {
        let mut tr = RootedSpanningTree::from_tree_edges(triangle(), 0, 2, &[0, 1]).unwrap();
        let before = tr.clone();
        let m = BasicMove::new(2, 0);
        assert_eq!(tr.simulate_path(m).unwrap(), vec![2]);
        let token = tr.apply(m).unwrap();
        assert_eq!(tr.tree_edges(), vec![1, 2]);
        assert_eq!(tr.induced_path(), vec![2]);
        assert_eq!(tr.version(), 1);
        tr.undo(token);
        assert_eq!(tr.father, before.father);
        assert_eq!(tr.father_edge, before.father_edge);
        assert_eq!(tr.in_tree, before.in_tree);
        assert_eq!(tr.version(), 2);
    }

    #[test]
    fn invalid_moves_are_rejected() {
        let mut tr = RootedSpanningTree::from_tree_edges(triangle(), 0, 2, &[0, 1]).unwrap();
        let before = tr.clone();
        assert_eq!(tr.apply(BasicMove::new(0, 1)), Err(TreeError::NotReplacing(0)));
        assert!(matches!(
            tr.apply(BasicMove::new(2, 2)),
            Err(TreeError::NotReplacing(2)) | Err(TreeError::NotReplacable { .. })
        ));
        assert_eq!(tr, before);
    }

    #[test]
    fn four_cycle_replacable_edges() {
        let g = Arc::new(Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap());
        let tr = RootedSpanningTree::from_tree_edges(g, 1, 0, &[0, 1, 2]).unwrap();
        let mut cycle = tr.replacable_edges(3).unwrap();
        cycle.sort();
        assert_eq!(cycle, vec![0, 1, 2]);
    }

    #[test]
    fn complex_moves() {
        // Two triangles joined at node 2: 0-1-2 and 2-3-4.
        let g = Arc::new(
            Graph::new(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]).unwrap(),
        );
        let tr = RootedSpanningTree::from_tree_edges(g, 0, 4, &[0, 1, 3, 4]).unwrap();
        let a = BasicMove::new(2, 0);
        let b = BasicMove::new(5, 3);
        let mut forward = tr.clone();
        let token = forward.apply_complex(&ComplexMove::new(vec![a, b])).unwrap();
        let mut backward = tr.clone();
        let _ = backward.apply_complex(&ComplexMove::new(vec![b, a])).unwrap();
        assert_eq!(forward.tree_edges(), backward.tree_edges());
        assert_eq!(forward.induced_path(), vec![2, 5]);
        assert_eq!(
            tr.simulate_complex_path(&ComplexMove::new(vec![a, b])).unwrap(),
            vec![2, 5]
        );
        forward.undo_complex(token);
        assert_eq!(forward.tree_edges(), tr.tree_edges());
        assert_eq!(forward.father, tr.father);

        let mut single = tr.clone();
        let _ = single.apply_complex(&ComplexMove::new(vec![a])).unwrap();
        let mut basic = tr.clone();
        let _ = basic.apply(a).unwrap();
        assert_eq!(single.tree_edges(), basic.tree_edges());

        let mut shared = tr.clone();
        let clash = ComplexMove::new(vec![a, BasicMove::new(2, 1)]);
        assert_eq!(shared.apply_complex(&clash), Err(TreeError::NotIndependent(0, 1)));
        assert_eq!(shared, tr);
    }

    #[test]
    fn init_around_path_keeps_path() {
        let g = Arc::new(crate::bench::generate_mesh(4, 4).unwrap());
        let path = crate::graph::shortest_path_avoiding(&g, 0, 15, &vec![false; g.edge_count()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tr = RootedSpanningTree::init_around_path(g, 0, 15, &path, &mut rng).unwrap();
        tr.check_invariants().unwrap();
        assert_eq!(tr.induced_path(), path);
    }

    #[test]
    fn dump_lists_fathers_and_path() {
        let tr = RootedSpanningTree::from_tree_edges(triangle(), 0, 2, &[0, 1]).unwrap();
        assert_eq!(tr.dump(), "0 1\n1 2\n2 -\npath (0,1) (1,2)\n");
    }
}
