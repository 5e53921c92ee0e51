//! Immutable undirected graphs, the text file format, and the elementary
//! path queries shared by the tree variables and the solvers.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;

/// Weights are fixed-point integers: one input unit is `WEIGHT_SCALE` raw units.
pub const WEIGHT_SCALE: i64 = 1000;
const WEIGHT_DECIMALS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: NodeId },
    #[error("line {line}: duplicate edge ({u}, {v})")]
    DuplicateEdge { line: usize, u: NodeId, v: NodeId },
    #[error("line {line}: node {node} out of range (n = {n})")]
    NodeOutOfRange { line: usize, node: NodeId, n: usize },
    #[error("line {line}: expected {expected} weight columns, found {found}")]
    WeightArity {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("graph is disconnected: node {node} is unreachable from node 0")]
    Disconnected { node: NodeId },
    #[error("graph must have at least one node")]
    Empty,
}

fn parse_err(line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        line,
        message: message.into(),
    }
}

/// A connected simple undirected graph with dense edge ids.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    weights: Vec<Vec<i64>>,
    weight_count: usize,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    index: HashMap<(NodeId, NodeId), EdgeId>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("node_count", &self.node_count)
            .field("edge_count", &self.edges.len())
            .field("weight_count", &self.weight_count)
            .finish()
    }
}

impl Graph {
    /// Builds an unweighted graph. Edge ids follow the order of `edges`.
    pub fn new(node_count: usize, edges: &[(NodeId, NodeId)]) -> Result<Self, GraphError> {
        Self::with_weights(node_count, edges, vec![Vec::new(); edges.len()])
    }

    /// Builds a graph with raw (already scaled) weight vectors, one per edge.
    pub fn with_weights(
        node_count: usize,
        edges: &[(NodeId, NodeId)],
        weights: Vec<Vec<i64>>,
    ) -> Result<Self, GraphError> {
        assert_eq!(edges.len(), weights.len(), "one weight vector per edge");
        let mut builder = Builder::new(node_count)?;
        for (i, (&(u, v), w)) in edges.iter().zip(weights).enumerate() {
            builder.push(i + 1, u, v, w)?;
        }
        builder.finish()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of weight columns carried by every edge.
    pub fn weight_count(&self) -> usize {
        self.weight_count
    }

    pub fn endpoints(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// The endpoint of `e` that is not `u`.
    pub fn opposite(&self, e: EdgeId, u: NodeId) -> NodeId {
        let (a, b) = self.edges[e];
        debug_assert!(a == u || b == u, "node {u} is not an endpoint of edge {e}");
        if a == u {
            b
        } else {
            a
        }
    }

    pub fn weight(&self, e: EdgeId, k: usize) -> i64 {
        self.weights[e][k]
    }

    /// Incident `(neighbor, edge)` pairs in increasing edge-id order.
    pub fn neighbors(&self, u: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[u]
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.index.get(&(u.min(v), u.max(v))).copied()
    }

    /// Parses the graph text format: a header `n m`, then `m` lines `u v [w1 w2 ...]`.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = content_lines(text);
        let (header_line, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(header_line, "header must be `n m`"));
        }
        let n = parse_usize(header_line, fields[0])?;
        let m = parse_usize(header_line, fields[1])?;
        let mut builder = Builder::new(n)?;
        let mut arity = None;
        for _ in 0..m {
            let (line, content) = lines
                .next()
                .ok_or_else(|| parse_err(header_line, format!("expected {m} edge lines")))?;
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() < 2 {
                return Err(parse_err(line, "edge line must be `u v [weights...]`"));
            }
            let u = parse_usize(line, fields[0])?;
            let v = parse_usize(line, fields[1])?;
            let weights = fields[2..]
                .iter()
                .map(|f| parse_weight(line, f))
                .collect::<Result<Vec<_>, _>>()?;
            let expected = *arity.get_or_insert(weights.len());
            if weights.len() != expected {
                return Err(GraphError::WeightArity {
                    line,
                    expected,
                    found: weights.len(),
                });
            }
            builder.push(line, u, v, weights)?;
        }
        if let Some((line, _)) = lines.next() {
            return Err(parse_err(line, format!("trailing content after {m} edges")));
        }
        builder.finish()
    }

    /// Serializes to the text format accepted by [`Graph::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.node_count, self.edges.len());
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            out.push_str(&format!("{u} {v}"));
            for &w in &self.weights[e] {
                out.push(' ');
                out.push_str(&format_weight(w));
            }
            out.push('\n');
        }
        out
    }
}

struct Builder {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    weights: Vec<Vec<i64>>,
    weight_count: Option<usize>,
    index: HashMap<(NodeId, NodeId), EdgeId>,
}

impl Builder {
    fn new(node_count: usize) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        Ok(Builder {
            node_count,
            edges: Vec::new(),
            weights: Vec::new(),
            weight_count: None,
            index: HashMap::new(),
        })
    }

    fn push(&mut self, line: usize, u: NodeId, v: NodeId, w: Vec<i64>) -> Result<(), GraphError> {
        let n = self.node_count;
        for node in [u, v] {
            if node >= n {
                return Err(GraphError::NodeOutOfRange { line, node, n });
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop { line, node: u });
        }
        let expected = *self.weight_count.get_or_insert(w.len());
        if expected != w.len() {
            return Err(GraphError::WeightArity {
                line,
                expected,
                found: w.len(),
            });
        }
        if w.iter().any(|&x| x < 0) {
            return Err(parse_err(line, "weights must be non-negative"));
        }
        let key = (u.min(v), u.max(v));
        if self.index.contains_key(&key) {
            return Err(GraphError::DuplicateEdge { line, u, v });
        }
        self.index.insert(key, self.edges.len());
        self.edges.push((u, v));
        self.weights.push(w);
        Ok(())
    }

    fn finish(self) -> Result<Graph, GraphError> {
        let mut adjacency = vec![Vec::new(); self.node_count];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            adjacency[u].push((v, e));
            adjacency[v].push((u, e));
        }
        let graph = Graph {
            node_count: self.node_count,
            edges: self.edges,
            weights: self.weights,
            weight_count: self.weight_count.unwrap_or(0),
            adjacency,
            index: self.index,
        };
        let dist = bfs_distances(&graph, 0, |_| false);
        if let Some(node) = dist.iter().position(Option::is_none) {
            return Err(GraphError::Disconnected { node });
        }
        Ok(graph)
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_usize(line: usize, field: &str) -> Result<usize, GraphError> {
    field
        .parse()
        .map_err(|_| parse_err(line, format!("expected a non-negative integer, found `{field}`")))
}

fn parse_weight(line: usize, field: &str) -> Result<i64, GraphError> {
    let bad = || parse_err(line, format!("invalid weight `{field}`"));
    let (int, frac) = match field.split_once('.') {
        Some((i, f)) => (i, f),
        None => (field, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if frac.len() > WEIGHT_DECIMALS || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let int: i64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let mut frac_value: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    for _ in frac.len()..WEIGHT_DECIMALS {
        frac_value *= 10;
    }
    int.checked_mul(WEIGHT_SCALE)
        .and_then(|x| x.checked_add(frac_value))
        .ok_or_else(bad)
}

fn format_weight(w: i64) -> String {
    let (int, frac) = (w / WEIGHT_SCALE, w % WEIGHT_SCALE);
    if frac == 0 {
        int.to_string()
    } else {
        let s = format!("{int}.{frac:0width$}", width = WEIGHT_DECIMALS);
        s.trim_end_matches('0').to_string()
    }
}

/// Hop distances from `s`, skipping edges for which `forbidden` holds.
pub fn bfs_distances(
    g: &Graph,
    s: NodeId,
    forbidden: impl Fn(EdgeId) -> bool,
) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    let mut queue = VecDeque::new();
    dist[s] = Some(0);
    queue.push_back(s);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &(v, e) in g.neighbors(u) {
            if dist[v].is_none() && !forbidden(e) {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// The unique path between `a` and `b` using only edges flagged in `in_tree`.
/// `in_tree` must describe a spanning tree of `g`.
pub fn tree_path(g: &Graph, in_tree: &[bool], a: NodeId, b: NodeId) -> Vec<EdgeId> {
    assert_eq!(in_tree.len(), g.edge_count());
    if a == b {
        return Vec::new();
    }
    let mut via: Vec<Option<EdgeId>> = vec![None; g.node_count()];
    let mut seen = vec![false; g.node_count()];
    let mut stack = vec![a];
    seen[a] = true;
    while let Some(u) = stack.pop() {
        if u == b {
            break;
        }
        for &(v, e) in g.neighbors(u) {
            if in_tree[e] && !seen[v] {
                seen[v] = true;
                via[v] = Some(e);
                stack.push(v);
            }
        }
    }
    assert!(seen[b], "tree_edges do not connect {a} and {b}");
    let mut path = Vec::new();
    let mut cur = b;
    while cur != a {
        let e = via[cur].unwrap();
        path.push(e);
        cur = g.opposite(e, cur);
    }
    path.reverse();
    path
}

/// Minimum-hop path from `s` to `t` avoiding every edge `e` with `forbidden[e]`.
/// Expansion follows increasing edge ids, so the result is deterministic.
pub fn shortest_path_avoiding(
    g: &Graph,
    s: NodeId,
    t: NodeId,
    forbidden: &[bool],
) -> Option<Vec<EdgeId>> {
    assert_eq!(forbidden.len(), g.edge_count());
    debug_assert_ne!(s, t);
    let mut via: Vec<Option<EdgeId>> = vec![None; g.node_count()];
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::new();
    seen[s] = true;
    queue.push_back(s);
    'bfs: while let Some(u) = queue.pop_front() {
        for &(v, e) in g.neighbors(u) {
            if forbidden[e] || seen[v] {
                continue;
            }
            seen[v] = true;
            via[v] = Some(e);
            if v == t {
                break 'bfs;
            }
            queue.push_back(v);
        }
    }
    if !seen[t] {
        return None;
    }
    let mut path = Vec::new();
    let mut cur = t;
    while cur != s {
        let e = via[cur].unwrap();
        path.push(e);
        cur = g.opposite(e, cur);
    }
    path.reverse();
    Some(path)
}

/// Node sequence of an edge path starting at `start`.
pub fn path_nodes(g: &Graph, start: NodeId, path: &[EdgeId]) -> Vec<NodeId> {
    let mut nodes = Vec::with_capacity(path.len() + 1);
    let mut cur = start;
    nodes.push(cur);
    for &e in path {
        cur = g.opposite(e, cur);
        nodes.push(cur);
    }
    nodes
}

/// Commodity endpoints `(source, target)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Commodity {
    pub source: NodeId,
    pub target: NodeId,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommodityError {
    #[error(transparent)]
    Parse(#[from] GraphError),
    #[error("line {line}: commodity source and target are both {node}")]
    SameEndpoints { line: usize, node: NodeId },
    #[error("expected {expected} commodities, found {found}")]
    Count { expected: usize, found: usize },
}

impl Commodity {
    pub fn new(source: NodeId, target: NodeId) -> Self {
        Commodity { source, target }
    }

    /// Parses the commodity format: a header `k`, then `k` lines `s t`.
    pub fn parse_list(text: &str, g: &Graph) -> Result<Vec<Commodity>, CommodityError> {
        let mut lines = content_lines(text);
        let (header_line, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing commodity count"))?;
        let k = parse_usize(header_line, header)?;
        let mut out = Vec::with_capacity(k);
        for (line, content) in lines {
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(line, "commodity line must be `s t`").into());
            }
            let s = parse_usize(line, fields[0])?;
            let t = parse_usize(line, fields[1])?;
            for node in [s, t] {
                if node >= g.node_count() {
                    return Err(GraphError::NodeOutOfRange {
                        line,
                        node,
                        n: g.node_count(),
                    }
                    .into());
                }
            }
            if s == t {
                return Err(CommodityError::SameEndpoints { line, node: s });
            }
            out.push(Commodity::new(s, t));
        }
        if out.len() != k {
            return Err(CommodityError::Count {
                expected: k,
                found: out.len(),
            });
        }
        Ok(out)
    }

    pub fn list_to_text(list: &[Commodity]) -> String {
        let mut out = format!("{}\n", list.len());
        for c in list {
            out.push_str(&format!("{} {}\n", c.source, c.target));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::parse("3 3\n0 1\n1 2\n0 2\n").unwrap()
    }

    #[test]
    fn parses_triangle_and_single_edge() {
        let g = triangle();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.edge_between(2, 1), Some(1));
        let g = Graph::parse("2 1\n0 1\n").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight_count(), 0);
    }

    #[test]
    fn parses_fixed_point_weights() {
        let g = Graph::parse("2 1\n0 1 2.5 7\n").unwrap();
        assert_eq!(g.weight(0, 0), 2500);
        assert_eq!(g.weight(0, 1), 7000);
        assert_eq!(Graph::parse(&g.to_text()).unwrap(), g);
        assert!(Graph::parse("2 1\n0 1 2.5555\n").is_err());
        assert!(Graph::parse("2 1\n0 1 -1\n").is_err());
    }

    #[test]
    fn rejects_invalid_graphs() {
        assert!(matches!(
            Graph::parse("2 1\n0 0\n"),
            Err(GraphError::SelfLoop { line: 2, node: 0 })
        ));
        assert!(matches!(
            Graph::parse("2 2\n0 1\n1 0\n"),
            Err(GraphError::DuplicateEdge { line: 3, .. })
        ));
        assert!(matches!(
            Graph::parse("4 2\n0 1\n2 3\n"),
            Err(GraphError::Disconnected { node: 2 })
        ));
        assert!(matches!(
            Graph::parse("3 2\n0 1 1\n1 2\n"),
            Err(GraphError::WeightArity { line: 3, .. })
        ));
        assert!(matches!(
            Graph::parse("3 2\n0 1\n1 x\n"),
            Err(GraphError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            Graph::parse("2 1\n0 5\n"),
            Err(GraphError::NodeOutOfRange { node: 5, .. })
        ));
    }

    #[test]
    fn tree_path_examples() {
        let g = triangle();
        let tree = [true, true, false];
        assert_eq!(tree_path(&g, &tree, 0, 2), vec![0, 1]);
        assert_eq!(tree_path(&g, &tree, 1, 1), Vec::<EdgeId>::new());
        let line = Graph::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(tree_path(&line, &[true; 3], 3, 0), vec![2, 1, 0]);
    }

    #[test]
    fn shortest_path_examples() {
        let g = triangle();
        assert_eq!(shortest_path_avoiding(&g, 0, 2, &[false; 3]), Some(vec![2]));
        assert_eq!(
            shortest_path_avoiding(&g, 0, 2, &[false, false, true]),
            Some(vec![0, 1])
        );
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        assert_eq!(shortest_path_avoiding(&g, 0, 1, &[true]), None);
    }

    #[test]
    fn commodity_parsing() {
        let g = triangle();
        let list = Commodity::parse_list("2\n0 1\n2 0\n", &g).unwrap();
        assert_eq!(list, vec![Commodity::new(0, 1), Commodity::new(2, 0)]);
        assert_eq!(Commodity::parse_list(&Commodity::list_to_text(&list), &g).unwrap(), list);
        assert!(matches!(
            Commodity::parse_list("1\n1 1\n", &g),
            Err(CommodityError::SameEndpoints { .. })
        ));
        assert!(matches!(
            Commodity::parse_list("2\n0 1\n", &g),
            Err(CommodityError::Count { .. })
        ));
    }
}
