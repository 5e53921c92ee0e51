//! Text dump of an EDP solution and an independent checker for it.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::differentiable::Value;
use crate::edp::{EdpInstance, EdpSolution};
use crate::graph::{content_lines, path_nodes, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum DumpError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing summary line")]
    MissingSummary,
}

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("commodity index {0} out of range")]
    UnknownCommodity(usize),
    #[error("commodity {0} listed more than once")]
    DuplicateCommodity(usize),
    #[error("commodity {index}: endpoints ({s}, {t}) do not match the instance")]
    Endpoints { index: usize, s: NodeId, t: NodeId },
    #[error("commodity {index}: path does not run from its source to its target")]
    PathEndpoints { index: usize },
    #[error("commodity {index}: hop count {stated} but path has {actual} edges")]
    HopCount { index: usize, stated: usize, actual: usize },
    #[error("commodity {index}: nodes {u} and {v} are not adjacent")]
    NotAdjacent { index: usize, u: NodeId, v: NodeId },
    #[error("commodity {index}: node {node} visited twice")]
    NotElementary { index: usize, node: NodeId },
    #[error("commodities {first} and {second} share edge ({u}, {v})")]
    SharedEdge { first: usize, second: usize, u: NodeId, v: NodeId },
    #[error("stated objective {stated} but {actual} paths are listed")]
    Objective { stated: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteLine {
    pub index: usize,
    pub source: NodeId,
    pub target: NodeId,
    pub hops: usize,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionDump {
    pub routes: Vec<RouteLine>,
    pub objective: usize,
    pub violation: Value,
    pub time_to_best: f64,
}

impl SolutionDump {
    pub fn from_solution(inst: &EdpInstance, sol: &EdpSolution) -> Self {
        let routes = sol
            .routes
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let path = r.as_ref()?;
                let c = inst.commodities[i];
                Some(RouteLine {
                    index: i,
                    source: c.source,
                    target: c.target,
                    hops: path.len(),
                    nodes: path_nodes(&inst.graph, c.source, path),
                })
            })
            .collect();
        SolutionDump {
            routes,
            objective: sol.objective(),
            violation: sol.violation,
            time_to_best: sol.time_to_best,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.routes {
            write!(out, "{} {} {} {} :", r.index, r.source, r.target, r.hops).unwrap();
            for v in &r.nodes {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        writeln!(
            out,
            "objective={}, C={}, time_to_best={:.3}",
            self.objective, self.violation, self.time_to_best
        )
        .unwrap();
        out
    }

    pub fn parse(text: &str) -> Result<Self, DumpError> {
        let mut routes = Vec::new();
        let mut summary = None;
        for (line, content) in content_lines(text) {
            let err = |message: String| DumpError::Parse { line, message };
            if summary.is_some() {
                return Err(err("content after the summary line".into()));
            }
            if content.starts_with("objective=") {
                summary = Some(parse_summary(content).map_err(err)?);
                continue;
            }
            let (head, tail) = content
                .split_once(':')
                .ok_or_else(|| err("expected `i s t hop_count : v0 ... vL`".into()))?;
            let nums = |s: &str| -> Result<Vec<usize>, DumpError> {
                s.split_whitespace()
                    .map(|w| w.parse().map_err(|_| err(format!("bad number `{w}`"))))
                    .collect()
            };
            let head = nums(head)?;
            let [index, source, target, hops] = head[..] else {
                return Err(err(format!("expected 4 header fields, found {}", head.len())));
            };
            let nodes = nums(tail)?;
            if nodes.is_empty() {
                return Err(err("empty node list".into()));
            }
            routes.push(RouteLine {
                index,
                source,
                target,
                hops,
                nodes,
            });
        }
        let (objective, violation, time_to_best) = summary.ok_or(DumpError::MissingSummary)?;
        Ok(SolutionDump {
            routes,
            objective,
            violation,
            time_to_best,
        })
    }
}

fn parse_summary(line: &str) -> Result<(usize, Value, f64), String> {
    let mut objective = None;
    let mut violation = None;
    let mut time = None;
    for field in line.split(',') {
        let (key, value) = field
            .trim()
            .split_once('=')
            .ok_or_else(|| format!("bad summary field `{}`", field.trim()))?;
        let bad = || format!("bad value for `{key}`: `{value}`");
        match key {
            "objective" => objective = Some(value.parse().map_err(|_| bad())?),
            "C" => violation = Some(value.parse().map_err(|_| bad())?),
            "time_to_best" => time = Some(value.parse().map_err(|_| bad())?),
            _ => return Err(format!("unknown summary field `{key}`")),
        }
    }
    match (objective, violation, time) {
        (Some(o), Some(c), Some(t)) => Ok((o, c, t)),
        _ => Err("summary needs objective, C and time_to_best".into()),
    }
}

/// Checks a dump against the instance: every listed path is an elementary
/// path between its commodity's endpoints, paths are pairwise edge-disjoint
/// and the stated objective equals the number of paths.
pub fn verify(inst: &EdpInstance, dump: &SolutionDump) -> Result<(), VerifyError> {
    let g = &inst.graph;
    let mut seen = HashSet::new();
    let mut owner = vec![None; g.edge_count()];
    for r in &dump.routes {
        let index = r.index;
        let c = *inst
            .commodities
            .get(index)
            .ok_or(VerifyError::UnknownCommodity(index))?;
        if !seen.insert(index) {
            return Err(VerifyError::DuplicateCommodity(index));
        }
        if (c.source, c.target) != (r.source, r.target) {
            return Err(VerifyError::Endpoints {
                index,
                s: r.source,
                t: r.target,
            });
        }
        if r.nodes.first() != Some(&c.source) || r.nodes.last() != Some(&c.target) {
            return Err(VerifyError::PathEndpoints { index });
        }
        if r.hops + 1 != r.nodes.len() {
            return Err(VerifyError::HopCount {
                index,
                stated: r.hops,
                actual: r.nodes.len() - 1,
            });
        }
        let mut visited = HashSet::new();
        for &v in &r.nodes {
            if v >= g.node_count() || !visited.insert(v) {
                return Err(VerifyError::NotElementary { index, node: v });
            }
        }
        for w in r.nodes.windows(2) {
            let (u, v) = (w[0], w[1]);
            let e = g
                .edge_between(u, v)
                .ok_or(VerifyError::NotAdjacent { index, u, v })?;
            if let Some(first) = owner[e] {
                return Err(VerifyError::SharedEdge {
                    first,
                    second: index,
                    u,
                    v,
                });
            }
            owner[e] = Some(index);
        }
    }
    if dump.objective != dump.routes.len() {
        return Err(VerifyError::Objective {
            stated: dump.objective,
            actual: dump.routes.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Commodity, Graph};
    use std::sync::Arc;

    fn instance() -> EdpInstance {
        // Two parallel rails 0-1-2 and 3-4-5 joined by rungs 0-3, 1-4, 2-5.
        let g = Graph::new(6, &[(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)]).unwrap();
        EdpInstance::new(
            Arc::new(g),
            vec![Commodity::new(0, 2), Commodity::new(3, 5), Commodity::new(0, 5)],
        )
        .unwrap()
    }

    fn good() -> SolutionDump {
        SolutionDump::parse("0 0 2 2 : 0 1 2\n1 3 5 2 : 3 4 5\nobjective=2, C=1, time_to_best=0.250\n").unwrap()
    }

    #[test]
    fn roundtrip_text() {
        let d = good();
        assert_eq!(d.objective, 2);
        assert_eq!(d.violation, 1);
        assert_eq!(SolutionDump::parse(&d.to_text()).unwrap(), d);
        assert!(verify(&instance(), &d).is_ok());
    }

    #[test]
    fn from_solution_lists_served_commodities() {
        let inst = instance();
        let sol = EdpSolution {
            trees: Vec::new(),
            paths: Vec::new(),
            routes: vec![Some(vec![0, 1]), None, Some(vec![4, 2, 3])],
            violation: 0,
            time_to_best: 1.5,
        };
        let d = SolutionDump::from_solution(&inst, &sol);
        assert_eq!(
            d.to_text(),
            "0 0 2 2 : 0 1 2\n2 0 5 3 : 0 3 4 5\nobjective=2, C=0, time_to_best=1.500\n"
        );
        assert!(verify(&inst, &d).is_ok());
    }

    #[test]
    fn rejects_tampering() {
        let inst = instance();
        let mut d = good();
        d.routes.push(RouteLine {
            index: 2,
            source: 0,
            target: 5,
            hops: 3,
            nodes: vec![0, 1, 4, 5],
        });
        d.objective = 3;
        assert!(matches!(verify(&inst, &d), Err(VerifyError::SharedEdge { first: 0, second: 2, .. })));

        let mut d = good();
        d.objective = 3;
        assert!(matches!(verify(&inst, &d), Err(VerifyError::Objective { .. })));

        let mut d = good();
        d.routes[0].nodes = vec![0, 2];
        d.routes[0].hops = 1;
        assert!(matches!(verify(&inst, &d), Err(VerifyError::NotAdjacent { .. })));

        let mut d = good();
        d.routes[0].hops = 3;
        assert!(matches!(verify(&inst, &d), Err(VerifyError::HopCount { .. })));

        let mut d = good();
        d.routes[1].index = 0;
        assert!(matches!(verify(&inst, &d), Err(VerifyError::DuplicateCommodity(0))));

        let mut d = good();
        d.routes[0].nodes = vec![0, 1, 4, 1, 2];
        d.routes[0].hops = 4;
        assert!(matches!(verify(&inst, &d), Err(VerifyError::NotElementary { node: 1, .. })));

        let mut d = good();
        d.routes[0].nodes = vec![3, 4, 5];
        assert!(matches!(verify(&inst, &d), Err(VerifyError::PathEndpoints { .. })));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(SolutionDump::parse("0 0 2 2 : 0 1 2\n"), Err(DumpError::MissingSummary));
        assert!(matches!(
            SolutionDump::parse("0 0 2 : 0 1 2\nobjective=1, C=0, time_to_best=0\n"),
            Err(DumpError::Parse { line: 1, .. })
        ));
        assert!(SolutionDump::parse("objective=1, C=0\n").is_err());
        assert!(SolutionDump::parse("objective=0, C=0, time_to_best=0\n0 0 2 2 : 0 1 2\n").is_err());
        assert_eq!(
            SolutionDump::parse("objective=0, C=0, time_to_best=0\n").unwrap().routes,
            Vec::new()
        );
    }
}
