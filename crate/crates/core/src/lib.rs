//! Constraint-based local search over rooted spanning tree variables, with an
//! edge-disjoint paths solver and benchmark harness built on top.
//!
//! Each path variable is a spanning tree rooted at the path's target; the
//! path is read off by following father pointers from the source. Moves swap
//! one tree edge for a non-tree edge, and differentiable expressions over the
//! induced paths answer "what if" queries without mutating anything.

pub mod bench;
pub mod differentiable;
pub mod dump;
pub mod edp;
pub mod graph;
pub mod search;
pub mod tree;

pub use differentiable::{Differentiable, Model, ModelError};
pub use edp::{EdpInstance, EdpSolution};
pub use graph::{Commodity, Graph, GraphError};
pub use search::{SearchConfig, SearchTrace};
pub use tree::{BasicMove, ComplexMove, RootedSpanningTree, TreeError};
