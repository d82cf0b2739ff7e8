//! Static random peer overlay.
//!
//! Each node opens `edges_per_node` links to distinct peers chosen uniformly
//! at random; the union of all choices is symmetrized and deduplicated. The
//! resulting mean degree lies in `[edges_per_node, 2 × edges_per_node]`.
//! Disconnected draws are discarded and redrawn from the same stream.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::seq::index;
use thiserror::Error;

use crate::rng::RngStream;
use crate::types::NodeId;

/// Redraws allowed before giving up on connectivity.
pub const CONNECT_ATTEMPTS: u32 = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("overlay needs at least 2 nodes, got {0}")]
    TooFewNodes(u32),
    #[error("edges per node must be in [1, {nodes}), got {edges_per_node}")]
    BadEdgesPerNode { nodes: u32, edges_per_node: u32 },
    #[error("no connected overlay after {0} attempts")]
    Disconnected(u32),
    #[error("node {node} out of range for overlay of {n} nodes")]
    NodeOutOfRange { node: NodeId, n: u32 },
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(u32, u32),
}

/// Undirected peer graph with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Overlay {
    adjacency: Vec<Vec<NodeId>>,
}

impl Overlay {
    /// Builds an overlay from an undirected edge list. Self-loops are
    /// rejected; duplicate edges collapse.
    pub fn from_edges(
        n: u32,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, TopologyError> {
        let mut adjacency = vec![Vec::new(); n as usize];
        for (u, v) in edges {
            if u == v || u >= n || v >= n {
                return Err(TopologyError::InvalidEdge(u, v));
            }
            adjacency[u as usize].push(NodeId(v));
            adjacency[v as usize].push(NodeId(u));
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Overlay { adjacency })
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: u32) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Self::from_edges(n, edges).expect("complete graph edges are valid")
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn node_count(&self) -> u32 {
        self.adjacency.len() as u32
    }

    /// Sorted neighbor list. Panics if `node` is out of range.
    #[inline]
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node.index()]
    }

    pub fn degree(&self, node: NodeId) -> Result<usize, TopologyError> {
        self.adjacency
            .get(node.index())
            .map(Vec::len)
            .ok_or(TopologyError::NodeOutOfRange {
                node,
                n: self.node_count(),
            })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.len() as f64
    }

    /// Each undirected edge once, as `(low, high)`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            let u = NodeId::from(u);
            list.iter().filter(move |v| **v > u).map(move |v| (u, *v))
        })
    }

    /// Breadth-first hop distances from `source`; `None` for unreachable nodes.
    pub fn distances_from(&self, source: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.len()];
        let mut queue = VecDeque::new();
        dist[source.index()] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.index()].unwrap();
            for &v in self.neighbors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        self.distances_from(NodeId(0)).iter().all(Option::is_some)
    }

    /// Exact diameter by all-pairs BFS; `None` when disconnected. Quadratic,
    /// meant for small and mid-size graphs.
    pub fn diameter(&self) -> Option<u32> {
        let mut best = 0;
        for s in 0..self.len() {
            for d in self.distances_from(NodeId::from(s)) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    /// Writes one `u v` line per undirected edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }
}

/// Free-function form of [`Overlay::degree`].
pub fn degree(overlay: &Overlay, node: NodeId) -> Result<usize, TopologyError> {
    overlay.degree(node)
}

/// Free-function form of [`Overlay::is_connected`].
pub fn is_connected(overlay: &Overlay) -> bool {
    overlay.is_connected()
}

fn draw(n: u32, edges_per_node: u32, rng: &mut RngStream) -> Overlay {
    let mut adjacency: Vec<Vec<NodeId>> =
        vec![Vec::with_capacity(2 * edges_per_node as usize); n as usize];
    for u in 0..n {
        // Sample from the n-1 other ids, then shift past u.
        for j in index::sample(rng, (n - 1) as usize, edges_per_node as usize) {
            let v = if (j as u32) < u {
                j as u32
            } else {
                j as u32 + 1
            };
            adjacency[u as usize].push(NodeId(v));
            adjacency[v as usize].push(NodeId(u));
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    Overlay { adjacency }
}

pub fn generate_overlay(
    n: u32,
    edges_per_node: u32,
    rng: &mut RngStream,
) -> Result<Overlay, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewNodes(n));
    }
    if edges_per_node < 1 || edges_per_node >= n {
        return Err(TopologyError::BadEdgesPerNode {
            nodes: n,
            edges_per_node,
        });
    }
    for _ in 0..CONNECT_ATTEMPTS {
        let overlay = draw(n, edges_per_node, rng);
        if overlay.is_connected() {
            return Ok(overlay);
        }
    }
    Err(TopologyError::Disconnected(CONNECT_ATTEMPTS))
}
