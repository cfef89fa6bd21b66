use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EdgeId, FeatureStats, GraphError, HeteroGraph, NodeId, NodeType, FEATURE_DIM, INPUT_DIM};
use crate::autodiff::{derive_seed, Tensor};

/// Bounds on the explanation/computation neighborhood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub depth: usize,
    pub width: usize,
    pub cap: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { depth: 6, width: 16, cap: 96 }
    }
}

/// Bounded neighborhood around one transaction. `nodes[0]` is the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    pub target: NodeId,
    pub nodes: Vec<NodeId>,
    /// Breadth-first level at which each node was added.
    pub hops: Vec<usize>,
    /// Graph edges with both endpoints in `nodes`, ascending.
    pub edges: Vec<EdgeId>,
}

impl Subgraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn local_index(&self, node: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }

    pub fn contains_edge(&self, edge: EdgeId) -> bool {
        self.edges.binary_search(&edge).is_ok()
    }

    /// Same members with only the edges for which `keep` is true.
    pub fn with_edges(&self, keep: impl Fn(EdgeId) -> bool) -> Subgraph {
        Subgraph { edges: self.edges.iter().copied().filter(|&e| keep(e)).collect(), ..self.clone() }
    }

    /// Shortest-path distance from the target along the subgraph's own edges.
    pub fn distances(&self, graph: &HeteroGraph) -> Vec<Option<usize>> {
        let local: HashMap<NodeId, usize> = self.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &e in &self.edges {
            let edge = graph.edge(e);
            let (a, b) = (local[&edge.source], local[&edge.target]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut dist = vec![None; self.nodes.len()];
        let mut queue = std::collections::VecDeque::new();
        if let Some(t) = local.get(&self.target) {
            dist[*t] = Some(0);
            queue.push_back(*t);
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

fn name_hash(name: &str) -> u64 {
    // FNV-1a; stable across runs and independent of node numbering.
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Breadth-first neighborhood with per-level width and total node cap.
///
/// Transaction candidates are kept closest-in-time to the target first; other
/// candidates in a seeded pseudo-random order keyed by node name, so the choice
/// does not depend on which other candidates exist.
pub fn sample_neighborhood(
    graph: &HeteroGraph,
    target: NodeId,
    config: &SamplerConfig,
    seed: u64,
) -> Result<Subgraph, GraphError> {
    if target.0 >= graph.node_count() {
        return Err(GraphError::UnknownNode(format!("#{}", target.0)));
    }
    let tnode = graph.node(target);
    if tnode.node_type != NodeType::Transaction {
        return Err(GraphError::NotTransaction(tnode.name.clone()));
    }
    let t0 = tnode.timestamp.unwrap_or(0);

    let mut nodes = vec![target];
    let mut hops = vec![0];
    // 0 = unseen, 1 = in the subgraph, 2 = candidate at the current level
    let mut mark = vec![0u8; graph.node_count()];
    mark[target.0] = 1;
    let mut frontier = vec![target];
    for level in 1..=config.depth {
        let room = config.cap.saturating_sub(nodes.len()).min(config.width);
        if frontier.is_empty() || room == 0 {
            break;
        }
        let mut candidates = Vec::new();
        for &u in &frontier {
            for &(v, _) in graph.neighbors(u) {
                if mark[v.0] == 0 {
                    mark[v.0] = 2;
                    let n = graph.node(v);
                    let rank = match (n.node_type, n.timestamp) {
                        (NodeType::Transaction, Some(t)) => (0u8, (t - t0).unsigned_abs(), u64::MAX - t as u64),
                        _ => (1u8, derive_seed(seed, name_hash(&n.name)), 0),
                    };
                    candidates.push((rank, v));
                }
            }
        }
        for &(_, v) in &candidates {
            mark[v.0] = 0;
        }
        let cmp = |a: &((u8, u64, u64), NodeId), b: &((u8, u64, u64), NodeId)| {
            a.0.cmp(&b.0).then_with(|| graph.node(a.1).name.cmp(&graph.node(b.1).name))
        };
        if candidates.len() > room {
            candidates.select_nth_unstable_by(room - 1, cmp);
            candidates.truncate(room);
        }
        candidates.sort_by(cmp);
        frontier = candidates.iter().map(|c| c.1).collect();
        for &v in &frontier {
            mark[v.0] = 1;
            nodes.push(v);
            hops.push(level);
        }
    }

    // Every edge has a Transaction endpoint, and those have small degree.
    let mut edges: Vec<EdgeId> = nodes
        .iter()
        .filter(|&&u| graph.node(u).node_type == NodeType::Transaction)
        .flat_map(|&u| graph.neighbors(u).iter().filter(|(v, _)| mark[v.0] == 1).map(|&(_, e)| e))
        .collect();
    edges.sort();
    edges.dedup();
    Ok(Subgraph { target, nodes, hops, edges })
}

/// Model inputs for a subgraph: per-node `features ⊕ type one-hot` and per-edge type one-hot.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInputs {
    pub nodes: Tensor,
    pub edges: Tensor,
}

pub fn encode_inputs(graph: &HeteroGraph, subgraph: &Subgraph, stats: &FeatureStats) -> EncodedInputs {
    let mut nodes = Tensor::zeros(subgraph.len(), INPUT_DIM);
    for (i, &id) in subgraph.nodes.iter().enumerate() {
        let n = graph.node(id);
        if n.node_type == NodeType::Transaction {
            for (k, v) in stats.standardize(&n.features).into_iter().enumerate() {
                nodes.set(i, k, v);
            }
        }
        for (k, v) in n.node_type.one_hot().into_iter().enumerate() {
            nodes.set(i, FEATURE_DIM + k, v);
        }
    }
    let mut edges = Tensor::zeros(subgraph.edges.len(), super::EdgeType::COUNT);
    for (i, &e) in subgraph.edges.iter().enumerate() {
        for (k, v) in graph.edge(e).edge_type.one_hot().into_iter().enumerate() {
            edges.set(i, k, v);
        }
    }
    EncodedInputs { nodes, edges }
}
