use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EdgeId, EdgeType, GraphError, NodeId, NodeType, FEATURE_DIM};
use crate::data::TransactionRecord;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub name: String,
    pub node_type: NodeType,
    /// Raw `(usd_amount, d_amount, d_time)` for transactions, zeros otherwise.
    pub features: [f64; FEATURE_DIM],
    pub timestamp: Option<i64>,
    /// Index of the originating record for transaction nodes.
    pub record: Option<usize>,
}

/// Directed edge from a transaction to one of its parties.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub edge_type: EdgeType,
}

/// Immutable typed graph built from payment records.
#[derive(Clone, Debug)]
pub struct HeteroGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    by_key: HashMap<(NodeType, String), NodeId>,
    records: Vec<TransactionRecord>,
}

impl HeteroGraph {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbors in both directions, with the connecting edge.
    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[id.0]
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency[id.0].len()
    }

    pub fn find(&self, node_type: NodeType, name: &str) -> Option<NodeId> {
        self.by_key.get(&(node_type, name.to_string())).copied()
    }

    pub fn transaction(&self, transaction_id: &str) -> Result<NodeId, GraphError> {
        self.find(NodeType::Transaction, transaction_id)
            .ok_or_else(|| GraphError::UnknownNode(transaction_id.to_string()))
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn record(&self, id: NodeId) -> Option<&TransactionRecord> {
        self.nodes[id.0].record.map(|r| &self.records[r])
    }

    pub fn transaction_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.node_type == NodeType::Transaction)
            .map(|(i, _)| NodeId(i))
    }

    /// Labelled transaction targets in record order.
    pub fn labelled_targets(&self) -> Vec<(NodeId, u8)> {
        self.transaction_nodes().map(|id| (id, self.record(id).map_or(0, |r| r.label))).collect()
    }

    /// JSON-lines dump: one object per node, then one per edge.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            let line = serde_json::json!({
                "id": i,
                "name": n.name,
                "type": n.node_type,
                "features": n.features,
            });
            writeln!(w, "{line}")?;
        }
        for e in &self.edges {
            let line = serde_json::json!({ "src": e.source, "dst": e.target, "etype": e.edge_type });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Builds one transaction node per record plus shared account, user and country nodes.
pub fn build_graph(records: &[TransactionRecord]) -> Result<HeteroGraph, GraphError> {
    let mut g = HeteroGraph {
        nodes: Vec::new(),
        edges: Vec::new(),
        adjacency: Vec::new(),
        by_key: HashMap::new(),
        records: records.to_vec(),
    };

    fn intern(g: &mut HeteroGraph, node_type: NodeType, name: &str) -> NodeId {
        if let Some(&id) = g.by_key.get(&(node_type, name.to_string())) {
            return id;
        }
        let id = NodeId(g.nodes.len());
        g.nodes.push(Node {
            name: name.to_string(),
            node_type,
            features: [0.0; FEATURE_DIM],
            timestamp: None,
            record: None,
        });
        g.adjacency.push(Vec::new());
        g.by_key.insert((node_type, name.to_string()), id);
        id
    }

    fn connect(g: &mut HeteroGraph, tx: NodeId, edge_type: EdgeType, name: &Option<String>) {
        let Some(name) = name else { return };
        let target = intern(g, edge_type.target_type(), name);
        let eid = EdgeId(g.edges.len());
        g.edges.push(Edge { source: tx, target, edge_type });
        g.adjacency[tx.0].push((target, eid));
        g.adjacency[target.0].push((tx, eid));
    }

    for (row, r) in records.iter().enumerate() {
        let has_party = [&r.sender_id, &r.sender_account, &r.bene_id, &r.bene_account, &r.sender_country, &r.bene_country]
            .iter()
            .any(|v| v.is_some());
        if !has_party {
            return Err(GraphError::NoParties { row: row + 1, id: r.transaction_id.clone() });
        }
        let tx = NodeId(g.nodes.len());
        g.nodes.push(Node {
            name: r.transaction_id.clone(),
            node_type: NodeType::Transaction,
            features: [r.usd_amount, r.d_amount, r.d_time],
            timestamp: Some(r.timestamp),
            record: Some(row),
        });
        g.adjacency.push(Vec::new());
        g.by_key.insert((NodeType::Transaction, r.transaction_id.clone()), tx);

        connect(&mut g, tx, EdgeType::TransferredBy, &r.sender_id);
        connect(&mut g, tx, EdgeType::SentBy, &r.sender_account);
        connect(&mut g, tx, EdgeType::ReceivedBy, &r.bene_id);
        connect(&mut g, tx, EdgeType::SentTo, &r.bene_account);
        connect(&mut g, tx, EdgeType::ExecutedIn, &r.sender_country);
        if r.bene_country != r.sender_country {
            connect(&mut g, tx, EdgeType::ExecutedIn, &r.bene_country);
        }
    }
    Ok(g)
}

/// Per-feature z-score statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: [f64; FEATURE_DIM],
    pub std: [f64; FEATURE_DIM],
}

impl Default for FeatureStats {
    fn default() -> Self {
        Self { mean: [0.0; FEATURE_DIM], std: [1.0; FEATURE_DIM] }
    }
}

impl FeatureStats {
    /// Population statistics; a zero spread is replaced by 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64; FEATURE_DIM]>) -> Self {
        let rows: Vec<&[f64; FEATURE_DIM]> = rows.into_iter().collect();
        if rows.is_empty() {
            return Self::default();
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; FEATURE_DIM];
        for r in &rows {
            for k in 0..FEATURE_DIM {
                mean[k] += r[k];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = [0.0; FEATURE_DIM];
        for r in &rows {
            for k in 0..FEATURE_DIM {
                std[k] += (r[k] - mean[k]).powi(2);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn standardize(&self, raw: &[f64; FEATURE_DIM]) -> [f64; FEATURE_DIM] {
        std::array::from_fn(|k| (raw[k] - self.mean[k]) / self.std[k])
    }

    pub fn standardize_one(&self, feature: usize, raw: f64) -> f64 {
        (raw - self.mean[feature]) / self.std[feature]
    }
}
