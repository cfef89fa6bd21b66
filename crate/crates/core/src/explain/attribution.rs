use serde::{Deserialize, Serialize};

use super::{missingness_shapley, permutation_shapley, ExplainError};
use crate::detector::{predict_instances, Instance, ModelCheckpoint, RiskScore};
use crate::graph::{sample_neighborhood, EdgeId, HeteroGraph, NodeId, NodeType, Subgraph, FEATURE_DIM, FEATURE_NAMES};

/// A transaction to explain, with its sampled neighborhood and model input.
#[derive(Clone, Debug)]
pub struct Case {
    pub subgraph: Subgraph,
    pub instance: Instance,
}

impl Case {
    /// Samples the target's neighborhood exactly as prediction does.
    pub fn new(ckpt: &ModelCheckpoint, graph: &HeteroGraph, target: NodeId) -> Result<Self, ExplainError> {
        let sg = sample_neighborhood(graph, target, &ckpt.hyper.sampler, ckpt.hyper.seed)?;
        Ok(Self::from_subgraph(ckpt, graph, sg))
    }

    pub fn from_subgraph(ckpt: &ModelCheckpoint, graph: &HeteroGraph, subgraph: Subgraph) -> Self {
        let instance = Instance::build(graph, &subgraph, &ckpt.stats, ckpt.hyper.layers);
        Self { subgraph, instance }
    }

    pub fn target(&self) -> NodeId {
        self.subgraph.target
    }

    pub fn predict(&self, ckpt: &ModelCheckpoint) -> Result<RiskScore, ExplainError> {
        Ok(RiskScore::new(predict_instances(ckpt, std::slice::from_ref(&self.instance))?[0]))
    }

    /// Fraud probability with some subgraph edges removed and optionally other
    /// standardized target features.
    pub fn what_if(&self, ckpt: &ModelCheckpoint, removed: &[EdgeId], features: Option<[f64; FEATURE_DIM]>) -> Result<f64, ExplainError> {
        let mut inst = if removed.is_empty() {
            self.instance.clone()
        } else {
            self.instance.with_slots(|s| !removed.contains(&self.subgraph.edges[s]))
        };
        if let Some(f) = features {
            inst = inst.with_target_features(f);
        }
        Ok(predict_instances(ckpt, &[inst])?[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapleyItem {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edge: Option<EdgeId>,
    pub phi: f64,
    pub std_error: f64,
}

/// Estimated contributions in fraud-probability units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    pub items: Vec<ShapleyItem>,
    pub iterations: usize,
    pub seed: u64,
}

impl ShapleyReport {
    pub fn get(&self, name: &str) -> Option<&ShapleyItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn edge(&self, edge: EdgeId) -> Option<&ShapleyItem> {
        self.items.iter().find(|i| i.edge == Some(edge))
    }
}

/// Shapley values of the target's (usd_amount, d_amount, d_time).
///
/// Backgrounds are the other Transaction nodes of the subgraph; without any,
/// the all-zero standardized vector (the training mean) is used.
pub fn shapley_node_features(ckpt: &ModelCheckpoint, graph: &HeteroGraph, case: &Case, m: usize, seed: u64) -> Result<ShapleyReport, ExplainError> {
    if m == 0 {
        return Err(ExplainError::Config("M must be at least 1".into()));
    }
    let mut backgrounds: Vec<[f64; FEATURE_DIM]> = case
        .subgraph
        .nodes
        .iter()
        .filter(|&&n| n != case.target() && graph.node(n).node_type == NodeType::Transaction)
        .map(|&n| ckpt.stats.standardize(&graph.node(n).features))
        .collect();
    if backgrounds.is_empty() {
        backgrounds.push([0.0; FEATURE_DIM]);
    }
    let x = case.instance.target_features();
    let mut failure = None;
    let est = permutation_shapley(FEATURE_DIM, backgrounds.len(), m, seed, |queries| {
        let instances: Vec<Instance> = queries
            .iter()
            .map(|q| {
                let z = &backgrounds[q.background];
                let f = std::array::from_fn(|k| if q.from_x[k] { x[k] } else { z[k] });
                case.instance.with_target_features(f)
            })
            .collect();
        predict_instances(ckpt, &instances).unwrap_or_else(|e| {
            failure.get_or_insert(e);
            vec![0.0; instances.len()]
        })
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    let items = FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| ShapleyItem { name: name.to_string(), edge: None, phi: est.phi[k], std_error: est.std_error[k] })
        .collect();
    Ok(ShapleyReport { items, iterations: m, seed })
}

pub(crate) fn edge_label(graph: &HeteroGraph, e: EdgeId) -> String {
    let edge = graph.edge(e);
    format!("{}:{}->{}", edge.edge_type, graph.node(edge.target).name, graph.node(edge.source).name)
}

/// Edge-missingness Shapley values: negative means removing the edge lowers
/// the fraud probability. Edges beyond the detector's reach get exactly 0.
pub fn shapley_edge_missingness(ckpt: &ModelCheckpoint, graph: &HeteroGraph, case: &Case, m: usize, seed: u64) -> Result<ShapleyReport, ExplainError> {
    if m == 0 {
        return Err(ExplainError::Config("M must be at least 1".into()));
    }
    let skip: Vec<bool> = case.instance.relevant_slots().into_iter().map(|r| !r).collect();
    let mut failure = None;
    let est = missingness_shapley(case.subgraph.edges.len(), m, seed, &skip, |coalitions| {
        let instances: Vec<Instance> = coalitions.iter().map(|present| case.instance.with_slots(|s| present[s])).collect();
        predict_instances(ckpt, &instances).unwrap_or_else(|e| {
            failure.get_or_insert(e);
            vec![0.0; instances.len()]
        })
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    let items = case
        .subgraph
        .edges
        .iter()
        .enumerate()
        .map(|(s, &e)| ShapleyItem { name: edge_label(graph, e), edge: Some(e), phi: est.phi[s], std_error: est.std_error[s] })
        .collect();
    Ok(ShapleyReport { items, iterations: m, seed })
}
