//! Composite explanations: GNNExplainer masks, feature and edge Shapley values.

mod attribution;
mod bundle;
mod gnn;
mod shapley;

pub use attribution::{shapley_edge_missingness, shapley_node_features, Case, ShapleyItem, ShapleyReport};
pub use bundle::{compose_bundle, validate_bundle, BundleConfig, ExplanationBundle, BUNDLE_SCHEMA};
pub use gnn::{gnn_explain, gnn_explain_case, GnnExplainerConfig, MaskExplanation};
pub use shapley::{exact_shapley, missingness_shapley, permutation_shapley, Estimate, FeatureQuery, OracleMode, MAX_ORACLE_ITEMS};

use thiserror::Error;

use crate::detector::DetectorError;
use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("exact Shapley supports at most {max} items, got {items}")]
    TooManyItems { items: usize, max: usize },
    #[error("explanation parts disagree: {0}")]
    Composition(String),
    #[error("bundle schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

use crate::autodiff::derive_seed;
use crate::detector::ModelCheckpoint;
use crate::graph::{HeteroGraph, NodeId};

/// Runs all three explainers on one transaction and packages the result.
///
/// The GNNExplainer jitter uses `seed`; feature and edge Shapley use streams
/// derived from it.
pub fn explain_transaction(
    ckpt: &ModelCheckpoint,
    graph: &HeteroGraph,
    target: NodeId,
    iterations: usize,
    seed: u64,
    explainer: &GnnExplainerConfig,
) -> Result<ExplanationBundle, ExplainError> {
    let case = Case::new(ckpt, graph, target)?;
    let prediction = case.predict(ckpt)?;
    let cfg = GnnExplainerConfig { seed, ..explainer.clone() };
    let masks = gnn_explain_case(ckpt, &case, &cfg)?;
    let features = shapley_node_features(ckpt, graph, &case, iterations, derive_seed(seed, 1))?;
    let edges = shapley_edge_missingness(ckpt, graph, &case, iterations, derive_seed(seed, 2))?;
    let config = BundleConfig { seed, iterations, explainer: cfg };
    compose_bundle(graph, &case.subgraph, prediction, &masks, &features, &edges, &config)
}
