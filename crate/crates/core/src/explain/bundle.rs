use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ExplainError, GnnExplainerConfig, MaskExplanation, ShapleyReport};
use crate::data::TransactionRecord;
use crate::detector::RiskScore;
use crate::graph::{EdgeId, EdgeType, HeteroGraph, NodeId, NodeType, Subgraph, FEATURE_NAMES};

pub const BUNDLE_SCHEMA: &str = "fraudlens-bundle/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleTarget {
    pub id: NodeId,
    pub transaction_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleNode {
    pub id: NodeId,
    pub name: String,
    #[serde(rename = "type")]
    pub node_type: NodeType,
    pub hop: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleEdge {
    pub id: EdgeId,
    pub src: NodeId,
    pub dst: NodeId,
    #[serde(rename = "type")]
    pub edge_type: EdgeType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleSubgraph {
    pub nodes: Vec<BundleNode>,
    pub edges: Vec<BundleEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeight {
    pub edge: EdgeId,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub feature: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMasks {
    pub edges: Vec<EdgeWeight>,
    pub features: Vec<FeatureWeight>,
}

/// Settings echoed into the bundle so it can be regenerated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub seed: u64,
    pub iterations: usize,
    pub explainer: GnnExplainerConfig,
}

/// Everything an analyst sees for one case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub schema: String,
    pub target: BundleTarget,
    pub prediction: RiskScore,
    pub subgraph: BundleSubgraph,
    pub masks: BundleMasks,
    pub feature_shapley: ShapleyReport,
    pub edge_shapley: ShapleyReport,
    /// Source rows of the subgraph's Transaction nodes.
    pub records: Vec<TransactionRecord>,
    pub config: BundleConfig,
}

#[allow(clippy::too_many_arguments)]
pub fn compose_bundle(
    graph: &HeteroGraph,
    subgraph: &Subgraph,
    prediction: RiskScore,
    masks: &MaskExplanation,
    features: &ShapleyReport,
    edges: &ShapleyReport,
    config: &BundleConfig,
) -> Result<ExplanationBundle, ExplainError> {
    let bad = |m: String| Err(ExplainError::Composition(m));
    if masks.prediction != prediction {
        return bad("mask explanation was computed for a different prediction".into());
    }
    if masks.edge_weights.len() != subgraph.edges.len() {
        return bad(format!("{} edge weights for {} subgraph edges", masks.edge_weights.len(), subgraph.edges.len()));
    }
    let report_edges: Vec<Option<EdgeId>> = edges.items.iter().map(|i| i.edge).collect();
    if report_edges != subgraph.edges.iter().copied().map(Some).collect::<Vec<_>>() {
        return bad("edge report does not cover exactly the subgraph edges".into());
    }
    let names: Vec<&str> = features.items.iter().map(|i| i.name.as_str()).collect();
    if names != FEATURE_NAMES {
        return bad(format!("feature report items {names:?}"));
    }
    let Some(record) = graph.record(subgraph.target) else {
        return bad("target is not a transaction".into());
    };
    let nodes = subgraph
        .nodes
        .iter()
        .zip(&subgraph.hops)
        .map(|(&id, &hop)| {
            let n = graph.node(id);
            BundleNode { id, name: n.name.clone(), node_type: n.node_type, hop }
        })
        .collect();
    let bundle_edges = subgraph
        .edges
        .iter()
        .map(|&id| {
            let e = graph.edge(id);
            BundleEdge { id, src: e.source, dst: e.target, edge_type: e.edge_type }
        })
        .collect();
    let records = subgraph.nodes.iter().filter_map(|&n| graph.record(n).cloned()).collect();
    Ok(ExplanationBundle {
        schema: BUNDLE_SCHEMA.to_string(),
        target: BundleTarget { id: subgraph.target, transaction_id: record.transaction_id.clone() },
        prediction,
        subgraph: BundleSubgraph { nodes, edges: bundle_edges },
        masks: BundleMasks {
            edges: subgraph.edges.iter().zip(&masks.edge_weights).map(|(&edge, &weight)| EdgeWeight { edge, weight }).collect(),
            features: FEATURE_NAMES
                .iter()
                .zip(masks.feature_weights)
                .map(|(f, weight)| FeatureWeight { feature: f.to_string(), weight })
                .collect(),
        },
        feature_shapley: features.clone(),
        edge_shapley: edges.clone(),
        records,
        config: config.clone(),
    })
}

struct Checker {
    path: Vec<String>,
}

type Check<T> = Result<T, ExplainError>;

impl Checker {
    fn err<T>(&self, message: impl Into<String>) -> Check<T> {
        Err(ExplainError::Schema { path: self.path.join("."), message: message.into() })
    }

    fn at<T>(&mut self, key: impl ToString, f: impl FnOnce(&mut Self) -> Check<T>) -> Check<T> {
        self.path.push(key.to_string());
        let out = f(self)?;
        self.path.pop();
        Ok(out)
    }

    fn field<'v>(&mut self, v: &'v Value, key: &str) -> Check<&'v Value> {
        match v.get(key) {
            Some(x) => Ok(x),
            None => self.at(key, |c| c.err("missing")),
        }
    }

    fn object<'v>(&self, v: &'v Value) -> Check<&'v serde_json::Map<String, Value>> {
        v.as_object().map_or_else(|| self.err("expected an object"), Ok)
    }

    fn array<'v>(&self, v: &'v Value) -> Check<&'v Vec<Value>> {
        v.as_array().map_or_else(|| self.err("expected an array"), Ok)
    }

    fn uint(&self, v: &Value) -> Check<u64> {
        v.as_u64().map_or_else(|| self.err("expected a non-negative integer"), Ok)
    }

    fn string<'v>(&self, v: &'v Value) -> Check<&'v str> {
        v.as_str().map_or_else(|| self.err("expected a string"), Ok)
    }

    fn number(&self, v: &Value) -> Check<f64> {
        v.as_f64().map_or_else(|| self.err("expected a number"), Ok)
    }

    fn one_of(&self, v: &Value, allowed: &[&str]) -> Check<()> {
        let s = self.string(v)?;
        if allowed.contains(&s) {
            Ok(())
        } else {
            self.err(format!("`{s}` is not one of {allowed:?}"))
        }
    }

    fn report(&mut self, v: &Value, edges: &HashSet<u64>) -> Check<()> {
        self.object(v)?;
        let it = self.field(v, "iterations")?;
        if self.at("iterations", |c| c.uint(it))? < 1 {
            return self.at("iterations", |c| c.err("must be at least 1"));
        }
        let seed = self.field(v, "seed")?;
        self.at("seed", |c| c.uint(seed))?;
        let items = self.field(v, "items")?;
        self.at("items", |c| {
            for (i, item) in c.array(items)?.iter().enumerate() {
                c.at(i, |c| {
                    c.object(item)?;
                    let name = c.field(item, "name")?;
                    c.at("name", |c| c.string(name))?;
                    for key in ["phi", "std_error"] {
                        let x = c.field(item, key)?;
                        c.at(key, |c| c.number(x).and_then(|x| if x.is_finite() { Ok(()) } else { c.err("not finite") }))?;
                    }
                    if let Some(e) = item.get("edge") {
                        c.at("edge", |c| {
                            let e = c.uint(e)?;
                            if edges.contains(&e) { Ok(()) } else { c.err(format!("edge {e} not in subgraph")) }
                        })?;
                    }
                    Ok(())
                })?;
            }
            Ok(())
        })
    }
}

/// Checks a JSON document against the `fraudlens-bundle/1` layout, including
/// that every node and edge reference resolves inside the embedded subgraph.
pub fn validate_bundle(doc: &Value) -> Result<(), ExplainError> {
    let mut c = Checker { path: Vec::new() };
    c.object(doc)?;
    let schema = c.field(doc, "schema")?;
    c.at("schema", |c| c.one_of(schema, &[BUNDLE_SCHEMA]))?;

    let sg = c.field(doc, "subgraph")?;
    let mut node_ids = HashSet::new();
    let mut edge_ids = HashSet::new();
    c.at("subgraph", |c| {
        c.object(sg)?;
        let nodes = c.field(sg, "nodes")?;
        c.at("nodes", |c| {
            for (i, n) in c.array(nodes)?.iter().enumerate() {
                c.at(i, |c| {
                    c.object(n)?;
                    let id = c.field(n, "id")?;
                    node_ids.insert(c.at("id", |c| c.uint(id))?);
                    let name = c.field(n, "name")?;
                    c.at("name", |c| c.string(name))?;
                    let ty = c.field(n, "type")?;
                    c.at("type", |c| c.one_of(ty, &NodeType::ALL.map(NodeType::as_str)))?;
                    let hop = c.field(n, "hop")?;
                    c.at("hop", |c| c.uint(hop))?;
                    Ok(())
                })?;
            }
            Ok(())
        })?;
        let edges = c.field(sg, "edges")?;
        c.at("edges", |c| {
            for (i, e) in c.array(edges)?.iter().enumerate() {
                c.at(i, |c| {
                    c.object(e)?;
                    let id = c.field(e, "id")?;
                    edge_ids.insert(c.at("id", |c| c.uint(id))?);
                    for key in ["src", "dst"] {
                        let v = c.field(e, key)?;
                        c.at(key, |c| {
                            let n = c.uint(v)?;
                            if node_ids.contains(&n) { Ok(()) } else { c.err(format!("node {n} not in subgraph")) }
                        })?;
                    }
                    let ty = c.field(e, "type")?;
                    c.at("type", |c| c.one_of(ty, &EdgeType::ALL.map(EdgeType::as_str)))
                })?;
            }
            Ok(())
        })
    })?;

    let target = c.field(doc, "target")?;
    c.at("target", |c| {
        c.object(target)?;
        let id = c.field(target, "id")?;
        c.at("id", |c| {
            let n = c.uint(id)?;
            if node_ids.contains(&n) { Ok(()) } else { c.err("target not in subgraph") }
        })?;
        let tid = c.field(target, "transaction_id")?;
        c.at("transaction_id", |c| c.string(tid)).map(|_| ())
    })?;

    let pred = c.field(doc, "prediction")?;
    c.at("prediction", |c| {
        c.object(pred)?;
        let p = c.field(pred, "p_fraud")?;
        c.at("p_fraud", |c| c.number(p).and_then(|p| if (0.0..=1.0).contains(&p) { Ok(()) } else { c.err("outside [0, 1]") }))?;
        let l = c.field(pred, "label")?;
        c.at("label", |c| c.uint(l).and_then(|l| if l <= 1 { Ok(()) } else { c.err("label must be 0 or 1") }))
    })?;

    let masks = c.field(doc, "masks")?;
    c.at("masks", |c| {
        c.object(masks)?;
        let unit = |c: &Checker, v: &Value| c.number(v).and_then(|w| if w > 0.0 && w < 1.0 { Ok(()) } else { c.err("weight outside (0, 1)") });
        let edges = c.field(masks, "edges")?;
        c.at("edges", |c| {
            for (i, e) in c.array(edges)?.iter().enumerate() {
                c.at(i, |c| {
                    let id = c.field(e, "edge")?;
                    c.at("edge", |c| {
                        let id = c.uint(id)?;
                        if edge_ids.contains(&id) { Ok(()) } else { c.err(format!("edge {id} not in subgraph")) }
                    })?;
                    let w = c.field(e, "weight")?;
                    c.at("weight", |c| unit(c, w))
                })?;
            }
            Ok(())
        })?;
        let feats = c.field(masks, "features")?;
        c.at("features", |c| {
            for (i, f) in c.array(feats)?.iter().enumerate() {
                c.at(i, |c| {
                    let name = c.field(f, "feature")?;
                    c.at("feature", |c| c.one_of(name, &FEATURE_NAMES))?;
                    let w = c.field(f, "weight")?;
                    c.at("weight", |c| unit(c, w))
                })?;
            }
            Ok(())
        })
    })?;

    for key in ["feature_shapley", "edge_shapley"] {
        let r = c.field(doc, key)?;
        c.at(key, |c| c.report(r, &edge_ids))?;
    }

    let records = c.field(doc, "records")?;
    c.at("records", |c| {
        for (i, r) in c.array(records)?.iter().enumerate() {
            c.at(i, |c| {
                let id = c.field(r, "transaction_id")?;
                c.at("transaction_id", |c| c.string(id)).map(|_| ())
            })?;
        }
        Ok(())
    })?;

    let cfg = c.field(doc, "config")?;
    c.at("config", |c| {
        c.object(cfg)?;
        for key in ["seed", "iterations"] {
            let v = c.field(cfg, key)?;
            c.at(key, |c| c.uint(v))?;
        }
        let e = c.field(cfg, "explainer")?;
        c.at("explainer", |c| c.object(e).map(|_| ()))
    })
}
