use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::detector::{score_targets, DetectorError, ModelCheckpoint, RiskScore};
use crate::explain::{explain_transaction, Case, ExplainError, GnnExplainerConfig};
use crate::graph::{EdgeId, HeteroGraph, NodeId, FEATURE_DIM, FEATURE_NAMES};

pub const DEFAULT_ITERATIONS: usize = 2000;
pub const DEFAULT_SEED: u64 = 7;
const DEFAULT_LIMIT: usize = 50;

/// Status code and JSON body.
pub type ApiResponse = (u16, Value);

/// Counterfactual query against one case.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub removed_edges: Vec<EdgeId>,
    /// Raw (unstandardized) replacement values keyed by feature name.
    pub feature_overrides: BTreeMap<String, f64>,
}

struct CaseRow {
    node: NodeId,
    score: RiskScore,
}

/// Request handler over a snapshot that never changes after construction.
pub struct Api {
    ckpt: ModelCheckpoint,
    graph: HeteroGraph,
    /// All transactions, highest fraud probability first.
    ranked: Vec<CaseRow>,
}

fn error(status: u16, message: impl Into<String>) -> ApiResponse {
    (status, json!({ "error": message.into() }))
}

fn field_error(path: &str, message: &str) -> ApiResponse {
    (400, json!({ "error": message, "field": path }))
}

fn internal(e: impl std::fmt::Display) -> ApiResponse {
    error(500, e.to_string())
}

impl Api {
    /// Scores every transaction once so case listings are cheap.
    pub fn new(ckpt: ModelCheckpoint, graph: HeteroGraph) -> Result<Self, DetectorError> {
        let nodes: Vec<NodeId> = graph.transaction_nodes().collect();
        let scores = score_targets(&ckpt, &graph, &nodes)?;
        let mut ranked: Vec<CaseRow> = nodes.into_iter().zip(scores).map(|(node, p)| CaseRow { node, score: RiskScore::new(p) }).collect();
        ranked.sort_by(|a, b| b.score.p_fraud.total_cmp(&a.score.p_fraud).then_with(|| graph.node(a.node).name.cmp(&graph.node(b.node).name)));
        Ok(Self { ckpt, graph, ranked })
    }

    pub fn checkpoint(&self) -> &ModelCheckpoint {
        &self.ckpt
    }

    pub fn graph(&self) -> &HeteroGraph {
        &self.graph
    }

    /// Routes one request. `target` is the path with an optional query string.
    pub fn handle(&self, method: &str, target: &str, body: &[u8]) -> ApiResponse {
        let (path, query) = target.split_once('?').unwrap_or((target, ""));
        let parts: Vec<&str> = path.trim_matches('/').split('/').collect();
        match (method, parts.as_slice()) {
            ("GET", ["api", "health"]) => self.health(),
            ("GET", ["api", "cases"]) => self.list(query),
            ("GET", ["api", "cases", id]) => self.with_case(id, |c| self.case(c)),
            ("POST", ["api", "cases", id, "explain"]) => self.with_case(id, |c| self.explain(c, body)),
            ("POST", ["api", "cases", id, "whatif"]) => self.with_case(id, |c| self.what_if(c, body)),
            (_, ["api", ..]) => error(404, format!("no route for {method} {path}")),
            _ => error(404, "not found"),
        }
    }

    fn with_case(&self, id: &str, f: impl FnOnce(NodeId) -> ApiResponse) -> ApiResponse {
        match self.graph.transaction(id) {
            Ok(node) => f(node),
            Err(_) => error(404, format!("unknown transaction `{id}`")),
        }
    }

    fn health(&self) -> ApiResponse {
        (200, json!({ "status": "ok", "transactions": self.ranked.len(), "model": self.ckpt.content_hash() }))
    }

    fn row(&self, r: &CaseRow) -> Value {
        let record = self.graph.record(r.node).expect("transaction node");
        json!({
            "id": record.transaction_id,
            "node": r.node,
            "p_fraud": r.score.p_fraud,
            "label": r.score.label,
            "true_label": record.label,
            "transaction_type": record.transaction_type,
        })
    }

    fn list(&self, query: &str) -> ApiResponse {
        let mut label = None;
        let mut limit = DEFAULT_LIMIT;
        for pair in query.split('&').filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
            match k {
                "label" if v.is_empty() => {}
                "label" => match v {
                    "0" | "1" => label = Some(v.parse::<u8>().unwrap()),
                    _ => return field_error("label", "expected 0 or 1"),
                },
                "limit" => match v.parse() {
                    Ok(n) => limit = n,
                    Err(_) => return field_error("limit", "expected a non-negative integer"),
                },
                _ => return field_error(k, "unknown query parameter"),
            }
        }
        let cases: Vec<Value> = self
            .ranked
            .iter()
            .filter(|r| label.is_none_or(|l| r.score.label == l))
            .take(limit)
            .map(|r| self.row(r))
            .collect();
        (200, json!({ "cases": cases }))
    }

    fn baseline(&self, node: NodeId) -> RiskScore {
        self.ranked.iter().find(|r| r.node == node).expect("every transaction is ranked").score
    }

    fn case(&self, node: NodeId) -> ApiResponse {
        let case = match Case::new(&self.ckpt, &self.graph, node) {
            Ok(c) => c,
            Err(e) => return internal(e),
        };
        let g = &self.graph;
        let nodes: Vec<Value> = case
            .subgraph
            .nodes
            .iter()
            .zip(&case.subgraph.hops)
            .map(|(&id, &hop)| json!({ "id": id, "name": g.node(id).name, "type": g.node(id).node_type, "hop": hop }))
            .collect();
        let edges: Vec<Value> = case
            .subgraph
            .edges
            .iter()
            .map(|&id| {
                let e = g.edge(id);
                json!({ "id": id, "src": e.source, "dst": e.target, "type": e.edge_type })
            })
            .collect();
        let record = g.record(node).expect("transaction node");
        (
            200,
            json!({
                "id": record.transaction_id,
                "node": node,
                "prediction": self.baseline(node),
                "record": record,
                "subgraph": { "nodes": nodes, "edges": edges },
            }),
        )
    }

    fn explain(&self, node: NodeId, body: &[u8]) -> ApiResponse {
        let doc = match parse_body(body) {
            Ok(d) => d,
            Err(r) => return r,
        };
        let mut iterations = DEFAULT_ITERATIONS;
        let mut seed = DEFAULT_SEED;
        let mut cfg = GnnExplainerConfig::default();
        for (k, v) in doc.as_object().into_iter().flatten() {
            let Some(n) = v.as_u64() else {
                return field_error(k, "expected a non-negative integer");
            };
            match k.as_str() {
                "M" if n >= 1 => iterations = n as usize,
                "M" => return field_error("M", "must be at least 1"),
                "seed" => seed = n,
                "epochs" => cfg.epochs = n as usize,
                _ => return field_error(k, "unknown field"),
            }
        }
        match explain_transaction(&self.ckpt, &self.graph, node, iterations, seed, &cfg) {
            Ok(b) => (200, serde_json::to_value(b).expect("bundle serializes")),
            Err(e @ ExplainError::Detector(DetectorError::Numeric(_))) => error(500, e.to_string()),
            Err(e) => internal(e),
        }
    }

    fn what_if(&self, node: NodeId, body: &[u8]) -> ApiResponse {
        let doc = match parse_body(body) {
            Ok(d) => d,
            Err(r) => return r,
        };
        let req = match parse_what_if(&doc) {
            Ok(r) => r,
            Err(r) => return r,
        };
        let case = match Case::new(&self.ckpt, &self.graph, node) {
            Ok(c) => c,
            Err(e) => return internal(e),
        };
        for e in &req.removed_edges {
            if !case.subgraph.contains_edge(*e) {
                return error(422, format!("edge {} is not in the case subgraph", e.0));
            }
        }
        let features = if req.feature_overrides.is_empty() {
            None
        } else {
            let mut f = case.instance.target_features();
            for (name, &raw) in &req.feature_overrides {
                let k = FEATURE_NAMES.iter().position(|n| n == name).expect("validated name");
                f[k] = self.ckpt.stats.standardize_one(k, raw);
            }
            Some(f)
        };
        let baseline = self.baseline(node);
        match case.what_if(&self.ckpt, &req.removed_edges, features) {
            Ok(p) => {
                let s = RiskScore::new(p);
                (200, json!({ "p_fraud": s.p_fraud, "label": s.label, "baseline": baseline, "delta": s.p_fraud - baseline.p_fraud }))
            }
            Err(e) => internal(e),
        }
    }
}

fn parse_body(body: &[u8]) -> Result<Value, ApiResponse> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(json!({}));
    }
    match serde_json::from_slice::<Value>(body) {
        Ok(v) if v.is_object() => Ok(v),
        Ok(_) => Err(field_error("", "body must be a JSON object")),
        Err(e) => Err(field_error("", &format!("malformed JSON: {e}"))),
    }
}

fn parse_what_if(doc: &Value) -> Result<WhatIfRequest, ApiResponse> {
    let mut req = WhatIfRequest::default();
    for (k, v) in doc.as_object().into_iter().flatten() {
        match k.as_str() {
            "removed_edges" => {
                let Some(items) = v.as_array() else {
                    return Err(field_error("removed_edges", "expected an array of edge ids"));
                };
                for (i, item) in items.iter().enumerate() {
                    match item.as_u64() {
                        Some(id) => req.removed_edges.push(EdgeId(id as usize)),
                        None => return Err(field_error(&format!("removed_edges[{i}]"), "expected a non-negative integer")),
                    }
                }
            }
            "feature_overrides" => {
                let Some(map) = v.as_object() else {
                    return Err(field_error("feature_overrides", "expected an object"));
                };
                for (name, value) in map {
                    let path = format!("feature_overrides.{name}");
                    if !FEATURE_NAMES.contains(&name.as_str()) {
                        return Err(field_error(&path, &format!("unknown feature; expected one of {FEATURE_NAMES:?}")));
                    }
                    match value.as_f64() {
                        Some(x) if x.is_finite() => {
                            req.feature_overrides.insert(name.clone(), x);
                        }
                        _ => return Err(field_error(&path, "expected a finite number")),
                    }
                }
            }
            _ => return Err(field_error(k, "unknown field")),
        }
    }
    debug_assert!(req.feature_overrides.len() <= FEATURE_DIM);
    Ok(req)
}
