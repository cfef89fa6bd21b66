//! Drives the HTTP API handler in-process: triage queue, explanation, and an
//! edge-removal counterfactual.

use fraudlens::data::{generate_synthetic, GenConfig};
use fraudlens::detector::{train, Hyper};
use fraudlens::graph::build_graph;
use fraudlens::service::Api;
use serde_json::json;

pub fn run_example(api: &Api) -> Result<(), Box<dyn std::error::Error>> {
    let (_, queue) = api.handle("GET", "/api/cases?label=1&limit=5", b"");
    println!("top flagged cases:");
    for c in queue["cases"].as_array().unwrap() {
        println!("  {:<16} p_fraud {:.4}  (true label {})", c["id"].as_str().unwrap(), c["p_fraud"], c["true_label"]);
    }
    let Some(id) = queue["cases"][0]["id"].as_str() else {
        println!("no case is predicted fraudulent");
        return Ok(());
    };

    let (status, bundle) = api.handle("POST", &format!("/api/cases/{id}/explain"), json!({ "M": 200, "epochs": 50 }).to_string().as_bytes());
    assert_eq!(status, 200);
    let edges = bundle["edge_shapley"]["items"].as_array().unwrap();
    let Some(worst) = edges.iter().min_by(|a, b| a["phi"].as_f64().unwrap().total_cmp(&b["phi"].as_f64().unwrap())) else {
        println!("{id} has no edges to remove");
        return Ok(());
    };
    println!("most negative edge Shapley value for {id}: {} ({:+.4})", worst["name"], worst["phi"].as_f64().unwrap());

    let body = json!({ "removed_edges": [worst["edge"]] });
    let (_, r) = api.handle("POST", &format!("/api/cases/{id}/whatif"), body.to_string().as_bytes());
    println!("without it: p_fraud {:.4} (baseline {:.4}, delta {:+.4})", r["p_fraud"].as_f64().unwrap(), r["baseline"]["p_fraud"].as_f64().unwrap(), r["delta"].as_f64().unwrap());

    let body = json!({ "feature_overrides": { "d_time": 86400.0 } });
    let (_, r) = api.handle("POST", &format!("/api/cases/{id}/whatif"), body.to_string().as_bytes());
    println!("with a day since the previous payment: p_fraud {:.4}", r["p_fraud"].as_f64().unwrap());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = GenConfig { n_transactions: 2000, fraud_rate: 0.05, n_clients: 120, ..GenConfig::default() };
    let graph = build_graph(&generate_synthetic(&config)?)?;
    let ckpt = train(&graph, &graph.labelled_targets(), &Hyper { epochs: 8, ..Hyper::default() })?;
    run_example(&Api::new(ckpt, graph)?)
}
