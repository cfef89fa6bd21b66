//! Explains one flagged transaction with GNNExplainer masks plus feature and
//! edge Shapley values, and writes the bundle the analyst UI consumes.
//!
//! ```bash
//! cargo run --release --example explain_case                       # trains a small model first
//! cargo run --release --example explain_case -- model.ckpt data.csv bundle.json
//! ```

use fraudlens::data::{generate_synthetic, load_transactions, GenConfig};
use fraudlens::detector::{score_targets, train, Hyper, ModelCheckpoint};
use fraudlens::explain::{explain_transaction, validate_bundle, GnnExplainerConfig};
use fraudlens::graph::{build_graph, HeteroGraph};

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn small_setup() -> Res<(ModelCheckpoint, HeteroGraph)> {
    let config = GenConfig { n_transactions: 2000, fraud_rate: 0.05, n_clients: 120, ..GenConfig::default() };
    let graph = build_graph(&generate_synthetic(&config)?)?;
    let ckpt = train(&graph, &graph.labelled_targets(), &Hyper { epochs: 8, ..Hyper::default() })?;
    Ok((ckpt, graph))
}

pub fn run_example(ckpt: &ModelCheckpoint, graph: &HeteroGraph, iterations: usize, out: Option<&str>) -> Res<()> {
    // Highest-scoring labelled fraud.
    let frauds: Vec<_> = graph.labelled_targets().into_iter().filter(|t| t.1 == 1).map(|t| t.0).collect();
    let scores = score_targets(ckpt, graph, &frauds)?;
    let (target, _) = frauds.iter().zip(&scores).max_by(|a, b| a.1.total_cmp(b.1)).ok_or("no fraud rows")?;
    let bundle = explain_transaction(ckpt, graph, *target, iterations, 7, &GnnExplainerConfig::default())?;
    let rec = graph.record(*target).unwrap();
    println!("{} ({}, {:.2} USD): p_fraud {:.4}", rec.transaction_id, rec.transaction_type.as_str(), rec.usd_amount, bundle.prediction.p_fraud);
    println!("subgraph: {} nodes, {} edges", bundle.subgraph.nodes.len(), bundle.subgraph.edges.len());

    println!("feature Shapley (M = {iterations}):");
    for f in &bundle.feature_shapley.items {
        println!("  {:<11} {:>+8.4} ± {:.4}", f.name, f.phi, f.std_error);
    }
    let mut edges = bundle.edge_shapley.items.clone();
    edges.sort_by(|a, b| b.phi.abs().total_cmp(&a.phi.abs()));
    println!("edge Shapley, largest |phi|:");
    for e in edges.iter().take(5) {
        println!("  {:<48} {:>+8.4}", e.name, e.phi);
    }
    let mut mask = bundle.masks.edges.clone();
    mask.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    println!("GNNExplainer edge mask, top weights:");
    for m in mask.iter().take(5) {
        let name = bundle.edge_shapley.edge(m.edge).map_or("?", |i| i.name.as_str());
        println!("  {name:<48} {:.3}", m.weight);
    }
    let doc = serde_json::to_value(&bundle)?;
    validate_bundle(&doc)?;
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        println!("wrote {path}");
    }
    Ok(())
}

fn main() -> Res<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [model, data, rest @ ..] = args.as_slice() {
        let ckpt = ModelCheckpoint::load(model)?;
        let graph = build_graph(&load_transactions(data)?)?;
        run_example(&ckpt, &graph, 2000, rest.first().map(String::as_str))
    } else {
        let (ckpt, graph) = small_setup()?;
        run_example(&ckpt, &graph, 300, None)
    }
}
