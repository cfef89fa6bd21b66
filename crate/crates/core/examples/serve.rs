//! Serves the analyst API over HTTP.
//!
//! ```bash
//! cargo run --release --example serve -- model.ckpt data.csv 8080
//! curl localhost:8080/api/health
//! curl 'localhost:8080/api/cases?label=1&limit=10'
//! curl -X POST localhost:8080/api/cases/PAY-BILL-17/whatif -d '{"removed_edges": [3]}'
//! ```

use fraudlens::data::load_transactions;
use fraudlens::detector::ModelCheckpoint;
use fraudlens::graph::build_graph;
use fraudlens::service::{serve, Api};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [model, data, rest @ ..] = args.as_slice() else {
        return Err("usage: serve <model.ckpt> <data.csv> [port]".into());
    };
    let port = rest.first().map_or(Ok(8080), |p| p.parse())?;
    let ckpt = ModelCheckpoint::load(model)?;
    let graph = build_graph(&load_transactions(data)?)?;
    let api = Api::new(ckpt, graph)?;
    println!("listening on 0.0.0.0:{port}");
    serve(api, port).await?;
    Ok(())
}
