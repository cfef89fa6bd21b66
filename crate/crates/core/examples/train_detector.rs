//! Trains the heterogeneous attention detector and scores a held-out split.
//!
//! ```bash
//! cargo run --release --example train_detector            # small quick run
//! cargo run --release --example train_detector -- full    # 10k rows, default Hyper
//! ```

use fraudlens::data::{generate_synthetic, GenConfig};
use fraudlens::detector::{evaluate, stratified_split, train_with_report, Hyper};
use fraudlens::graph::build_graph;

pub fn run_example(config: GenConfig, hyper: Hyper, save: Option<&str>) -> Result<(), Box<dyn std::error::Error>> {
    let rows = generate_synthetic(&config)?;
    let graph = build_graph(&rows)?;
    println!("graph: {} nodes, {} edges", graph.node_count(), graph.edge_count());
    let (train_set, test_set) = stratified_split(&graph.labelled_targets(), 0.2, config.seed);
    let start = std::time::Instant::now();
    let (ckpt, report) = train_with_report(&graph, &train_set, &hyper)?;
    println!("trained {} epochs in {:.1}s; best epoch {}", hyper.epochs, start.elapsed().as_secs_f64(), report.best_epoch + 1);
    for (e, loss) in report.epoch_loss.iter().enumerate() {
        let ap = report.validation_ap.get(e).map_or(String::new(), |ap| format!("  val AP {ap:.3}"));
        println!("  epoch {:>2}  loss {loss:.4}{ap}", e + 1);
    }
    let m = evaluate(&ckpt, &graph, &test_set)?;
    println!("held out: accuracy {:.4}  loss {:.4}  AP {:.4}  ROC-AUC {:.4}", m.accuracy, m.loss, m.average_precision, m.roc_auc);
    if let Some(path) = save {
        ckpt.save(path)?;
        println!("wrote {path} (hash {})", ckpt.content_hash());
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if std::env::args().nth(1).as_deref() == Some("full") {
        let config = GenConfig { seed: 42, ..GenConfig::default() };
        run_example(config, Hyper::default(), Some("model.ckpt"))
    } else {
        let config = GenConfig { n_transactions: 2000, fraud_rate: 0.05, n_clients: 120, ..GenConfig::default() };
        run_example(config, Hyper { epochs: 8, ..Hyper::default() }, None)
    }
}
