//! Command-line workflow: generate, train, evaluate, explain, serve.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::data::{generate_synthetic, load_transactions, write_transactions, DataError, GenConfig};
use crate::detector::{evaluate, train_with_report, DetectorError, Hyper, ModelCheckpoint};
use crate::explain::{exact_shapley, explain_transaction, ExplainError, GnnExplainerConfig, OracleMode};
use crate::graph::{build_graph, GraphError, HeteroGraph};
use crate::service::Api;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "fraudlens", version, about = "Explainable fraud detection on heterogeneous transaction graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic labelled payment CSV.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a detector and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        hyper: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every labelled row and write metrics JSON.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain one transaction and write an explanation bundle.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long = "M", default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
        iterations: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// GNNExplainer optimisation epochs.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact Shapley values of a small tabulated game.
    OracleShapley {
        #[arg(long)]
        items: PathBuf,
    },
    /// Serve the HTTP API over a model and dataset.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn data(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_DATA, message: message.to_string() }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Self::data(e)
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Self::data(e)
    }
}

impl From<DetectorError> for Failure {
    fn from(e: DetectorError) -> Self {
        let code = if matches!(e, DetectorError::Numeric(_)) { EXIT_NUMERIC } else { EXIT_DATA };
        Self { code, message: e.to_string() }
    }
}

impl From<ExplainError> for Failure {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Detector(d) => d.into(),
            other => Self::data(other),
        }
    }
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::data(format!("{}: {e}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(io_at(path))
}

fn load_graph(path: &Path) -> Result<HeteroGraph, Failure> {
    let records = load_transactions(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    Ok(build_graph(&records)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Game {
    items: Vec<String>,
    values: Vec<f64>,
    #[serde(default = "default_mode")]
    mode: OracleMode,
}

fn default_mode() -> OracleMode {
    OracleMode::Features
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let rendered = e.to_string();
            let line = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
            let _ = writeln!(stderr, "{line}");
            return EXIT_USAGE;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message.replace('\n', " "));
            f.code
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Generate { config, out } => {
            let cfg: GenConfig = match &config {
                Some(p) => read_json(p)?,
                None => GenConfig::default(),
            };
            let rows = generate_synthetic(&cfg)?;
            let file = fs::File::create(&out).map_err(io_at(&out))?;
            write_transactions(std::io::BufWriter::new(file), &rows)?;
            let frauds = rows.iter().filter(|r| r.is_fraud()).count();
            let _ = writeln!(stdout, "wrote {} rows ({frauds} fraudulent) to {}", rows.len(), out.display());
        }
        Command::Train { data, hyper, out } => {
            let hyper: Hyper = match &hyper {
                Some(p) => read_json(p)?,
                None => Hyper::default(),
            };
            let graph = load_graph(&data)?;
            let targets = graph.labelled_targets();
            let (ckpt, report) = train_with_report(&graph, &targets, &hyper)?;
            ckpt.save(&out)?;
            let _ = writeln!(
                stdout,
                "trained on {} targets ({} held out); best epoch {} with validation AP {:.4}; wrote {}",
                report.train_size,
                report.validation_size,
                report.best_epoch + 1,
                report.validation_ap.get(report.best_epoch).copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Evaluate { model, data, out } => {
            let ckpt = ModelCheckpoint::load(&model)?;
            let graph = load_graph(&data)?;
            let targets = graph.labelled_targets();
            let metrics = evaluate(&ckpt, &graph, &targets)?;
            let doc = json!({
                "accuracy": metrics.accuracy,
                "loss": metrics.loss,
                "average_precision": metrics.average_precision,
                "roc_auc": metrics.roc_auc,
                "n": targets.len(),
                "positives": targets.iter().filter(|t| t.1 == 1).count(),
            });
            write_json(&out, &doc)?;
            let _ = writeln!(stdout, "AP {:.4} ROC-AUC {:.4} over {} rows", metrics.average_precision, metrics.roc_auc, targets.len());
        }
        Command::Explain { model, data, target, iterations, seed, epochs, out } => {
            let ckpt = ModelCheckpoint::load(&model)?;
            let graph = load_graph(&data)?;
            let node = graph.transaction(&target)?;
            let mut cfg = GnnExplainerConfig::default();
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            let bundle = explain_transaction(&ckpt, &graph, node, iterations as usize, seed, &cfg)?;
            write_json(&out, &bundle)?;
            let _ = writeln!(stdout, "p_fraud {:.4} for {target}; wrote {}", bundle.prediction.p_fraud, out.display());
        }
        Command::OracleShapley { items } => {
            let game: Game = read_json(&items)?;
            let n = game.items.len();
            if n > crate::explain::MAX_ORACLE_ITEMS {
                return Err(ExplainError::TooManyItems { items: n, max: crate::explain::MAX_ORACLE_ITEMS }.into());
            }
            if game.values.len() != 1 << n {
                return Err(Failure::data(format!("{n} items need {} coalition values, got {}", 1 << n, game.values.len())));
            }
            let phi = exact_shapley(n, game.mode, |c| {
                let mask = c.iter().enumerate().filter(|(_, &on)| on).fold(0usize, |m, (i, _)| m | 1 << i);
                game.values[mask]
            })?;
            let doc = json!({
                "mode": game.mode,
                "phi": game.items.iter().zip(&phi).map(|(name, v)| json!({ "name": name, "phi": v })).collect::<Vec<_>>(),
            });
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
        Command::Serve { model, data, port } => {
            let ckpt = ModelCheckpoint::load(&model)?;
            let graph = load_graph(&data)?;
            let api = Api::new(ckpt, graph)?;
            let runtime = tokio::runtime::Runtime::new().map_err(Failure::data)?;
            let _ = writeln!(stderr, "listening on 0.0.0.0:{port}");
            runtime.block_on(crate::service::serve(api, port)).map_err(|e| Failure::data(format!("port {port}: {e}")))?;
        }
    }
    Ok(())
}
