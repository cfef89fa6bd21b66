//! Payment records: CSV ingest, delta feature engineering and synthetic generation.

mod deltas;
mod record;
mod synth;

pub use deltas::{engineer_deltas, median};
pub use record::{
    parse_transactions, write_transactions, write_transactions_string, ParseOptions, TransactionRecord,
    TransactionType, CSV_HEADER,
};
pub use synth::{generate_synthetic, GenConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("duplicate transaction id `{0}`")]
    DuplicateId(String),
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Reads a payment CSV file and engineers its delta features.
pub fn load_transactions(path: impl AsRef<std::path::Path>) -> Result<Vec<TransactionRecord>, DataError> {
    let file = std::fs::File::open(path)?;
    let mut rows = parse_transactions(std::io::BufReader::new(file), &ParseOptions::default())?;
    engineer_deltas(&mut rows);
    Ok(rows)
}
