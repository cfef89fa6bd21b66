//! Generates a synthetic payment table with planted account-takeover frauds.
//!
//! ```bash
//! cargo run --release --example generate_data -- data.csv
//! ```

use fraudlens::data::{generate_synthetic, write_transactions, GenConfig, TransactionType};

pub fn run_example(out: Option<&str>, config: GenConfig) -> Result<(), Box<dyn std::error::Error>> {
    let rows = generate_synthetic(&config)?;
    let frauds: Vec<_> = rows.iter().filter(|r| r.is_fraud()).collect();
    println!("{} rows, {} fraudulent", rows.len(), frauds.len());
    for kind in TransactionType::ALL {
        let n = frauds.iter().filter(|r| r.transaction_type == kind).count();
        if n > 0 {
            println!("  fraud {:<14} {n}", kind.as_str());
        }
    }
    if let Some(f) = frauds.iter().find(|r| r.transaction_type == TransactionType::QuickPayment) {
        println!("e.g. {} {} -> {:?}: {:.2} USD, {:.0}s after the previous payment", f.transaction_id, f.sender_account.as_deref().unwrap_or("-"), f.bene_country, f.usd_amount, f.d_time);
    }
    match out {
        Some(path) => {
            write_transactions(std::fs::File::create(path)?, &rows)?;
            println!("wrote {path}");
        }
        None => println!("(pass a path to write the CSV)"),
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1);
    run_example(out.as_deref(), GenConfig::default())
}
