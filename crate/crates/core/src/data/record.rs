use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransactionType {
    #[serde(rename = "MAKE-PAYMENT")]
    MakePayment,
    #[serde(rename = "WITHDRAWAL")]
    Withdrawal,
    #[serde(rename = "MOVE-FUNDS")]
    MoveFunds,
    #[serde(rename = "DEPOSIT-CASH")]
    DepositCash,
    #[serde(rename = "PAY-CHECK")]
    PayCheck,
    #[serde(rename = "QUICK-PAYMENT")]
    QuickPayment,
    #[serde(rename = "EXCHANGE")]
    Exchange,
}

impl TransactionType {
    pub const ALL: [TransactionType; 7] = [
        TransactionType::MakePayment,
        TransactionType::Withdrawal,
        TransactionType::MoveFunds,
        TransactionType::DepositCash,
        TransactionType::PayCheck,
        TransactionType::QuickPayment,
        TransactionType::Exchange,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransactionType::MakePayment => "MAKE-PAYMENT",
            TransactionType::Withdrawal => "WITHDRAWAL",
            TransactionType::MoveFunds => "MOVE-FUNDS",
            TransactionType::DepositCash => "DEPOSIT-CASH",
            TransactionType::PayCheck => "PAY-CHECK",
            TransactionType::QuickPayment => "QUICK-PAYMENT",
            TransactionType::Exchange => "EXCHANGE",
        }
    }
}

impl fmt::Display for TransactionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransactionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TransactionType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown transaction type `{s}`"))
    }
}

/// One payment row. `d_amount` / `d_time` are filled by [`super::engineer_deltas`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub transaction_id: String,
    pub sender_id: Option<String>,
    pub sender_account: Option<String>,
    pub sender_country: Option<String>,
    pub bene_id: Option<String>,
    pub bene_account: Option<String>,
    pub bene_country: Option<String>,
    pub usd_amount: f64,
    pub transaction_type: TransactionType,
    pub timestamp: i64,
    pub label: u8,
    pub d_amount: f64,
    pub d_time: f64,
}

impl TransactionRecord {
    /// Account the engineered deltas are attached to: sender first, else beneficiary.
    pub fn delta_account(&self) -> Option<&str> {
        self.sender_account.as_deref().or(self.bene_account.as_deref())
    }

    pub fn is_fraud(&self) -> bool {
        self.label == 1
    }
}

/// Column header written by [`write_transactions`].
pub const CSV_HEADER: [&str; 13] = [
    "Transaction_Id",
    "Sender_Id",
    "Sender_Account",
    "Sender_Country",
    "Sender_Sector",
    "Sender_lob",
    "Bene_Id",
    "Bene_Account",
    "Bene_Country",
    "USD_Amount",
    "Timestamp",
    "Label",
    "Transaction_Type",
];

const REQUIRED: [&str; 11] = [
    "Transaction_Id",
    "Sender_Id",
    "Sender_Account",
    "Sender_Country",
    "Bene_Id",
    "Bene_Account",
    "Bene_Country",
    "USD_Amount",
    "Timestamp",
    "Label",
    "Transaction_Type",
];

// Sector and line-of-business columns carry no signal and are dropped at ingest.
const DISCARDED: [&str; 3] = ["sender_sector", "sender_lob", "sender_job"];

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    /// Reject columns that are neither required nor known-discarded.
    pub strict_columns: bool,
}

/// Parses the payment CSV format. Column order is free; names match case-insensitively.
pub fn parse_transactions<R: std::io::Read>(
    source: R,
    options: &ParseOptions,
) -> Result<Vec<TransactionRecord>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));

    let mut index = [0usize; 11];
    for (slot, name) in index.iter_mut().zip(REQUIRED) {
        *slot = find(name).ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
    }
    if options.strict_columns {
        for h in headers.iter() {
            let known = REQUIRED.iter().any(|r| r.eq_ignore_ascii_case(h))
                || DISCARDED.iter().any(|d| d.eq_ignore_ascii_case(h));
            if !known {
                return Err(DataError::UnknownColumn(h.to_string()));
            }
        }
    }

    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let cell = |k: usize| row.get(index[k]).unwrap_or("");
        let opt = |k: usize| {
            let v = cell(k);
            (!v.is_empty()).then(|| v.to_string())
        };
        let row_err = |message: String| DataError::Row { row: row_no, message };

        let transaction_id = cell(0).to_string();
        if transaction_id.is_empty() {
            return Err(row_err("empty Transaction_Id".into()));
        }
        let usd_amount: f64 = cell(7)
            .parse()
            .map_err(|_| row_err(format!("unparseable USD_Amount `{}`", cell(7))))?;
        if !usd_amount.is_finite() || usd_amount < 0.0 {
            return Err(row_err(format!("USD_Amount must be a non-negative number, got {usd_amount}")));
        }
        let timestamp: i64 = cell(8)
            .parse()
            .map_err(|_| row_err(format!("unparseable Timestamp `{}`", cell(8))))?;
        let label: u8 = match cell(9) {
            "0" => 0,
            "1" => 1,
            other => return Err(row_err(format!("Label must be 0 or 1, got `{other}`"))),
        };
        let transaction_type = cell(10).parse().map_err(row_err)?;

        if !seen.insert(transaction_id.clone()) {
            return Err(DataError::DuplicateId(transaction_id));
        }
        records.push(TransactionRecord {
            transaction_id,
            sender_id: opt(1),
            sender_account: opt(2),
            sender_country: opt(3),
            bene_id: opt(4),
            bene_account: opt(5),
            bene_country: opt(6),
            usd_amount,
            transaction_type,
            timestamp,
            label,
            d_amount: 0.0,
            d_time: 0.0,
        });
    }
    Ok(records)
}

/// Writes records with the canonical header; sector/lob cells are left empty.
pub fn write_transactions<W: std::io::Write>(sink: W, records: &[TransactionRecord]) -> Result<(), DataError> {
    let mut writer = csv::WriterBuilder::new().from_writer(sink);
    writer.write_record(CSV_HEADER)?;
    for r in records {
        let o = |v: &Option<String>| v.clone().unwrap_or_default();
        writer.write_record([
            r.transaction_id.clone(),
            o(&r.sender_id),
            o(&r.sender_account),
            o(&r.sender_country),
            String::new(),
            String::new(),
            o(&r.bene_id),
            o(&r.bene_account),
            o(&r.bene_country),
            format!("{}", r.usd_amount),
            r.timestamp.to_string(),
            r.label.to_string(),
            r.transaction_type.to_string(),
        ])?;
    }
    writer.flush().map_err(DataError::Io)?;
    Ok(())
}

pub fn write_transactions_string(records: &[TransactionRecord]) -> Result<String, DataError> {
    let mut buf = Vec::new();
    write_transactions(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv writer emits utf-8"))
}
