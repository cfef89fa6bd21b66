//! Synthetic payment traffic with planted account-takeover episodes.
//!
//! Background rows follow the shapes of ordinary retail traffic (bill
//! payments mostly to companies, transfers between clients, cash deposits and
//! withdrawals, quick payments in runs days apart). Each fraud episode takes
//! over one client:
//!
//! 1. a small test payment from account A to a mule account,
//! 2. a burst of quick payments from A to mule accounts, consecutive
//!    payments at most `burst_gap_max` seconds apart, often to rare countries,
//! 3. optionally a withdrawal from another account B of the same client
//!    shortly after the burst.
//!
//! Mules are otherwise ordinary clients with background traffic of their
//! own. All episode rows are labelled 1.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{engineer_deltas, DataError, TransactionRecord, TransactionType};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_transactions: usize,
    pub fraud_rate: f64,
    pub n_clients: usize,
    pub n_accounts_per_client: usize,
    pub n_companies: usize,
    pub n_mules: usize,
    pub common_countries: Vec<String>,
    pub rare_countries: Vec<String>,
    /// Probability that a mule account sits in a rare country.
    pub rare_country_prob: f64,
    pub test_amount_range: (f64, f64),
    /// Inclusive range of quick payments per burst.
    pub burst_len: (usize, usize),
    /// Upper bound (exclusive) on seconds between consecutive burst payments.
    pub burst_gap_max: i64,
    pub withdrawal_follow_up: bool,
    pub horizon_seconds: i64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|c| c.to_string()).collect();
        Self {
            n_transactions: 10_000,
            fraud_rate: 0.02,
            n_clients: 400,
            n_accounts_per_client: 3,
            n_companies: 60,
            n_mules: 120,
            common_countries: s(&["USA", "CANADA", "GERMANY", "UK", "FRANCE", "TAIWAN"]),
            rare_countries: s(&["GABON", "NORTHERN MARIANA ISLANDS", "ANGUILLA", "NAURU", "PALAU"]),
            rare_country_prob: 0.6,
            test_amount_range: (1.0, 25.0),
            burst_len: (3, 6),
            burst_gap_max: 300,
            withdrawal_follow_up: true,
            horizon_seconds: 30 * 24 * 3600,
            seed: 42,
        }
    }
}

impl GenConfig {
    fn episode_overhead(&self) -> usize {
        1 + usize::from(self.withdrawal_follow_up)
    }

    pub fn fraud_budget(&self) -> usize {
        (self.n_transactions as f64 * self.fraud_rate).round() as usize
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Config(m));
        if !(self.fraud_rate > 0.0 && self.fraud_rate < 1.0) {
            return bad(format!("fraud_rate must be in (0,1), got {}", self.fraud_rate));
        }
        let (lo, hi) = self.burst_len;
        if lo < 2 || hi < lo {
            return bad(format!("burst_len must satisfy 2 <= min <= max, got {lo}..={hi}"));
        }
        if self.burst_gap_max <= 5 {
            return bad(format!("burst_gap_max must exceed 5 seconds, got {}", self.burst_gap_max));
        }
        if lo > self.n_transactions {
            return bad(format!("burst length {lo} exceeds n_transactions {}", self.n_transactions));
        }
        if self.fraud_budget() < lo + self.episode_overhead() {
            return bad(format!(
                "fraud budget of {} rows cannot hold one episode of {} rows",
                self.fraud_budget(),
                lo + self.episode_overhead()
            ));
        }
        if self.n_clients < 2 || self.n_companies == 0 || self.n_mules == 0 {
            return bad("need at least 2 clients, 1 company and 1 mule".into());
        }
        if self.n_accounts_per_client == 0 {
            return bad("n_accounts_per_client must be >= 1".into());
        }
        if self.common_countries.is_empty() || self.rare_countries.is_empty() {
            return bad("country pools must be non-empty".into());
        }
        if self.horizon_seconds < 3600 {
            return bad("horizon_seconds must cover at least an hour".into());
        }
        let (a, b) = self.test_amount_range;
        if !(a >= 0.0 && b > a) {
            return bad(format!("invalid test_amount_range ({a}, {b})"));
        }
        Ok(())
    }
}

struct Party {
    id: String,
    accounts: Vec<String>,
    country: String,
}

struct Builder {
    rng: ChaCha8Rng,
    counter: u64,
    rows: Vec<TransactionRecord>,
}

impl Builder {
    fn next_id(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}-{}", self.counter)
    }

    fn amount(&mut self, lo: f64, hi: f64) -> f64 {
        (self.rng.gen_range(lo..hi) * 100.0).round() / 100.0
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        prefix: &str,
        kind: TransactionType,
        sender: Option<(&Party, usize)>,
        bene: Option<(&Party, usize)>,
        amount: f64,
        timestamp: i64,
        label: u8,
    ) {
        let transaction_id = self.next_id(prefix);
        self.rows.push(TransactionRecord {
            transaction_id,
            sender_id: sender.map(|(p, _)| p.id.clone()),
            sender_account: sender.map(|(p, a)| p.accounts[a].clone()),
            sender_country: sender.map(|(p, _)| p.country.clone()),
            bene_id: bene.map(|(p, _)| p.id.clone()),
            bene_account: bene.map(|(p, a)| p.accounts[a].clone()),
            bene_country: bene.map(|(p, _)| p.country.clone()),
            usd_amount: amount,
            transaction_type: kind,
            timestamp,
            label,
            d_amount: 0.0,
            d_time: 0.0,
        });
    }
}

/// Generates `config.n_transactions` rows sorted by `(timestamp, transaction_id)`,
/// with deltas already engineered.
pub fn generate_synthetic(config: &GenConfig) -> Result<Vec<TransactionRecord>, DataError> {
    config.validate()?;
    let mut b = Builder { rng: ChaCha8Rng::seed_from_u64(config.seed), counter: 1000, rows: Vec::new() };

    let mut clients = Vec::with_capacity(config.n_clients);
    for _ in 0..config.n_clients {
        let id = b.next_id("CLIENT");
        let accounts = (0..config.n_accounts_per_client).map(|_| b.next_id("ACCOUNT")).collect();
        let country = if b.rng.gen_bool(0.7) {
            config.common_countries[0].clone()
        } else if b.rng.gen_bool(0.05) {
            config.rare_countries.choose(&mut b.rng).unwrap().clone()
        } else {
            config.common_countries.choose(&mut b.rng).unwrap().clone()
        };
        clients.push(Party { id, accounts, country });
    }
    let companies: Vec<Party> = (0..config.n_companies)
        .map(|_| {
            let id = b.next_id("COMPANY");
            let accounts = vec![b.next_id("ACCOUNT")];
            let country = config.common_countries.choose(&mut b.rng).unwrap().clone();
            Party { id, accounts, country }
        })
        .collect();
    let mules: Vec<Party> = (0..config.n_mules)
        .map(|_| {
            let id = b.next_id("CLIENT");
            let accounts = vec![b.next_id("ACCOUNT")];
            let pool = if b.rng.gen_bool(config.rare_country_prob) {
                &config.rare_countries
            } else {
                &config.common_countries
            };
            let country = pool.choose(&mut b.rng).unwrap().clone();
            Party { id, accounts, country }
        })
        .collect();

    // Episode sizes first, so the fraud row count is exact.
    let budget = config.fraud_budget();
    let overhead = config.episode_overhead();
    let (lo, hi) = config.burst_len;
    let mut bursts = Vec::new();
    let mut remaining = budget;
    while remaining >= lo + overhead {
        let k = b.rng.gen_range(lo..=hi).min(remaining - overhead);
        let left = remaining - overhead - k;
        // Fold a remainder too small for another episode into this burst.
        let k = if left < lo + overhead { k + left } else { k };
        bursts.push(k);
        remaining -= k + overhead;
    }

    let mut victims: Vec<usize> = (0..clients.len()).collect();
    victims.shuffle(&mut b.rng);
    let horizon = config.horizon_seconds;
    for (e, &k) in bursts.iter().enumerate() {
        let victim = &clients[victims[e % victims.len()]];
        let n_acc = victim.accounts.len();
        let acc_a = b.rng.gen_range(0..n_acc);
        let mut t = b.rng.gen_range(horizon / 20..horizon * 19 / 20);

        let mule = &mules[b.rng.gen_range(0..mules.len())];
        let (ta, tb) = config.test_amount_range;
        let test_amount = b.amount(ta, tb);
        b.push("PAY-BILL", TransactionType::MakePayment, Some((victim, acc_a)), Some((mule, 0)), test_amount, t, 1);
        for _ in 0..k {
            t += b.rng.gen_range(5..config.burst_gap_max);
            let mule = &mules[b.rng.gen_range(0..mules.len())];
            let amount = b.amount(150.0, 950.0);
            b.push("QUICK-PAYMENT", TransactionType::QuickPayment, Some((victim, acc_a)), Some((mule, 0)), amount, t, 1);
        }
        if config.withdrawal_follow_up {
            t += b.rng.gen_range(5..config.burst_gap_max);
            let acc_b = if n_acc > 1 { (acc_a + b.rng.gen_range(1..n_acc)) % n_acc } else { acc_a };
            let amount = b.amount(50.0, 800.0);
            b.push("WITHDRAWAL", TransactionType::Withdrawal, Some((victim, acc_b)), None, amount, t, 1);
        }
    }

    // Mule accounts also carry ordinary traffic, so receiving from one is not
    // a label on its own.
    let clients: Vec<Party> = clients.into_iter().chain(mules).collect();
    while b.rows.len() < config.n_transactions {
        let c = b.rng.gen_range(0..clients.len());
        let client = &clients[c];
        let acc = b.rng.gen_range(0..client.accounts.len());
        let t = b.rng.gen_range(0..horizon);
        let other_client = |rng: &mut ChaCha8Rng| {
            let mut o = rng.gen_range(0..clients.len() - 1);
            if o >= c {
                o += 1;
            }
            &clients[o]
        };
        let roll: f64 = b.rng.gen();
        if roll < 0.30 {
            let amt = b.amount(20.0, 1000.0);
            let payee = if b.rng.gen_bool(0.7) {
                (&companies[b.rng.gen_range(0..companies.len())], 0)
            } else {
                let other = other_client(&mut b.rng);
                (other, b.rng.gen_range(0..other.accounts.len()))
            };
            b.push("PAY-BILL", TransactionType::MakePayment, Some((client, acc)), Some(payee), amt, t, 0);
        } else if roll < 0.45 {
            let amt = b.amount(50.0, 800.0);
            b.push("WITHDRAWAL", TransactionType::Withdrawal, Some((client, acc)), None, amt, t, 0);
        } else if roll < 0.57 {
            let amt = b.amount(50.0, 1000.0);
            if b.rng.gen_bool(0.5) {
                let company = &companies[b.rng.gen_range(0..companies.len())];
                b.push("MOVE-FUNDS", TransactionType::MoveFunds, Some((client, acc)), Some((company, 0)), amt, t, 0);
            } else {
                let other = other_client(&mut b.rng);
                let oa = b.rng.gen_range(0..other.accounts.len());
                b.push("MOVE-FUNDS", TransactionType::MoveFunds, Some((client, acc)), Some((other, oa)), amt, t, 0);
            }
        } else if roll < 0.72 {
            let amt = b.amount(50.0, 1000.0);
            let prefix = if b.rng.gen_bool(0.5) { "QUICK-DEPOSIT" } else { "DEPOSIT-CASH" };
            b.push(prefix, TransactionType::DepositCash, None, Some((client, acc)), amt, t, 0);
        } else if roll < 0.82 {
            let other = other_client(&mut b.rng);
            let oa = b.rng.gen_range(0..other.accounts.len());
            let amt = b.amount(300.0, 3000.0);
            b.push("PAY-CHECK", TransactionType::PayCheck, Some((client, acc)), Some((other, oa)), amt, t, 0);
        } else if roll < 0.94 {
            // Ordinary quick payments also come in runs, but days apart.
            let session = b.rng.gen_range(1..=6).min(config.n_transactions - b.rows.len());
            let mut t = t;
            for _ in 0..session {
                let other = other_client(&mut b.rng);
                let oa = b.rng.gen_range(0..other.accounts.len());
                let amt = b.amount(20.0, 900.0);
                b.push("QUICK-PAYMENT", TransactionType::QuickPayment, Some((client, acc)), Some((other, oa)), amt, t, 0);
                t += b.rng.gen_range(12 * 3600..72 * 3600);
            }
        } else {
            let amt = b.amount(50.0, 800.0);
            b.push("EXCHANGE", TransactionType::Exchange, Some((client, acc)), None, amt, t, 0);
        }
    }

    let mut rows = b.rows;
    rows.sort_by(|x, y| x.timestamp.cmp(&y.timestamp).then_with(|| x.transaction_id.cmp(&y.transaction_id)));
    engineer_deltas(&mut rows);
    Ok(rows)
}
