use std::collections::BTreeMap;

use super::TransactionRecord;

/// Fills `d_amount` and `d_time` from the previous transaction of the same account.
///
/// Rows are grouped by [`TransactionRecord::delta_account`] and ordered by
/// `(timestamp, transaction_id)`. The first row of an account (and rows with no
/// account at all) receive the dataset median of each delta.
pub fn engineer_deltas(records: &mut [TransactionRecord]) {
    let mut by_account: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut orphans = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match r.delta_account() {
            Some(acc) => by_account.entry(acc).or_default().push(i),
            None => orphans.push(i),
        }
    }

    let mut deltas: Vec<Option<(f64, f64)>> = vec![None; records.len()];
    for rows in by_account.values_mut() {
        rows.sort_by(|&a, &b| {
            let (ra, rb) = (&records[a], &records[b]);
            ra.timestamp.cmp(&rb.timestamp).then_with(|| ra.transaction_id.cmp(&rb.transaction_id))
        });
        for pair in rows.windows(2) {
            let (prev, cur) = (&records[pair[0]], &records[pair[1]]);
            deltas[pair[1]] = Some((
                cur.usd_amount - prev.usd_amount,
                (cur.timestamp - prev.timestamp) as f64,
            ));
        }
    }

    let amounts: Vec<f64> = deltas.iter().flatten().map(|d| d.0).collect();
    let times: Vec<f64> = deltas.iter().flatten().map(|d| d.1).collect();
    let neutral = (median(amounts), median(times));

    for (r, d) in records.iter_mut().zip(deltas) {
        let (da, dt) = d.unwrap_or(neutral);
        r.d_amount = da;
        r.d_time = dt;
    }
}

/// Median with the even-length midpoint convention; 0 for an empty set.
pub fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
