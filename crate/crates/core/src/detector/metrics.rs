use serde::{Deserialize, Serialize};

use super::DetectorError;

/// Held-out evaluation summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub loss: f64,
    pub average_precision: f64,
    pub roc_auc: f64,
}

impl Metrics {
    /// `scores` are fraud probabilities; accuracy thresholds them at 0.5.
    pub fn compute(scores: &[f64], labels: &[u8]) -> Result<Self, DetectorError> {
        assert_eq!(scores.len(), labels.len(), "contract violation: scores vs labels");
        let n = scores.len() as f64;
        let correct = scores.iter().zip(labels).filter(|(&s, &y)| (s >= 0.5) == (y == 1)).count();
        let loss = scores
            .iter()
            .zip(labels)
            .map(|(&s, &y)| {
                let p = if y == 1 { s } else { 1.0 - s };
                -p.max(f64::MIN_POSITIVE).ln()
            })
            .sum::<f64>()
            / n;
        Ok(Metrics {
            accuracy: correct as f64 / n,
            loss,
            average_precision: average_precision(scores, labels)?,
            roc_auc: roc_auc(scores, labels)?,
        })
    }
}

fn order_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Mann–Whitney AUC with tied pairs counted one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, DetectorError> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(DetectorError::Metric("roc_auc"));
    }
    // Count, in integers, the pairs won by a positive plus half of the tied ones.
    let idx = order_desc(scores);
    let (mut wins2, mut neg_above) = (0u64, 0u64);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut p, mut q) = (0u64, 0u64);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] == 1 {
                p += 1
            } else {
                q += 1
            }
            j += 1;
        }
        // Positives in this tie block beat every negative strictly below.
        let below = neg as u64 - neg_above - q;
        wins2 += 2 * p * below + p * q;
        neg_above += q;
        i = j;
    }
    Ok(wins2 as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Mean over positives of the precision among all items scored at least as high.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64, DetectorError> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(DetectorError::Metric("average_precision"));
    }
    let idx = order_desc(scores);
    let (mut seen, mut tp, mut sum) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let mut p = 0;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            p += (labels[idx[j]] == 1) as usize;
            j += 1;
        }
        seen += j - i;
        tp += p;
        sum += p as f64 * (tp as f64 / seen as f64);
        i = j;
    }
    Ok(sum / pos as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_example() {
        let s = [0.9, 0.8, 0.4, 0.3];
        let y = [1, 0, 1, 0];
        assert_eq!(roc_auc(&s, &y).unwrap(), 0.75);
        assert!((average_precision(&s, &y).unwrap() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_ranking() {
        let s = [0.1, 0.9, 0.8, 0.2];
        let y = [0, 1, 1, 0];
        assert_eq!(roc_auc(&s, &y).unwrap(), 1.0);
        assert_eq!(average_precision(&s, &y).unwrap(), 1.0);
    }

    #[test]
    fn all_tied_scores() {
        let s = [0.5; 4];
        let y = [1, 0, 0, 1];
        assert_eq!(roc_auc(&s, &y).unwrap(), 0.5);
        assert_eq!(average_precision(&s, &y).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(average_precision(&[0.1, 0.2], &[0, 0]).is_err());
        let m = Metrics::compute(&[0.7, 0.2], &[1, 0]).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!((m.loss - (-(0.7f64.ln()) - 0.8f64.ln()) / 2.0).abs() < 1e-15);
    }
}
