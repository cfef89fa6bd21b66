//! Brute-force reference implementations.

use rand::Rng;

use super::rng;

/// Fraction of (positive, negative) pairs ranked correctly, ties counting one half.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut good, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    good += 1.0;
                } else if si == sj {
                    good += 0.5;
                }
            }
        }
    }
    good / pairs
}

/// Mean over positives of the precision among all items scored at least as high.
pub fn rank_ap(scores: &[f64], labels: &[u8]) -> f64 {
    let positives: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(&s, _)| s).collect();
    let mut total = 0.0;
    for &s in &positives {
        let above = scores.iter().filter(|&&x| x >= s).count() as f64;
        let hits = positives.iter().filter(|&&x| x >= s).count() as f64;
        total += hits / above;
    }
    total / positives.len() as f64
}

/// Random score/label set with both classes and deliberate ties.
pub fn random_scored_set(seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut g = rng(seed);
    let n = g.gen_range(2..=50);
    let levels = g.gen_range(2..=20);
    let mut scores: Vec<f64> = (0..n).map(|_| g.gen_range(0..levels) as f64 / levels as f64).collect();
    if g.gen_bool(0.5) {
        scores = (0..n).map(|_| g.gen::<f64>()).collect();
    }
    let rate = g.gen_range(0.05..0.95);
    let mut labels: Vec<u8> = (0..n).map(|_| g.gen_bool(rate) as u8).collect();
    labels[0] = 1;
    labels[1] = 0;
    (scores, labels)
}
