mod common;

use common::oracles::{pairwise_auc, random_scored_set, rank_ap};
use fraudlens::detector::{average_precision, roc_auc, DetectorError, Metrics};

#[test]
fn auc_and_ap_match_brute_force() {
    for seed in 0..1000 {
        let (s, l) = random_scored_set(seed);
        let auc = roc_auc(&s, &l).unwrap();
        let ap = average_precision(&s, &l).unwrap();
        assert!((auc - pairwise_auc(&s, &l)).abs() <= 1e-12, "seed {seed}: auc {auc}");
        assert!((ap - rank_ap(&s, &l)).abs() <= 1e-12, "seed {seed}: ap {ap}");
    }
}

#[test]
fn invariant_under_monotone_rescoring() {
    for seed in 0..100 {
        let (s, l) = random_scored_set(seed);
        let warped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        assert_eq!(roc_auc(&s, &l).unwrap(), roc_auc(&warped, &l).unwrap());
        assert_eq!(average_precision(&s, &l).unwrap(), average_precision(&warped, &l).unwrap());
    }
}

#[test]
fn one_class_is_an_error() {
    assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(DetectorError::Metric(_))));
    assert!(matches!(average_precision(&[0.1, 0.2], &[0, 0]), Err(DetectorError::Metric(_))));
}

#[test]
fn accuracy_and_loss_use_the_half_threshold() {
    let m = Metrics::compute(&[0.9, 0.5, 0.2, 0.4], &[1, 0, 0, 1]).unwrap();
    assert_eq!(m.accuracy, 0.5);
    let expected = -(0.9f64.ln() + 0.5f64.ln() + 0.8f64.ln() + 0.4f64.ln()) / 4.0;
    assert!((m.loss - expected).abs() < 1e-12);
}
