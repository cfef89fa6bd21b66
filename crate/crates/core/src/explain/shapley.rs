use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::autodiff::derive_seed;

/// Largest item count the exact oracle enumerates.
pub const MAX_ORACLE_ITEMS: usize = 10;

/// Iterations evaluated per scorer call.
const CHUNK: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    /// Average over all item orderings.
    Features,
    /// Weighted sum over all coalitions.
    Edges,
}

/// Monte Carlo estimate per item.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub phi: Vec<f64>,
    pub std_error: Vec<f64>,
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn mask_of(bits: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| bits >> i & 1 == 1).collect()
}

/// Exact Shapley values of the game `scorer(present)`, where `present[i]` says
/// whether item `i` is in the coalition.
pub fn exact_shapley(n: usize, mode: OracleMode, mut scorer: impl FnMut(&[bool]) -> f64) -> Result<Vec<f64>, ExplainError> {
    if n > MAX_ORACLE_ITEMS {
        return Err(ExplainError::TooManyItems { items: n, max: MAX_ORACLE_ITEMS });
    }
    let values: Vec<f64> = (0..1usize << n).map(|b| scorer(&mask_of(b, n))).collect();
    let mut phi = vec![0.0; n];
    match mode {
        OracleMode::Features => {
            let mut perm: Vec<usize> = (0..n).collect();
            let mut count = 0u64;
            permute(&mut perm, 0, &mut |p| {
                let mut s = 0usize;
                for &i in p {
                    phi[i] += values[s | 1 << i] - values[s];
                    s |= 1 << i;
                }
                count += 1;
            });
            phi.iter_mut().for_each(|v| *v /= count as f64);
        }
        OracleMode::Edges => {
            let fact: Vec<f64> = (0..=n).scan(1.0, |acc, k| {
                if k > 0 {
                    *acc *= k as f64;
                }
                Some(*acc)
            }).collect();
            for (i, p) in phi.iter_mut().enumerate() {
                for s in 0..1usize << n {
                    if s >> i & 1 == 1 {
                        continue;
                    }
                    let size = s.count_ones() as usize;
                    let w = fact[size] * fact[n - size - 1] / fact[n];
                    *p += w * (values[s | 1 << i] - values[s]);
                }
            }
        }
    }
    Ok(phi)
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// One evaluation request of the feature estimator: items flagged `from_x`
/// take the explained instance's value, the rest come from `background`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureQuery {
    pub background: usize,
    pub from_x: Vec<bool>,
}

/// Permutation estimator: each iteration draws a background and an ordering
/// and scores every prefix, so item `j`'s sample is `f(x₊ⱼ) − f(x₋ⱼ)`.
///
/// `eval` scores a batch of queries; `n_backgrounds` must be at least 1.
pub fn permutation_shapley(
    n_items: usize,
    n_backgrounds: usize,
    m: usize,
    seed: u64,
    mut eval: impl FnMut(&[FeatureQuery]) -> Vec<f64>,
) -> Estimate {
    assert!(m >= 1 && n_backgrounds >= 1, "contract violation: need M >= 1 and a background");
    let mut samples = vec![Vec::with_capacity(m); n_items];
    for start in (0..m).step_by(CHUNK) {
        let its = start..(start + CHUNK).min(m);
        let mut orders = Vec::with_capacity(its.len());
        let mut queries = Vec::with_capacity(its.len() * (n_items + 1));
        for it in its {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, it as u64));
            let background = rng.gen_range(0..n_backgrounds);
            let mut order: Vec<usize> = (0..n_items).collect();
            order.shuffle(&mut rng);
            let mut from_x = vec![false; n_items];
            queries.push(FeatureQuery { background, from_x: from_x.clone() });
            for &j in &order {
                from_x[j] = true;
                queries.push(FeatureQuery { background, from_x: from_x.clone() });
            }
            orders.push(order);
        }
        let values = eval(&queries);
        assert_eq!(values.len(), queries.len(), "contract violation: scorer returned wrong count");
        for (o, order) in orders.iter().enumerate() {
            let v = &values[o * (n_items + 1)..(o + 1) * (n_items + 1)];
            for (k, &j) in order.iter().enumerate() {
                samples[j].push(v[k + 1] - v[k]);
            }
        }
    }
    let (phi, std_error) = samples.iter().map(|s| mean_and_se(s)).unzip();
    Estimate { phi, std_error }
}

/// Missingness estimator: for item `x`, each iteration draws a coalition of
/// the other items by cutting a random ordering at a uniform position and
/// records `f(coalition) − f(coalition ∪ {x})`. Items flagged in `skip` are
/// known not to matter and get exactly 0 without evaluation.
///
/// `eval` scores a batch of coalitions (`true` = present).
pub fn missingness_shapley(
    n_items: usize,
    m: usize,
    seed: u64,
    skip: &[bool],
    mut eval: impl FnMut(&[Vec<bool>]) -> Vec<f64>,
) -> Estimate {
    assert!(m >= 1, "contract violation: need M >= 1");
    assert_eq!(skip.len(), n_items, "contract violation: skip flags");
    let mut phi = vec![0.0; n_items];
    let mut std_error = vec![0.0; n_items];
    for x in 0..n_items {
        if skip[x] {
            continue;
        }
        let stream = derive_seed(seed, x as u64 + 1);
        let mut samples = Vec::with_capacity(m);
        for start in (0..m).step_by(CHUNK) {
            let its = start..(start + CHUNK).min(m);
            let mut queries = Vec::with_capacity(2 * its.len());
            for it in its {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(stream, it as u64));
                let mut others: Vec<usize> = (0..n_items).filter(|&j| j != x).collect();
                others.shuffle(&mut rng);
                let cut = rng.gen_range(0..n_items);
                let mut present = vec![false; n_items];
                for &j in &others[..cut] {
                    present[j] = true;
                }
                queries.push(present.clone());
                present[x] = true;
                queries.push(present);
            }
            let values = eval(&queries);
            assert_eq!(values.len(), queries.len(), "contract violation: scorer returned wrong count");
            samples.extend(values.chunks_exact(2).map(|p| p[0] - p[1]));
        }
        (phi[x], std_error[x]) = mean_and_se(&samples);
    }
    Estimate { phi, std_error }
}
