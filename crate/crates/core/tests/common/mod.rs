#![allow(dead_code)]

use fraudlens::autodiff::{Tape, Tensor, Var};
use fraudlens::data::{engineer_deltas, TransactionRecord, TransactionType};
use fraudlens::detector::{Hyper, Instance};
use fraudlens::graph::{build_graph, sample_neighborhood, FeatureStats, HeteroGraph, NodeId, SamplerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Relative error used by the gradient checks: `|a - n| / max(|a|, |n|, floor)`.
pub const REL_FLOOR: f64 = 1e-3;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients of a scalar function with central differences.
///
/// `f` receives a fresh tape and the leaves for `inputs`, and returns the
/// scalar output. Returns the largest relative error over all input entries.
pub fn grad_check(inputs: &[Tensor], eps: f64, f: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let eval = |xs: &[Tensor]| {
        let mut tape = Tape::seeded(99);
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
        let out = f(&mut tape, &vars);
        (tape, vars, out)
    };
    let (tape, vars, out) = eval(inputs);
    let grads = tape.backward(out).expect("backward");
    let mut worst: f64 = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]).cloned().unwrap_or_else(|| Tensor::zeros(x.rows(), x.cols()));
        for k in 0..x.len() {
            let mut shifted = inputs.to_vec();
            shifted[i].data_mut()[k] = x.data()[k] + eps;
            let (t, _, o) = eval(&shifted);
            let up = t.value(o).item();
            shifted[i].data_mut()[k] = x.data()[k] - eps;
            let (t, _, o) = eval(&shifted);
            let down = t.value(o).item();
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(rel_err(analytic.data()[k], numeric));
        }
    }
    worst
}

pub struct Row<'a> {
    pub id: &'a str,
    pub sender: Option<&'a str>,
    pub sender_account: Option<&'a str>,
    pub sender_country: Option<&'a str>,
    pub bene: Option<&'a str>,
    pub bene_account: Option<&'a str>,
    pub bene_country: Option<&'a str>,
    pub amount: f64,
    pub timestamp: i64,
    pub label: u8,
    pub kind: TransactionType,
}

impl Default for Row<'_> {
    fn default() -> Self {
        Self {
            id: "T",
            sender: Some("CLIENT-1"),
            sender_account: Some("ACCOUNT-1"),
            sender_country: Some("USA"),
            bene: Some("COMPANY-1"),
            bene_account: Some("ACCOUNT-2"),
            bene_country: Some("USA"),
            amount: 100.0,
            timestamp: 0,
            label: 0,
            kind: TransactionType::MakePayment,
        }
    }
}

pub fn record(r: Row<'_>) -> TransactionRecord {
    let s = |v: Option<&str>| v.map(str::to_string);
    TransactionRecord {
        transaction_id: r.id.to_string(),
        sender_id: s(r.sender),
        sender_account: s(r.sender_account),
        sender_country: s(r.sender_country),
        bene_id: s(r.bene),
        bene_account: s(r.bene_account),
        bene_country: s(r.bene_country),
        usd_amount: r.amount,
        transaction_type: r.kind,
        timestamp: r.timestamp,
        label: r.label,
        d_amount: 0.0,
        d_time: 0.0,
    }
}

/// Random payment table over small pools of parties so that neighborhoods overlap.
pub fn random_records(seed: u64, n: usize) -> Vec<TransactionRecord> {
    let mut g = rng(seed);
    let countries = ["USA", "UK", "GABON", "TAIWAN"];
    let mut rows: Vec<TransactionRecord> = (0..n)
        .map(|i| {
            let client = g.gen_range(0..(n / 4).max(2));
            let company = g.gen_range(0..(n / 6).max(2));
            let kind = TransactionType::ALL[g.gen_range(0..TransactionType::ALL.len())];
            let mut rec = record(Row {
                id: "",
                amount: (g.gen_range(0.0..8.0f64)).exp(),
                timestamp: g.gen_range(0..1_000_000),
                label: g.gen_bool(0.2) as u8,
                kind,
                ..Row::default()
            });
            rec.transaction_id = format!("TX-{i}");
            rec.sender_id = Some(format!("CLIENT-{client}"));
            rec.sender_account = Some(format!("ACCOUNT-{client}-{}", g.gen_range(0..2)));
            rec.sender_country = Some(countries[g.gen_range(0..countries.len())].to_string());
            rec.bene_id = g.gen_bool(0.8).then(|| format!("COMPANY-{company}"));
            rec.bene_account = rec.bene_id.as_ref().map(|_| format!("ACCOUNT-C{company}"));
            rec.bene_country = g.gen_bool(0.7).then(|| countries[g.gen_range(0..countries.len())].to_string());
            rec
        })
        .collect();
    engineer_deltas(&mut rows);
    rows
}

pub fn random_graph(seed: u64, n: usize) -> HeteroGraph {
    build_graph(&random_records(seed, n)).expect("valid records")
}

pub fn stats_for(graph: &HeteroGraph) -> FeatureStats {
    let feats: Vec<[f64; 3]> = graph.transaction_nodes().map(|t| graph.node(t).features).collect();
    FeatureStats::fit(feats.iter())
}

pub fn instance(graph: &HeteroGraph, target: NodeId, sampler: SamplerConfig, hyper: &Hyper) -> Instance {
    let sub = sample_neighborhood(graph, target, &sampler, hyper.seed).expect("transaction target");
    Instance::build(graph, &sub, &stats_for(graph), hyper.layers)
}

/// Small but complete architecture for fast tests.
pub fn tiny_hyper() -> Hyper {
    Hyper { layers: 2, heads: 2, width: 8, hidden: [6, 4], epochs: 3, batch_size: 8, ..Hyper::default() }
}
pub mod gradcases;
pub mod oracles;

/// Largest `|Σ attention − 1|` over every (layer, destination, head) of one eval forward.
/// Initial parameters plus uniform noise of `scale`, so zero-initialized
/// attention vectors and embeddings are no longer zero.
pub fn perturbed_params(hyper: &Hyper, seed: u64, scale: f64) -> fraudlens::detector::DetectorParams {
    let mut params = fraudlens::detector::DetectorParams::init(hyper, seed);
    let mut g = rng(seed ^ 0x5eed);
    for t in &mut params.tensors {
        for v in t.data_mut() {
            *v += g.gen_range(-scale..scale);
        }
    }
    params
}

/// Largest deviation from 1 of any per-destination, per-head attention sum,
/// under perturbed parameters.
pub fn attention_deviation(instances: &[&Instance], hyper: &Hyper, seed: u64) -> f64 {
    use fraudlens::autodiff::Mode;
    use fraudlens::detector::{forward, Batch, Masks};
    let batch = Batch::new(instances, hyper);
    let params = perturbed_params(hyper, seed, 0.5);
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.tensors.iter().map(|t| tape.leaf(t.clone(), false)).collect();
    let fw = forward(&mut tape, &vars, &batch, hyper, Mode::Eval, Masks::default());
    let layers = (0..hyper.layers).map(|l| batch.message_targets(l)).filter(|d| !d.is_empty());
    let mut worst: f64 = 0.0;
    for (dst, &att) in layers.zip(&fw.attention) {
        let att = tape.value(att);
        assert_eq!(att.shape(), (dst.len(), hyper.heads));
        let mut sums = std::collections::HashMap::<usize, Vec<f64>>::new();
        for (r, &d) in dst.iter().enumerate() {
            let s = sums.entry(d).or_insert_with(|| vec![0.0; hyper.heads]);
            for (h, v) in s.iter_mut().enumerate() {
                *v += att.get(r, h);
            }
        }
        for v in sums.values().flatten() {
            worst = worst.max((v - 1.0).abs());
        }
    }
    worst
}

/// Small trained detector over a random graph.
pub fn small_model(seed: u64) -> (HeteroGraph, fraudlens::detector::ModelCheckpoint) {
    let graph = random_graph(seed, 120);
    let targets = graph.labelled_targets();
    let hyper = Hyper { epochs: 4, ..tiny_hyper() };
    let ckpt = fraudlens::detector::train(&graph, &targets, &hyper).expect("training");
    (graph, ckpt)
}

/// Tabulated game on `n` items indexed by presence bitmask, values in [0, 1]
/// with pairwise interactions.
pub fn random_game(seed: u64, n: usize) -> Vec<f64> {
    let mut g = rng(seed);
    let single: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
    let pair: Vec<f64> = (0..n * n).map(|_| g.gen_range(-0.6..0.6)).collect();
    let bias = g.gen_range(-1.0..1.0);
    (0..1usize << n)
        .map(|b| {
            let on = |i: usize| b >> i & 1 == 1;
            let mut z = bias;
            for i in 0..n {
                if on(i) {
                    z += single[i];
                    for j in i + 1..n {
                        if on(j) {
                            z += pair[i * n + j];
                        }
                    }
                }
            }
            1.0 / (1.0 + (-z).exp())
        })
        .collect()
}

pub fn bits(present: &[bool]) -> usize {
    present.iter().enumerate().filter(|(_, &p)| p).fold(0, |m, (i, _)| m | 1 << i)
}
