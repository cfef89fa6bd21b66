use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{forward, Batch, DetectorError, DetectorParams, Hyper, Instance, Masks, Metrics, ModelCheckpoint};
use crate::autodiff::{derive_seed, softmax_rows, Adam, Mode, Tape, Tensor};
use crate::graph::{sample_neighborhood, FeatureStats, HeteroGraph, NodeId};

const EVAL_BATCH: usize = 256;

/// Fraud probability and the label it implies at threshold 0.5.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub p_fraud: f64,
    pub label: u8,
}

impl RiskScore {
    pub fn new(p_fraud: f64) -> Self {
        Self { p_fraud, label: (p_fraud >= 0.5) as u8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of every epoch.
    pub epoch_loss: Vec<f64>,
    /// Validation average precision after every epoch (empty without a validation set).
    pub validation_ap: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub train_size: usize,
    pub validation_size: usize,
}

/// Splits per class, moving `fraction` of each class (rounded) into the second part.
pub fn stratified_split(targets: &[(NodeId, u8)], fraction: f64, seed: u64) -> (Vec<(NodeId, u8)>, Vec<(NodeId, u8)>) {
    let mut held = vec![false; targets.len()];
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..targets.len()).filter(|&i| targets[i].1 == class).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, class as u64)));
        let k = (idx.len() as f64 * fraction).round() as usize;
        for &i in &idx[..k] {
            held[i] = true;
        }
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, &t) in targets.iter().enumerate() {
        if held[i] {
            b.push(t)
        } else {
            a.push(t)
        }
    }
    (a, b)
}

pub(crate) fn build_instances(graph: &HeteroGraph, targets: &[NodeId], hyper: &Hyper, stats: &FeatureStats) -> Result<Vec<Instance>, DetectorError> {
    targets
        .iter()
        .map(|&t| {
            let sg = sample_neighborhood(graph, t, &hyper.sampler, hyper.seed)?;
            Ok(Instance::build(graph, &sg, stats, hyper.layers))
        })
        .collect()
}

fn eval_params(params: &DetectorParams, hyper: &Hyper, instances: &[Instance]) -> Result<Vec<f64>, DetectorError> {
    let mut out = Vec::with_capacity(instances.len());
    for chunk in instances.chunks(EVAL_BATCH) {
        let refs: Vec<&Instance> = chunk.iter().collect();
        let batch = Batch::new(&refs, hyper);
        let mut tape = Tape::new();
        let vars: Vec<_> = params.tensors.iter().map(|t| tape.constant(t.clone())).collect();
        let fw = forward(&mut tape, &vars, &batch, hyper, Mode::Eval, Masks::default());
        tape.check_finite()?;
        let probs = softmax_rows(tape.value(fw.logits));
        out.extend((0..probs.rows()).map(|r| probs.get(r, 1)));
    }
    Ok(out)
}

/// Eval-mode fraud probabilities for prepared instances.
pub fn predict_instances(ckpt: &ModelCheckpoint, instances: &[Instance]) -> Result<Vec<f64>, DetectorError> {
    eval_params(&ckpt.params, &ckpt.hyper, instances)
}

/// Fraud probabilities for many targets, each over its own sampled neighborhood.
pub fn score_targets(ckpt: &ModelCheckpoint, graph: &HeteroGraph, targets: &[NodeId]) -> Result<Vec<f64>, DetectorError> {
    let instances = build_instances(graph, targets, &ckpt.hyper, &ckpt.stats)?;
    predict_instances(ckpt, &instances)
}

pub fn predict(ckpt: &ModelCheckpoint, graph: &HeteroGraph, target: NodeId) -> Result<RiskScore, DetectorError> {
    Ok(RiskScore::new(score_targets(ckpt, graph, &[target])?[0]))
}

pub fn evaluate(ckpt: &ModelCheckpoint, graph: &HeteroGraph, targets: &[(NodeId, u8)]) -> Result<Metrics, DetectorError> {
    let ids: Vec<NodeId> = targets.iter().map(|t| t.0).collect();
    let labels: Vec<u8> = targets.iter().map(|t| t.1).collect();
    let scores = score_targets(ckpt, graph, &ids)?;
    Metrics::compute(&scores, &labels)
}

pub fn train(graph: &HeteroGraph, targets: &[(NodeId, u8)], hyper: &Hyper) -> Result<ModelCheckpoint, DetectorError> {
    train_with_report(graph, targets, hyper).map(|(c, _)| c)
}

/// Minibatch training with class-weighted cross-entropy; keeps the epoch with
/// the best validation average precision.
pub fn train_with_report(graph: &HeteroGraph, targets: &[(NodeId, u8)], hyper: &Hyper) -> Result<(ModelCheckpoint, TrainReport), DetectorError> {
    hyper.validate()?;
    let Some(&(_, first)) = targets.first() else {
        return Err(DetectorError::Config("no training targets".into()));
    };
    if targets.iter().all(|t| t.1 == first) {
        return Err(DetectorError::SingleClass(first));
    }
    let seed = hyper.seed;
    let (train_set, val_set) = stratified_split(targets, hyper.validation_fraction, derive_seed(seed, 1));
    let val_set = if val_set.iter().any(|t| t.1 == 1) && val_set.iter().any(|t| t.1 == 0) { val_set } else { Vec::new() };
    if train_set.iter().all(|t| t.1 == first) {
        return Err(DetectorError::SingleClass(first));
    }

    let stats = FeatureStats::fit(train_set.iter().map(|t| &graph.node(t.0).features));
    let ids = |s: &[(NodeId, u8)]| s.iter().map(|t| t.0).collect::<Vec<_>>();
    let train_inst = build_instances(graph, &ids(&train_set), hyper, &stats)?;
    let val_inst = build_instances(graph, &ids(&val_set), hyper, &stats)?;
    let labels: Vec<usize> = train_set.iter().map(|t| t.1 as usize).collect();
    let val_labels: Vec<u8> = val_set.iter().map(|t| t.1).collect();

    let n = labels.len() as f64;
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let class_weight = [(n / (2.0 * (n - n_pos))).powf(hyper.class_weight_factor), (n / (2.0 * n_pos)).powf(hyper.class_weight_factor)];

    let mut params = DetectorParams::init(hyper, derive_seed(seed, 2));
    let mut adam = Adam::new(hyper.learning_rate);
    let mut best = ((f64::NEG_INFINITY, f64::NEG_INFINITY), 0, params.clone());
    let mut report = TrainReport {
        epoch_loss: Vec::new(),
        validation_ap: Vec::new(),
        best_epoch: 0,
        train_size: train_set.len(),
        validation_size: val_set.len(),
    };
    let mut order: Vec<usize> = (0..train_inst.len()).collect();
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 1000 + epoch as u64)));
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(hyper.batch_size).enumerate() {
            let refs: Vec<&Instance> = chunk.iter().map(|&i| &train_inst[i]).collect();
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let w: Vec<f64> = y.iter().map(|&c| class_weight[c]).collect();
            let batch = Batch::new(&refs, hyper);
            let mut tape = Tape::seeded(derive_seed(seed, ((epoch as u64) << 32) | b as u64));
            let vars: Vec<_> = params.tensors.iter().map(|t| tape.leaf(t.clone(), true)).collect();
            let fw = forward(&mut tape, &vars, &batch, hyper, Mode::Train, Masks::default());
            let loss = tape.cross_entropy(fw.logits, &y, Some(&w));
            let mut grads = tape.backward(loss)?;
            let g: Vec<Tensor> = vars
                .iter()
                .zip(&params.tensors)
                .map(|(&v, t)| grads.take(v).unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols())))
                .collect();
            adam.step(&mut params.tensors, &g)?;
            loss_sum += tape.value(loss).item() * chunk.len() as f64;
        }
        report.epoch_loss.push(loss_sum / train_inst.len() as f64);
        // Ties in validation AP, common once it saturates, go to the lower validation loss.
        let score = if val_inst.is_empty() {
            (epoch as f64, 0.0)
        } else {
            let s = eval_params(&params, hyper, &val_inst)?;
            let m = Metrics::compute(&s, &val_labels)?;
            report.validation_ap.push(m.average_precision);
            (m.average_precision, -m.loss)
        };
        if score > best.0 {
            best = (score, epoch, params.clone());
        }
    }
    report.best_epoch = best.1;
    let ckpt = ModelCheckpoint { hyper: hyper.clone(), params: best.2, stats, seed };
    Ok((ckpt, report))
}
