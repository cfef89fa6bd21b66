use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Case, ExplainError};
use crate::autodiff::{sigmoid, Adam, Mode, Tape, Tensor, Var};
use crate::detector::{forward, Batch, Masks, ModelCheckpoint, RiskScore};
use crate::graph::{HeteroGraph, NodeId, FEATURE_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnExplainerConfig {
    pub epochs: usize,
    pub lr: f64,
    pub size_coeff: f64,
    pub entropy_coeff: f64,
    /// Starting logit of every mask entry; large values start from the identity mask.
    pub init_logit: f64,
    /// Seeds the small jitter added to the starting logits.
    pub seed: u64,
}

impl Default for GnnExplainerConfig {
    fn default() -> Self {
        Self { epochs: 100, lr: 0.01, size_coeff: 0.005, entropy_coeff: 0.1, init_logit: 1.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskExplanation {
    /// One weight in (0, 1) per subgraph edge, in subgraph edge order.
    pub edge_weights: Vec<f64>,
    pub feature_weights: [f64; FEATURE_DIM],
    /// Objective before each update, then after the last one.
    pub objective: Vec<f64>,
    /// Unmasked prediction whose label the masks explain.
    pub prediction: RiskScore,
    /// Fraud probability under the final masks.
    pub masked_p_fraud: f64,
}

const JITTER: f64 = 0.05;

pub fn gnn_explain(ckpt: &ModelCheckpoint, graph: &HeteroGraph, target: NodeId, cfg: &GnnExplainerConfig) -> Result<MaskExplanation, ExplainError> {
    let case = Case::new(ckpt, graph, target)?;
    gnn_explain_case(ckpt, &case, cfg)
}

fn entropy_sum(tape: &mut Tape, m: Var) -> Var {
    let (r, c) = tape.value(m).shape();
    let ones = tape.constant(Tensor::filled(r, c, 1.0));
    let rest = tape.sub(ones, m);
    let lm = tape.log(m);
    let lr = tape.log(rest);
    let a = tape.mul(m, lm);
    let b = tape.mul(rest, lr);
    let s = tape.add(a, b);
    let s = tape.sum(s);
    tape.scale(s, -1.0)
}

/// Learns sigmoid edge and feature masks that keep the model's predicted label
/// likely while staying small and near-binary.
pub fn gnn_explain_case(ckpt: &ModelCheckpoint, case: &Case, cfg: &GnnExplainerConfig) -> Result<MaskExplanation, ExplainError> {
    if !(cfg.lr > 0.0) || cfg.size_coeff < 0.0 || cfg.entropy_coeff < 0.0 || !cfg.init_logit.is_finite() {
        return Err(ExplainError::Config("lr must be positive and coefficients non-negative".into()));
    }
    let prediction = case.predict(ckpt)?;
    let label = prediction.label as usize;
    let hyper = &ckpt.hyper;
    let batch = Batch::new(&[&case.instance], hyper);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jitter = |n: usize| -> Vec<f64> { (0..n).map(|_| cfg.init_logit + rng.gen_range(-JITTER..JITTER)).collect() };
    let slots = case.instance.slots;
    let mut logits = [Tensor::column(&jitter(slots)), Tensor::row(&jitter(FEATURE_DIM))];
    let mut adam = Adam::new(cfg.lr);
    let mut objective = Vec::with_capacity(cfg.epochs + 1);
    let mut masked = prediction.p_fraud;
    for epoch in 0..=cfg.epochs {
        let mut tape = Tape::new();
        let params: Vec<Var> = ckpt.params.tensors.iter().map(|t| tape.constant(t.clone())).collect();
        let el = tape.leaf(logits[0].clone(), true);
        let fl = tape.leaf(logits[1].clone(), true);
        let em = tape.sigmoid(el);
        let fm = tape.sigmoid(fl);
        let fw = forward(&mut tape, &params, &batch, hyper, Mode::Eval, Masks { edge: Some(em), feature: Some(fm) });
        let ce = tape.cross_entropy(fw.logits, &[label], None);
        let size_e = tape.sum(em);
        let size_f = tape.sum(fm);
        let size = tape.add(size_e, size_f);
        let size = tape.scale(size, cfg.size_coeff);
        let ent_e = entropy_sum(&mut tape, em);
        let ent_f = entropy_sum(&mut tape, fm);
        let ent = tape.add(ent_e, ent_f);
        let ent = tape.scale(ent, cfg.entropy_coeff);
        let reg = tape.add(size, ent);
        let loss = tape.add(ce, reg);
        tape.check_finite().map_err(crate::detector::DetectorError::from)?;
        objective.push(tape.value(loss).item());
        let p = crate::autodiff::softmax_rows(tape.value(fw.logits));
        masked = p.get(0, 1);
        if epoch == cfg.epochs {
            break;
        }
        let mut grads = tape.backward(loss).map_err(crate::detector::DetectorError::from)?;
        let g = [grads.take(el).unwrap(), grads.take(fl).unwrap()];
        adam.step(&mut logits, &g).map_err(crate::detector::DetectorError::from)?;
    }
    Ok(MaskExplanation {
        edge_weights: logits[0].data().iter().map(|&v| sigmoid(v)).collect(),
        feature_weights: std::array::from_fn(|k| sigmoid(logits[1].get(0, k))),
        objective,
        prediction,
        masked_p_fraud: masked,
    })
}
