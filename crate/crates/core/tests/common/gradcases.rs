//! Randomized instances for finite-difference gradient checks.

use std::rc::Rc;

use fraudlens::autodiff::{Mode, Segments, Tape, Tensor, Var};
use fraudlens::detector::{forward, Batch, DetectorParams, Masks};
use fraudlens::graph::SamplerConfig;
use rand::Rng;

use super::{instance, random_graph, random_tensor, rng, tiny_hyper};

pub type Scalar = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;

pub struct GradCase {
    pub name: &'static str,
    pub inputs: Vec<Tensor>,
    pub f: Scalar,
}

/// Reduces any output to a scalar through fixed random weights so every entry matters.
fn project(tape: &mut Tape, y: Var, seed: u64) -> Var {
    let (r, c) = tape.value(y).shape();
    let w = tape.constant(random_tensor(&mut rng(seed), r, c));
    let p = tape.mul(y, w);
    tape.sum(p)
}

fn case(name: &'static str, inputs: Vec<Tensor>, f: impl Fn(&mut Tape, &[Var]) -> Var + 'static) -> GradCase {
    GradCase { name, inputs, f: Box::new(f) }
}

fn positive(t: Tensor) -> Tensor {
    t.map(|v| v.abs() + 0.5)
}

/// One case per primitive (and per broadcast form), seeded by `seed`.
pub fn primitive_cases(seed: u64) -> Vec<GradCase> {
    let mut g = rng(seed);
    let mut t = |r: usize, c: usize| random_tensor(&mut g, r, c);
    let seg = Rc::new(Segments::new(vec![0, 2, 0, 2, 2, 1], 4));
    let seg2 = seg.clone();
    let gather: Rc<[usize]> = Rc::from(vec![2, 0, 2, 1, 2]);
    vec![
        case("matmul", vec![t(3, 4), t(4, 2)], |tp, v| {
            let y = tp.matmul(v[0], v[1]);
            project(tp, y, 1)
        }),
        case("add", vec![t(3, 4), t(3, 4)], |tp, v| {
            let y = tp.add(v[0], v[1]);
            project(tp, y, 2)
        }),
        case("add_row_broadcast", vec![t(3, 4), t(1, 4)], |tp, v| {
            let y = tp.add(v[0], v[1]);
            project(tp, y, 3)
        }),
        case("sub", vec![t(3, 4), t(3, 4)], |tp, v| {
            let y = tp.sub(v[0], v[1]);
            project(tp, y, 4)
        }),
        case("mul", vec![t(3, 4), t(3, 4)], |tp, v| {
            let y = tp.mul(v[0], v[1]);
            project(tp, y, 5)
        }),
        case("mul_column_broadcast", vec![t(3, 4), t(3, 1)], |tp, v| {
            let y = tp.mul(v[0], v[1]);
            project(tp, y, 6)
        }),
        case("mul_scalar_broadcast", vec![t(3, 4), t(1, 1)], |tp, v| {
            let y = tp.mul(v[0], v[1]);
            project(tp, y, 7)
        }),
        case("scale", vec![t(2, 3)], |tp, v| {
            let y = tp.scale(v[0], -1.7);
            project(tp, y, 8)
        }),
        case("concat_rows", vec![t(2, 3), t(1, 3)], |tp, v| {
            let y = tp.concat_rows(&[v[0], v[1]]);
            project(tp, y, 9)
        }),
        case("concat_cols", vec![t(2, 3), t(2, 1)], |tp, v| {
            let y = tp.concat_cols(&[v[0], v[1]]);
            project(tp, y, 10)
        }),
        case("gather_rows", vec![t(3, 2)], move |tp, v| {
            let y = tp.gather_rows(v[0], gather.clone());
            project(tp, y, 11)
        }),
        case("mean_rows", vec![t(4, 3)], |tp, v| {
            let y = tp.mean_rows(v[0]);
            project(tp, y, 12)
        }),
        case("segment_mean", vec![t(6, 3)], move |tp, v| {
            let y = tp.segment_mean(v[0], seg.clone());
            project(tp, y, 13)
        }),
        case("softmax", vec![t(3, 4)], |tp, v| {
            let y = tp.softmax(v[0]);
            project(tp, y, 14)
        }),
        case("segment_softmax", vec![t(6, 2)], move |tp, v| {
            let y = tp.segment_softmax(v[0], seg2.clone());
            project(tp, y, 15)
        }),
        case("relu", vec![t(3, 4)], |tp, v| {
            let y = tp.relu(v[0]);
            project(tp, y, 16)
        }),
        case("tanh", vec![t(3, 4)], |tp, v| {
            let y = tp.tanh(v[0]);
            project(tp, y, 17)
        }),
        case("sigmoid", vec![t(3, 4)], |tp, v| {
            let y = tp.sigmoid(v[0]);
            project(tp, y, 18)
        }),
        case("log", vec![positive(t(3, 4))], |tp, v| {
            let y = tp.log(v[0]);
            project(tp, y, 19)
        }),
        case("recip", vec![positive(t(3, 4))], |tp, v| {
            let y = tp.recip(v[0]);
            project(tp, y, 31)
        }),
        case("layer_norm", vec![t(3, 5)], |tp, v| {
            let y = tp.layer_norm(v[0]);
            project(tp, y, 20)
        }),
        case("dropout", vec![t(4, 5)], |tp, v| {
            let y = tp.dropout(v[0], 0.3, Mode::Train);
            project(tp, y, 21)
        }),
        case("cross_entropy", vec![t(4, 2)], |tp, v| tp.cross_entropy(v[0], &[0, 1, 1, 0], None)),
        case("weighted_cross_entropy", vec![t(4, 3)], |tp, v| tp.cross_entropy(v[0], &[2, 1, 0, 2], Some(&[0.5, 2.0, 1.0, 3.0]))),
        case("sum", vec![t(3, 2)], |tp, v| tp.sum(v[0])),
    ]
}

/// Weighted training loss of the full detector on a handful of targets from a
/// graph whose sampled neighborhoods have at most 8 nodes. Inputs are every
/// model parameter followed by an edge mask and a feature mask.
pub fn detector_loss_case(seed: u64) -> GradCase {
    let graph = random_graph(seed, 24);
    let hyper = tiny_hyper();
    let sampler = SamplerConfig { depth: 3, width: 3, cap: 8 };
    let targets: Vec<_> = graph.transaction_nodes().take(3).collect();
    let instances: Vec<_> = targets.iter().map(|&t| instance(&graph, t, sampler, &hyper)).collect();
    assert!(instances.iter().all(|i| i.len() <= 8 && !i.messages.is_empty()));
    let refs: Vec<_> = instances.iter().collect();
    let batch = Batch::new(&refs, &hyper);
    let slots: usize = instances.iter().map(|i| i.slots).sum();
    let params = DetectorParams::init(&hyper, seed);
    let n_params = params.tensors.len();
    let mut g = rng(seed ^ 0x5eed);
    let mut inputs = params.tensors.clone();
    // Perturb away from the zero-initialized biases so no ReLU sits on its kink.
    for p in &mut inputs {
        for v in p.data_mut() {
            *v += g.gen_range(-0.2..0.2);
        }
    }
    inputs.push(Tensor::new(slots, 1, (0..slots).map(|_| g.gen_range(0.2..0.9)).collect()));
    inputs.push(Tensor::new(1, 3, (0..3).map(|_| g.gen_range(0.2..0.9)).collect()));
    let labels = [1usize, 0, 1];
    case("detector_loss", inputs, move |tp, v| {
        let masks = Masks { edge: Some(v[n_params]), feature: Some(v[n_params + 1]) };
        let fw = forward(tp, &v[..n_params], &batch, &hyper, Mode::Train, masks);
        tp.cross_entropy(fw.logits, &labels[..batch.targets()], Some(&[2.0, 0.7, 2.0][..batch.targets()]))
    })
}
