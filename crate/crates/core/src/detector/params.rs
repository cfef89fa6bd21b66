use super::Hyper;
use crate::autodiff::{derive_seed, xavier_init, Tensor};
use crate::graph::{EdgeType, NodeType, FEATURE_DIM};

const CONV_SLOTS: usize = 7;
const HEAD_SLOTS: usize = 10;

/// Positions of every parameter tensor in the flat list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub layers: usize,
}

impl ParamLayout {
    pub fn new(hyper: &Hyper) -> Self {
        Self { layers: hyper.layers }
    }

    pub const NODE_TYPE_EMB: usize = 0;
    pub const EDGE_TYPE_EMB: usize = 1;

    fn conv(&self, layer: usize, node_type: NodeType, slot: usize) -> usize {
        debug_assert!(layer < self.layers);
        2 + (layer * NodeType::COUNT + node_type.index()) * CONV_SLOTS + slot
    }

    pub fn q_weight(&self, l: usize, t: NodeType) -> usize {
        self.conv(l, t, 0)
    }
    pub fn q_bias(&self, l: usize, t: NodeType) -> usize {
        self.conv(l, t, 1)
    }
    pub fn k_weight(&self, l: usize, t: NodeType) -> usize {
        self.conv(l, t, 2)
    }
    pub fn k_bias(&self, l: usize, t: NodeType) -> usize {
        self.conv(l, t, 3)
    }
    pub fn v_weight(&self, l: usize, t: NodeType) -> usize {
        self.conv(l, t, 4)
    }
    pub fn v_bias(&self, l: usize, t: NodeType) -> usize {
        self.conv(l, t, 5)
    }
    pub fn attention(&self, l: usize, t: NodeType) -> usize {
        self.conv(l, t, 6)
    }

    /// Risk-head tensors in order: fc1 w/b, ln1 gain/bias, fc2 w/b, ln2 gain/bias, out w/b.
    pub fn head(&self, slot: usize) -> usize {
        debug_assert!(slot < HEAD_SLOTS);
        2 + self.layers * NodeType::COUNT * CONV_SLOTS + slot
    }

    pub fn len(&self) -> usize {
        self.head(0) + HEAD_SLOTS
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// All learnable tensors of the detector, in layout order with canonical names.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorParams {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

enum Init {
    Zero,
    One,
    Xavier,
}

fn specs(h: &Hyper) -> Vec<(String, usize, usize, Init)> {
    let d = h.width;
    let mut out = vec![
        ("node_type_emb".to_string(), NodeType::COUNT, d, Init::Zero),
        ("edge_type_emb".to_string(), EdgeType::COUNT, d, Init::Zero),
    ];
    for l in 0..h.layers {
        for t in NodeType::ALL {
            let p = format!("conv{l}.{}", t.as_str().to_lowercase());
            for m in ["q", "k", "v"] {
                out.push((format!("{p}.{m}.weight"), d, d, Init::Xavier));
                out.push((format!("{p}.{m}.bias"), 1, d, Init::Zero));
            }
            out.push((format!("{p}.att"), 1, h.head_dim(), Init::Zero));
        }
    }
    let [h1, h2] = h.hidden;
    out.extend([
        ("head.fc1.weight".to_string(), d + FEATURE_DIM, h1, Init::Xavier),
        ("head.fc1.bias".to_string(), 1, h1, Init::Zero),
        ("head.ln1.gain".to_string(), 1, h1, Init::One),
        ("head.ln1.bias".to_string(), 1, h1, Init::Zero),
        ("head.fc2.weight".to_string(), h1, h2, Init::Xavier),
        ("head.fc2.bias".to_string(), 1, h2, Init::Zero),
        ("head.ln2.gain".to_string(), 1, h2, Init::One),
        ("head.ln2.bias".to_string(), 1, h2, Init::Zero),
        ("head.out.weight".to_string(), h2, 2, Init::Xavier),
        ("head.out.bias".to_string(), 1, 2, Init::Zero),
    ]);
    out
}

impl DetectorParams {
    pub fn init(hyper: &Hyper, seed: u64) -> Self {
        let specs = specs(hyper);
        debug_assert_eq!(specs.len(), ParamLayout::new(hyper).len());
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (i, (name, r, c, init)) in specs.into_iter().enumerate() {
            tensors.push(match init {
                Init::Zero => Tensor::zeros(r, c),
                Init::One => Tensor::filled(r, c, 1.0),
                Init::Xavier => xavier_init(r, c, derive_seed(seed, i as u64)),
            });
            names.push(name);
        }
        Self { names, tensors }
    }

    /// Expected `(name, rows, cols)` for every tensor under `hyper`.
    pub fn expected_shapes(hyper: &Hyper) -> Vec<(String, usize, usize)> {
        specs(hyper).into_iter().map(|(n, r, c, _)| (n, r, c)).collect()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}
