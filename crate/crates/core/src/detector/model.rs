use std::collections::VecDeque;
use std::rc::Rc;

use super::{Hyper, ParamLayout};
use crate::autodiff::{Mode, Segments, Tape, Tensor, Var};
use crate::graph::{encode_inputs, EdgeType, FeatureStats, HeteroGraph, NodeType, Subgraph, FEATURE_DIM, INPUT_DIM};

/// One directed message `src -> dst`; `slot` is the originating subgraph edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub src: usize,
    pub dst: usize,
    pub edge_type: EdgeType,
    pub slot: usize,
}

/// Model input for one target: the part of its neighborhood the detector can see.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub node_types: Vec<NodeType>,
    /// `n × INPUT_DIM`: standardized features ⊕ node-type one-hot.
    pub inputs: Tensor,
    pub messages: Vec<Message>,
    /// Local index of the target (always 0).
    pub target: usize,
    /// Number of edges in the originating subgraph; message slots index into it.
    pub slots: usize,
    reach: usize,
}

impl Instance {
    /// Encodes `subgraph` and keeps only nodes within `reach` hops of the target.
    ///
    /// Every subgraph edge becomes two messages, one per direction, so the
    /// target's prediction depends on exactly the retained nodes.
    pub fn build(graph: &HeteroGraph, subgraph: &Subgraph, stats: &FeatureStats, reach: usize) -> Self {
        let enc = encode_inputs(graph, subgraph, stats);
        let local = |id| subgraph.local_index(id).expect("edge endpoint inside subgraph");
        let mut messages = Vec::with_capacity(subgraph.edges.len() * 2);
        for (slot, &e) in subgraph.edges.iter().enumerate() {
            let edge = graph.edge(e);
            let (s, t) = (local(edge.source), local(edge.target));
            messages.push(Message { src: s, dst: t, edge_type: edge.edge_type, slot });
            messages.push(Message { src: t, dst: s, edge_type: edge.edge_type, slot });
        }
        let node_types = subgraph.nodes.iter().map(|&n| graph.node(n).node_type).collect();
        Instance { node_types, inputs: enc.nodes, messages, target: 0, slots: subgraph.edges.len(), reach }.pruned()
    }

    pub fn len(&self) -> usize {
        self.node_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_types.is_empty()
    }

    /// Standardized features of the target.
    pub fn target_features(&self) -> [f64; FEATURE_DIM] {
        let row = self.inputs.row_slice(self.target);
        [row[0], row[1], row[2]]
    }

    pub fn with_target_features(&self, features: [f64; FEATURE_DIM]) -> Self {
        let mut out = self.clone();
        for (k, v) in features.into_iter().enumerate() {
            out.inputs.set(out.target, k, v);
        }
        out
    }

    /// Drops every message whose subgraph edge fails `keep`, then re-prunes.
    pub fn with_slots(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut out = self.clone();
        out.messages.retain(|m| keep(m.slot));
        out.pruned()
    }

    /// Hop distance of every node from the target over the current messages.
    pub fn distances(&self) -> Vec<Option<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for m in &self.messages {
            adj[m.src].push(m.dst);
        }
        let mut dist = vec![None; self.len()];
        dist[self.target] = Some(0);
        let mut queue = VecDeque::from([self.target]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Subgraph edges that can influence the target: those touching a node
    /// fewer than `reach` hops away.
    pub fn relevant_slots(&self) -> Vec<bool> {
        let dist = self.distances();
        let mut out = vec![false; self.slots];
        for m in &self.messages {
            if dist[m.dst].is_some_and(|d| d < self.reach) {
                out[m.slot] = true;
            }
        }
        out
    }

    fn pruned(self) -> Self {
        let dist = self.distances();
        let keep: Vec<bool> = dist.iter().map(|d| d.is_some_and(|d| d <= self.reach)).collect();
        if keep.iter().all(|&k| k) {
            return self;
        }
        let mut remap = vec![usize::MAX; self.len()];
        let mut node_types = Vec::new();
        let mut data = Vec::new();
        for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            remap[i] = node_types.len();
            node_types.push(self.node_types[i]);
            data.extend_from_slice(self.inputs.row_slice(i));
        }
        let messages = self
            .messages
            .iter()
            .filter(|m| keep[m.src] && keep[m.dst])
            .map(|m| Message { src: remap[m.src], dst: remap[m.dst], ..*m })
            .collect();
        Instance {
            inputs: Tensor::new(node_types.len(), INPUT_DIM, data),
            node_types,
            messages,
            target: remap[self.target],
            slots: self.slots,
            reach: self.reach,
        }
    }
}

struct LayerPlan {
    /// Nodes whose query is needed, grouped by node type.
    q_rows: Vec<Rc<[usize]>>,
    q_types: Rc<[usize]>,
    /// Nodes whose key/value is needed, grouped by node type.
    kv_rows: Vec<Rc<[usize]>>,
    kv_types: Rc<[usize]>,
    src_pos: Rc<[usize]>,
    dst_pos: Rc<[usize]>,
    src_types: Rc<[usize]>,
    /// Row of the (source type, edge type) embedding table for each message.
    edge_rows: Rc<[usize]>,
    slots: Rc<[usize]>,
    dst: Vec<usize>,
    segments: Rc<Segments>,
    isolated: Option<Tensor>,
}

/// Embedding table rows per source type: node types, then edge types.
const TABLE_ROWS: usize = NodeType::COUNT + EdgeType::COUNT;

fn group_by_type(nodes: &[usize], node_types: &[usize]) -> (Vec<Rc<[usize]>>, Vec<usize>, Vec<usize>) {
    let mut groups = vec![Vec::new(); NodeType::COUNT];
    for &i in nodes {
        groups[node_types[i]].push(i);
    }
    let mut pos = vec![usize::MAX; node_types.len()];
    let mut types = Vec::with_capacity(nodes.len());
    for (p, &i) in groups.iter().flatten().enumerate() {
        pos[i] = p;
        types.push(node_types[i]);
    }
    (groups.into_iter().map(Into::into).collect(), pos, types)
}

/// Disjoint union of instances, laid out for one forward pass.
///
/// Layer `l` (0-based) only updates nodes within `L - 1 - l` hops of their
/// target; the rest cannot reach the prediction.
pub struct Batch {
    inputs: Tensor,
    head_features: Tensor,
    node_types: Rc<[usize]>,
    layers: Vec<LayerPlan>,
    targets: Rc<[usize]>,
    /// Offset of each instance's slots in the concatenated edge-mask column.
    pub slot_offsets: Vec<usize>,
    n_messages: usize,
}

impl Batch {
    pub fn new(instances: &[&Instance], hyper: &Hyper) -> Self {
        let d = hyper.width;
        let n: usize = instances.iter().map(|i| i.len()).sum();
        let mut inputs = Tensor::zeros(n, d);
        let mut head = Tensor::zeros(instances.len(), FEATURE_DIM);
        let mut node_types = Vec::with_capacity(n);
        let mut dist = Vec::with_capacity(n);
        let mut messages = Vec::new();
        let mut targets = Vec::with_capacity(instances.len());
        let mut slot_offsets = Vec::with_capacity(instances.len());
        let (mut node_off, mut slot_off) = (0, 0);
        let hidden = |k: usize| !hyper.use_deltas && (k == 1 || k == 2);
        for (b, inst) in instances.iter().enumerate() {
            for i in 0..inst.len() {
                for (k, &v) in inst.inputs.row_slice(i).iter().enumerate() {
                    inputs.set(node_off + i, k, if hidden(k) { 0.0 } else { v });
                }
                node_types.push(inst.node_types[i].index());
            }
            for (k, &v) in inst.target_features().iter().enumerate() {
                head.set(b, k, if hidden(k) { 0.0 } else { v });
            }
            dist.extend(inst.distances().into_iter().map(|d| d.unwrap_or(usize::MAX)));
            messages.extend(inst.messages.iter().map(|m| Message {
                src: node_off + m.src,
                dst: node_off + m.dst,
                slot: slot_off + m.slot,
                ..*m
            }));
            targets.push(node_off + inst.target);
            slot_offsets.push(slot_off);
            node_off += inst.len();
            slot_off += inst.slots;
        }

        let mut layers = Vec::with_capacity(hyper.layers);
        for l in 0..hyper.layers {
            let horizon = hyper.layers - 1 - l;
            let active: Vec<&Message> = messages.iter().filter(|m| dist[m.dst] <= horizon).collect();
            let mut need_q = vec![false; n];
            let mut need_kv = vec![false; n];
            for m in &active {
                need_q[m.dst] = true;
                need_kv[m.src] = true;
            }
            let q_nodes: Vec<usize> = (0..n).filter(|&i| need_q[i]).collect();
            let kv_nodes: Vec<usize> = (0..n).filter(|&i| need_kv[i]).collect();
            let (q_rows, q_pos, q_types) = group_by_type(&q_nodes, &node_types);
            let (kv_rows, kv_pos, kv_types) = group_by_type(&kv_nodes, &node_types);
            let dst: Vec<usize> = active.iter().map(|m| m.dst).collect();
            let segments = Segments::new(dst.clone(), n);
            let isolated = segments.counts().contains(&0).then(|| {
                Tensor::column(&segments.counts().iter().map(|&c| if c == 0 { 1.0 } else { 0.0 }).collect::<Vec<_>>())
            });
            layers.push(LayerPlan {
                q_rows,
                q_types: q_types.into(),
                kv_rows,
                kv_types: kv_types.into(),
                src_pos: active.iter().map(|m| kv_pos[m.src]).collect(),
                dst_pos: active.iter().map(|m| q_pos[m.dst]).collect(),
                src_types: active.iter().map(|m| node_types[m.src]).collect(),
                edge_rows: active
                    .iter()
                    .map(|m| node_types[m.src] * TABLE_ROWS + NodeType::COUNT + m.edge_type.index())
                    .collect(),
                slots: active.iter().map(|m| m.slot).collect(),
                dst,
                segments: Rc::new(segments),
                isolated,
            });
        }
        Batch {
            inputs,
            head_features: head,
            node_types: node_types.into(),
            layers,
            targets: targets.into(),
            slot_offsets,
            n_messages: messages.len(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.inputs.rows()
    }

    pub fn messages(&self) -> usize {
        self.n_messages
    }

    pub fn targets(&self) -> usize {
        self.targets.len()
    }

    /// Destination node of every message evaluated in `layer`, in attention-row order.
    pub fn message_targets(&self, layer: usize) -> &[usize] {
        &self.layers[layer].dst
    }
}

/// Optional explanation masks, already squashed to (0, 1).
#[derive(Clone, Copy, Debug, Default)]
pub struct Masks {
    /// `total slots × 1`, the soft presence of every message of the slot.
    pub edge: Option<Var>,
    /// `1 × FEATURE_DIM`, multiplied into every transaction feature.
    pub feature: Option<Var>,
}

pub struct Forward {
    /// `targets × 2` class logits (non-fraud, fraud).
    pub logits: Var,
    /// Per layer, `messages × heads` normalized attention weights.
    pub attention: Vec<Var>,
}

fn block_sum(d: usize, heads: usize) -> Tensor {
    let dk = d / heads;
    let mut t = Tensor::zeros(d, heads);
    for c in 0..d {
        t.set(c, c / dk, 1.0);
    }
    t
}

/// Per-node-type affine map of the grouped rows, stacked in group order.
fn typed_linear(tape: &mut Tape, x: Var, rows: &[Rc<[usize]>], p: &[Var], w: impl Fn(NodeType) -> usize, b: impl Fn(NodeType) -> usize) -> Var {
    let mut parts = Vec::with_capacity(NodeType::COUNT);
    for t in NodeType::ALL {
        let r = &rows[t.index()];
        if r.is_empty() {
            continue;
        }
        let xt = tape.gather_rows(x, r.clone());
        let y = tape.matmul(xt, p[w(t)]);
        parts.push(tape.add(y, p[b(t)]));
    }
    tape.concat_rows(&parts)
}

/// `[NodeTypeEmb; EdgeTypeEmb] · W_t` stacked over source types `t`.
fn embedding_table(tape: &mut Tape, p: &[Var], w: impl Fn(NodeType) -> usize) -> Var {
    let emb = tape.concat_rows(&[p[ParamLayout::NODE_TYPE_EMB], p[ParamLayout::EDGE_TYPE_EMB]]);
    let per_type: Vec<Var> = NodeType::ALL.iter().map(|&t| tape.matmul(emb, p[w(t)])).collect();
    tape.concat_rows(&per_type)
}

fn own_type_rows(types: &[usize]) -> Rc<[usize]> {
    types.iter().map(|&t| t * TABLE_ROWS + t).collect()
}

/// Full detector forward over a batch; `params` are tape variables in layout order.
pub fn forward(tape: &mut Tape, params: &[Var], batch: &Batch, hyper: &Hyper, mode: Mode, masks: Masks) -> Forward {
    let lay = ParamLayout::new(hyper);
    assert_eq!(params.len(), lay.len(), "contract violation: parameter count");
    let (d, heads, dk) = (hyper.width, hyper.heads, hyper.head_dim());
    let blocks = tape.constant(block_sum(d, heads));
    let blocks_t = tape.constant(block_sum(d, heads).transpose());

    let mut x = tape.constant(batch.inputs.clone());
    if let Some(fm) = masks.feature {
        let ones = tape.constant(Tensor::filled(1, d - FEATURE_DIM, 1.0));
        let row = tape.concat_cols(&[fm, ones]);
        x = tape.mul(x, row);
    }
    let nte = tape.gather_rows(params[ParamLayout::NODE_TYPE_EMB], batch.node_types.clone());
    let mut h = tape.add(x, nte);
    let mut attention = Vec::with_capacity(hyper.layers);

    for (l, plan) in batch.layers.iter().enumerate() {
        if plan.dst.is_empty() {
            continue;
        }
        let (q, k_e, v_e);
        if l == 0 {
            // (x + NodeTypeEmb [+ EdgeTypeEmb]) W = x W + NodeTypeEmb W [+ EdgeTypeEmb W];
            // x is sparse, the embedding products are tabulated per type.
            let tq = embedding_table(tape, params, |t| lay.q_weight(0, t));
            let tk = embedding_table(tape, params, |t| lay.k_weight(0, t));
            let tv = embedding_table(tape, params, |t| lay.v_weight(0, t));
            let q0 = typed_linear(tape, x, &plan.q_rows, params, |t| lay.q_weight(0, t), |t| lay.q_bias(0, t));
            let qe = tape.gather_rows(tq, own_type_rows(&plan.q_types));
            q = tape.add(q0, qe);
            let mut kv = |table: Var, w: &dyn Fn(NodeType) -> usize, b: &dyn Fn(NodeType) -> usize| {
                let base = typed_linear(tape, x, &plan.kv_rows, params, w, b);
                let ne = tape.gather_rows(table, own_type_rows(&plan.kv_types));
                let node = tape.add(base, ne);
                let per_msg = tape.gather_rows(node, plan.src_pos.clone());
                let ee = tape.gather_rows(table, plan.edge_rows.clone());
                tape.add(per_msg, ee)
            };
            k_e = kv(tk, &|t| lay.k_weight(0, t), &|t| lay.k_bias(0, t));
            v_e = kv(tv, &|t| lay.v_weight(0, t), &|t| lay.v_bias(0, t));
        } else {
            q = typed_linear(tape, h, &plan.q_rows, params, |t| lay.q_weight(l, t), |t| lay.q_bias(l, t));
            let k = typed_linear(tape, h, &plan.kv_rows, params, |t| lay.k_weight(l, t), |t| lay.k_bias(l, t));
            let v = typed_linear(tape, h, &plan.kv_rows, params, |t| lay.v_weight(l, t), |t| lay.v_bias(l, t));
            k_e = tape.gather_rows(k, plan.src_pos.clone());
            v_e = tape.gather_rows(v, plan.src_pos.clone());
        }

        let tiles: Vec<Var> = NodeType::ALL
            .iter()
            .map(|&t| {
                let a = params[lay.attention(l, t)];
                tape.concat_cols(&vec![a; heads])
            })
            .collect();
        let tiles = tape.concat_rows(&tiles);
        let w_src = tape.gather_rows(tiles, plan.src_types.clone());
        let ks = tape.mul(k_e, w_src);
        let ks = tape.matmul(ks, blocks);
        let w_dst = tape.gather_rows(tiles, plan.q_types.clone());
        let qs = tape.mul(q, w_dst);
        let qs = tape.matmul(qs, blocks);
        let qs = tape.gather_rows(qs, plan.dst_pos.clone());
        let raw = tape.add(ks, qs);
        let raw = tape.scale(raw, 1.0 / (dk as f64).sqrt());
        let slot_mask = masks.edge.map(|em| tape.gather_rows(em, plan.slots.clone()));
        // A masked message enters the neighbor softmax with weight m (log m added
        // to its score) and the mean with count m, so m = 0 is exact removal.
        let att = match slot_mask {
            Some(m) => {
                let lm = tape.log(m);
                let shifted = tape.add(raw, lm);
                tape.segment_softmax(shifted, plan.segments.clone())
            }
            None => tape.segment_softmax(raw, plan.segments.clone()),
        };
        attention.push(att);
        let coef = if hyper.single_weighting {
            tape.dropout(att, hyper.dropout, mode)
        } else {
            let dropped = tape.dropout(raw, hyper.dropout, mode);
            tape.mul(att, dropped)
        };
        let coef = tape.matmul(coef, blocks_t);
        let msg = tape.mul(v_e, coef);
        let agg = match slot_mask {
            Some(m) => {
                let weighted = tape.mul(msg, m);
                let sum = tape.segment_mean(weighted, plan.segments.clone());
                let mut count = tape.segment_mean(m, plan.segments.clone());
                if let Some(iso) = &plan.isolated {
                    let iso = tape.constant(iso.clone());
                    count = tape.add(count, iso);
                }
                let inv = tape.recip(count);
                tape.mul(sum, inv)
            }
            None => tape.segment_mean(msg, plan.segments.clone()),
        };
        let next = tape.relu(agg);
        h = match &plan.isolated {
            Some(iso) => {
                let iso = tape.constant(iso.clone());
                let keep = tape.mul(h, iso);
                tape.add(next, keep)
            }
            None => next,
        };
    }

    let z = tape.gather_rows(h, batch.targets.clone());
    let z = tape.tanh(z);
    let mut f = tape.constant(batch.head_features.clone());
    if let Some(fm) = masks.feature {
        f = tape.mul(f, fm);
    }
    let mut a = tape.concat_cols(&[z, f]);
    for layer in 0..2 {
        let s = 4 * layer;
        let y = tape.matmul(a, params[lay.head(s)]);
        let y = tape.add(y, params[lay.head(s + 1)]);
        let y = tape.relu(y);
        let y = tape.dropout(y, hyper.dropout, mode);
        let y = tape.layer_norm(y);
        let y = tape.mul(y, params[lay.head(s + 2)]);
        a = tape.add(y, params[lay.head(s + 3)]);
    }
    let logits = tape.matmul(a, params[lay.head(8)]);
    let logits = tape.add(logits, params[lay.head(9)]);
    Forward { logits, attention }
}
