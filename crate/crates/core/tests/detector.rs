mod common;

use common::{attention_deviation, instance, random_graph, record, rng, stats_for, tiny_hyper, Row};
use fraudlens::data::engineer_deltas;
use fraudlens::detector::{
    evaluate, predict, predict_instances, score_targets, train, train_with_report, DetectorError, DetectorParams, Hyper, Instance, ModelCheckpoint,
};
use fraudlens::graph::{build_graph, sample_neighborhood, SamplerConfig};
use rand::Rng;

fn untrained(hyper: &Hyper, graph: &fraudlens::graph::HeteroGraph) -> ModelCheckpoint {
    ModelCheckpoint { hyper: hyper.clone(), params: DetectorParams::init(hyper, 5), stats: stats_for(graph), seed: hyper.seed }
}

#[test]
fn attention_is_normalized_per_destination_and_head() {
    let hyper = Hyper::default();
    let graph = random_graph(1, 200);
    let targets: Vec<_> = graph.transaction_nodes().take(40).collect();
    let instances: Vec<Instance> = targets.iter().map(|&t| instance(&graph, t, hyper.sampler, &hyper)).collect();
    let refs: Vec<&Instance> = instances.iter().collect();
    for chunk in refs.chunks(8) {
        assert!(attention_deviation(chunk, &hyper, 3) <= 1e-9);
    }
}

#[test]
fn lone_neighbor_gets_all_the_attention() {
    let rows = vec![
        record(Row { id: "A", sender: None, sender_country: None, bene: None, bene_account: None, bene_country: None, ..Row::default() }),
        record(Row { id: "B", label: 1, ..Row::default() }),
    ];
    let graph = build_graph(&rows).unwrap();
    let hyper = Hyper { layers: 1, ..Hyper::default() };
    let target = graph.transaction("A").unwrap();
    let inst = instance(&graph, target, SamplerConfig { depth: 1, ..SamplerConfig::default() }, &hyper);
    assert_eq!(inst.len(), 2);
    assert!(attention_deviation(&[&inst], &hyper, 0) == 0.0);
}

#[test]
fn predictions_do_not_depend_on_batch_composition() {
    let graph = random_graph(2, 150);
    let hyper = Hyper::default();
    let ckpt = untrained(&hyper, &graph);
    let targets: Vec<_> = graph.transaction_nodes().collect();
    let together = score_targets(&ckpt, &graph, &targets).unwrap();
    for (i, &t) in targets.iter().enumerate().step_by(13) {
        let alone = score_targets(&ckpt, &graph, &[t]).unwrap()[0];
        assert_eq!(alone.to_bits(), together[i].to_bits());
    }
}

#[test]
fn nodes_beyond_the_receptive_field_do_not_matter() {
    let hyper = Hyper { layers: 2, ..Hyper::default() };
    let graph = random_graph(4, 120);
    let ckpt = untrained(&hyper, &graph);
    let stats = stats_for(&graph);
    for t in graph.transaction_nodes().take(20) {
        let sub = sample_neighborhood(&graph, t, &hyper.sampler, hyper.seed).unwrap();
        let full = Instance::build(&graph, &sub, &stats, usize::MAX);
        let pruned = Instance::build(&graph, &sub, &stats, hyper.layers);
        assert!(pruned.len() <= full.len());
        let p = predict_instances(&ckpt, &[full, pruned]).unwrap();
        assert_eq!(p[0].to_bits(), p[1].to_bits());
    }
}

#[test]
fn edges_two_hops_out_reach_the_prediction_at_initialization() {
    let hyper = Hyper::default();
    let graph = random_graph(6, 200);
    let ckpt = untrained(&hyper, &graph);
    let (mut far, mut moved) = (0, 0);
    for t in graph.transaction_nodes().take(20) {
        let inst = instance(&graph, t, hyper.sampler, &hyper);
        let dist = inst.distances();
        let base = predict_instances(&ckpt, std::slice::from_ref(&inst)).unwrap()[0];
        for m in inst.messages.iter().filter(|m| dist[m.src] == Some(2) && dist[m.dst] == Some(1)) {
            far += 1;
            let p = predict_instances(&ckpt, &[inst.with_slots(|s| s != m.slot)]).unwrap()[0];
            if p != base {
                moved += 1;
            }
        }
    }
    assert!(far > 0);
    assert!(moved * 2 > far, "{moved} of {far} two-hop edges changed the prediction");
}

#[test]
fn training_is_deterministic() {
    let graph = random_graph(5, 80);
    let targets = graph.labelled_targets();
    let hyper = tiny_hyper();
    let a = train(&graph, &targets, &hyper).unwrap();
    let b = train(&graph, &targets, &hyper).unwrap();
    assert_eq!(a.content_hash(), b.content_hash());
    let c = train(&graph, &targets, &Hyper { seed: 8, ..hyper }).unwrap();
    assert_ne!(a.content_hash(), c.content_hash());
}

#[test]
fn overfits_a_small_separable_problem() {
    let mut g = rng(9);
    let mut rows = Vec::new();
    for i in 0..50 {
        let fraud = i % 4 == 0;
        let mut r = record(Row {
            amount: if fraud { g.gen_range(5000.0..9000.0) } else { g.gen_range(10.0..400.0) },
            timestamp: i * 1000,
            label: fraud as u8,
            ..Row::default()
        });
        r.transaction_id = format!("T{i}");
        r.sender_id = Some(format!("CLIENT-{}", i % 7));
        r.sender_account = Some(format!("ACCOUNT-{}", i % 7));
        r.bene_account = Some(format!("ACCOUNT-B{}", i % 5));
        rows.push(r);
    }
    engineer_deltas(&mut rows);
    let graph = build_graph(&rows).unwrap();
    let targets = graph.labelled_targets();
    let hyper = Hyper { epochs: 60, batch_size: 10, learning_rate: 0.01, validation_fraction: 0.0, ..tiny_hyper() };
    let (ckpt, report) = train_with_report(&graph, &targets, &hyper).unwrap();
    let m = evaluate(&ckpt, &graph, &targets).unwrap();
    assert!(m.accuracy >= 0.98, "accuracy {}", m.accuracy);
    assert_eq!(m.roc_auc, 1.0);
    assert!(report.epoch_loss.last().unwrap() < &report.epoch_loss[0]);
}

#[test]
fn single_class_training_data_is_rejected() {
    let graph = random_graph(6, 40);
    let targets: Vec<_> = graph.transaction_nodes().map(|t| (t, 0u8)).collect();
    assert!(matches!(train(&graph, &targets, &tiny_hyper()), Err(DetectorError::SingleClass(0))));
}

#[test]
fn checkpoint_file_round_trip_predicts_identically() {
    let graph = random_graph(7, 60);
    let targets = graph.labelled_targets();
    let ckpt = train(&graph, &targets, &tiny_hyper()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    ckpt.save(&path).unwrap();
    let back = ModelCheckpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    let t = targets[0].0;
    assert_eq!(predict(&ckpt, &graph, t).unwrap(), predict(&back, &graph, t).unwrap());
}

#[test]
fn invalid_hyper_is_a_config_error() {
    let graph = random_graph(8, 30);
    let targets = graph.labelled_targets();
    let bad = Hyper { width: 30, heads: 4, ..Hyper::default() };
    assert!(matches!(train(&graph, &targets, &bad), Err(DetectorError::Config(_))));
}
