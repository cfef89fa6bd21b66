mod common;

use common::{bits, random_game, rng, small_model};
use fraudlens::explain::{
    compose_bundle, exact_shapley, explain_transaction, gnn_explain_case, missingness_shapley, permutation_shapley, shapley_edge_missingness,
    shapley_node_features, validate_bundle, BundleConfig, Case, ExplainError, ExplanationBundle, GnnExplainerConfig, OracleMode,
};
use fraudlens::graph::{sample_neighborhood, SamplerConfig};
use rand::Rng;

#[test]
fn oracle_modes_agree_and_are_efficient() {
    for seed in 0..30 {
        let n = 1 + seed as usize % 7;
        let v = random_game(seed, n);
        let a = exact_shapley(n, OracleMode::Features, |s| v[bits(s)]).unwrap();
        let b = exact_shapley(n, OracleMode::Edges, |s| v[bits(s)]).unwrap();
        let total = v[(1 << n) - 1] - v[0];
        assert!((a.iter().sum::<f64>() - total).abs() <= 1e-10);
        assert!((b.iter().sum::<f64>() - total).abs() <= 1e-10);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn monte_carlo_estimators_approach_the_oracle() {
    for seed in 0..5 {
        let n = 3 + seed as usize;
        let v = random_game(100 + seed, n);
        let exact = exact_shapley(n, OracleMode::Features, |s| v[bits(s)]).unwrap();
        let perm = permutation_shapley(n, 1, 2000, seed, |qs| qs.iter().map(|q| v[bits(&q.from_x)]).collect());
        let miss = missingness_shapley(n, 2000, seed, &vec![false; n], |cs| cs.iter().map(|c| v[bits(c)]).collect());
        for i in 0..n {
            assert!((perm.phi[i] - exact[i]).abs() <= 0.05, "perm item {i}");
            // The missingness sample is f(without) - f(with): the negated Shapley value.
            assert!((miss.phi[i] + exact[i]).abs() <= 0.05, "missingness item {i}");
        }
    }
}

#[test]
fn dummy_items_get_exactly_zero() {
    let n = 5;
    let base = random_game(7, n - 1);
    let v: Vec<f64> = (0..1usize << n).map(|b| base[b & ((1 << (n - 1)) - 1)]).collect();
    let perm = permutation_shapley(n, 1, 300, 1, |qs| qs.iter().map(|q| v[bits(&q.from_x)]).collect());
    let miss = missingness_shapley(n, 300, 1, &vec![false; n], |cs| cs.iter().map(|c| v[bits(c)]).collect());
    assert_eq!(perm.phi[n - 1], 0.0);
    assert_eq!(miss.phi[n - 1], 0.0);
    assert_eq!(exact_shapley(n, OracleMode::Edges, |s| v[bits(s)]).unwrap()[n - 1], 0.0);
}

#[test]
fn feature_shapley_is_zero_when_the_model_ignores_features() {
    let (graph, mut ckpt) = small_model(1);
    let lay = fraudlens::detector::ParamLayout::new(&ckpt.hyper);
    let z = ckpt.hyper.hidden[0];
    let rows = ckpt.params.tensors[lay.head(0)].rows();
    for r in rows - 3..rows {
        for c in 0..z {
            ckpt.params.tensors[lay.head(0)].set(r, c, 0.0);
        }
    }
    // Layer-0 projections of the three feature columns.
    for t in fraudlens::graph::NodeType::ALL {
        for w in [lay.q_weight(0, t), lay.k_weight(0, t), lay.v_weight(0, t)] {
            let cols = ckpt.params.tensors[w].cols();
            for r in 0..3 {
                for c in 0..cols {
                    ckpt.params.tensors[w].set(r, c, 0.0);
                }
            }
        }
    }
    let t = graph.transaction_nodes().next().unwrap();
    let case = Case::new(&ckpt, &graph, t).unwrap();
    let rep = shapley_node_features(&ckpt, &graph, &case, 100, 3).unwrap();
    for item in &rep.items {
        assert_eq!(item.phi, 0.0, "{}", item.name);
    }
}

#[test]
fn edges_out_of_reach_get_exactly_zero() {
    let (graph, ckpt) = small_model(2);
    let mut checked = 0;
    for t in graph.transaction_nodes().take(15) {
        let case = Case::new(&ckpt, &graph, t).unwrap();
        let relevant = case.instance.relevant_slots();
        if relevant.iter().all(|&r| r) {
            continue;
        }
        let rep = shapley_edge_missingness(&ckpt, &graph, &case, 20, 1).unwrap();
        for (item, &r) in rep.items.iter().zip(&relevant) {
            if !r {
                assert_eq!(item.phi, 0.0);
                assert_eq!(item.std_error, 0.0);
                checked += 1;
                // Removing it really does nothing.
                let p = case.what_if(&ckpt, &[item.edge.unwrap()], None).unwrap();
                assert_eq!(p, case.predict(&ckpt).unwrap().p_fraud);
            }
        }
    }
    assert!(checked > 0, "no out-of-reach edges sampled");
}

#[test]
fn edge_estimator_matches_brute_force_on_a_three_edge_case() {
    let (graph, ckpt) = small_model(3);
    let sampler = SamplerConfig { depth: 2, width: 2, cap: 4 };
    let t = graph
        .transaction_nodes()
        .find(|&t| sample_neighborhood(&graph, t, &sampler, 0).unwrap().edges.len() == 3)
        .expect("a three-edge neighborhood");
    let sub = sample_neighborhood(&graph, t, &sampler, 0).unwrap();
    let case = Case::from_subgraph(&ckpt, &graph, sub.clone());
    let est = shapley_edge_missingness(&ckpt, &graph, &case, 2000, 4).unwrap();
    let exact = exact_shapley(3, OracleMode::Edges, |present| {
        let removed: Vec<_> = sub.edges.iter().zip(present).filter(|(_, &p)| !p).map(|(&e, _)| e).collect();
        case.what_if(&ckpt, &removed, None).unwrap()
    })
    .unwrap();
    for (item, phi) in est.items.iter().zip(&exact) {
        assert!((item.phi + phi).abs() <= 0.05, "{} {} vs {}", item.name, item.phi, -phi);
    }
}

#[test]
fn identity_mask_preserves_the_prediction() {
    let (graph, ckpt) = small_model(4);
    let cfg = GnnExplainerConfig { epochs: 0, init_logit: 20.0, ..GnnExplainerConfig::default() };
    for t in graph.transaction_nodes().take(10) {
        let case = Case::new(&ckpt, &graph, t).unwrap();
        let m = gnn_explain_case(&ckpt, &case, &cfg).unwrap();
        assert!((m.masked_p_fraud - m.prediction.p_fraud).abs() <= 1e-6);
        assert_eq!(m.objective.len(), 1);
    }
}

#[test]
fn mask_objective_does_not_increase() {
    let (graph, ckpt) = small_model(5);
    for t in graph.transaction_nodes().take(5) {
        let case = Case::new(&ckpt, &graph, t).unwrap();
        let m = gnn_explain_case(&ckpt, &case, &GnnExplainerConfig::default()).unwrap();
        for w in m.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "objective rose from {} to {}", w[0], w[1]);
        }
        assert!(m.edge_weights.iter().chain(&m.feature_weights).all(|&w| w > 0.0 && w < 1.0));
    }
}

#[test]
fn what_if_without_changes_is_the_baseline() {
    let (graph, ckpt) = small_model(6);
    let t = graph.transaction_nodes().nth(3).unwrap();
    let case = Case::new(&ckpt, &graph, t).unwrap();
    assert_eq!(case.what_if(&ckpt, &[], None).unwrap(), case.predict(&ckpt).unwrap().p_fraud);
}

fn bundle_for(seed: u64) -> ExplanationBundle {
    let (graph, ckpt) = small_model(seed);
    let t = graph.transaction_nodes().nth(7).unwrap();
    let cfg = GnnExplainerConfig { epochs: 20, ..GnnExplainerConfig::default() };
    explain_transaction(&ckpt, &graph, t, 50, 7, &cfg).unwrap()
}

#[test]
fn bundle_round_trips_and_validates() {
    let b = bundle_for(7);
    let text = serde_json::to_string(&b).unwrap();
    let back: ExplanationBundle = serde_json::from_str(&text).unwrap();
    assert_eq!(back, b);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    validate_bundle(&doc).unwrap();
    assert_eq!(doc["schema"], "fraudlens-bundle/1");
}

#[test]
fn validator_reports_the_offending_path() {
    let mut doc = serde_json::to_value(bundle_for(8)).unwrap();
    doc["masks"]["edges"][0]["weight"] = serde_json::json!(1.0);
    match validate_bundle(&doc) {
        Err(ExplainError::Schema { path, .. }) => assert_eq!(path, "masks.edges.0.weight"),
        other => panic!("{other:?}"),
    }
    let mut doc = serde_json::to_value(bundle_for(8)).unwrap();
    doc["subgraph"]["edges"][0]["src"] = serde_json::json!(999_999);
    assert!(matches!(validate_bundle(&doc), Err(ExplainError::Schema { .. })));
    let mut doc = serde_json::to_value(bundle_for(8)).unwrap();
    doc.as_object_mut().unwrap().remove("edge_shapley");
    assert!(matches!(validate_bundle(&doc), Err(ExplainError::Schema { .. })));
}

#[test]
fn explanations_are_deterministic() {
    let a = serde_json::to_string(&bundle_for(9)).unwrap();
    let b = serde_json::to_string(&bundle_for(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn isolated_target_has_features_but_no_edges() {
    let (graph, ckpt) = small_model(10);
    let t = graph.transaction_nodes().next().unwrap();
    let sub = sample_neighborhood(&graph, t, &SamplerConfig { depth: 0, ..SamplerConfig::default() }, 0).unwrap();
    assert_eq!(sub.len(), 1);
    let case = Case::from_subgraph(&ckpt, &graph, sub);
    let prediction = case.predict(&ckpt).unwrap();
    let masks = gnn_explain_case(&ckpt, &case, &GnnExplainerConfig { epochs: 5, ..GnnExplainerConfig::default() }).unwrap();
    let features = shapley_node_features(&ckpt, &graph, &case, 30, 1).unwrap();
    let edges = shapley_edge_missingness(&ckpt, &graph, &case, 30, 2).unwrap();
    let config = BundleConfig { seed: 1, iterations: 30, explainer: GnnExplainerConfig::default() };
    let b = compose_bundle(&graph, &case.subgraph, prediction, &masks, &features, &edges, &config).unwrap();
    assert!(b.edge_shapley.items.is_empty());
    assert_eq!(b.feature_shapley.items.len(), 3);
    validate_bundle(&serde_json::to_value(&b).unwrap()).unwrap();
}

#[test]
fn mismatched_parts_do_not_compose() {
    let (graph, ckpt) = small_model(11);
    let mut ts = graph.transaction_nodes();
    let (a, b) = (ts.next().unwrap(), ts.nth(5).unwrap());
    let ca = Case::new(&ckpt, &graph, a).unwrap();
    let cb = Case::new(&ckpt, &graph, b).unwrap();
    let cfg = GnnExplainerConfig { epochs: 2, ..GnnExplainerConfig::default() };
    let masks = gnn_explain_case(&ckpt, &ca, &cfg).unwrap();
    let features = shapley_node_features(&ckpt, &graph, &ca, 10, 1).unwrap();
    let edges = shapley_edge_missingness(&ckpt, &graph, &cb, 10, 2).unwrap();
    let config = BundleConfig { seed: 1, iterations: 10, explainer: cfg };
    let r = compose_bundle(&graph, &ca.subgraph, ca.predict(&ckpt).unwrap(), &masks, &features, &edges, &config);
    assert!(matches!(r, Err(ExplainError::Composition(_))));
}

#[test]
fn oracle_rejects_large_games() {
    let mut g = rng(0);
    let r = exact_shapley(11, OracleMode::Edges, |_| g.gen());
    assert!(matches!(r, Err(ExplainError::TooManyItems { .. })));
}
