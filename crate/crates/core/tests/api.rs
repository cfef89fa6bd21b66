mod common;

use common::small_model;
use fraudlens::explain::validate_bundle;
use fraudlens::service::Api;
use serde_json::{json, Value};

fn api() -> Api {
    let (graph, ckpt) = small_model(21);
    Api::new(ckpt, graph).unwrap()
}

fn get(api: &Api, path: &str) -> (u16, Value) {
    api.handle("GET", path, b"")
}

fn post(api: &Api, path: &str, body: Value) -> (u16, Value) {
    api.handle("POST", path, body.to_string().as_bytes())
}

fn top_case(api: &Api) -> String {
    get(api, "/api/cases?limit=1").1["cases"][0]["id"].as_str().unwrap().to_string()
}

#[test]
fn health_reports_the_snapshot() {
    let api = api();
    let (status, body) = get(&api, "/api/health");
    assert_eq!(status, 200);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["model"], api.checkpoint().content_hash());
}

#[test]
fn cases_are_ranked_and_filtered() {
    let api = api();
    let (status, body) = get(&api, "/api/cases?limit=500");
    assert_eq!(status, 200);
    let cases = body["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 120);
    let p: Vec<f64> = cases.iter().map(|c| c["p_fraud"].as_f64().unwrap()).collect();
    assert!(p.windows(2).all(|w| w[0] >= w[1]));

    let (_, body) = get(&api, "/api/cases?label=0&limit=5");
    let cases = body["cases"].as_array().unwrap();
    assert!(cases.len() <= 5);
    assert!(cases.iter().all(|c| c["label"] == 0));

    assert_eq!(get(&api, "/api/cases?label=2").0, 400);
    assert_eq!(get(&api, "/api/cases?limit=-1").1["field"], "limit");
}

#[test]
fn case_detail_has_prediction_and_subgraph() {
    let api = api();
    let id = top_case(&api);
    let (status, body) = get(&api, &format!("/api/cases/{id}"));
    assert_eq!(status, 200);
    assert_eq!(body["record"]["transaction_id"], id);
    assert!(body["prediction"]["p_fraud"].is_f64());
    assert_eq!(body["subgraph"]["nodes"][0]["hop"], 0);
    assert_eq!(get(&api, "/api/cases/NOPE").0, 404);
    assert_eq!(get(&api, "/api/nothing").0, 404);
}

#[test]
fn explain_endpoint_returns_a_valid_bundle() {
    let api = api();
    let id = top_case(&api);
    let path = format!("/api/cases/{id}/explain");
    let (status, body) = post(&api, &path, json!({ "M": 30, "seed": 3, "epochs": 5 }));
    assert_eq!(status, 200, "{body}");
    validate_bundle(&body).unwrap();
    assert_eq!(body["config"]["seed"], 3);
    assert_eq!(post(&api, &path, json!({ "M": 30, "seed": 3, "epochs": 5 })).1, body);

    let (status, body) = post(&api, &path, json!({ "M": "many" }));
    assert_eq!((status, body["field"].as_str()), (400, Some("M")));
    assert_eq!(api.handle("POST", &path, b"{not json").0, 400);
    assert_eq!(post(&api, "/api/cases/NOPE/explain", json!({})).0, 404);
}

#[test]
fn what_if_identity_and_counterfactuals() {
    let api = api();
    let id = top_case(&api);
    let baseline = get(&api, &format!("/api/cases/{id}")).1["prediction"]["p_fraud"].as_f64().unwrap();
    let path = format!("/api/cases/{id}/whatif");

    let (status, body) = post(&api, &path, json!({}));
    assert_eq!(status, 200);
    assert_eq!(body["p_fraud"].as_f64().unwrap(), baseline);
    assert_eq!(body["delta"], 0.0);

    let detail = get(&api, &format!("/api/cases/{id}")).1;
    let edges: Vec<u64> = detail["subgraph"]["edges"].as_array().unwrap().iter().map(|e| e["id"].as_u64().unwrap()).collect();
    let (status, body) = post(&api, &path, json!({ "removed_edges": edges, "feature_overrides": { "usd_amount": 12.5 } }));
    assert_eq!(status, 200);
    let p = body["p_fraud"].as_f64().unwrap();
    assert!((body["delta"].as_f64().unwrap() - (p - baseline)).abs() < 1e-15);
    assert_eq!(body["baseline"]["p_fraud"].as_f64().unwrap(), baseline);

    let outside = (0..).find(|e| !edges.contains(e)).unwrap();
    assert_eq!(post(&api, &path, json!({ "removed_edges": [outside] })).0, 422);
    let (status, body) = post(&api, &path, json!({ "feature_overrides": { "colour": 1 } }));
    assert_eq!((status, body["field"].as_str()), (400, Some("feature_overrides.colour")));
    let (status, body) = post(&api, &path, json!({ "removed_edges": [1, "x"] }));
    assert_eq!((status, body["field"].as_str()), (400, Some("removed_edges[1]")));
}

#[test]
fn concurrent_identical_requests_agree() {
    let api = api();
    let id = top_case(&api);
    let path = format!("/api/cases/{id}/whatif");
    let body = json!({ "feature_overrides": { "d_time": 5.0 } });
    let results: Vec<(u16, Value)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| post(&api, &path, body.clone()))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(results.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn serves_over_http() {
    use std::io::{Read, Write};
    let api = api();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(fraudlens::service::serve_on(api, listener));
    let request = |req: String| {
        let mut stream = std::net::TcpStream::connect(addr).unwrap();
        stream.write_all(req.as_bytes()).unwrap();
        let mut text = String::new();
        stream.read_to_string(&mut text).unwrap();
        text
    };
    let health = request("GET /api/health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n".into());
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    assert!(health.contains("application/json"));
    let body = "{\"removed_edges\": \"all\"}";
    let bad = request(format!(
        "POST /api/cases/TX-1/whatif HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    ));
    assert!(bad.starts_with("HTTP/1.1 400"), "{bad}");
    let missing = request("GET /api/cases/NOPE HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n".into());
    assert!(missing.starts_with("HTTP/1.1 404"));
}
