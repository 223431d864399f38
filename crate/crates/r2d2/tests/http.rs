use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use r2d2::core::{DebateConfig, KnowledgeGraph, Model, ModelConfig};
use r2d2::service::{router, ServiceConfig};

const GRAPH: &str = "Michael Jordan\tprofession\tbasketball player\n\
Michael Jordan\tborn_in\tBrooklyn\n\
Brooklyn\tlocated_in\tUSA\n\
Michael Jordan\tplayed_for\tChicago Bulls\n\
Chicago Bulls\tbased_in\tChicago\n\
Chicago\tlocated_in\tUSA\n\
Scottie Pippen\tplayed_for\tChicago Bulls\n\
Scottie Pippen\tprofession\tbasketball player\n\
Richard Feynman\tprofession\tphysicist\n\
Richard Feynman\tnationality\tUSA\n\
Michelle Obama\tnationality\tUSA\n";

struct Fixture {
    app: Router,
    log: PathBuf,
    _dir: tempfile::TempDir,
}

fn config(log: PathBuf) -> ServiceConfig {
    ServiceConfig {
        debate: DebateConfig { rounds: 3, ..DebateConfig::default() },
        seed: 11,
        threshold: 0.5,
        fingerprint: "abc".into(),
        store_capacity: 8,
        verdict_log: log,
        allow_origin: None,
        max_rounds: 10,
        max_rollouts: 100,
    }
}

fn fixture() -> Fixture {
    let kg = KnowledgeGraph::from_tsv(GRAPH, true).unwrap();
    let model = Model::new(ModelConfig { dim: 8, ..ModelConfig::default() }, kg.num_entities(), kg.num_relations(), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("verdicts.jsonl");
    let app = router(Arc::new(kg), Arc::new(model), config(log.clone()));
    Fixture { app, log, _dir: dir }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn feynman(rounds: usize) -> Value {
    json!({"subject": "Richard Feynman", "predicate": "nationality", "object": "USA", "rounds": rounds, "seed": 5})
}

#[tokio::test]
async fn debate_has_two_arguments_per_round() {
    let f = fixture();
    let (status, body) = call(&f.app, "POST", "/debate", Some(feynman(3))).await;
    assert_eq!(status, StatusCode::OK);
    let args = body["arguments"].as_array().unwrap();
    assert_eq!(args.len(), 6);
    for (i, a) in args.iter().enumerate() {
        assert_eq!(a["agent"], json!(1 + i % 2));
        assert_eq!(a["round"], json!(1 + i / 2));
        assert_eq!(a["path"].as_array().unwrap().len(), 2);
        assert!(a["path"][0]["relation"].is_string() && a["path"][0]["entity"].is_string());
    }
    let score = body["score"].as_f64().unwrap();
    assert!(score > 0.0 && score < 1.0);
    assert_eq!(body["decision"], json!(score > 0.5));
    assert_eq!(body["threshold"], json!(0.5));
    assert_eq!(body["query"]["subject"], "Richard Feynman");
}

#[tokio::test]
async fn continue_matches_longer_debate() {
    let f = fixture();
    let (_, long) = call(&f.app, "POST", "/debate", Some(feynman(5))).await;
    let (_, short) = call(&f.app, "POST", "/debate", Some(feynman(3))).await;
    let id = short["debate_id"].as_str().unwrap().to_string();
    let uri = format!("/debate/{id}/continue");
    let (status, one) = call(&f.app, "POST", &uri, Some(json!({"rounds": 1}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(one["arguments"].as_array().unwrap().len(), 2);
    assert_eq!(one["total_arguments"], json!(8));
    let (_, two) = call(&f.app, "POST", &uri, Some(json!({}))).await;
    assert_eq!(two["total_arguments"], json!(10));
    let appended: Vec<Value> =
        [one["arguments"].as_array().unwrap().clone(), two["arguments"].as_array().unwrap().clone()].concat();
    assert_eq!(appended, long["arguments"].as_array().unwrap()[6..].to_vec());
    let diff = two["score"].as_f64().unwrap() - long["score"].as_f64().unwrap();
    assert!(diff.abs() <= 1e-12, "{diff}");
}

#[tokio::test]
async fn rollouts_average_and_continue() {
    let f = fixture();
    let body = |r: usize, k: usize| {
        json!({"subject": "Michael Jordan", "predicate": "profession", "object": "basketball player", "rounds": r, "rollouts": k, "seed": 2})
    };
    let (_, many) = call(&f.app, "POST", "/debate", Some(body(2, 4))).await;
    let (_, long) = call(&f.app, "POST", "/debate", Some(body(3, 4))).await;
    let uri = format!("/debate/{}/continue", many["debate_id"].as_str().unwrap());
    let (_, cont) = call(&f.app, "POST", &uri, Some(json!({"rounds": 1}))).await;
    assert!((cont["score"].as_f64().unwrap() - long["score"].as_f64().unwrap()).abs() <= 1e-12);
}

#[tokio::test]
async fn restart_reproduces_debates() {
    let a = fixture();
    let b = fixture();
    let (_, x) = call(&a.app, "POST", "/debate", Some(feynman(3))).await;
    let (_, y) = call(&b.app, "POST", "/debate", Some(feynman(3))).await;
    assert_ne!(x["debate_id"], y["debate_id"]);
    assert_eq!(x["arguments"], y["arguments"]);
    assert_eq!(x["score"], y["score"]);
}

#[tokio::test]
async fn classify_scores_with_rollouts() {
    let f = fixture();
    let q = json!({"subject": "Michael Jordan", "predicate": "born_in", "object": "Brooklyn", "rollouts": 3, "seed": 1});
    let (status, a) = call(&f.app, "POST", "/classify", Some(q.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(a["rollouts"], json!(3));
    let (_, b) = call(&f.app, "POST", "/classify", Some(q)).await;
    assert_eq!(a["score"], b["score"]);
    let mut ablated = json!({"subject": "Michael Jordan", "predicate": "born_in", "object": "Brooklyn", "keep_agent": "1"});
    let (status, _) = call(&f.app, "POST", "/classify", Some(ablated.clone())).await;
    assert_eq!(status, StatusCode::OK);
    ablated["keep_agent"] = json!("3");
    let (status, _) = call(&f.app, "POST", "/classify", Some(ablated)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn entity_autocomplete_and_relations() {
    let f = fixture();
    let (status, names) = call(&f.app, "GET", "/entities?prefix=Mich", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(names, json!(["Michael Jordan", "Michelle Obama"]));
    let (_, limited) = call(&f.app, "GET", "/entities?prefix=&limit=2", None).await;
    assert_eq!(limited.as_array().unwrap().len(), 2);
    let (_, rel) = call(&f.app, "GET", "/relations", None).await;
    assert_eq!(rel["fingerprint"], "abc");
    let rels: Vec<&str> = rel["relations"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(rels, ["profession", "born_in", "located_in", "played_for", "based_in", "nationality"]);
}

#[tokio::test]
async fn verdicts_are_appended() {
    let f = fixture();
    let (_, d) = call(&f.app, "POST", "/debate", Some(feynman(1))).await;
    let id = d["debate_id"].as_str().unwrap();
    let v = json!({"debate_id": id, "human_label": true, "overruled": false});
    let (status, rec) = call(&f.app, "POST", "/verdict", Some(v.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["model_score"], d["score"]);
    call(&f.app, "POST", "/verdict", Some(json!({"debate_id": id, "human_label": false, "overruled": true}))).await;
    let text = std::fs::read_to_string(&f.log).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["query"]["object"], "USA");
    assert_eq!(lines[1]["overruled"], json!(true));
    for key in ["timestamp", "debate_id", "query", "model_score", "human_label", "overruled"] {
        assert!(lines[0].get(key).is_some(), "{key}");
    }
}

#[tokio::test]
async fn error_statuses() {
    let f = fixture();
    let unknown = json!({"subject": "Nobody", "predicate": "nationality", "object": "USA"});
    assert_eq!(call(&f.app, "POST", "/debate", Some(unknown)).await.0, StatusCode::NOT_FOUND);
    let bad_rel = json!({"subject": "Richard Feynman", "predicate": "nationality_INV", "object": "USA"});
    assert_eq!(call(&f.app, "POST", "/debate", Some(bad_rel)).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&f.app, "POST", "/debate/nope/continue", Some(json!({}))).await.0, StatusCode::NOT_FOUND);
    let v = json!({"debate_id": "nope", "human_label": true, "overruled": false});
    assert_eq!(call(&f.app, "POST", "/verdict", Some(v)).await.0, StatusCode::NOT_FOUND);

    assert_eq!(call(&f.app, "POST", "/debate", Some(json!({"subject": "x"}))).await.0, StatusCode::BAD_REQUEST);
    let req = Request::post("/debate").header("content-type", "application/json").body(Body::from("{not json")).unwrap();
    assert_eq!(f.app.clone().oneshot(req).await.unwrap().status(), StatusCode::BAD_REQUEST);
    let mut zero = feynman(3);
    zero["rounds"] = json!(0);
    assert_eq!(call(&f.app, "POST", "/debate", Some(zero)).await.0, StatusCode::BAD_REQUEST);

    let mut stale = feynman(3);
    stale["fingerprint"] = json!("old");
    let (status, body) = call(&f.app, "POST", "/debate", Some(stale)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("fingerprint"));
    let mut current = feynman(3);
    current["fingerprint"] = json!("abc");
    assert_eq!(call(&f.app, "POST", "/debate", Some(current)).await.0, StatusCode::OK);
}

#[tokio::test]
async fn evicted_debates_are_gone() {
    let f = fixture();
    let (_, first) = call(&f.app, "POST", "/debate", Some(feynman(1))).await;
    for _ in 0..8 {
        call(&f.app, "POST", "/debate", Some(feynman(1))).await;
    }
    let uri = format!("/debate/{}/continue", first["debate_id"].as_str().unwrap());
    assert_eq!(call(&f.app, "POST", &uri, Some(json!({}))).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_headers() {
    let f = fixture();
    let req = Request::get("/relations").header("origin", "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = f.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}
