mod common;

use axum::http::StatusCode;
use common::{app, assert_no_private_keys, call, state};
use recourse_core::elicit::replay_session;
use recourse_core::eval::GeneratorKind;
use recourse_core::SessionContext;
use serde_json::{json, Value};

fn toy_request(q: usize, k: usize) -> Value {
    json!({
        "dataset": "toy2",
        "features": { "a": 0, "b": 1 },
        "q": q,
        "k": k,
        "generator": "exhaustive",
        "seed": 11
    })
}

async fn create(app: &axum::Router, body: Value) -> Value {
    let (status, view) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{view}");
    view
}

#[tokio::test]
async fn datasets_and_schemas_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(state(dir.path(), 1));
    let (status, list) = call(&app, "GET", "/datasets", None).await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<&str> = list.as_array().unwrap().iter().map(|d| d["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["synthetic", "toy2"]);
    assert_eq!(list[1]["trained"], json!(false));
    let (status, schema) = call(&app, "GET", "/datasets/synthetic/schema", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(schema["schema_version"], json!(1));
    assert_eq!(schema["features"].as_array().unwrap().len(), 5);
    let (status, _) = call(&app, "GET", "/datasets/nope/schema", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn create_returns_k_items_and_no_private_fields() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(state(dir.path(), 2));
    let view = create(&app, toy_request(3, 2)).await;
    assert_eq!(view["status"], json!("awaiting_choice"));
    assert_eq!(view["round"], json!(0));
    assert_eq!(view["budget"], json!(3));
    let items = view["choice_set"]["items"].as_array().unwrap();
    assert_eq!(items.len(), 2);
    for item in items {
        assert!(!item["actions"].as_array().unwrap().is_empty());
        assert!(item["expected_cost"].as_f64().unwrap() >= 0.0);
    }
    assert_no_private_keys(&view);
    let id = view["session_id"].as_str().unwrap();
    let (status, again) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, view);
}

#[tokio::test]
async fn creation_errors_map_to_client_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(state(dir.path(), 3));
    let mut unknown = toy_request(1, 2);
    unknown["dataset"] = json!("missing");
    assert_eq!(call(&app, "POST", "/sessions", Some(unknown)).await.0, StatusCode::NOT_FOUND);

    let mut bad_feature = toy_request(1, 2);
    bad_feature["features"] = json!({ "a": 0, "zzz": 1 });
    let (status, body) = call(&app, "POST", "/sessions", Some(bad_feature)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("zzz"), "{body}");

    let mut out_of_range = toy_request(1, 2);
    out_of_range["features"] = json!({ "a": 0, "b": 40 });
    let (status, body) = call(&app, "POST", "/sessions", Some(out_of_range)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains('b'), "{body}");

    let mut favorable = toy_request(1, 2);
    favorable["features"] = json!({ "a": 4, "b": 0 });
    assert_eq!(call(&app, "POST", "/sessions", Some(favorable)).await.0, StatusCode::CONFLICT);

    let mut unavailable = toy_request(1, 2);
    unavailable["generator"] = json!("wefare");
    assert_eq!(call(&app, "POST", "/sessions", Some(unavailable)).await.0, StatusCode::BAD_REQUEST);

    assert_eq!(call(&app, "GET", "/sessions/ffff", None).await.0, StatusCode::NOT_FOUND);
    let choice = json!({ "index": 0 });
    assert_eq!(call(&app, "POST", "/sessions/ffff/choice", Some(choice)).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn zero_budget_finalizes_at_creation() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(state(dir.path(), 4));
    let view = create(&app, toy_request(0, 2)).await;
    assert_eq!(view["status"], json!("finalized"));
    assert!(view.get("choice_set").is_none());
    assert_eq!(view["result"]["achieves_recourse"], json!(true));
}

#[tokio::test]
async fn choices_are_idempotent_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(state(dir.path(), 5));
    let view = create(&app, toy_request(3, 2)).await;
    let uri = format!("/sessions/{}/choice", view["session_id"].as_str().unwrap());

    let (status, body) = call(&app, "POST", &uri, Some(json!({ "index": 9, "round": 0 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    let (s1, first) = call(&app, "POST", &uri, Some(json!({ "index": 1, "round": 0 }))).await;
    assert_eq!(s1, StatusCode::OK);
    assert_eq!(first["round"], json!(1));
    let (s2, second) = call(&app, "POST", &uri, Some(json!({ "index": 1, "round": 0 }))).await;
    assert_eq!(s2, StatusCode::OK);
    assert_eq!(first, second);

    let (s3, _) = call(&app, "POST", &uri, Some(json!({ "index": 0, "round": 0 }))).await;
    assert_eq!(s3, StatusCode::CONFLICT);
    let (s4, _) = call(&app, "POST", &uri, Some(json!({ "index": 0, "round": 5 }))).await;
    assert_eq!(s4, StatusCode::CONFLICT);

    call(&app, "POST", &uri, Some(json!({ "index": 0, "round": 1 }))).await;
    let (_, done) = call(&app, "POST", &uri, Some(json!({ "index": 0, "round": 2 }))).await;
    assert_eq!(done["status"], json!("finalized"));
    let (s5, _) = call(&app, "POST", &uri, Some(json!({ "index": 0 }))).await;
    assert_eq!(s5, StatusCode::CONFLICT);
    let (s6, last) = call(&app, "POST", &uri, Some(json!({ "index": 0, "round": 2 }))).await;
    assert_eq!(s6, StatusCode::OK);
    assert_eq!(last, done);
}

/// A session walked over HTTP, reloaded from a reopened store and replayed
/// in-process from its transcript, ends with the same intervention.
#[tokio::test]
async fn persisted_session_replays_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let id;
    let served_result;
    {
        let st = state(dir.path(), 6);
        let app = app(st.clone());
        let mut view = create(&app, toy_request(4, 2)).await;
        id = view["session_id"].as_str().unwrap().to_string();
        let uri = format!("/sessions/{id}/choice");
        let mut round = 0;
        while view["status"] == json!("awaiting_choice") {
            let (status, next) = call(&app, "POST", &uri, Some(json!({ "index": round % 2, "round": round }))).await;
            assert_eq!(status, StatusCode::OK);
            assert_no_private_keys(&next);
            view = next;
            round += 1;
        }
        assert_eq!(round, 4);
        served_result = view["result"].clone();
    }
    let st = state(dir.path(), 99);
    let record = st.store.get(&id).unwrap().expect("session persisted");
    assert_eq!(record.generator, GeneratorKind::Exhaustive);
    let entry = st.registry.get("toy2").unwrap();
    let ctx = SessionContext {
        env: &entry.env,
        prior: &entry.dataset.prior,
        generator: entry.generator(GeneratorKind::Exhaustive).unwrap(),
    };
    let replayed = replay_session(ctx, &record.session.transcript()).unwrap();
    assert_eq!(replayed.result(), record.session.result());
    let app = app(st);
    let (status, reloaded) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reloaded["result"], served_result);
}

#[tokio::test]
async fn wfare_sessions_work_without_trained_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(state(dir.path(), 7));
    let body = json!({
        "dataset": "synthetic",
        "features": { "education": "high_school", "job": "worker", "income": 1, "savings": 0, "house": "rent" },
        "q": 1,
        "k": 2,
        "seed": 3
    });
    let view = create(&app, body).await;
    assert_eq!(view["generator"], json!("wfare"));
    assert_eq!(view["choice_set"]["items"].as_array().unwrap().len(), 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_advance_a_round_once() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(state(dir.path(), 8));
    let view = create(&app, toy_request(3, 2)).await;
    let uri = format!("/sessions/{}/choice", view["session_id"].as_str().unwrap());
    let mut handles = Vec::new();
    for _ in 0..8 {
        let app = app.clone();
        let uri = uri.clone();
        handles.push(tokio::spawn(async move {
            call(&app, "POST", &uri, Some(json!({ "index": 0, "round": 0 }))).await
        }));
    }
    let mut views = Vec::new();
    for h in handles {
        let (status, v) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        views.push(v);
    }
    assert!(views.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(views[0]["round"], json!(1));

    // distinct sessions proceed independently
    let mut handles = Vec::new();
    for i in 0..4 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let mut req = toy_request(1, 2);
            req["seed"] = json!(i);
            call(&app, "POST", "/sessions", Some(req)).await.0
        }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::CREATED);
    }
}
