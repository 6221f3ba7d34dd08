mod common;

use std::sync::{Arc, Mutex};

use axum::routing::post;
use axum::{Json, Router};
use common::{serve, Gateway};
use serde_json::{json, Value};

/// A classifier that answers every request with `reply` and keeps the
/// request bodies it saw.
fn mock(reply: Value) -> (String, Arc<Mutex<Vec<Value>>>) {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let app = Router::new().route(
        "/score",
        post(move |Json(body): Json<Value>| {
            let reply = reply.clone();
            let log = log.clone();
            async move {
                log.lock().unwrap().push(body);
                Json(reply)
            }
        }),
    );
    (format!("http://{}", serve(app)), seen)
}

fn dead_port() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}

#[test]
fn external_scores_drive_the_decision() {
    let (url, seen) = mock(json!({
        "scores": {
            "professionalism": 0.9,
            "medical_relevance": 0.5,
            "ethical_behavior": 1.0,
            "contextual_distraction": 0.5
        },
        "labels": { "medical_relevance": "Partially relevant" }
    }));
    let gw = Gateway::start(Some(url));
    let id = gw.create("chest_pain");
    let body = gw.say(&id, "patient", "When did the pain start?");

    assert_eq!(body["scores"]["provenance"], "external");
    assert_eq!(body["scores"]["medical_relevance"], 0.5);
    assert_eq!(body["decision"]["assistance"]["label"], "High");

    let requests = seen.lock().unwrap();
    assert_eq!(requests.len(), 1);
    assert_eq!(requests[0]["session_id"], id.as_str());
    assert_eq!(requests[0]["text"], "When did the pain start?");
    assert_eq!(requests[0]["target_agent"], "patient");
    assert_eq!(requests[0]["criteria"].as_array().unwrap().len(), 4);
}

#[test]
fn out_of_range_scores_are_clamped() {
    let (url, _) = mock(json!({
        "scores": {
            "professionalism": 1.4,
            "medical_relevance": -0.2,
            "ethical_behavior": 1.0,
            "contextual_distraction": 0.0
        }
    }));
    let gw = Gateway::start(Some(url));
    let id = gw.create("chest_pain");
    let body = gw.say(&id, "patient", "When did the pain start?");
    assert_eq!(body["scores"]["provenance"], "external");
    assert_eq!(body["scores"]["professionalism"], 1.0);
    assert_eq!(body["scores"]["medical_relevance"], 0.0);
}

#[test]
fn malformed_response_falls_back_to_heuristics() {
    let (url, _) = mock(json!({ "scores": { "professionalism": 0.5 } }));
    let gw = Gateway::start(Some(url));
    let id = gw.create("chest_pain");
    let body = gw.say(&id, "patient", "When did the pain start?");
    assert_eq!(body["scores"]["provenance"], "heuristic");
}

#[test]
fn unreachable_classifier_falls_back_to_heuristics() {
    let gw = Gateway::start(Some(dead_port()));
    let id = gw.create("chest_pain");
    for text in ["Hello, I am the doctor.", "When did the pain start?", "Any nausea?", "Does it spread?"] {
        let body = gw.say(&id, "patient", text);
        assert_eq!(body["scores"]["provenance"], "heuristic");
    }
}
