#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::mpsc;
use std::time::Duration;

use axum::Router;
use serde_json::Value;

use fsa_core::store::{Durability, FileStore};
use fsa_gateway::config::{Overrides, Settings};
use fsa_gateway::server::{router, AppState};

/// Serves `app` from a dedicated thread and runtime that live until the test
/// process exits.
pub fn serve(app: Router) -> SocketAddr {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv_timeout(Duration::from_secs(10)).expect("server did not start")
}

pub struct Gateway {
    pub addr: SocketAddr,
    pub data: tempfile::TempDir,
}

impl Gateway {
    pub fn start(classifier_url: Option<String>) -> Self {
        let data = tempfile::tempdir().unwrap();
        Self::start_in(data, classifier_url)
    }

    pub fn start_in(data: tempfile::TempDir, classifier_url: Option<String>) -> Self {
        let settings = Settings::resolve(
            Overrides { data_dir: Some(data.path().to_path_buf()), classifier_url, ..Default::default() },
            Default::default(),
        )
        .unwrap();
        let store = FileStore::open_with(data.path(), Durability::Buffered).unwrap();
        let state = AppState::new(settings.supervisor(true).unwrap(), store, settings.scenarios().unwrap());
        Self { addr: serve(router(state)), data }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let resp = client().get(self.url(path)).send().unwrap();
        decode(resp)
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let resp = client()
            .post(self.url(path))
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()
            .unwrap();
        decode(resp)
    }

    pub fn create(&self, scenario: &str) -> String {
        let (status, body) = self.post("/sessions", serde_json::json!({ "scenario_id": scenario }));
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    pub fn say(&self, id: &str, target: &str, text: &str) -> Value {
        let (status, body) =
            self.post(&format!("/sessions/{id}/messages"), serde_json::json!({ "target": target, "text": text }));
        assert_eq!(status, 200, "{body}");
        body
    }
}

fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder().timeout(Duration::from_secs(30)).build().unwrap()
}

fn decode(resp: reqwest::blocking::Response) -> (u16, Value) {
    let status = resp.status().as_u16();
    let text = resp.text().unwrap();
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}
