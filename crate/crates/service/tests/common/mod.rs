#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures::StreamExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dipl_core::tutor::{ProblemSpec, TutorSession};
use dipl_core::Sai;
use dipl_service::{router, AppState, Config};

pub fn app(config: Config) -> Router {
    router(Arc::new(AppState::new(config).expect("state loads")))
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&bytes))) };
    (status, v)
}

/// Opens an event stream and returns a reader of its lines.
pub async fn subscribe(app: &Router, id: &str, after: u64) -> Lines {
    let req = Request::builder()
        .uri(format!("/sessions/{id}/events?after={after}"))
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "application/x-ndjson");
    Lines {
        stream: Box::pin(resp.into_body().into_data_stream()),
        buf: String::new(),
    }
}

pub struct Lines {
    stream: std::pin::Pin<Box<dyn futures::Stream<Item = Result<axum::body::Bytes, axum::Error>> + Send>>,
    buf: String,
}

impl Lines {
    /// Next line as JSON, or `None` if nothing arrives within `wait`.
    pub async fn next(&mut self, wait: Duration) -> Option<Value> {
        loop {
            if let Some(i) = self.buf.find('\n') {
                let line: String = self.buf.drain(..=i).collect();
                return Some(serde_json::from_str(line.trim_end()).expect("each line is JSON"));
            }
            let chunk = tokio::time::timeout(wait, self.stream.next()).await.ok()??.ok()?;
            self.buf.push_str(std::str::from_utf8(&chunk).unwrap());
        }
    }

    /// Next non-heartbeat line.
    pub async fn next_event(&mut self, wait: Duration) -> Option<Value> {
        loop {
            let v = self.next(wait).await?;
            if v["type"] != "heartbeat" {
                return Some(v);
            }
        }
    }
}

pub async fn create(app: &Router, body: Value) -> String {
    let (s, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

pub fn update(sel: &str, value: &str) -> Value {
    json!({ "selection": sel, "action_type": "UpdateTextField", "input": { "value": value } })
}

pub fn press(sel: &str) -> Value {
    json!({ "selection": sel, "action_type": "PressButton", "input": {} })
}

pub fn demo(sai: Value, foci: &[&str], label: &str) -> Value {
    json!({ "sai": sai, "reward": 1.0, "foci": foci, "skill_label": label, "source": "Demonstration" })
}

pub fn feedback(sai: Value, reward: f64) -> Value {
    json!({ "sai": sai, "reward": reward, "source": "FeedbackOnOwnAction" })
}

/// A human-tutor session on 27 + 35, trained with five demonstrations and
/// ten feedback signals. Returns the session id.
pub async fn scripted_session(app: &Router) -> String {
    let id = create(
        app,
        json!({ "domain": "mc-addition", "mode": "HumanTutor", "problem": { "domain": "mc-addition", "a": "27", "b": "35" } }),
    )
    .await;
    let train = |body: Value| {
        let app = app.clone();
        let uri = format!("/sessions/{id}/train");
        async move {
            let (s, v) = call(&app, "POST", &uri, Some(body)).await;
            assert_eq!(s, StatusCode::OK, "{v}");
            v
        }
    };
    train(demo(update("out1", "2"), &["inpA1", "inpB1"], "add2")).await;
    train(demo(update("carry1", "1"), &["inpA1", "inpB1"], "carry2")).await;
    train(demo(update("out2", "6"), &["carry1", "inpA2", "inpB2"], "add3")).await;
    train(demo(press("done"), &[], "done")).await;
    let (s, _) = call(app, "POST", &format!("/sessions/{id}/next-problem"), Some(json!({ "problem": { "domain": "mc-addition", "a": "143", "b": "252" } }))).await;
    assert_eq!(s, StatusCode::OK);
    train(demo(update("out1", "5"), &["inpA1", "inpB1"], "add2")).await;
    // Ten feedback signals on whatever the agent proposes, graded by a
    // local copy of the tutor that mirrors the board.
    let problem = |v: &Value| -> TutorSession { TutorSession::new(serde_json::from_value::<ProblemSpec>(v["problem"].clone()).unwrap()).unwrap() };
    let (_, v) = call(app, "GET", &format!("/sessions/{id}"), None).await;
    let mut oracle = problem(&v);
    oracle.apply(&Sai::update("out1", "5"), 1.0).unwrap();
    let mut given = 0;
    for _ in 0..100 {
        if given == 10 {
            break;
        }
        let (s, v) = call(app, "POST", &format!("/sessions/{id}/step"), None).await;
        if s == StatusCode::CONFLICT || v["hint_request"] == true {
            let (_, v) = call(app, "POST", &format!("/sessions/{id}/next-problem"), None).await;
            oracle = problem(&v);
            continue;
        }
        assert_eq!(s, StatusCode::OK, "{v}");
        let sai: Sai = serde_json::from_value(v["action"].clone()).unwrap();
        let reward = oracle.grade(&sai);
        train(feedback(v["action"].clone(), reward)).await;
        oracle.apply(&sai, reward).unwrap();
        given += 1;
    }
    assert_eq!(given, 10);
    id
}
