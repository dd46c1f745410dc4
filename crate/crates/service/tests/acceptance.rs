//! Acceptance checks for the trainer service, one printed line per criterion.

mod common;

use std::io::{Read, Write};
use std::net::TcpStream;
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use serde_json::json;

use common::*;
use dipl_core::agent::SkillExport;
use dipl_service::events::read_log;
use dipl_service::{Config, EventLog, Session};

const WAIT: Duration = Duration::from_secs(5);

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, ok: bool, id: &str, detail: &str) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

async fn checks(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let config = Config {
        data_dir: Some(dir.path().to_path_buf()),
        heartbeat: Duration::from_millis(100),
    };
    let app = app(config.clone());

    let (s, v) = call(&app, "POST", "/sessions", Some(json!({ "domain": "mc-addition", "seed": 1 }))).await;
    let (_, w) = call(&app, "POST", "/sessions", Some(json!({ "domain": "mc-addition", "seed": 1 }))).await;
    r.line(
        s == StatusCode::OK && v["state"].as_object().map(|o| o.len()) == Some(14) && v["state"] == w["state"],
        "create-session",
        "MC session has a 14-element state; same seed gives the same state",
    );
    let (s, _) = call(&app, "POST", "/sessions", Some(json!({ "domain": "algebra" }))).await;
    r.line(s == StatusCode::BAD_REQUEST, "create-bad-domain-400", &format!("status {s}"));

    let id = v["session_id"].as_str().unwrap().to_string();
    let (_, st) = call(&app, "POST", &format!("/sessions/{id}/step"), None).await;
    r.line(st["hint_request"] == true, "step-fresh-agent-hint-request", "fresh agent requests a hint");

    let (s, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/train"),
        Some(json!({ "sai": { "selection": "out1", "action_type": "UpdateTextField", "input": {} }, "reward": 1, "source": "Demonstration" })),
    )
    .await;
    r.line(s == StatusCode::BAD_REQUEST, "train-malformed-sai-400", &format!("status {s}"));

    let sid = create(&app, json!({ "domain": "mc-addition", "problem": { "domain": "mc-addition", "a": "27", "b": "35" } })).await;
    let mut events = subscribe(&app, &sid, 1).await;
    call(&app, "POST", &format!("/sessions/{sid}/train"), Some(demo(update("out1", "2"), &["inpA1", "inpB1"], "add2"))).await;
    call(&app, "POST", &format!("/sessions/{sid}/next-problem"), Some(json!({ "problem": { "domain": "mc-addition", "a": "14", "b": "32" } }))).await;
    let (_, before) = call(&app, "GET", &format!("/sessions/{sid}"), None).await;
    let (_, st) = call(&app, "POST", &format!("/sessions/{sid}/step"), None).await;
    let (_, after) = call(&app, "GET", &format!("/sessions/{sid}"), None).await;
    r.line(
        st["action"].is_object() && !st["conflict_set"].as_array().unwrap().is_empty() && st.get("reward").is_none() && before["state"] == after["state"],
        "step-human-tutor-no-autograde",
        "trained agent returns an action and a non-empty conflict set; board and grade untouched",
    );
    let mut kinds = Vec::new();
    let mut seqs = Vec::new();
    for _ in 0..4 {
        let e = events.next_event(WAIT).await.unwrap_or_default();
        kinds.push(e["type"].as_str().unwrap_or("").to_string());
        seqs.push(e["seq"].as_u64().unwrap_or(0));
    }
    r.line(
        kinds == ["skill-updated", "state-changed", "state-changed", "agent-attempted"] && seqs == [2, 3, 4, 5],
        "events-ordered-ndjson",
        &format!("one train call gives one skill-updated event; seq {seqs:?}"),
    );
    let hb = events.next(WAIT).await.unwrap_or_default();
    r.line(hb["type"] == "heartbeat", "events-heartbeat", "idle stream sends a heartbeat line");
    drop(events);
    call(&app, "POST", &format!("/sessions/{sid}/step"), None).await;
    let mut again = subscribe(&app, &sid, 5).await;
    let e = again.next_event(WAIT).await.unwrap_or_default();
    r.line(e["seq"] == 6, "events-reconnect-replay", &format!("reconnect after 5 resumes at seq {}", e["seq"]));

    let done = create(&app, json!({ "domain": "mc-addition", "mode": "AutoTutor" })).await;
    let mut status = StatusCode::OK;
    for _ in 0..20 {
        status = call(&app, "POST", &format!("/sessions/{done}/step"), None).await.0;
        if status != StatusCode::OK {
            break;
        }
    }
    r.line(status == StatusCode::CONFLICT, "step-complete-409", &format!("status {status} after the problem is done"));

    let scripted = scripted_session(&app).await;
    let (_, live) = call(&app, "GET", &format!("/sessions/{scripted}/skills"), None).await;
    let live: Vec<SkillExport> = serde_json::from_value(live).unwrap_or_default();
    let path = dir.path().join(format!("{scripted}.ndjson"));
    let replayed = read_log(&path).and_then(|recs| Session::replay(&recs, EventLog::in_memory()));
    let same = replayed.as_ref().map(|s| s.skills() == live).unwrap_or(false);
    r.line(
        same && !live.is_empty(),
        "event-log-replay-equals-live",
        &format!("5 demonstrations + 10 feedbacks; {} skills, replayed set structurally equal", live.len()),
    );
    let n_files = std::fs::read_dir(dir.path()).map(|d| d.count()).unwrap_or(0);
    let (_, all) = call(&app, "GET", &format!("/sessions/{scripted}"), None).await;
    r.line(
        n_files == 5 && all["session_id"] == scripted.as_str(),
        "one-log-file-per-session",
        &format!("{n_files} files for 5 sessions"),
    );

    let auto = create(&app, json!({ "domain": "fractions", "mode": "AutoTutor", "seed": 3 })).await;
    let mut tasks = Vec::new();
    for i in 0..30 {
        let app = app.clone();
        let auto = auto.clone();
        tasks.push(tokio::spawn(async move {
            let path = if i % 10 == 9 { "next-problem" } else { "step" };
            call(&app, "POST", &format!("/sessions/{auto}/{path}"), None).await.0
        }));
    }
    for t in tasks {
        let _ = t.await;
    }
    let recs = read_log(&dir.path().join(format!("{auto}.ndjson"))).unwrap_or_default();
    let replayed = Session::replay(&recs, EventLog::in_memory());
    let (_, live) = call(&app, "GET", &format!("/sessions/{auto}/skills"), None).await;
    let ok = replayed.map(|s| serde_json::to_value(s.skills()).unwrap() == live).unwrap_or(false);
    r.line(
        ok && recs.len() > 30,
        "per-session-serialization",
        &format!("30 concurrent requests; {} contiguous events replay to the live agent", recs.len()),
    );
}

fn binary_serves_http(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_dipl-service"))
        .args(["--addr", &format!("127.0.0.1:{port}"), "--data-dir", dir.path().to_str().unwrap()])
        .stderr(Stdio::null())
        .spawn()
        .expect("service binary starts");
    let start = Instant::now();
    let mut reply = String::new();
    while start.elapsed() < Duration::from_secs(10) {
        if let Ok(mut s) = TcpStream::connect(("127.0.0.1", port)) {
            let body = r#"{"domain":"fractions"}"#;
            let req = format!(
                "POST /sessions HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            s.write_all(req.as_bytes()).unwrap();
            let _ = s.read_to_string(&mut reply);
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    let _ = child.kill();
    let _ = child.wait();
    r.line(
        reply.starts_with("HTTP/1.1 200") && reply.contains("\"session_id\""),
        "binary-serves-http",
        "dipl-service answers POST /sessions over TCP",
    );
}

fn main() -> ExitCode {
    let mut r = Report { failed: 0 };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    rt.block_on(checks(&mut r));
    binary_serves_http(&mut r);
    if r.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
