//! HTTP service for tutoring an agent interactively.
//!
//! Routes:
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | GET | `/domains/{domain}` | | skill labels of a tutor domain |
//! | POST | `/sessions` | [`CreateRequest`] | [`SessionView`] |
//! | GET | `/sessions/{id}` | | [`SessionView`] |
//! | GET | `/sessions/{id}/skills` | | every skill in full |
//! | POST | `/sessions/{id}/step` | | [`StepResult`] |
//! | POST | `/sessions/{id}/train` | [`TrainRequest`] | [`TrainResult`] |
//! | POST | `/sessions/{id}/next-problem` | optional `{problem}` | [`SessionView`] |
//! | GET | `/sessions/{id}/events?after=N` | | NDJSON event stream |
//!
//! Each session has one mutex; every request holds it for its whole
//! duration, so requests on a session are applied one at a time. Every
//! change is appended to `<data_dir>/<id>.ndjson` before the reply.

pub mod error;
pub mod events;
pub mod session;

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc, Mutex, OwnedMutexGuard, RwLock};

use dipl_core::agent::SkillExport;
use dipl_core::tutor::{Domain, ProblemSpec};

pub use error::ServiceError;
pub use events::{Event, EventLog, EventRecord, Mode};
pub use session::{CreateRequest, Session, SessionView, StepResult, TrainRequest, TrainResult};

#[derive(Debug, Clone)]
pub struct Config {
    /// Directory for event-log files; `None` keeps logs in memory.
    pub data_dir: Option<PathBuf>,
    /// Idle time after which an event stream sends a heartbeat line.
    pub heartbeat: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: None,
            heartbeat: Duration::from_secs(15),
        }
    }
}

struct Entry {
    session: Arc<Mutex<Session>>,
    /// Serialized event lines, in sequence order.
    events: broadcast::Sender<Arc<str>>,
}

pub struct AppState {
    config: Config,
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    next_id: AtomicU64,
}

impl AppState {
    /// Loads every `*.ndjson` log in the data directory.
    pub fn new(config: Config) -> Result<AppState, ServiceError> {
        let mut sessions = HashMap::new();
        let mut next = 1;
        if let Some(dir) = &config.data_dir {
            std::fs::create_dir_all(dir)?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "ndjson"))
                .collect();
            paths.sort();
            for p in paths {
                let s = Session::resume(&p)?;
                if let Some(n) = s.id().strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                    next = next.max(n + 1);
                }
                sessions.insert(s.id().to_string(), Arc::new(entry(s)));
            }
        }
        Ok(AppState {
            config,
            sessions: RwLock::new(sessions),
            next_id: AtomicU64::new(next),
        })
    }

    async fn entry(&self, id: &str) -> Result<Arc<Entry>, ServiceError> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Runs `f` on the locked session off the async runtime, then
    /// publishes the event lines it produced.
    async fn with_session<T: Send + 'static>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<(T, Vec<String>), ServiceError> + Send + 'static,
    ) -> Result<T, ServiceError> {
        let entry = self.entry(id).await?;
        let mut guard: OwnedMutexGuard<Session> = entry.session.clone().lock_owned().await;
        let (value, lines) = tokio::task::spawn_blocking(move || f(&mut guard))
            .await
            .map_err(|e| ServiceError::Log(format!("worker failed: {e}")))??;
        for l in lines {
            // No subscribers is fine; they read the backlog when they join.
            let _ = entry.events.send(Arc::from(l));
        }
        Ok(value)
    }
}

fn entry(session: Session) -> Entry {
    let (events, _) = broadcast::channel(1024);
    Entry {
        session: Arc::new(Mutex::new(session)),
        events,
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/domains/{domain}", get(domain_info))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/skills", get(get_skills))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/train", post(train))
        .route("/sessions/{id}/next-problem", post(next_problem))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

/// Parses a JSON body, mapping every failure to 400.
fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid request body: {e}")))
}

#[derive(Serialize)]
struct DomainInfo {
    domain: Domain,
    skill_labels: &'static [&'static str],
}

async fn domain_info(Path(domain): Path<String>) -> Result<Json<DomainInfo>, ServiceError> {
    let domain: Domain = domain.parse()?;
    Ok(Json(DomainInfo {
        domain,
        skill_labels: domain.skill_labels(),
    }))
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Json<SessionView>, ServiceError> {
    let req: CreateRequest = parse(&body)?;
    let id = format!("s{:06}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let log = match &app.config.data_dir {
        Some(dir) => EventLog::create(&dir.join(format!("{id}.ndjson")))?,
        None => EventLog::in_memory(),
    };
    let sid = id.clone();
    let session = tokio::task::spawn_blocking(move || Session::create(sid, req, log))
        .await
        .map_err(|e| ServiceError::Log(format!("worker failed: {e}")))?;
    let session = match session {
        Ok((s, _)) => s,
        Err(e) => {
            if let Some(dir) = &app.config.data_dir {
                let _ = std::fs::remove_file(dir.join(format!("{id}.ndjson")));
            }
            return Err(e);
        }
    };
    let view = session.view();
    app.sessions.write().await.insert(id, Arc::new(entry(session)));
    Ok(Json(view))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    let entry = app.entry(&id).await?;
    let view = entry.session.lock().await.view();
    Ok(Json(view))
}

async fn get_skills(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Vec<SkillExport>>, ServiceError> {
    let entry = app.entry(&id).await?;
    let skills = entry.session.lock().await.skills();
    Ok(Json(skills))
}

async fn step(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<StepResult>, ServiceError> {
    app.with_session(&id, |s| s.step()).await.map(Json)
}

async fn train(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<TrainResult>, ServiceError> {
    let req: TrainRequest = parse(&body)?;
    app.with_session(&id, move |s| s.train(req)).await.map(Json)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NextProblem {
    #[serde(default)]
    problem: Option<ProblemSpec>,
}

async fn next_problem(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<SessionView>, ServiceError> {
    let req: NextProblem = if body.iter().all(u8::is_ascii_whitespace) { NextProblem::default() } else { parse(&body)? };
    app.with_session(&id, move |s| s.next_problem(req.problem)).await.map(Json)
}

#[derive(Deserialize)]
struct EventsQuery {
    /// Last sequence number the client has seen; the stream starts after it.
    #[serde(default)]
    after: u64,
}

fn heartbeat(last_seq: u64) -> String {
    serde_json::json!({ "type": "heartbeat", "last_seq": last_seq }).to_string()
}

/// `seq` of a serialized event line.
fn seq_of(line: &str) -> u64 {
    serde_json::from_str::<serde_json::Value>(line).ok().and_then(|v| v["seq"].as_u64()).unwrap_or(0)
}

async fn events(State(app): State<Arc<AppState>>, Path(id): Path<String>, Query(q): Query<EventsQuery>) -> Result<Response, ServiceError> {
    let entry = app.entry(&id).await?;
    // Subscribe under the session lock so no event falls between the
    // backlog and the live feed.
    let (backlog, mut live) = {
        let s = entry.session.lock().await;
        (s.log().lines_after(q.after).to_vec(), entry.events.subscribe())
    };
    let every = app.config.heartbeat;
    let (tx, rx) = mpsc::channel::<String>(64);
    tokio::spawn(async move {
        let mut last = q.after;
        for l in backlog {
            last = seq_of(&l);
            if tx.send(l).await.is_err() {
                return;
            }
        }
        loop {
            let line = tokio::select! {
                r = live.recv() => match r {
                    Ok(l) => {
                        let seq = seq_of(&l);
                        if seq <= last {
                            continue;
                        }
                        last = seq;
                        l.to_string()
                    }
                    Err(broadcast::error::RecvError::Lagged(_)) => {
                        // Catch up from the log, then keep following.
                        let missed = entry.session.lock().await.log().lines_after(last).to_vec();
                        for l in missed {
                            last = seq_of(&l);
                            if tx.send(l).await.is_err() {
                                return;
                            }
                        }
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => return,
                },
                _ = tokio::time::sleep(every) => heartbeat(last),
                _ = tx.closed() => return,
            };
            if tx.send(line).await.is_err() {
                return;
            }
        }
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|mut l| {
            l.push('\n');
            (Ok::<_, Infallible>(l), rx)
        })
    });
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(stream)).into_response())
}
