//! JSON status/control surface over a running replay.

use std::collections::VecDeque;
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{PeriodRecord, ReplayDriver, RunLog, Stats};
use crate::error::Result;
use crate::learner::LearnerStatus;
use crate::mac_sim::CW_LIMIT;

const RECENT: usize = 120;

/// What readers see; replaced wholesale after every period.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Snapshot {
    pub running: bool,
    pub policy: String,
    /// Completed periods; also the index of the next period to run.
    pub period: u64,
    pub total_periods: u64,
    pub last_record: Option<PeriodRecord>,
    pub load: Option<Stats>,
    pub learner: Option<LearnerStatus>,
    pub recent: VecDeque<PeriodRecord>,
}

pub struct Shared {
    snapshot: RwLock<Arc<Snapshot>>,
    commands: Mutex<Sender<u32>>,
}

impl Shared {
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, driver: &ReplayDriver, running: bool) {
        let prev = self.snapshot();
        let mut recent = prev.recent.clone();
        if let Some(r) = driver.records().last() {
            if recent.back().is_none_or(|b| b.period != r.period) {
                recent.push_back(r.clone());
                if recent.len() > RECENT {
                    recent.pop_front();
                }
            }
        }
        let snap = Snapshot {
            running,
            policy: driver.config().policy.name(),
            period: driver.period(),
            total_periods: driver.total_periods(),
            last_record: driver.records().last().cloned(),
            load: driver.last_stats().cloned(),
            learner: driver.learner_status(),
            recent,
        };
        *self.snapshot.write().expect("snapshot lock") = Arc::new(snap);
    }

    pub fn send_cw(&self, cw: u32) -> bool {
        self.commands.lock().expect("command lock").send(cw).is_ok()
    }
}

/// Wire a driver to a shared snapshot and command queue.
pub fn attach(driver: &mut ReplayDriver) -> Arc<Shared> {
    let (tx, rx) = channel();
    driver.attach_commands(rx);
    let shared = Arc::new(Shared {
        snapshot: RwLock::new(Arc::new(Snapshot::default())),
        commands: Mutex::new(tx),
    });
    shared.publish(driver, true);
    shared
}

/// Run the replay on its own thread, one period per `pace`.
pub fn spawn_replay(mut driver: ReplayDriver, shared: Arc<Shared>, pace: Duration) -> JoinHandle<Result<RunLog>> {
    std::thread::spawn(move || {
        while driver.step()?.is_some() {
            shared.publish(&driver, !driver.is_done());
            if !pace.is_zero() {
                std::thread::sleep(pace);
            }
        }
        shared.publish(&driver, false);
        let output = driver.config().output.clone();
        let log = driver.finish();
        if let Some(p) = output {
            log.save(&p)?;
        }
        Ok(log)
    })
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

async fn status(State(s): State<Arc<Shared>>) -> Response {
    let snap = s.snapshot();
    let learner = snap.learner.as_ref();
    Json(json!({
        "running": snap.running,
        "policy": snap.policy,
        "period": snap.period,
        "total_periods": snap.total_periods,
        "current_cw": snap.last_record.as_ref().and_then(|r| r.cwenf),
        "last_decision": snap.last_record.as_ref().map(|r| r.decision),
        "queue": learner.map(|l| json!({ "calibration": l.calib_queue_len, "predicted": l.pred_queue_len })),
        "table": learner.map(|l| &l.table),
        "degenerate_fit": learner.map(|l| l.degenerate_fit),
        "model": learner.map(|l| &l.model),
        "last_record": snap.last_record,
    }))
    .into_response()
}

async fn load(State(s): State<Arc<Shared>>) -> Response {
    let snap = s.snapshot();
    match &snap.load {
        Some(stats) => Json(json!({
            "period": snap.period.saturating_sub(1),
            "actives": stats.actives,
            "aggregate_tp_bps": stats.aggregate_tp_bps,
            "aps": stats.per_ap,
        }))
        .into_response(),
        None => error(StatusCode::CONFLICT, "no period has completed yet"),
    }
}

async fn metrics(State(s): State<Arc<Shared>>) -> Response {
    let snap = s.snapshot();
    let Some(r) = &snap.last_record else {
        return error(StatusCode::CONFLICT, "no period has completed yet");
    };
    Json(json!({
        "period": r.period,
        "aggregate_tp_bps": r.aggregate_tp_bps,
        "median_latency_us": r.median_latency_us,
        "retry_fraction": r.retry_fraction,
        "actives": r.actives,
        "recent": snap.recent,
    }))
    .into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CwCommand {
    cw: i64,
}

async fn set_cw(State(s): State<Arc<Shared>>, body: Bytes) -> Response {
    let cmd: CwCommand = match serde_json::from_slice(&body) {
        Ok(c) => c,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("expected {{\"cw\": int}}: {e}")),
    };
    if !(1..=CW_LIMIT as i64).contains(&cmd.cw) {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("cw {} outside [1, {CW_LIMIT}]", cmd.cw),
        );
    }
    let snap = s.snapshot();
    if !snap.running {
        return error(StatusCode::CONFLICT, "replay is not running");
    }
    if !s.send_cw(cmd.cw as u32) {
        return error(StatusCode::CONFLICT, "replay has stopped");
    }
    (
        StatusCode::ACCEPTED,
        Json(json!({ "accepted": cmd.cw, "not_before_period": snap.period })),
    )
        .into_response()
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such endpoint")
}

async fn wrong_method() -> Response {
    error(StatusCode::METHOD_NOT_ALLOWED, "method not allowed")
}

pub fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/status", get(status))
        .route("/load", get(load))
        .route("/metrics", get(metrics))
        .route("/cw", axum::routing::post(set_cw))
        .fallback(not_found)
        .method_not_allowed_fallback(wrong_method)
        .with_state(shared)
}

pub async fn serve(listener: tokio::net::TcpListener, shared: Arc<Shared>) -> std::io::Result<()> {
    axum::serve(listener, router(shared)).await
}
