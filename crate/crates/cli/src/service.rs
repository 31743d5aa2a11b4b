//! HTTP API over one scored run. The bundle and the verdict scores are
//! read-only; the only mutable state is the analyst's group verdicts, which go
//! through the journal before they become visible.

use std::collections::{BTreeMap, HashSet};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use anyhow::{bail, Context, Result};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use flowstate::automaton::StateId;
use flowstate::bundle::ModelBundle;
use flowstate::eval::{roc_auc, RocCurve};
use flowstate::scorer::{group_anomalies, link_flows, ranked_members, AnomalyGroup, GroupVerdict, TraceVerdict};
use flowstate::{FlowRecord, Label};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::commands::ScoredFile;
use crate::journal::{replay, Journal, JournalEntry};

const DEFAULT_LIMIT: usize = 10;

pub struct Triage {
    bundle: ModelBundle,
    scored: ScoredFile,
    root_causes: HashSet<StateId>,
    verdicts: RwLock<BTreeMap<StateId, GroupVerdict>>,
    journal: Mutex<Journal>,
}

impl Triage {
    /// Checks that the scored run belongs to the bundle, then replays the journal.
    pub fn open(bundle: ModelBundle, scored: ScoredFile, journal: &Path) -> Result<Self> {
        let n = bundle.automaton.num_states();
        if let Some(v) = scored.verdicts.iter().find(|v| v.state_sequence.iter().any(|&q| q >= n)) {
            bail!("trace {} visits a state the model does not have; was it scored with another model?", v.seq_no);
        }
        if scored.verdicts.iter().enumerate().any(|(i, v)| v.seq_no != i) {
            bail!("scored traces are not numbered in stream order");
        }
        let (journal, entries) = Journal::open(journal)?;
        tracing::info!(entries = entries.len(), "replayed verdict journal");
        Ok(Self {
            root_causes: scored.verdicts.iter().map(|v| v.root_cause).collect(),
            verdicts: RwLock::new(replay(&entries)),
            journal: Mutex::new(journal),
            bundle,
            scored,
        })
    }

    pub fn load(bundle: &Path, scored: &Path, journal: &Path) -> Result<Self> {
        let b = ModelBundle::load(bundle).with_context(|| format!("loading model {}", bundle.display()))?;
        Self::open(b, ScoredFile::load(scored)?, journal)
    }

    fn snapshot(&self) -> BTreeMap<StateId, GroupVerdict> {
        self.verdicts.read().expect("verdict lock poisoned").clone()
    }

    fn groups(&self, min_score: Option<f64>) -> Vec<AnomalyGroup> {
        let marks = self.snapshot();
        let mut groups = group_anomalies(&self.scored.verdicts, min_score.unwrap_or(self.scored.threshold));
        for g in &mut groups {
            g.verdict = marks.get(&g.root_cause).copied().unwrap_or_default();
        }
        groups
    }

    fn group(&self, id: StateId, min_score: Option<f64>) -> Result<AnomalyGroup, ApiError> {
        self.groups(min_score)
            .into_iter()
            .find(|g| g.root_cause == id)
            .ok_or_else(|| ApiError::NotFound(format!("no alert group with root cause {id}")))
    }

    /// Journals the verdict, then publishes it.
    fn set_verdict(&self, group: StateId, verdict: GroupVerdict, actor: String) -> Result<()> {
        let entry = JournalEntry {
            timestamp: chrono::Utc::now().to_rfc3339(),
            group,
            verdict,
            actor,
        };
        let mut journal = self.journal.lock().expect("journal lock poisoned");
        journal.append(&entry)?;
        self.verdicts.write().expect("verdict lock poisoned").insert(group, verdict);
        Ok(())
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Unavailable(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Unavailable(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": msg }))).into_response()
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct Filter {
    min_score: Option<f64>,
    limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub root_cause: StateId,
    pub size: usize,
    pub verdict: GroupVerdict,
    pub top_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub seq_no: usize,
    pub anomaly_score: f64,
    pub root_cause: StateId,
    pub root_cause_flow_line: usize,
    pub group_verdict: GroupVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub state: StateId,
    pub symbol: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateInfo {
    pub id: StateId,
    /// Visits by the training traces replayed on the final model.
    pub train_count: u64,
    pub train_total: u64,
    /// Transitions into this state; `state` is the source.
    pub incoming: Vec<Edge>,
    /// Transitions out of this state; `state` is the target.
    pub outgoing: Vec<Edge>,
}

#[derive(Debug, Deserialize)]
pub struct VerdictBody {
    pub verdict: GroupVerdict,
    #[serde(default)]
    pub actor: Option<String>,
}

type Shared = State<Arc<Triage>>;

pub fn router(triage: Arc<Triage>) -> Router {
    Router::new()
        .route("/groups", get(list_groups))
        .route("/groups/{id}/traces", get(group_traces))
        .route("/groups/{id}/flows", get(group_flows))
        .route("/groups/{id}/verdict", post(post_verdict))
        .route("/traces/{seq_no}", get(trace))
        .route("/model/states/{id}", get(model_state))
        .route("/alerts", get(alerts))
        .route("/roc", get(roc))
        .with_state(triage)
}

async fn list_groups(State(t): Shared, Query(f): Query<Filter>) -> Json<Vec<GroupRow>> {
    let rows = t
        .groups(f.min_score)
        .into_iter()
        .map(|g| GroupRow {
            root_cause: g.root_cause,
            size: g.size,
            verdict: g.verdict,
            top_score: g.top_score,
        })
        .collect();
    Json(rows)
}

async fn group_traces(
    State(t): Shared,
    UrlPath(id): UrlPath<StateId>,
    Query(f): Query<Filter>,
) -> Result<Json<Vec<TraceVerdict>>, ApiError> {
    let g = t.group(id, f.min_score)?;
    let members = ranked_members(&g, &t.scored.verdicts)
        .into_iter()
        .take(f.limit.unwrap_or(DEFAULT_LIMIT))
        .cloned()
        .collect();
    Ok(Json(members))
}

async fn group_flows(
    State(t): Shared,
    UrlPath(id): UrlPath<StateId>,
    Query(f): Query<Filter>,
) -> Result<Json<Vec<FlowRecord>>, ApiError> {
    let g = t.group(id, f.min_score)?;
    link_flows(&g, &t.scored.verdicts, &t.scored.flows, f.limit.unwrap_or(DEFAULT_LIMIT))
        .map(Json)
        .map_err(|e| ApiError::Internal(e.to_string()))
}

async fn post_verdict(
    State(t): Shared,
    UrlPath(id): UrlPath<StateId>,
    Json(body): Json<VerdictBody>,
) -> Result<StatusCode, ApiError> {
    if !t.root_causes.contains(&id) {
        return Err(ApiError::NotFound(format!("state {id} is not the root cause of any trace")));
    }
    let actor = body.actor.unwrap_or_else(|| "analyst".into());
    tracing::info!(group = id, verdict = body.verdict.as_str(), %actor, "verdict");
    t.set_verdict(id, body.verdict, actor)
        .map_err(|e| ApiError::Internal(format!("{e:#}")))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn trace(State(t): Shared, UrlPath(seq_no): UrlPath<usize>) -> Result<Json<TraceVerdict>, ApiError> {
    t.scored
        .verdicts
        .get(seq_no)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("no trace {seq_no}")))
}

async fn model_state(State(t): Shared, UrlPath(id): UrlPath<StateId>) -> Result<Json<StateInfo>, ApiError> {
    let m = &t.bundle.automaton;
    if id >= m.num_states() {
        return Err(ApiError::NotFound(format!("no state {id}")));
    }
    let sym = |s| m.symbol(s).as_str().to_string();
    let incoming = m
        .incoming(id)
        .into_iter()
        .map(|(src, s, count)| Edge { state: src, symbol: sym(s), count })
        .collect();
    let outgoing = m
        .state(id)
        .transitions
        .iter()
        .map(|(&s, tr)| Edge { state: tr.target, symbol: sym(s), count: tr.count })
        .collect();
    Ok(Json(StateInfo {
        id,
        train_count: t.bundle.training_counts.per_state[id],
        train_total: t.bundle.training_counts.total,
        incoming,
        outgoing,
    }))
}

/// Traces at or above the threshold, highest score first, minus every group
/// an analyst has dismissed.
async fn alerts(State(t): Shared, Query(f): Query<Filter>) -> Json<Vec<Alert>> {
    let marks = t.snapshot();
    let threshold = f.min_score.unwrap_or(t.scored.threshold);
    let mut out: Vec<Alert> = t
        .scored
        .verdicts
        .iter()
        .filter(|v| v.anomaly_score >= threshold)
        .filter_map(|v| {
            let group_verdict = marks.get(&v.root_cause).copied().unwrap_or_default();
            (group_verdict != GroupVerdict::FalsePositive).then_some(Alert {
                seq_no: v.seq_no,
                anomaly_score: v.anomaly_score,
                root_cause: v.root_cause,
                root_cause_flow_line: v.root_cause_flow_line,
                group_verdict,
            })
        })
        .collect();
    out.sort_by(|a, b| b.anomaly_score.total_cmp(&a.anomaly_score).then(a.seq_no.cmp(&b.seq_no)));
    if let Some(k) = f.limit {
        out.truncate(k);
    }
    Json(out)
}

/// ROC of the trace scores against their labels; traces without a label
/// are left out.
async fn roc(State(t): Shared) -> Result<Json<RocCurve>, ApiError> {
    let (scores, malicious): (Vec<f64>, Vec<bool>) = t
        .scored
        .verdicts
        .iter()
        .filter(|v| v.label != Label::Unknown)
        .map(|v| (v.anomaly_score, v.label == Label::Malicious))
        .unzip();
    roc_auc(&scores, &malicious)
        .map(Json)
        .map_err(|e| ApiError::Unavailable(format!("no ground truth: {e}")))
}

/// Binds first so a busy port is reported before anything is served.
pub async fn bind(addr: SocketAddr) -> Result<TcpListener> {
    TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot listen on {addr}"))
}

pub async fn serve(listener: TcpListener, triage: Arc<Triage>) -> Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(triage))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("server error")
}
