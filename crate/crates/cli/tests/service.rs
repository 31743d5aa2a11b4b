mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::*;
use flowstate::bundle::ModelBundle;
use flowstate::config::ModelConfig;
use flowstate::pipeline::{score, train};
use flowstate::scorer::{GroupVerdict, TraceVerdict};
use flowstate::synth::{generate, Generator, TrafficParams};
use flowstate::{FlowRecord, Label};
use flowstate_cli::commands::ScoredFile;
use flowstate_cli::journal::{Journal, JournalEntry};
use flowstate_cli::service::{bind, router, Alert, GroupRow, StateInfo, Triage};
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use tower::ServiceExt;

struct Fixture {
    bundle: ModelBundle,
    scored: ScoredFile,
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        // the burst scenario: 20k benign training flows, a 1k-flow burst in 8k
        let g = Generator::five_state();
        let trainf = generate(&g, &TrafficParams { benign_flows: 20_000, attack_flows: 0, ..Default::default() }, 11);
        let test = generate(&g, &TrafficParams { benign_flows: 8_000, attack_flows: 1_000, ..Default::default() }, 12);
        let trained = train(trainf, &ModelConfig::default(), &canonical()).unwrap();
        let run = score(&trained.bundle, &test, None).unwrap();
        Self {
            scored: ScoredFile::new(run, &test),
            bundle: trained.bundle,
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn journal(&self) -> std::path::PathBuf {
        self.dir.path().join("verdicts.jsonl")
    }

    fn app(&self) -> Router {
        let t = Triage::open(self.bundle.clone(), self.scored.clone(), &self.journal()).unwrap();
        router(Arc::new(t))
    }
}

async fn get<T: DeserializeOwned>(app: &Router, uri: &str) -> T {
    let (status, body) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK, "{uri}: {}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

async fn status(app: &Router, uri: &str) -> StatusCode {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await.0
}

async fn post_verdict(app: &Router, group: usize, body: &str) -> StatusCode {
    let req = Request::post(format!("/groups/{group}/verdict"))
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    call(app, req).await.0
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

/// Alert counts per root cause, tallied directly from the verdicts.
fn tally(verdicts: &[TraceVerdict], threshold: f64) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for v in verdicts {
        if v.anomaly_score >= threshold {
            *m.entry(v.root_cause).or_default() += 1;
        }
    }
    m
}

#[tokio::test]
async fn groups_come_largest_first_and_match_a_tally() {
    let fx = Fixture::new();
    let app = fx.app();
    for min_score in [None, Some(0.0), Some(fx.scored.threshold + 0.5)] {
        let uri = match min_score {
            Some(r) => format!("/groups?min_score={r}"),
            None => "/groups".into(),
        };
        let rows: Vec<GroupRow> = get(&app, &uri).await;
        let expected = tally(&fx.scored.verdicts, min_score.unwrap_or(fx.scored.threshold));
        assert_eq!(rows.len(), expected.len());
        for r in &rows {
            assert_eq!(expected[&r.root_cause], r.size);
            assert_eq!(r.verdict, GroupVerdict::Unreviewed);
        }
        assert!(rows.windows(2).all(|w| w[0].size >= w[1].size));
    }
    let default: Vec<GroupRow> = get(&app, "/groups").await;
    assert!(!default.is_empty());
}

#[tokio::test]
async fn group_drilldown_lists_members_and_linked_flows_by_score() {
    let fx = Fixture::new();
    let app = fx.app();
    let rows: Vec<GroupRow> = get(&app, "/groups").await;
    let top = rows[0].root_cause;

    let traces: Vec<TraceVerdict> = get(&app, &format!("/groups/{top}/traces?limit=5")).await;
    assert_eq!(traces.len(), 5.min(rows[0].size));
    assert!(traces.iter().all(|t| t.root_cause == top));
    assert!(traces.windows(2).all(|w| w[0].anomaly_score >= w[1].anomaly_score));
    assert_eq!(traces[0].anomaly_score, rows[0].top_score);

    let flows: Vec<FlowRecord> = get(&app, &format!("/groups/{top}/flows")).await;
    assert_eq!(flows.len(), 10.min(rows[0].size));
    let members: Vec<TraceVerdict> = get(&app, &format!("/groups/{top}/traces?limit=10")).await;
    for (f, t) in flows.iter().zip(&members) {
        assert_eq!(f.line_index, t.root_cause_flow_line);
    }
    // the burst owns the top group, so its linked flows are the attack's port
    assert!(flows.iter().all(|f| f.dst_port == Some(25)), "{flows:?}");

    assert_eq!(status(&app, "/groups/999999/traces").await, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn trace_and_state_views() {
    let fx = Fixture::new();
    let app = fx.app();
    let v: TraceVerdict = get(&app, "/traces/3").await;
    assert_eq!(v, fx.scored.verdicts[3]);
    assert_eq!(v.state_sequence.len(), v.line_span.len());
    let n = fx.scored.verdicts.len();
    assert_eq!(status(&app, &format!("/traces/{n}")).await, StatusCode::NOT_FOUND);

    let m = &fx.bundle.automaton;
    let mut in_edges = 0;
    for id in 0..m.num_states() {
        let s: StateInfo = get(&app, &format!("/model/states/{id}")).await;
        assert_eq!(s.train_count, fx.bundle.training_counts.per_state[id]);
        assert_eq!(s.outgoing.len(), m.state(id).transitions.len());
        for e in &s.outgoing {
            let sym = m.symbol_id(&e.symbol).unwrap();
            assert_eq!(m.next(id, sym), Some(e.state));
        }
        in_edges += s.incoming.len();
    }
    assert_eq!(in_edges, m.num_transitions());
    assert_eq!(status(&app, &format!("/model/states/{}", m.num_states())).await, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn false_positive_groups_leave_the_alert_queue() {
    let fx = Fixture::new();
    let app = fx.app();
    let before: Vec<Alert> = get(&app, "/alerts").await;
    assert!(before.windows(2).all(|w| w[0].anomaly_score >= w[1].anomaly_score));
    let alerting = fx.scored.verdicts.iter().filter(|v| v.anomaly_score >= fx.scored.threshold).count();
    assert_eq!(before.len(), alerting);

    let rows: Vec<GroupRow> = get(&app, "/groups").await;
    let dismissed = rows[0].root_cause;
    assert_eq!(post_verdict(&app, dismissed, r#"{"verdict":"false_positive"}"#).await, StatusCode::NO_CONTENT);

    let after: Vec<Alert> = get(&app, "/alerts").await;
    assert_eq!(after.len(), before.len() - rows[0].size);
    assert!(after.iter().all(|a| a.root_cause != dismissed));
    let rows_after: Vec<GroupRow> = get(&app, "/groups").await;
    let marked = rows_after.iter().find(|r| r.root_cause == dismissed).unwrap();
    assert_eq!(marked.verdict, GroupVerdict::FalsePositive);
    assert_eq!(marked.size, rows[0].size);

    // a malicious mark keeps the group and tags its alerts
    let other = rows[1].root_cause;
    assert_eq!(post_verdict(&app, other, r#"{"verdict":"malicious","actor":"bo"}"#).await, StatusCode::NO_CONTENT);
    let tagged: Vec<Alert> = get(&app, "/alerts").await;
    assert_eq!(tagged.len(), after.len());
    assert!(tagged.iter().filter(|a| a.root_cause == other).all(|a| a.group_verdict == GroupVerdict::Malicious));

    // scores themselves never change
    let v: TraceVerdict = get(&app, "/traces/0").await;
    assert_eq!(v, fx.scored.verdicts[0]);
}

#[tokio::test]
async fn verdicts_survive_a_restart() {
    let fx = Fixture::new();
    let rows: Vec<GroupRow> = get(&fx.app(), "/groups").await;
    let (a, b) = (rows[0].root_cause, rows[1].root_cause);
    {
        let app = fx.app();
        post_verdict(&app, a, r#"{"verdict":"malicious"}"#).await;
        post_verdict(&app, b, r#"{"verdict":"false_positive"}"#).await;
        post_verdict(&app, a, r#"{"verdict":"false_positive"}"#).await;
    }
    let app = fx.app();
    let rows: Vec<GroupRow> = get(&app, "/groups").await;
    let verdict = |id| rows.iter().find(|r| r.root_cause == id).unwrap().verdict;
    assert_eq!(verdict(a), GroupVerdict::FalsePositive);
    assert_eq!(verdict(b), GroupVerdict::FalsePositive);
    let alerts: Vec<Alert> = get(&app, "/alerts").await;
    assert!(alerts.iter().all(|x| x.root_cause != a && x.root_cause != b));

    let (_, entries) = Journal::open(fx.journal()).unwrap();
    let groups: Vec<usize> = entries.iter().map(|e: &JournalEntry| e.group).collect();
    assert_eq!(groups, [a, b, a]);
    assert!(entries.iter().all(|e| chrono::DateTime::parse_from_rfc3339(&e.timestamp).is_ok()));
    assert_eq!(entries[0].actor, "analyst");
}

#[tokio::test]
async fn bad_verdicts_are_rejected_without_journalling() {
    let fx = Fixture::new();
    let app = fx.app();
    let rows: Vec<GroupRow> = get(&app, "/groups").await;
    let id = rows[0].root_cause;
    assert!(post_verdict(&app, id, r#"{"verdict":"maybe"}"#).await.is_client_error());
    assert!(post_verdict(&app, id, "not json").await.is_client_error());
    let never = fx.bundle.automaton.num_states() + 7;
    assert_eq!(post_verdict(&app, never, r#"{"verdict":"malicious"}"#).await, StatusCode::NOT_FOUND);
    let (_, entries) = Journal::open(fx.journal()).unwrap();
    assert!(entries.is_empty());
}

#[tokio::test]
async fn roc_needs_ground_truth() {
    let fx = Fixture::new();
    let curve: flowstate::eval::RocCurve = get(&fx.app(), "/roc").await;
    let (scores, malicious): (Vec<f64>, Vec<bool>) = fx
        .scored
        .verdicts
        .iter()
        .map(|v| (v.anomaly_score, v.label == Label::Malicious))
        .unzip();
    let direct = flowstate::eval::roc_auc(&scores, &malicious).unwrap();
    assert_eq!(curve, direct);

    let mut unlabelled = Fixture::new();
    for v in &mut unlabelled.scored.verdicts {
        v.label = Label::Unknown;
    }
    assert_eq!(status(&unlabelled.app(), "/roc").await, StatusCode::CONFLICT);
}

#[test]
fn scored_run_from_another_model_is_refused() {
    let fx = Fixture::new();
    let mut scored = fx.scored.clone();
    scored.verdicts[0].state_sequence[0] = fx.bundle.automaton.num_states();
    assert!(Triage::open(fx.bundle.clone(), scored, &fx.journal()).is_err());
}

#[tokio::test]
async fn busy_port_fails_at_startup() {
    let first = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = first.local_addr().unwrap();
    let err = bind(addr).await.unwrap_err();
    assert!(err.to_string().contains("cannot listen"), "{err:#}");
}

#[test]
fn journal_rejects_corrupt_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("j.jsonl");
    std::fs::write(&p, "{\"timestamp\":\"t\",\"group\":1,\"verdict\":\"malicious\",\"actor\":\"a\"}\n\ngarbage\n").unwrap();
    let err = Journal::open(&p).unwrap_err();
    assert!(format!("{err:#}").contains("line 3"), "{err:#}");
}
