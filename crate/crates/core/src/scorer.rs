//! Rolling state-frequency anomaly scores.
//!
//! Each test trace is replayed on the learned machine. For a state `q` the
//! positional score is
//!
//! ```text
//! ln((observed[q] + a) / E_q),   E_q = (train[q] + a) / (train_total + a*|Q|) * UC
//! ```
//!
//! where `observed[q]` counts test-time visits so far (including the current
//! one), `a` is the smoothing pseudocount, and `UC` is the running sum over
//! processed traces of the number of distinct states each trace visited. UC is
//! bumped once per trace before any of its positions is scored.
//!
//! [`UcStep::Positions`] counts every position into UC instead, which puts
//! `observed` and `E` on the same footing so that a stream drawn from the
//! training distribution scores about 0.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::automaton::{Automaton, ReplayResult, StateId};
use crate::error::{Error, Result};
use crate::flow::{FlowRecord, Label};
use crate::tracegen::Trace;

/// How the per-state scores of one trace are summed into its anomaly score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Each visited state contributes the score of its last visit.
    #[default]
    LastVisit,
    /// Each visited state contributes its highest positional score.
    Max,
    /// Every position contributes.
    VisitSum,
}

/// What a trace adds to UC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UcStep {
    /// The number of distinct states the trace visited.
    #[default]
    DistinctStates,
    /// The trace length.
    Positions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreParams {
    pub alpha_smooth: f64,
    pub aggregation: Aggregation,
    pub uc_step: UcStep,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self {
            alpha_smooth: 1.0,
            aggregation: Aggregation::LastVisit,
            uc_step: UcStep::DistinctStates,
        }
    }
}

/// Per-state visit counts of the training traces replayed on the final machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingCounts {
    pub per_state: Vec<u64>,
    pub total: u64,
}

impl TrainingCounts {
    pub fn from_replay<'a, I>(machine: &Automaton, traces: I) -> Self
    where
        I: IntoIterator<Item = &'a Trace>,
    {
        let mut per_state = vec![0u64; machine.num_states()];
        for t in traces {
            for q in machine.replay(&t.symbols).state_sequence {
                per_state[q] += 1;
            }
        }
        let total = per_state.iter().sum();
        Self { per_state, total }
    }
}

/// Mutable test-time bookkeeping. Traces must be applied in stream order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLedger {
    observed: Vec<u64>,
    uc: u64,
    train_count: Vec<u64>,
    train_total: u64,
    alpha_smooth: f64,
    aggregation: Aggregation,
    uc_step: UcStep,
}

impl ScoreLedger {
    pub fn new(counts: &TrainingCounts, params: &ScoreParams) -> Self {
        Self {
            observed: vec![0; counts.per_state.len()],
            uc: 0,
            train_count: counts.per_state.clone(),
            train_total: counts.total,
            alpha_smooth: params.alpha_smooth,
            aggregation: params.aggregation,
            uc_step: params.uc_step,
        }
    }

    pub fn uc(&self) -> u64 {
        self.uc
    }

    pub fn observed(&self, q: StateId) -> u64 {
        self.observed[q]
    }

    pub fn num_states(&self) -> usize {
        self.train_count.len()
    }

    /// Share of training visits that fell on `q`, smoothed.
    pub fn train_ratio(&self, q: StateId) -> f64 {
        let a = self.alpha_smooth;
        (self.train_count[q] as f64 + a) / (self.train_total as f64 + a * self.num_states() as f64)
    }

    /// Expected visits of `q` given `uc` distinct-state observations so far.
    pub fn expected(&self, q: StateId, uc: u64) -> f64 {
        self.train_ratio(q) * uc.max(1) as f64
    }

    /// Applies one trace to the ledger and returns the score of each position.
    pub fn observe(&mut self, replay: &ReplayResult) -> Vec<f64> {
        self.uc += match self.uc_step {
            UcStep::DistinctStates => replay.visited_set.len(),
            UcStep::Positions => replay.state_sequence.len(),
        } as u64;
        let uc = self.uc;
        replay
            .state_sequence
            .iter()
            .map(|&q| {
                self.observed[q] += 1;
                ((self.observed[q] as f64 + self.alpha_smooth) / self.expected(q, uc)).ln()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceVerdict {
    pub seq_no: usize,
    pub anomaly_score: f64,
    pub root_cause: StateId,
    pub per_state_scores: BTreeMap<StateId, f64>,
    pub root_cause_flow_line: usize,
    pub state_sequence: Vec<StateId>,
    pub positional_scores: Vec<f64>,
    pub line_span: Vec<usize>,
    pub label: Label,
}

/// The state holding the largest positional score, and that position; the
/// earliest position wins ties.
pub fn root_cause(states: &[StateId], scores: &[f64]) -> Option<(StateId, usize)> {
    let mut best: Option<(StateId, usize)> = None;
    for (i, (&q, &s)) in states.iter().zip(scores).enumerate() {
        if best.is_none_or(|(_, b)| s > scores[b]) {
            best = Some((q, i));
        }
    }
    best
}

pub fn score_trace(
    ledger: &mut ScoreLedger,
    replay: &ReplayResult,
    trace: &Trace,
) -> Result<TraceVerdict> {
    if replay.state_sequence.len() != trace.len() || trace.line_span.len() != trace.len() {
        return Err(Error::Internal(format!(
            "trace {} has {} symbols, {} lines but replay produced {} states",
            trace.seq_no,
            trace.len(),
            trace.line_span.len(),
            replay.state_sequence.len()
        )));
    }
    if trace.is_empty() {
        return Err(Error::Internal(format!("trace {} is empty", trace.seq_no)));
    }
    let positional = ledger.observe(replay);

    let mut last: BTreeMap<StateId, f64> = BTreeMap::new();
    let mut max: BTreeMap<StateId, f64> = BTreeMap::new();
    for (&q, &s) in replay.state_sequence.iter().zip(&positional) {
        last.insert(q, s);
        max.entry(q).and_modify(|m: &mut f64| *m = m.max(s)).or_insert(s);
    }
    let (per_state_scores, anomaly_score) = match ledger.aggregation {
        Aggregation::LastVisit => {
            let sum = last.values().sum();
            (last, sum)
        }
        Aggregation::Max => {
            let sum = max.values().sum();
            (max, sum)
        }
        Aggregation::VisitSum => {
            let sum = positional.iter().sum();
            let mut per: BTreeMap<StateId, f64> = BTreeMap::new();
            for (&q, &s) in replay.state_sequence.iter().zip(&positional) {
                *per.entry(q).or_default() += s;
            }
            (per, sum)
        }
    };
    let (cause, pos) =
        root_cause(&replay.state_sequence, &positional).expect("trace is non-empty");
    Ok(TraceVerdict {
        seq_no: trace.seq_no,
        anomaly_score,
        root_cause: cause,
        per_state_scores,
        root_cause_flow_line: trace.line_span[pos],
        state_sequence: replay.state_sequence.clone(),
        positional_scores: positional,
        line_span: trace.line_span.clone(),
        label: trace.label,
    })
}

/// Scores traces in order. Replays are independent and may be computed in
/// parallel; the ledger is applied strictly sequentially.
pub fn score_stream(
    machine: &Automaton,
    ledger: &mut ScoreLedger,
    traces: &[Trace],
) -> Result<Vec<TraceVerdict>> {
    #[cfg(feature = "parallel")]
    let replays: Vec<ReplayResult> = {
        use rayon::prelude::*;
        traces.par_iter().map(|t| machine.replay(&t.symbols)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let replays: Vec<ReplayResult> = traces.iter().map(|t| machine.replay(&t.symbols)).collect();

    traces
        .iter()
        .zip(&replays)
        .map(|(t, r)| score_trace(ledger, r, t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroupVerdict {
    #[default]
    Unreviewed,
    FalsePositive,
    Malicious,
}

impl GroupVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupVerdict::Unreviewed => "unreviewed",
            GroupVerdict::FalsePositive => "false_positive",
            GroupVerdict::Malicious => "malicious",
        }
    }
}

impl std::str::FromStr for GroupVerdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unreviewed" => Ok(GroupVerdict::Unreviewed),
            "false_positive" => Ok(GroupVerdict::FalsePositive),
            "malicious" => Ok(GroupVerdict::Malicious),
            other => Err(Error::Config(format!("unknown verdict `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyGroup {
    pub root_cause: StateId,
    /// Member seq_nos in stream order.
    pub members: Vec<usize>,
    pub size: usize,
    pub top_score: f64,
    pub verdict: GroupVerdict,
}

/// Groups alerts (score ≥ threshold) by root cause, largest group first;
/// equal sizes are ordered by state id.
pub fn group_anomalies(verdicts: &[TraceVerdict], threshold: f64) -> Vec<AnomalyGroup> {
    let mut by_cause: BTreeMap<StateId, AnomalyGroup> = BTreeMap::new();
    for v in verdicts.iter().filter(|v| v.anomaly_score >= threshold) {
        let g = by_cause.entry(v.root_cause).or_insert_with(|| AnomalyGroup {
            root_cause: v.root_cause,
            members: Vec::new(),
            size: 0,
            top_score: f64::NEG_INFINITY,
            verdict: GroupVerdict::Unreviewed,
        });
        g.members.push(v.seq_no);
        g.size += 1;
        g.top_score = g.top_score.max(v.anomaly_score);
    }
    let mut groups: Vec<AnomalyGroup> = by_cause.into_values().collect();
    groups.sort_by(|a, b| b.size.cmp(&a.size).then(a.root_cause.cmp(&b.root_cause)));
    groups
}

/// Members of `group` ranked by anomaly score (descending, then seq_no).
pub fn ranked_members<'a>(group: &AnomalyGroup, verdicts: &'a [TraceVerdict]) -> Vec<&'a TraceVerdict> {
    let by_seq: HashMap<usize, &TraceVerdict> = verdicts.iter().map(|v| (v.seq_no, v)).collect();
    let mut members: Vec<&TraceVerdict> = group
        .members
        .iter()
        .filter_map(|s| by_seq.get(s).copied())
        .collect();
    members.sort_by(|a, b| {
        b.anomaly_score
            .total_cmp(&a.anomaly_score)
            .then(a.seq_no.cmp(&b.seq_no))
    });
    members
}

/// The root-cause flow of each of the group's `k` highest-scoring traces.
pub fn link_flows(
    group: &AnomalyGroup,
    verdicts: &[TraceVerdict],
    flows: &[FlowRecord],
    k: usize,
) -> Result<Vec<FlowRecord>> {
    let by_line: HashMap<usize, &FlowRecord> = flows.iter().map(|f| (f.line_index, f)).collect();
    ranked_members(group, verdicts)
        .into_iter()
        .take(k)
        .map(|v| {
            by_line
                .get(&v.root_cause_flow_line)
                .map(|&f| f.clone())
                .ok_or_else(|| {
                    Error::Internal(format!(
                        "trace {} links to line {} which is not among the flows",
                        v.seq_no, v.root_cause_flow_line
                    ))
                })
        })
        .collect()
}

/// Nearest-rank percentile, `p` in [0, 100]. Empty input gives +inf so that
/// nothing crosses the threshold.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// `seq_no,score,root_cause,flow_line`
pub fn write_verdicts_csv<W: Write>(w: W, verdicts: &[TraceVerdict]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["seq_no", "score", "root_cause", "flow_line"])?;
    for v in verdicts {
        w.write_record([
            v.seq_no.to_string(),
            v.anomaly_score.to_string(),
            v.root_cause.to_string(),
            v.root_cause_flow_line.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<verdicts>", e))?;
    Ok(())
}

/// `root_cause,size,verdict`
pub fn write_groups_csv<W: Write>(w: W, groups: &[AnomalyGroup]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["root_cause", "size", "verdict"])?;
    for g in groups {
        w.write_record([
            g.root_cause.to_string(),
            g.size.to_string(),
            g.verdict.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<groups>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::flow::ConnectionKey;
    use crate::tracegen::EventSymbol;

    fn ledger(train: Vec<u64>, alpha: f64) -> ScoreLedger {
        let total = train.iter().sum();
        ScoreLedger::new(
            &TrainingCounts {
                per_state: train,
                total,
            },
            &ScoreParams {
                alpha_smooth: alpha,
                ..Default::default()
            },
        )
    }

    fn replay_of(states: &[StateId]) -> ReplayResult {
        ReplayResult {
            state_sequence: states.to_vec(),
            reset_positions: vec![],
            visited_set: states.iter().copied().collect::<BTreeSet<_>>(),
        }
    }

    fn trace(seq_no: usize, len: usize) -> Trace {
        Trace {
            symbols: vec![EventSymbol::from("x"); len],
            connection: ConnectionKey::new("a", "b"),
            line_span: (100..100 + len).collect(),
            seq_no,
            label: Label::Benign,
        }
    }

    #[test]
    fn worked_root_cause_example() {
        let q = [1, 4, 7, 8, 4, 4, 4];
        let a = [0.19, 0.20, 0.18, 0.16, 0.50, 0.60, 0.65];
        assert_eq!(root_cause(&q, &a), Some((4, 6)));
    }

    #[test]
    fn root_cause_ties_go_to_earliest() {
        assert_eq!(root_cause(&[3, 9, 3], &[0.5, 0.7, 0.7]), Some((9, 1)));
        assert_eq!(root_cause(&[], &[]), None);
    }

    #[test]
    fn expectation_met_scores_zero() {
        // state 0 holds half the training mass; uc is driven to 10 and state 0 seen 5 times
        let mut l = ledger(vec![5, 5], 0.0);
        l.uc = 9;
        l.observed[0] = 4;
        let s = l.observe(&replay_of(&[0]));
        assert_eq!(l.uc(), 10);
        assert!((l.expected(0, 10) - 5.0).abs() < 1e-12);
        assert!(s[0].abs() < 1e-12);
    }

    #[test]
    fn doubling_scores_ln2() {
        let mut l = ledger(vec![5, 5], 0.0);
        l.uc = 9;
        l.observed[0] = 9;
        let s = l.observe(&replay_of(&[0]));
        assert!((s[0] - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn unseen_state_smoothed() {
        let mut train = vec![0u64; 50];
        for c in train.iter_mut().skip(1) {
            *c = 1000 / 49;
        }
        train[1] += 1000 - train.iter().sum::<u64>();
        let mut l = ledger(train, 1.0);
        l.uc = 99;
        let s = l.observe(&replay_of(&[0]));
        assert!((s[0] - 21f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn trace_score_sums_last_visits() {
        let mut l = ledger(vec![10, 10, 10], 0.0);
        let t = trace(0, 3);
        let v = score_trace(&mut l, &replay_of(&[0, 1, 0]), &t).unwrap();
        // uc = 2; E = 2/3 for every state; state 0 last seen with 2 observations
        let s0 = (2.0 / (2.0 / 3.0f64)).ln();
        let s1 = (1.0 / (2.0 / 3.0f64)).ln();
        assert!((v.per_state_scores[&0] - s0).abs() < 1e-12);
        assert!((v.anomaly_score - (s0 + s1)).abs() < 1e-12);
        assert_eq!(v.root_cause, 0);
        assert_eq!(v.root_cause_flow_line, 102);
    }

    #[test]
    fn aggregation_variants() {
        let t = trace(0, 3);
        let mut l = ledger(vec![10, 10, 10], 0.0);
        l.aggregation = Aggregation::VisitSum;
        let v = score_trace(&mut l, &replay_of(&[0, 1, 0]), &t).unwrap();
        let sum: f64 = v.positional_scores.iter().sum();
        assert!((v.anomaly_score - sum).abs() < 1e-12);

        let mut l = ledger(vec![10, 10, 10], 0.0);
        l.aggregation = Aggregation::Max;
        let v = score_trace(&mut l, &replay_of(&[0, 1, 0]), &t).unwrap();
        assert!((v.per_state_scores[&0] - v.positional_scores[2]).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_internal_error() {
        let mut l = ledger(vec![1, 1], 1.0);
        let err = score_trace(&mut l, &replay_of(&[0, 1]), &trace(0, 3)).unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
    }

    #[test]
    fn monotone_in_visits_with_fixed_uc() {
        let mut l = ledger(vec![3, 7], 1.0);
        l.uc = 1000;
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..20 {
            l.uc -= 1; // observe() adds the one distinct state back
            let s = l.observe(&replay_of(&[1]))[0];
            assert!(s > prev);
            prev = s;
        }
    }

    fn verdict(seq_no: usize, score: f64, root: StateId) -> TraceVerdict {
        TraceVerdict {
            seq_no,
            anomaly_score: score,
            root_cause: root,
            per_state_scores: BTreeMap::from([(root, score)]),
            root_cause_flow_line: seq_no + 2,
            state_sequence: vec![root],
            positional_scores: vec![score],
            line_span: vec![seq_no + 2],
            label: Label::Unknown,
        }
    }

    #[test]
    fn groups_by_size_then_id() {
        let mut vs = Vec::new();
        for (cause, n) in [(31, 2), (62, 5), (47, 3)] {
            for _ in 0..n {
                vs.push(verdict(vs.len(), 1.0, cause));
            }
        }
        let groups = group_anomalies(&vs, 0.5);
        let shape: Vec<_> = groups.iter().map(|g| (g.root_cause, g.size)).collect();
        assert_eq!(shape, [(62, 5), (47, 3), (31, 2)]);
        assert!(group_anomalies(&vs, 2.0).is_empty());

        let tied = vec![verdict(0, 1.0, 9), verdict(1, 1.0, 4)];
        let groups = group_anomalies(&tied, 0.0);
        assert_eq!(groups[0].root_cause, 4);
    }

    #[test]
    fn linked_flows_follow_member_scores() {
        let vs = vec![verdict(0, 3.0, 1), verdict(1, 5.0, 1), verdict(2, 1.0, 1)];
        let flows: Vec<FlowRecord> = (0..3)
            .map(|i| FlowRecord {
                src_ip: format!("h{i}"),
                dst_ip: "d".into(),
                src_port: None,
                dst_port: Some(25),
                timestamp: i,
                duration: 0.0,
                protocol: "TCP".into(),
                num_bytes: 0,
                num_packets: 0,
                label: Label::Unknown,
                line_index: i as usize + 2,
            })
            .collect();
        let group = &group_anomalies(&vs, 0.0)[0];
        let linked = link_flows(group, &vs, &flows, 10).unwrap();
        let order: Vec<_> = linked.iter().map(|f| f.src_ip.as_str()).collect();
        assert_eq!(order, ["h1", "h0", "h2"]);
        assert_eq!(link_flows(group, &vs, &flows, 2).unwrap().len(), 2);
        assert!(link_flows(group, &vs, &flows[..1], 10).is_err());
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 95.0), 19.0);
        assert_eq!(percentile(&v, 100.0), 20.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&[], 95.0), f64::INFINITY);
    }
}
