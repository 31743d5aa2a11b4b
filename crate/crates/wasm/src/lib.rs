//! Browser bindings: discretise a pasted value sequence, train on synthetic
//! traffic, and score a burst scenario with a small triage loop. Results
//! cross into JavaScript as JSON strings.

use std::collections::BTreeSet;

use flowstate::automaton::StateId;
use flowstate::encoder::context::ContextMatrix;
use flowstate::encoder::{kmeans_fit, Feature};
use flowstate::eval::roc_auc;
use flowstate::pipeline::{score, test_traces, train, ScoredRun, Trained};
use flowstate::scorer::UcStep;
use flowstate::synth::{generate, Generator, TrafficParams};
use flowstate::{ColumnMapping, FlowRecord, Label, MarkovChain, ModelConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Discretized {
    pub k: usize,
    pub silhouette: f64,
    pub restart_silhouettes: Vec<f64>,
    /// `(value, cluster)`, ascending by value.
    pub table: Vec<(f64, u32)>,
}

/// Parses one connection per line, values split on commas or whitespace.
pub fn parse_sequences(text: &str) -> flowstate::Result<Vec<Vec<f64>>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            line.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| flowstate::Error::Config(format!("line {}: `{t}` is not a number", i + 1)))
                })
                .collect()
        })
        .collect()
}

pub fn discretize_values(text: &str, clusters: usize, bins: usize, restarts: usize, seed: u64) -> flowstate::Result<Discretized> {
    let seqs = parse_sequences(text)?;
    if seqs.iter().all(Vec::is_empty) {
        return Err(flowstate::Error::Config("no values".into()));
    }
    if bins == 0 || restarts == 0 || clusters == 0 {
        return Err(flowstate::Error::Config("clusters, bins and restarts must be positive".into()));
    }
    let matrix = ContextMatrix::from_sequences(&seqs, bins);
    let k = clusters.min(matrix.vectors.len());
    let enc = kmeans_fit(&matrix, Feature::Bytes, k, restarts, seed)?;
    Ok(Discretized {
        k: enc.k,
        silhouette: enc.silhouette,
        restart_silhouettes: enc.restart_silhouettes,
        table: enc.table,
    })
}

#[derive(Debug, Serialize)]
pub struct ModelSummary {
    pub flows: usize,
    pub traces: usize,
    pub prefix_tree_states: usize,
    pub states: usize,
    pub transitions: usize,
    pub alphabet: usize,
    pub threshold: f64,
}

#[derive(Debug, Serialize)]
pub struct GroupView {
    pub root_cause: StateId,
    pub size: usize,
    pub top_score: f64,
    pub malicious: usize,
    pub dismissed: bool,
}

#[derive(Debug, Serialize)]
pub struct ScenarioView {
    pub traces: usize,
    pub malicious_traces: usize,
    pub auc: f64,
    pub markov_auc: f64,
    pub roc: Vec<(f64, f64)>,
    pub threshold: f64,
    pub groups: Vec<GroupView>,
    /// Alerts left after dismissals, and how many of them are malicious.
    pub alerts: usize,
    pub alerts_malicious: usize,
    /// Anomaly score and label of every trace in stream order, thinned to at
    /// most `SERIES_POINTS`.
    pub series: Vec<(usize, f64, bool)>,
}

const SERIES_POINTS: usize = 1500;
const GROUPS_SHOWN: usize = 12;

struct Scenario {
    run: ScoredRun,
    auc: f64,
    markov_auc: f64,
    roc: Vec<(f64, f64)>,
}

/// A model trained on synthetic benign traffic plus the last scored scenario.
pub struct Session {
    trained: Trained,
    markov: MarkovChain,
    scenario: Option<Scenario>,
    dismissed: BTreeSet<StateId>,
}

impl Session {
    pub fn train(benign_flows: usize, seed: u64, uc_positions: bool) -> flowstate::Result<Self> {
        let mut cfg = ModelConfig::default();
        cfg.encoder.seed = seed;
        if uc_positions {
            cfg.score.uc_step = UcStep::Positions;
        }
        let params = TrafficParams { benign_flows, attack_flows: 0, ..Default::default() };
        let flows = generate(&Generator::five_state(), &params, seed.wrapping_mul(2));
        let trained = train(flows, &cfg, &ColumnMapping::canonical())?;
        let markov = MarkovChain::fit(&trained.traces);
        Ok(Self { trained, markov, scenario: None, dismissed: BTreeSet::new() })
    }

    pub fn summary(&self) -> ModelSummary {
        let b = &self.trained.bundle;
        ModelSummary {
            flows: b.summary.flows,
            traces: b.summary.traces,
            prefix_tree_states: b.summary.pta_states,
            states: b.automaton.num_states(),
            transitions: b.automaton.num_transitions(),
            alphabet: b.automaton.alphabet().len(),
            threshold: b.threshold(),
        }
    }

    /// Scores a fresh test capture with an attack burst of `attack_flows`
    /// flows arriving `attack_rate` times faster than the symbol's benign rate.
    pub fn score_scenario(
        &mut self,
        benign_flows: usize,
        attack_flows: usize,
        attack_rate: f64,
        seed: u64,
    ) -> flowstate::Result<ScenarioView> {
        if attack_rate.is_nan() || attack_rate <= 0.0 {
            return Err(flowstate::Error::Config("attack rate must be positive".into()));
        }
        let params = TrafficParams { benign_flows, attack_flows, attack_rate, ..Default::default() };
        let test: Vec<FlowRecord> = generate(&Generator::five_state(), &params, seed.wrapping_mul(2) + 1);
        let bundle = &self.trained.bundle;
        let run = score(bundle, &test, None)?;
        let malicious: Vec<bool> = run.verdicts.iter().map(|v| v.label == Label::Malicious).collect();
        let scores: Vec<f64> = run.verdicts.iter().map(|v| v.anomaly_score).collect();
        let curve = roc_auc(&scores, &malicious)?;
        let markov_scores: Vec<f64> = test_traces(bundle, &test)
            .iter()
            .map(|t| self.markov.score(&t.symbols))
            .collect();
        let markov_auc = roc_auc(&markov_scores, &malicious)?.auc;
        self.dismissed.clear();
        self.scenario = Some(Scenario {
            run,
            auc: curve.auc,
            markov_auc,
            roc: thin(&curve.points, SERIES_POINTS),
        });
        self.view()
    }

    /// Marks a group as a false positive (or restores it) and recounts alerts.
    pub fn toggle_dismissed(&mut self, root_cause: StateId) -> flowstate::Result<ScenarioView> {
        if !self.dismissed.remove(&root_cause) {
            self.dismissed.insert(root_cause);
        }
        self.view()
    }

    fn view(&self) -> flowstate::Result<ScenarioView> {
        let sc = self
            .scenario
            .as_ref()
            .ok_or_else(|| flowstate::Error::Config("score a scenario first".into()))?;
        let run = &sc.run;
        let is_bad = |seq: usize| run.verdicts[seq].label == Label::Malicious;
        let groups = run
            .groups
            .iter()
            .take(GROUPS_SHOWN)
            .map(|g| GroupView {
                root_cause: g.root_cause,
                size: g.size,
                top_score: g.top_score,
                malicious: g.members.iter().filter(|&&s| is_bad(s)).count(),
                dismissed: self.dismissed.contains(&g.root_cause),
            })
            .collect();
        let live: Vec<usize> = run
            .groups
            .iter()
            .filter(|g| !self.dismissed.contains(&g.root_cause))
            .flat_map(|g| g.members.iter().copied())
            .collect();
        let series: Vec<(usize, f64, bool)> = run
            .verdicts
            .iter()
            .map(|v| (v.seq_no, v.anomaly_score, v.label == Label::Malicious))
            .collect();
        Ok(ScenarioView {
            traces: run.verdicts.len(),
            malicious_traces: run.verdicts.iter().filter(|v| v.label == Label::Malicious).count(),
            auc: sc.auc,
            markov_auc: sc.markov_auc,
            roc: sc.roc.clone(),
            threshold: run.threshold,
            groups,
            alerts: live.len(),
            alerts_malicious: live.iter().filter(|&&s| is_bad(s)).count(),
            series: thin(&series, SERIES_POINTS),
        })
    }
}

/// Every `ceil(n / max)`-th item, always keeping the last.
fn thin<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    let step = items.len().div_ceil(max);
    let mut out: Vec<T> = items.iter().step_by(step).cloned().collect();
    if !(items.len() - 1).is_multiple_of(step) {
        out.push(items[items.len() - 1].clone());
    }
    out
}

fn js_err(e: flowstate::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

/// Clusters the values of a pasted sequence by the company they keep.
#[wasm_bindgen]
pub fn discretize(text: &str, clusters: u32, bins: u32, restarts: u32, seed: u32) -> Result<String, JsError> {
    to_json(&discretize_values(text, clusters as usize, bins as usize, restarts as usize, seed as u64).map_err(js_err)?)
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    /// Trains on `benign_flows` synthetic flows.
    #[wasm_bindgen(constructor)]
    pub fn new(benign_flows: u32, seed: u32, uc_positions: bool) -> Result<Demo, JsError> {
        let session = Session::train(benign_flows as usize, seed as u64, uc_positions).map_err(js_err)?;
        Ok(Demo { session })
    }

    pub fn summary(&self) -> Result<String, JsError> {
        to_json(&self.session.summary())
    }

    pub fn score(&mut self, benign_flows: u32, attack_flows: u32, attack_rate: f64, seed: u32) -> Result<String, JsError> {
        let view = self
            .session
            .score_scenario(benign_flows as usize, attack_flows as usize, attack_rate, seed as u64)
            .map_err(js_err)?;
        to_json(&view)
    }

    pub fn toggle_dismissed(&mut self, root_cause: u32) -> Result<String, JsError> {
        to_json(&self.session.toggle_dismissed(root_cause as usize).map_err(js_err)?)
    }
}
