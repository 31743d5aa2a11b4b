//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use flowstate::automaton::Automaton;
use flowstate::config::ModelConfig;
use flowstate::flow::{ColumnMapping, FlowRecord, Label};
use flowstate::pipeline::{train, Trained};
use flowstate::synth::{generate, Generator, TrafficParams};
use flowstate::tracegen::EventSymbol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn flow(src: &str, dst: &str, ts: i64, bytes: u64, label: Label, line: usize) -> FlowRecord {
    FlowRecord {
        src_ip: src.into(),
        dst_ip: dst.into(),
        src_port: Some(40000),
        dst_port: Some(80),
        timestamp: ts,
        duration: 0.5,
        protocol: "TCP".into(),
        num_bytes: bytes,
        num_packets: 3,
        label,
        line_index: line,
    }
}

pub fn symbols(s: &str) -> Vec<EventSymbol> {
    s.split_whitespace().map(EventSymbol::from).collect()
}

/// Mann-Whitney by enumerating every (malicious, benign) pair.
pub fn pair_auc(scores: &[f64], malicious: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        if !malicious[i] {
            continue;
        }
        for j in 0..scores.len() {
            if malicious[j] {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Prefix trie keyed by symbol strings.
pub struct Trie {
    pub children: Vec<HashMap<String, usize>>,
    pub counts: Vec<u64>,
}

impl Trie {
    pub fn build(traces: &[Vec<EventSymbol>]) -> Self {
        let mut t = Trie {
            children: vec![HashMap::new()],
            counts: vec![traces.len() as u64],
        };
        for trace in traces {
            let mut node = 0;
            for s in trace {
                let next = match t.children[node].get(s.as_str()) {
                    Some(&n) => n,
                    None => {
                        t.children.push(HashMap::new());
                        t.counts.push(0);
                        let n = t.children.len() - 1;
                        t.children[node].insert(s.as_str().to_string(), n);
                        n
                    }
                };
                t.counts[next] += 1;
                node = next;
            }
        }
        t
    }

    pub fn num_states(&self) -> usize {
        self.children.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.children.iter().map(HashMap::len).sum()
    }

    /// Count at the node reached by `path`, if any.
    pub fn count_at(&self, path: &[EventSymbol]) -> Option<u64> {
        let mut node = 0;
        for s in path {
            node = *self.children[node].get(s.as_str())?;
        }
        Some(self.counts[node])
    }
}

/// Follows `path` from the root without resets.
pub fn walk(machine: &Automaton, path: &[EventSymbol]) -> Option<usize> {
    let mut q = Automaton::root();
    for s in path {
        q = machine.next(q, machine.symbol_id(s.as_str())?)?;
    }
    Some(q)
}

/// Brute-force adjacency tallies for one value: predecessors and successors
/// that differ from it, and self-adjacencies.
#[derive(Debug, Default, PartialEq)]
pub struct Adjacency {
    pub prev_other: Vec<f64>,
    pub next_other: Vec<f64>,
    pub prev_self: u64,
    pub next_self: u64,
    pub occurrences: u64,
}

pub fn adjacency(sequences: &[Vec<f64>], v: f64) -> Adjacency {
    let mut a = Adjacency::default();
    for seq in sequences {
        for i in 0..seq.len() {
            if seq[i] != v {
                continue;
            }
            a.occurrences += 1;
            if i > 0 {
                if seq[i - 1] == v {
                    a.prev_self += 1;
                } else {
                    a.prev_other.push(seq[i - 1]);
                }
            }
            if i + 1 < seq.len() {
                if seq[i + 1] == v {
                    a.next_self += 1;
                } else {
                    a.next_other.push(seq[i + 1]);
                }
            }
        }
    }
    a
}

/// Bin index: the number of edges lying strictly below `x`, by linear scan.
pub fn bin_index(x: f64, edges: &[f64]) -> usize {
    let mut n = 0;
    for &e in edges {
        if e < x {
            n += 1;
        }
    }
    n
}

pub fn histogram(values: &[f64], edges: &[f64], bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    for &x in values {
        h[bin_index(x, edges)] += 1;
    }
    h
}

/// Two-state cyclic source: A emits `a` and moves to B (0.7) or emits `b`
/// and stays (0.3); B emits `c` back to A (0.6) or `d` and stays (0.4).
pub fn two_state_traces(n: usize, len: usize, seed: u64) -> Vec<Vec<EventSymbol>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut in_a = true;
            (0..len)
                .map(|_| {
                    let u: f64 = rng.gen();
                    let s = match (in_a, u < if in_a { 0.7 } else { 0.6 }) {
                        (true, true) => {
                            in_a = false;
                            "a"
                        }
                        (true, false) => "b",
                        (false, true) => {
                            in_a = true;
                            "c"
                        }
                        (false, false) => "d",
                    };
                    EventSymbol::from(s)
                })
                .collect()
        })
        .collect()
}

pub fn benign_traffic(flows: usize, seed: u64) -> Vec<FlowRecord> {
    let params = TrafficParams {
        benign_flows: flows,
        attack_flows: 0,
        connection_len: (20, 60),
        ..Default::default()
    };
    generate(&Generator::five_state(), &params, seed)
}

/// A small model trained with randomised parameters.
pub fn random_model(seed: u64) -> Trained {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = ModelConfig::default();
    cfg.encoder.clusters = rng.gen_range(2..8);
    cfg.encoder.bins = rng.gen_range(2..12);
    cfg.encoder.restarts = rng.gen_range(1..4);
    cfg.encoder.seed = rng.gen();
    cfg.window.length = rng.gen_range(3..8);
    cfg.merge.alpha = rng.gen_range(0.01..0.5);
    cfg.score.alpha_smooth = rng.gen_range(0.0..2.0);
    let flows = benign_traffic(rng.gen_range(300..900), rng.gen());
    train(flows, &cfg, &ColumnMapping::canonical()).expect("training succeeds")
}

/// Random grouping of values: a few connections of short sequences drawn
/// from a small value set so repeats and self-adjacencies occur.
pub fn random_sequences(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let pool: Vec<f64> = (0..rng.gen_range(1..12)).map(|_| rng.gen_range(0..2000) as f64).collect();
    (0..rng.gen_range(1..8))
        .map(|_| {
            (0..rng.gen_range(0..25))
                .map(|_| pool[rng.gen_range(0..pool.len())])
                .collect()
        })
        .collect()
}

/// Multiset of feature tuples keyed for comparison.
pub fn tuple_counts(flows: &[FlowRecord]) -> BTreeMap<(u64, String, u64, u64), usize> {
    let mut m = BTreeMap::new();
    for f in flows {
        *m.entry((f.duration.to_bits(), f.protocol.clone(), f.num_bytes, f.num_packets))
            .or_default() += 1;
    }
    m
}
