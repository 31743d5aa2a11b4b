//! Synthetic NetFlow traffic from a known probabilistic state machine.
//!
//! Benign connections are independent walks of the generator; each emitted
//! symbol maps to a fixed flow feature tuple. Attack connections repeat the
//! generator's most probable symbol back to back, all within one burst in
//! which that symbol arrives at a multiple of its usual rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::flow::{FeatureTuple, FlowRecord, Label};

/// `(symbol, next state, probability)` per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub transitions: Vec<Vec<(usize, usize, f64)>>,
    pub symbols: Vec<FeatureTuple>,
}

impl Generator {
    /// Five states over eight symbols.
    pub fn five_state() -> Self {
        let tuple = |duration: f64, protocol: &str, num_bytes: u64, num_packets: u64| FeatureTuple {
            duration,
            protocol: protocol.to_string(),
            num_bytes,
            num_packets,
        };
        let symbols = vec![
            tuple(0.01, "TCP", 64, 1),
            tuple(0.5, "TCP", 1540, 4),
            tuple(1.2, "TCP", 977, 3),
            tuple(3.0, "UDP", 165, 2),
            tuple(0.05, "TCP", 2852, 6),
            tuple(8.0, "TCP", 3149, 7),
            tuple(0.2, "UDP", 1224, 3),
            tuple(15.0, "TCP", 40000, 30),
        ];
        let transitions = vec![
            vec![(0, 0, 0.60), (1, 2, 0.25), (2, 3, 0.15)],
            vec![(3, 2, 0.45), (4, 0, 0.35), (1, 4, 0.20)],
            vec![(0, 3, 0.50), (5, 4, 0.30), (6, 0, 0.20)],
            vec![(0, 4, 0.45), (6, 1, 0.35), (7, 0, 0.20)],
            vec![(2, 0, 0.40), (0, 1, 0.35), (4, 3, 0.25)],
        ];
        Self {
            transitions,
            symbols,
        }
    }

    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    /// Stationary state distribution by power iteration.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.num_states();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..10_000 {
            let mut next = vec![0.0; n];
            for (q, out) in self.transitions.iter().enumerate() {
                for &(_, to, p) in out {
                    next[to] += pi[q] * p;
                }
            }
            let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }

    /// Long-run emission probability of every symbol.
    pub fn symbol_distribution(&self) -> Vec<f64> {
        let pi = self.stationary();
        let mut dist = vec![0.0; self.symbols.len()];
        for (q, out) in self.transitions.iter().enumerate() {
            for &(s, _, p) in out {
                dist[s] += pi[q] * p;
            }
        }
        dist
    }

    pub fn most_probable_symbol(&self) -> usize {
        let dist = self.symbol_distribution();
        (0..dist.len())
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
            .expect("generator has symbols")
    }

    fn step<R: Rng>(&self, state: usize, rng: &mut R) -> (usize, usize) {
        let out = &self.transitions[state];
        let mut u: f64 = rng.gen();
        for &(s, to, p) in out {
            if u < p {
                return (s, to);
            }
            u -= p;
        }
        let &(s, to, _) = out.last().expect("every state has a transition");
        (s, to)
    }

    /// Symbol walk of length `len` from a stationary start.
    pub fn walk<R: Rng>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        let pi = self.stationary();
        let mut u: f64 = rng.gen();
        let mut state = pi.len() - 1;
        for (q, p) in pi.iter().enumerate() {
            if u < *p {
                state = q;
                break;
            }
            u -= p;
        }
        (0..len)
            .map(|_| {
                let (s, next) = self.step(state, rng);
                state = next;
                s
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficParams {
    pub benign_flows: usize,
    pub attack_flows: usize,
    /// Flows per connection, inclusive range.
    pub connection_len: (usize, usize),
    pub attack_connection_len: usize,
    /// During the burst the attacked symbol arrives this many times faster
    /// than its benign rate.
    pub attack_rate: f64,
    /// Length of the capture in seconds.
    pub span_secs: f64,
    pub attack_port: u16,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            benign_flows: 20_000,
            attack_flows: 2_000,
            connection_len: (40, 160),
            attack_connection_len: 200,
            attack_rate: 20.0,
            span_secs: 3600.0,
            attack_port: 25,
        }
    }
}

const BENIGN_PORTS: [u16; 5] = [80, 443, 53, 22, 123];

/// Emits benign and attack flows for one capture, ordered by line index.
pub fn generate(generator: &Generator, params: &TrafficParams, seed: u64) -> Vec<FlowRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flows = Vec::with_capacity(params.benign_flows + params.attack_flows);
    let mean_gap = params.span_secs / 2.0
        / ((params.connection_len.0 + params.connection_len.1) as f64 / 2.0);

    let mut conn = 0usize;
    let mut emit = |symbols: &[usize],
                    start: f64,
                    gap: f64,
                    label: Label,
                    port: u16,
                    rng: &mut ChaCha8Rng,
                    flows: &mut Vec<FlowRecord>| {
        let src = format!("10.{}.{}.{}", (conn >> 16) & 0xff, (conn >> 8) & 0xff, conn & 0xff);
        let dst = format!("172.16.{}.{}", rng.gen_range(0..4u8), rng.gen_range(1..250u8));
        conn += 1;
        let sport = rng.gen_range(1024..65535u16);
        let mut t = start;
        for &s in symbols {
            let tuple = &generator.symbols[s];
            flows.push(FlowRecord {
                src_ip: src.clone(),
                dst_ip: dst.clone(),
                src_port: Some(sport),
                dst_port: Some(port),
                timestamp: (t * 1e6) as i64,
                duration: tuple.duration,
                protocol: tuple.protocol.clone(),
                num_bytes: tuple.num_bytes,
                num_packets: tuple.num_packets,
                label,
                line_index: 0,
            });
            t += gap * rng.gen_range(0.5..1.5);
        }
    };

    let mut remaining = params.benign_flows;
    while remaining > 0 {
        let len = rng
            .gen_range(params.connection_len.0..=params.connection_len.1)
            .min(remaining);
        remaining -= len;
        let symbols = generator.walk(len, &mut rng);
        let port = BENIGN_PORTS[rng.gen_range(0..BENIGN_PORTS.len())];
        let start = rng.gen_range(0.0..params.span_secs / 2.0);
        emit(&symbols, start, mean_gap, Label::Benign, port, &mut rng, &mut flows);
    }

    // The burst symbol normally arrives at p * benign_flows / span per second;
    // the attack connections together send it `attack_rate` times faster.
    let burst = generator.most_probable_symbol();
    let p = generator.symbol_distribution()[burst];
    let expected_rate = p * params.benign_flows.max(1) as f64 / params.span_secs;
    let burst_secs = params.attack_flows as f64 / (params.attack_rate * expected_rate);
    let burst_start = rng.gen_range(0.0..(params.span_secs - burst_secs).max(f64::MIN_POSITIVE));
    let mut remaining = params.attack_flows;
    let connections = params.attack_flows.div_ceil(params.attack_connection_len.max(1)).max(1);
    while remaining > 0 {
        let len = params.attack_connection_len.max(1).min(remaining);
        remaining -= len;
        let symbols = vec![burst; len];
        let start = burst_start + rng.gen_range(0.0..burst_secs / connections as f64);
        let gap = burst_secs / len as f64;
        emit(&symbols, start, gap, Label::Malicious, params.attack_port, &mut rng, &mut flows);
    }

    flows.sort_by_key(|f| f.timestamp);
    for (i, f) in flows.iter_mut().enumerate() {
        f.line_index = i + 2;
    }
    flows
}
