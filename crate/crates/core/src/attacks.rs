//! Test-time evasion transforms. Each attack rewrites only the scored
//! features of malicious flows (duration, protocol, bytes, packets) using
//! benign flows the adversary has observed; timestamps, endpoints and labels
//! are never touched.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{group_by_connection, FeatureTuple, FlowRecord, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Padding,
    RandomReplacement,
    WindowReplacement,
    FrequencyReplacement,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::Padding,
        AttackKind::RandomReplacement,
        AttackKind::WindowReplacement,
        AttackKind::FrequencyReplacement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Padding => "padding",
            AttackKind::RandomReplacement => "random_replacement",
            AttackKind::WindowReplacement => "window_replacement",
            AttackKind::FrequencyReplacement => "frequency_replacement",
        }
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown attack `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_min_count() -> usize {
    100
}

fn default_window() -> usize {
    10
}

impl AttackSpec {
    pub fn new(kind: AttackKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            min_count: default_min_count(),
            window: default_window(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_count < 1 {
            return Err(Error::Attack("frequency threshold must be at least 1".into()));
        }
        if self.window < 1 {
            return Err(Error::Attack("window length must be at least 1".into()));
        }
        Ok(())
    }

    /// Transforms `malicious` using `pool` as the adversary's collected data.
    pub fn apply(&self, malicious: &[FlowRecord], pool: &[FlowRecord]) -> Result<Vec<FlowRecord>> {
        self.validate()?;
        match self.kind {
            AttackKind::Padding => padding_attack(malicious, pool),
            AttackKind::RandomReplacement => random_replacement_attack(malicious, pool, self.seed),
            AttackKind::WindowReplacement => {
                window_replacement_attack(malicious, pool, self.window, self.seed)
            }
            AttackKind::FrequencyReplacement => {
                frequency_replacement_attack(malicious, pool, self.min_count, self.seed)
            }
        }
    }

    /// Applies the attack to every malicious flow of a labelled stream, using
    /// the stream's benign flows as the pool. Order is preserved.
    pub fn apply_to_stream(&self, flows: &[FlowRecord]) -> Result<Vec<FlowRecord>> {
        let pool: Vec<FlowRecord> = flows
            .iter()
            .filter(|f| f.label == Label::Benign)
            .cloned()
            .collect();
        let malicious_idx: Vec<usize> = (0..flows.len())
            .filter(|&i| flows[i].label == Label::Malicious)
            .collect();
        let malicious: Vec<FlowRecord> = malicious_idx.iter().map(|&i| flows[i].clone()).collect();
        let replaced = self.apply(&malicious, &pool)?;
        let mut out = flows.to_vec();
        for (i, f) in malicious_idx.into_iter().zip(replaced) {
            out[i] = f;
        }
        Ok(out)
    }
}

fn require_pool(pool: &[FlowRecord]) -> Result<()> {
    if pool.is_empty() {
        Err(Error::Attack("the benign pool is empty".into()))
    } else {
        Ok(())
    }
}

/// Sorted distinct values; `nearest` picks the closest, the smaller on ties.
struct SortedValues(Vec<f64>);

impl SortedValues {
    fn new(mut v: Vec<f64>) -> Self {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| a.total_cmp(b).is_eq());
        Self(v)
    }

    fn nearest(&self, x: f64) -> f64 {
        let i = self.0.partition_point(|&v| v < x);
        match (i.checked_sub(1).map(|j| self.0[j]), self.0.get(i).copied()) {
            (Some(lo), Some(hi)) => {
                if x - lo <= hi - x {
                    lo
                } else {
                    hi
                }
            }
            (Some(lo), None) => lo,
            (None, Some(hi)) => hi,
            (None, None) => x,
        }
    }
}

/// Moves each feature of each malicious flow to its nearest value in the pool.
pub fn padding_attack(malicious: &[FlowRecord], pool: &[FlowRecord]) -> Result<Vec<FlowRecord>> {
    require_pool(pool)?;
    let durations = SortedValues::new(pool.iter().map(|f| f.duration).collect());
    let bytes = SortedValues::new(pool.iter().map(|f| f.num_bytes as f64).collect());
    let packets = SortedValues::new(pool.iter().map(|f| f.num_packets as f64).collect());
    let mut protocol_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for f in pool {
        *protocol_counts.entry(&f.protocol).or_default() += 1;
    }
    // most frequent, alphabetically first on ties
    let top_protocol = protocol_counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(p, _)| p.to_string())
        .expect("pool is non-empty");

    Ok(malicious
        .iter()
        .map(|f| {
            let mut out = f.clone();
            out.duration = durations.nearest(f.duration);
            out.num_bytes = bytes.nearest(f.num_bytes as f64) as u64;
            out.num_packets = packets.nearest(f.num_packets as f64) as u64;
            if !protocol_counts.contains_key(f.protocol.as_str()) {
                out.protocol.clone_from(&top_protocol);
            }
            out
        })
        .collect())
}

/// Replaces each malicious feature tuple with a uniformly drawn pool tuple.
pub fn random_replacement_attack(
    malicious: &[FlowRecord],
    pool: &[FlowRecord],
    seed: u64,
) -> Result<Vec<FlowRecord>> {
    require_pool(pool)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(malicious
        .iter()
        .map(|f| {
            let mut out = f.clone();
            out.set_features(&pool[rng.gen_range(0..pool.len())].features());
            out
        })
        .collect())
}

/// Disjoint windows of `window` consecutive flows within one pool connection.
pub fn benign_windows(pool: &[FlowRecord], window: usize) -> Vec<Vec<FeatureTuple>> {
    group_by_connection(pool)
        .values()
        .flat_map(|flows| {
            flows
                .chunks_exact(window)
                .map(|c| c.iter().map(|f| f.features()).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Replaces each block of `window` malicious flows with a distinct benign
/// window, never reusing one. A trailing partial block takes a window prefix.
pub fn window_replacement_attack(
    malicious: &[FlowRecord],
    pool: &[FlowRecord],
    window: usize,
    seed: u64,
) -> Result<Vec<FlowRecord>> {
    Ok(window_replacement_with_choice(malicious, pool, window, seed)?.0)
}

/// As [`window_replacement_attack`], also returning the index of the pool
/// window used for each block.
pub fn window_replacement_with_choice(
    malicious: &[FlowRecord],
    pool: &[FlowRecord],
    window: usize,
    seed: u64,
) -> Result<(Vec<FlowRecord>, Vec<usize>)> {
    if window == 0 {
        return Err(Error::Attack("window length must be at least 1".into()));
    }
    let windows = benign_windows(pool, window);
    let needed = malicious.len().div_ceil(window);
    if needed > windows.len() {
        return Err(Error::Attack(format!(
            "window replacement needs {needed} distinct benign windows of length {window}, only {} available",
            windows.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.shuffle(&mut rng);
    order.truncate(needed);

    let mut out = malicious.to_vec();
    for (block, &w) in out.chunks_mut(window).zip(&order) {
        for (flow, features) in block.iter_mut().zip(&windows[w]) {
            flow.set_features(features);
        }
    }
    Ok((out, order))
}

/// Pool tuples occurring at least `min_count` times, in first-seen order.
pub fn frequent_tuples(pool: &[FlowRecord], min_count: usize) -> Vec<FeatureTuple> {
    let mut counts: HashMap<(u64, &str, u64, u64), usize> = HashMap::new();
    let mut order: Vec<FeatureTuple> = Vec::new();
    let tuples: Vec<FeatureTuple> = pool.iter().map(FlowRecord::features).collect();
    for t in &tuples {
        let c = counts.entry(t.key()).or_default();
        if *c == 0 {
            order.push(t.clone());
        }
        *c += 1;
    }
    order
        .into_iter()
        .filter(|t| counts[&t.key()] >= min_count)
        .collect()
}

/// Replaces each malicious tuple with one drawn uniformly from the pool's
/// frequent tuples.
pub fn frequency_replacement_attack(
    malicious: &[FlowRecord],
    pool: &[FlowRecord],
    min_count: usize,
    seed: u64,
) -> Result<Vec<FlowRecord>> {
    let frequent = frequent_tuples(pool, min_count.max(1));
    if frequent.is_empty() {
        return Err(Error::Attack(format!(
            "no benign feature tuple occurs at least {min_count} times"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(malicious
        .iter()
        .map(|f| {
            let mut out = f.clone();
            out.set_features(&frequent[rng.gen_range(0..frequent.len())]);
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow(conn: &str, bytes: u64, label: Label) -> FlowRecord {
        FlowRecord {
            src_ip: conn.into(),
            dst_ip: "d".into(),
            src_port: Some(1000),
            dst_port: Some(80),
            timestamp: 0,
            duration: 1.0,
            protocol: "TCP".into(),
            num_bytes: bytes,
            num_packets: 2,
            label,
            line_index: 0,
        }
    }

    #[test]
    fn padding_moves_to_nearest() {
        let pool = vec![flow("p", 186, Label::Benign), flow("p", 214, Label::Benign)];
        let out = padding_attack(&[flow("m", 187, Label::Malicious)], &pool).unwrap();
        assert_eq!(out[0].num_bytes, 186);
        let out = padding_attack(&[flow("m", 214, Label::Malicious)], &pool).unwrap();
        assert_eq!(out[0].num_bytes, 214);
        let out = padding_attack(&[flow("m", 200, Label::Malicious)], &pool).unwrap();
        assert_eq!(out[0].num_bytes, 186);
        assert!(padding_attack(&[flow("m", 1, Label::Malicious)], &[]).is_err());
    }

    #[test]
    fn padding_swaps_unknown_protocol() {
        let mut pool = vec![flow("p", 1, Label::Benign); 3];
        pool[0].protocol = "UDP".into();
        let mut m = flow("m", 1, Label::Malicious);
        m.protocol = "ICMP".into();
        assert_eq!(padding_attack(&[m], &pool).unwrap()[0].protocol, "TCP");
    }

    #[test]
    fn single_flow_pool() {
        let pool = vec![flow("p", 77, Label::Benign)];
        let mal: Vec<_> = (0..5).map(|i| flow("m", i, Label::Malicious)).collect();
        let out = random_replacement_attack(&mal, &pool, 3).unwrap();
        assert!(out.iter().all(|f| f.num_bytes == 77));
        assert!(out.iter().all(|f| f.label == Label::Malicious && f.src_ip == "m"));
    }

    #[test]
    fn window_arithmetic() {
        let pool: Vec<_> = (0..40).map(|i| flow("p", i, Label::Benign)).collect();
        let mal: Vec<_> = (0..20).map(|i| flow("m", 1000 + i, Label::Malicious)).collect();
        let (out, chosen) = window_replacement_with_choice(&mal, &pool, 10, 1).unwrap();
        assert_eq!(chosen.len(), 2);
        assert_ne!(chosen[0], chosen[1]);
        assert_eq!(out.len(), 20);
        // each block is a contiguous benign run
        for block in out.chunks(10) {
            let start = block[0].num_bytes;
            assert!(block.iter().enumerate().all(|(i, f)| f.num_bytes == start + i as u64));
        }
    }

    #[test]
    fn window_needs_long_connections() {
        let pool: Vec<_> = (0..30)
            .map(|i| flow(&format!("p{}", i % 5), i, Label::Benign))
            .collect();
        let mal = vec![flow("m", 0, Label::Malicious)];
        let err = window_replacement_attack(&mal, &pool, 10, 0).unwrap_err();
        assert!(err.to_string().contains("needs 1"));
    }

    #[test]
    fn frequency_threshold() {
        let mut pool: Vec<_> = (0..150).map(|_| flow("p", 42, Label::Benign)).collect();
        pool.extend((0..99).map(|_| flow("p", 7, Label::Benign)));
        let mal: Vec<_> = (0..30).map(|i| flow("m", i, Label::Malicious)).collect();
        let out = frequency_replacement_attack(&mal, &pool, 100, 9).unwrap();
        assert!(out.iter().all(|f| f.num_bytes == 42));
        assert!(frequency_replacement_attack(&mal, &pool[150..], 100, 9).is_err());
        assert_eq!(frequent_tuples(&pool, 1).len(), 2);
    }

    #[test]
    fn stream_application_keeps_benign_flows() {
        let mut flows: Vec<_> = (0..12).map(|i| flow("p", i, Label::Benign)).collect();
        flows.push(flow("m", 5000, Label::Malicious));
        let spec = AttackSpec::new(AttackKind::Padding, 0);
        let out = spec.apply_to_stream(&flows).unwrap();
        assert_eq!(&out[..12], &flows[..12]);
        assert_eq!(out[12].num_bytes, 11);
    }

    #[test]
    fn names_parse() {
        for k in AttackKind::ALL {
            assert_eq!(k.name().parse::<AttackKind>().unwrap(), k);
        }
    }
}
