use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Value;

/// Context of one unique feature value: where its neighbours fall among the
/// predecessor/successor bins, how often it repeats itself, and how common it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub prev_bins: Vec<u64>,
    pub next_bins: Vec<u64>,
    pub prev_self: u64,
    pub next_self: u64,
    /// `ln(1 + occurrences)`.
    pub log_freq: f64,
}

impl ContextVector {
    fn empty(bins: usize) -> Self {
        Self {
            prev_bins: vec![0; bins],
            next_bins: vec![0; bins],
            prev_self: 0,
            next_self: 0,
            log_freq: 0.0,
        }
    }

    /// Flattened coordinates: prev bins, next bins, prev self, next self, log frequency.
    pub fn to_point(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.prev_bins.len() * 2 + 3);
        p.extend(self.prev_bins.iter().map(|&c| c as f64));
        p.extend(self.next_bins.iter().map(|&c| c as f64));
        p.push(self.prev_self as f64);
        p.push(self.next_self as f64);
        p.push(self.log_freq);
        p
    }

    pub fn prev_total(&self) -> u64 {
        self.prev_bins.iter().sum::<u64>() + self.prev_self
    }

    pub fn next_total(&self) -> u64 {
        self.next_bins.iter().sum::<u64>() + self.next_self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextMatrix {
    pub bins: usize,
    pub prev_edges: Vec<f64>,
    pub next_edges: Vec<f64>,
    pub vectors: BTreeMap<Value, ContextVector>,
}

impl ContextMatrix {
    /// Builds context vectors from per-connection value sequences. Adjacent
    /// pairs never cross sequence boundaries.
    pub fn from_sequences<S: AsRef<[f64]>>(sequences: &[S], bins: usize) -> Self {
        assert!(bins >= 1, "bin count must be positive");
        let mut occurrences: BTreeMap<Value, u64> = BTreeMap::new();
        let mut prev_pool = Vec::new();
        let mut next_pool = Vec::new();
        for seq in sequences {
            let seq = seq.as_ref();
            for &v in seq {
                *occurrences.entry(Value(v)).or_default() += 1;
            }
            for w in seq.windows(2) {
                if Value(w[0]) != Value(w[1]) {
                    prev_pool.push(w[0]);
                    next_pool.push(w[1]);
                }
            }
        }
        let prev_edges = quantile_edges(prev_pool, bins);
        let next_edges = quantile_edges(next_pool, bins);

        let mut vectors: BTreeMap<Value, ContextVector> = occurrences
            .iter()
            .map(|(&v, &n)| {
                let mut cv = ContextVector::empty(bins);
                cv.log_freq = (n as f64).ln_1p();
                (v, cv)
            })
            .collect();

        for seq in sequences {
            for w in seq.as_ref().windows(2) {
                let (a, b) = (Value(w[0]), Value(w[1]));
                if a == b {
                    let cv = vectors.get_mut(&a).expect("value counted above");
                    cv.prev_self += 1;
                    cv.next_self += 1;
                } else {
                    vectors.get_mut(&b).expect("value counted above").prev_bins
                        [bin_of(w[0], &prev_edges)] += 1;
                    vectors.get_mut(&a).expect("value counted above").next_bins
                        [bin_of(w[1], &next_edges)] += 1;
                }
            }
        }

        Self {
            bins,
            prev_edges,
            next_edges,
            vectors,
        }
    }
}

/// Inner cut points splitting `pool` into `bins` nearest-rank quantile bins,
/// with duplicate cuts collapsed.
pub fn quantile_edges(mut pool: Vec<f64>, bins: usize) -> Vec<f64> {
    if pool.is_empty() || bins < 2 {
        return Vec::new();
    }
    pool.sort_by(f64::total_cmp);
    let n = pool.len();
    let mut edges: Vec<f64> = (1..bins)
        .map(|j| {
            // nearest rank: ceil(p * n), 1-based
            let rank = (j * n).div_ceil(bins).max(1);
            pool[rank - 1]
        })
        .collect();
    edges.dedup_by(|a, b| a.total_cmp(b).is_eq());
    edges
}

/// Bin index of `x`: the number of cut points strictly below it.
pub fn bin_of(x: f64, edges: &[f64]) -> usize {
    edges.partition_point(|&e| e < x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_group() {
        let m = ContextMatrix::from_sequences(&[vec![64.0, 64.0, 165.0]], 10);
        let v64 = &m.vectors[&Value(64.0)];
        assert_eq!(v64.prev_self, 1);
        assert_eq!(v64.next_self, 1);
        assert_eq!(v64.next_bins.iter().sum::<u64>(), 1);
        assert_eq!(v64.next_bins[bin_of(165.0, &m.next_edges)], 1);
        assert_eq!(v64.prev_bins.iter().sum::<u64>(), 0);

        let v165 = &m.vectors[&Value(165.0)];
        assert_eq!(v165.prev_bins[bin_of(64.0, &m.prev_edges)], 1);
        assert_eq!(v165.prev_total(), 1);
        assert_eq!(v165.next_total(), 0);
        assert_eq!(v165.prev_self, 0);
        assert!((v64.log_freq - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn lone_flow_has_only_frequency() {
        let m = ContextMatrix::from_sequences(&[vec![42.0]], 10);
        let v = &m.vectors[&Value(42.0)];
        assert_eq!(v.prev_total() + v.next_total(), 0);
        assert_eq!(v.log_freq, 2f64.ln());
        assert_eq!(v.to_point().len(), 23);
    }

    #[test]
    fn nearest_rank_edges() {
        let pool: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(quantile_edges(pool, 4), vec![3.0, 5.0, 8.0]);
        // heavy duplication collapses cut points
        assert_eq!(quantile_edges(vec![7.0; 50], 10), vec![7.0]);
        assert!(quantile_edges(vec![], 10).is_empty());
    }

    #[test]
    fn bin_lookup() {
        let edges = [3.0, 5.0, 8.0];
        assert_eq!(bin_of(1.0, &edges), 0);
        assert_eq!(bin_of(3.0, &edges), 0);
        assert_eq!(bin_of(3.5, &edges), 1);
        assert_eq!(bin_of(9.0, &edges), 3);
    }
}
