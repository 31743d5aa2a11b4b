//! Discretisation of numeric flow features by clustering the contexts in
//! which each value occurs.

pub mod context;
pub mod kmeans;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Connections, FlowRecord};

pub use context::{ContextMatrix, ContextVector};

/// Feature values ordered by `f64::total_cmp` so they can key ordered maps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Value(pub f64);

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl Eq for Value {}
impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Flow features that can make up an event symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Duration,
    Protocol,
    Bytes,
    Packets,
}

impl Feature {
    /// Symbol component order used unless configured otherwise.
    pub const DEFAULT_ORDER: [Feature; 4] = [
        Feature::Duration,
        Feature::Protocol,
        Feature::Bytes,
        Feature::Packets,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Duration => "duration",
            Feature::Protocol => "protocol",
            Feature::Bytes => "bytes",
            Feature::Packets => "packets",
        }
    }

    pub fn is_numeric(self) -> bool {
        self != Feature::Protocol
    }

    pub fn numeric_value(self, flow: &FlowRecord) -> Option<f64> {
        match self {
            Feature::Duration => Some(flow.duration),
            Feature::Bytes => Some(flow.num_bytes as f64),
            Feature::Packets => Some(flow.num_packets as f64),
            Feature::Protocol => None,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "duration" => Ok(Feature::Duration),
            "protocol" => Ok(Feature::Protocol),
            "bytes" => Ok(Feature::Bytes),
            "packets" => Ok(Feature::Packets),
            other => Err(Error::Config(format!("unknown feature `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderParams {
    /// Cluster count for features without an override.
    pub clusters: usize,
    pub clusters_per_feature: BTreeMap<Feature, usize>,
    pub bins: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EncoderParams {
    fn default() -> Self {
        Self {
            clusters: 20,
            clusters_per_feature: BTreeMap::new(),
            bins: 10,
            restarts: 10,
            seed: 0,
        }
    }
}

impl EncoderParams {
    pub fn clusters_for(&self, feature: Feature) -> usize {
        self.clusters_per_feature
            .get(&feature)
            .copied()
            .unwrap_or(self.clusters)
    }
}

/// Learned discretisation of one numeric feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub feature: Feature,
    pub bins: usize,
    pub prev_edges: Vec<f64>,
    pub next_edges: Vec<f64>,
    /// `(training value, cluster label)`, sorted by value.
    pub table: Vec<(f64, u32)>,
    pub k: usize,
    pub silhouette: f64,
    pub restart_silhouettes: Vec<f64>,
    pub seed: u64,
}

impl FeatureEncoding {
    /// Cluster label of `v`. Values not seen in training take the label of
    /// the nearest training value; exact midpoints go to the smaller one.
    pub fn encode(&self, v: f64) -> u32 {
        let idx = self.table.partition_point(|(t, _)| t.total_cmp(&v).is_lt());
        if let Some(&(t, label)) = self.table.get(idx) {
            if t.total_cmp(&v).is_eq() {
                return label;
            }
        }
        let below = idx.checked_sub(1).map(|i| self.table[i]);
        let above = self.table.get(idx).copied();
        match (below, above) {
            (Some((lo, l)), Some((hi, h))) => {
                if v - lo <= hi - v {
                    l
                } else {
                    h
                }
            }
            (Some((_, l)), None) => l,
            (None, Some((_, h))) => h,
            (None, None) => 0,
        }
    }
}

/// Context vectors of one feature across all connections.
pub fn build_context_matrix(
    groups: &Connections<'_>,
    feature: Feature,
    bins: usize,
) -> Result<ContextMatrix> {
    if !feature.is_numeric() {
        return Err(Error::Config(format!("feature `{feature}` is not numeric")));
    }
    if bins == 0 {
        return Err(Error::Config("bin count must be positive".into()));
    }
    let sequences: Vec<Vec<f64>> = groups
        .values()
        .map(|flows| {
            flows
                .iter()
                .filter_map(|f| feature.numeric_value(f))
                .collect()
        })
        .collect();
    Ok(ContextMatrix::from_sequences(&sequences, bins))
}

/// Clusters a feature's context vectors and records the labels as its encoding.
pub fn kmeans_fit(
    matrix: &ContextMatrix,
    feature: Feature,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<FeatureEncoding> {
    let values: Vec<f64> = matrix.vectors.keys().map(|v| v.0).collect();
    let points: Vec<Vec<f64>> = matrix.vectors.values().map(ContextVector::to_point).collect();
    let fit = kmeans::fit(&points, k, restarts, seed)?;
    Ok(FeatureEncoding {
        feature,
        bins: matrix.bins,
        prev_edges: matrix.prev_edges.clone(),
        next_edges: matrix.next_edges.clone(),
        table: values.into_iter().zip(fit.labels).collect(),
        k,
        silhouette: fit.silhouette,
        restart_silhouettes: fit.restart_silhouettes,
        seed,
    })
}

/// Fits every numeric feature in `features`. The requested cluster count is
/// capped at the number of distinct context vectors.
pub fn fit_encodings(
    groups: &Connections<'_>,
    features: &[Feature],
    params: &EncoderParams,
) -> Result<Vec<FeatureEncoding>> {
    let one = |&feature: &Feature| -> Result<FeatureEncoding> {
        let matrix = build_context_matrix(groups, feature, params.bins)?;
        if matrix.vectors.is_empty() {
            return Err(Error::Config(format!("no values for feature `{feature}`")));
        }
        let points: Vec<Vec<f64>> = matrix.vectors.values().map(ContextVector::to_point).collect();
        let k = params
            .clusters_for(feature)
            .min(kmeans::distinct_count(&points))
            .max(1);
        kmeans_fit(&matrix, feature, k, params.restarts, params.seed)
    };
    let numeric: Vec<Feature> = features.iter().copied().filter(|f| f.is_numeric()).collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        numeric.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        numeric.iter().map(one).collect()
    }
}
