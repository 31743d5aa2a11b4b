//! Boxplot outlier baseline: a flow scores one point per numeric feature that
//! falls outside the Tukey fences `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]` of the
//! benign training data.

use crate::flow::FlowRecord;
use crate::tracegen::Trace;

pub const FENCE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fences {
    pub q1: f64,
    pub q3: f64,
}

impl Fences {
    pub fn lower(&self) -> f64 {
        self.q1 - FENCE * (self.q3 - self.q1)
    }

    pub fn upper(&self) -> f64 {
        self.q3 + FENCE * (self.q3 - self.q1)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }
}

/// Linear-interpolation quantile of sorted data, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotModel {
    /// One fence per feature tuple column.
    pub fences: Vec<Fences>,
}

impl BoxplotModel {
    /// Fits fences column-wise over numeric feature tuples.
    pub fn fit(tuples: &[Vec<f64>]) -> Self {
        let dim = tuples.first().map_or(0, Vec::len);
        let fences = (0..dim)
            .map(|c| {
                let mut col: Vec<f64> = tuples.iter().map(|t| t[c]).collect();
                col.sort_by(f64::total_cmp);
                Fences {
                    q1: quantile_sorted(&col, 0.25),
                    q3: quantile_sorted(&col, 0.75),
                }
            })
            .collect();
        Self { fences }
    }

    pub fn fit_flows(flows: &[FlowRecord]) -> Self {
        let tuples: Vec<Vec<f64>> = flows.iter().map(numeric_tuple).collect();
        Self::fit(&tuples)
    }

    /// Number of features outside their fences.
    pub fn score(&self, tuple: &[f64]) -> f64 {
        self.fences
            .iter()
            .zip(tuple)
            .filter(|(f, &x)| !f.contains(x))
            .count() as f64
    }

    pub fn score_flow(&self, flow: &FlowRecord) -> f64 {
        self.score(&numeric_tuple(flow))
    }

    /// Trace score: the worst flow in the window.
    pub fn score_trace(&self, trace: &Trace, flow_at_line: impl Fn(usize) -> Option<f64>) -> f64 {
        trace
            .line_span
            .iter()
            .filter_map(|&l| flow_at_line(l))
            .fold(0.0, f64::max)
    }
}

/// `(duration, bytes, packets)`
pub fn numeric_tuple(flow: &FlowRecord) -> Vec<f64> {
    vec![flow.duration, flow.num_bytes as f64, flow.num_packets as f64]
}
