//! Event symbols and per-connection sliding-window traces.

use std::fmt;
use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::encoder::{Feature, FeatureEncoding};
use crate::error::{Error, Result};
use crate::flow::{group_by_connection, sort_flows, ConnectionKey, FlowRecord, Label};

/// One flow rendered as an automaton symbol, e.g. `2_TCP_7_1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventSymbol(pub String);

impl EventSymbol {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for EventSymbol {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl From<&str> for EventSymbol {
    fn from(s: &str) -> Self {
        EventSymbol(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub symbol: EventSymbol,
    pub line_index: usize,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub symbols: Vec<EventSymbol>,
    pub connection: ConnectionKey,
    pub line_span: Vec<usize>,
    pub seq_no: usize,
    /// Malicious if any flow is, benign if all are, otherwise unknown.
    pub label: Label,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl AsRef<[EventSymbol]> for Trace {
    fn as_ref(&self) -> &[EventSymbol] {
        &self.symbols
    }
}

/// The symbol layout: which features, in which order, and how the numeric
/// ones are discretised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSet {
    pub features: Vec<Feature>,
    pub encodings: Vec<FeatureEncoding>,
}

impl EncodingSet {
    pub fn new(features: Vec<Feature>, encodings: Vec<FeatureEncoding>) -> Result<Self> {
        for f in features.iter().filter(|f| f.is_numeric()) {
            if !encodings.iter().any(|e| e.feature == *f) {
                return Err(Error::Config(format!("no encoding for feature `{f}`")));
            }
        }
        Ok(Self {
            features,
            encodings,
        })
    }

    pub fn encoding(&self, feature: Feature) -> Option<&FeatureEncoding> {
        self.encodings.iter().find(|e| e.feature == feature)
    }

    pub fn symbol(&self, flow: &FlowRecord) -> EventSymbol {
        let parts: Vec<String> = self
            .features
            .iter()
            .map(|&f| match f.numeric_value(flow) {
                Some(v) => self
                    .encoding(f)
                    .expect("checked in EncodingSet::new")
                    .encode(v)
                    .to_string(),
                None => flow.protocol.replace('_', "-"),
            })
            .collect();
        EventSymbol(parts.join("_"))
    }
}

pub fn flows_to_events<'a, I>(flows: I, encodings: &EncodingSet) -> Vec<Event>
where
    I: IntoIterator<Item = &'a FlowRecord>,
{
    flows
        .into_iter()
        .map(|f| Event {
            symbol: encodings.symbol(f),
            line_index: f.line_index,
            label: f.label,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowParams {
    pub length: usize,
    pub stride: usize,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            length: 10,
            stride: 1,
        }
    }
}

/// Cuts each connection's events into windows of exactly `length` symbols.
/// Connections shorter than the window contribute nothing.
pub fn sliding_windows(
    events: &IndexMap<ConnectionKey, Vec<Event>>,
    params: WindowParams,
) -> Vec<Trace> {
    assert!(params.length >= 1 && params.stride >= 1, "window and stride must be positive");
    let mut traces = Vec::new();
    for (key, evs) in events {
        if evs.len() < params.length {
            continue;
        }
        for start in (0..=evs.len() - params.length).step_by(params.stride) {
            let window = &evs[start..start + params.length];
            traces.push(Trace {
                symbols: window.iter().map(|e| e.symbol.clone()).collect(),
                connection: key.clone(),
                line_span: window.iter().map(|e| e.line_index).collect(),
                seq_no: traces.len(),
                label: Label::combine(window.iter().map(|e| e.label)),
            });
        }
    }
    traces
}

/// Sort by time and connection, group per connection, encode and window.
pub fn build_traces(
    flows: &[FlowRecord],
    encodings: &EncodingSet,
    params: WindowParams,
) -> Vec<Trace> {
    let sorted = sort_flows(flows.to_vec());
    let groups = group_by_connection(&sorted);
    let events: IndexMap<ConnectionKey, Vec<Event>> = groups
        .into_iter()
        .map(|(k, fs)| (k, flows_to_events(fs, encodings)))
        .collect();
    sliding_windows(&events, params)
}

/// Debug dump: one trace per line, symbols separated by spaces.
pub fn write_traces<W: Write>(mut w: W, traces: &[Trace]) -> std::io::Result<()> {
    for t in traces {
        let line: Vec<&str> = t.symbols.iter().map(EventSymbol::as_str).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
