//! NetFlow records, CSV ingestion, ordering and connection grouping.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowError};

/// Default number of malformed rows tolerated before ingestion aborts.
pub const DEFAULT_ERROR_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Benign,
    Malicious,
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malicious => "malicious",
            Label::Unknown => "unknown",
        }
    }

    /// Label of a window of flows: malicious if any flow is, benign only if all are.
    pub fn combine<I: IntoIterator<Item = Label>>(labels: I) -> Label {
        let mut all_benign = true;
        let mut any = false;
        for l in labels {
            any = true;
            match l {
                Label::Malicious => return Label::Malicious,
                Label::Unknown => all_benign = false,
                Label::Benign => {}
            }
        }
        if any && all_benign {
            Label::Benign
        } else {
            Label::Unknown
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One NetFlow row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub src_ip: String,
    pub dst_ip: String,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    /// Microseconds since the Unix epoch.
    pub timestamp: i64,
    /// Seconds.
    pub duration: f64,
    pub protocol: String,
    pub num_bytes: u64,
    pub num_packets: u64,
    pub label: Label,
    /// 1-based physical row number in the source file (the header is line 1).
    pub line_index: usize,
}

impl FlowRecord {
    pub fn connection(&self) -> ConnectionKey {
        ConnectionKey::new(&self.src_ip, &self.dst_ip)
    }

    pub fn features(&self) -> FeatureTuple {
        FeatureTuple {
            duration: self.duration,
            protocol: self.protocol.clone(),
            num_bytes: self.num_bytes,
            num_packets: self.num_packets,
        }
    }

    /// Overwrites the scored features, leaving endpoints, time and label alone.
    pub fn set_features(&mut self, features: &FeatureTuple) {
        self.duration = features.duration;
        self.protocol.clone_from(&features.protocol);
        self.num_bytes = features.num_bytes;
        self.num_packets = features.num_packets;
    }
}

/// The features a flow contributes to its event symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTuple {
    pub duration: f64,
    pub protocol: String,
    pub num_bytes: u64,
    pub num_packets: u64,
}

impl FeatureTuple {
    /// Hashable identity; durations compare by bit pattern.
    pub fn key(&self) -> (u64, &str, u64, u64) {
        (
            self.duration.to_bits(),
            self.protocol.as_str(),
            self.num_bytes,
            self.num_packets,
        )
    }
}

/// Directed (source, destination) host pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConnectionKey {
    pub src_ip: String,
    pub dst_ip: String,
}

impl ConnectionKey {
    pub fn new(src: impl Into<String>, dst: impl Into<String>) -> Self {
        Self {
            src_ip: src.into(),
            dst_ip: dst.into(),
        }
    }
}

impl fmt::Display for ConnectionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.src_ip, self.dst_ip)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    /// Decimal seconds, e.g. `1457000000.125`.
    #[default]
    EpochSeconds,
    EpochMillis,
    EpochMicros,
    /// A chrono `strftime` pattern, interpreted as UTC.
    Pattern(String),
}

/// Substring rules for turning a label column into [`Label`]. Matching is
/// case-insensitive and malicious rules are tried first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRules {
    pub malicious: Vec<String>,
    pub benign: Vec<String>,
}

impl Default for LabelRules {
    fn default() -> Self {
        Self {
            malicious: ["malicious", "botnet", "attack", "anomal"]
                .map(String::from)
                .to_vec(),
            benign: ["benign", "normal"].map(String::from).to_vec(),
        }
    }
}

impl LabelRules {
    pub fn classify(&self, raw: &str) -> Label {
        let raw = raw.to_lowercase();
        let hit = |rules: &[String]| rules.iter().any(|r| raw.contains(&r.to_lowercase()));
        if hit(&self.malicious) {
            Label::Malicious
        } else if hit(&self.benign) {
            Label::Benign
        } else {
            Label::Unknown
        }
    }
}

/// Which source columns hold which flow fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub timestamp: String,
    pub duration: String,
    pub protocol: String,
    pub num_bytes: String,
    pub num_packets: String,
    pub src_ip: String,
    pub dst_ip: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_port: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_port: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub timestamp_format: TimestampFormat,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub protocol_map: BTreeMap<String, String>,
    #[serde(default)]
    pub labels: LabelRules,
}

impl ColumnMapping {
    /// The schema written by [`write_csv`].
    pub fn canonical() -> Self {
        Self {
            timestamp: "timestamp_us".into(),
            duration: "duration".into(),
            protocol: "protocol".into(),
            num_bytes: "bytes".into(),
            num_packets: "packets".into(),
            src_ip: "src_ip".into(),
            dst_ip: "dst_ip".into(),
            src_port: Some("src_port".into()),
            dst_port: Some("dst_port".into()),
            label: Some("label".into()),
            timestamp_format: TimestampFormat::EpochMicros,
            protocol_map: BTreeMap::new(),
            labels: LabelRules::default(),
        }
    }

    fn resolve(&self, headers: &csv::StringRecord) -> Result<Columns> {
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let opt = |name: &Option<String>| name.as_deref().map(find).transpose();
        Ok(Columns {
            timestamp: find(&self.timestamp)?,
            duration: find(&self.duration)?,
            protocol: find(&self.protocol)?,
            num_bytes: find(&self.num_bytes)?,
            num_packets: find(&self.num_packets)?,
            src_ip: find(&self.src_ip)?,
            dst_ip: find(&self.dst_ip)?,
            src_port: opt(&self.src_port)?,
            dst_port: opt(&self.dst_port)?,
            label: opt(&self.label)?,
        })
    }

    fn normalize_protocol(&self, raw: &str) -> String {
        let raw = raw.trim();
        self.protocol_map
            .get(raw)
            .cloned()
            .unwrap_or_else(|| raw.to_string())
    }
}

#[derive(Debug, Clone, Copy)]
struct Columns {
    timestamp: usize,
    duration: usize,
    protocol: usize,
    num_bytes: usize,
    num_packets: usize,
    src_ip: usize,
    dst_ip: usize,
    src_port: Option<usize>,
    dst_port: Option<usize>,
    label: Option<usize>,
}

/// Result of ingesting a CSV source: the parsed flows plus every rejected row.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub flows: Vec<FlowRecord>,
    pub errors: Vec<RowError>,
}

pub fn ingest_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Ingested> {
    ingest_csv_capped(path, mapping, DEFAULT_ERROR_CAP)
}

pub fn ingest_csv_capped(
    path: impl AsRef<Path>,
    mapping: &ColumnMapping,
    error_cap: usize,
) -> Result<Ingested> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, mapping, error_cap)
}

/// Parses CSV from any reader. Rows that fail to parse are collected; once more
/// than `error_cap` have failed the whole ingestion aborts.
pub fn ingest_reader<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    error_cap: usize,
) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if is_eof(&e) => return Ok(Ingested::default()),
        Err(e) => return Err(e.into()),
    };
    if headers.is_empty() {
        return Ok(Ingested::default());
    }
    let cols = mapping.resolve(&headers)?;

    let mut out = Ingested::default();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line() as usize);
                match parse_row(&record, &cols, mapping, line) {
                    Ok(flow) => out.flows.push(flow),
                    Err(message) => out.errors.push(RowError {
                        line_index: line,
                        message,
                    }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                out.errors.push(RowError {
                    line_index: line,
                    message: e.to_string(),
                });
                if !matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) {
                    return Err(e.into());
                }
            }
        }
        if out.errors.len() > error_cap {
            return Err(Error::TooManyRowErrors {
                errors: out.errors,
                cap: error_cap,
            });
        }
    }
    Ok(out)
}

fn is_eof(e: &csv::Error) -> bool {
    matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof)
}

fn parse_row(
    record: &csv::StringRecord,
    cols: &Columns,
    mapping: &ColumnMapping,
    line: usize,
) -> std::result::Result<FlowRecord, String> {
    let field = |idx: usize, name: &str| -> std::result::Result<&str, String> {
        record
            .get(idx)
            .map(str::trim)
            .ok_or_else(|| format!("row has no `{name}` field"))
    };
    let timestamp_raw = field(cols.timestamp, &mapping.timestamp)?;
    let timestamp = parse_timestamp(timestamp_raw, &mapping.timestamp_format)
        .ok_or_else(|| format!("bad timestamp `{timestamp_raw}`"))?;

    let duration_raw = field(cols.duration, &mapping.duration)?;
    let duration: f64 = duration_raw
        .parse()
        .ok()
        .filter(|d: &f64| d.is_finite() && *d >= 0.0)
        .ok_or_else(|| format!("bad duration `{duration_raw}`"))?;

    let bytes_raw = field(cols.num_bytes, &mapping.num_bytes)?;
    let num_bytes = parse_count(bytes_raw).ok_or_else(|| format!("bad bytes `{bytes_raw}`"))?;
    let packets_raw = field(cols.num_packets, &mapping.num_packets)?;
    let num_packets =
        parse_count(packets_raw).ok_or_else(|| format!("bad packets `{packets_raw}`"))?;

    let port = |idx: Option<usize>, name: &Option<String>| -> std::result::Result<Option<u16>, String> {
        let Some(idx) = idx else { return Ok(None) };
        let raw = field(idx, name.as_deref().unwrap_or("port"))?;
        if raw.is_empty() {
            return Ok(None);
        }
        parse_port(raw)
            .map(Some)
            .ok_or_else(|| format!("bad port `{raw}`"))
    };

    let label = match cols.label {
        Some(idx) => mapping
            .labels
            .classify(field(idx, mapping.label.as_deref().unwrap_or("label"))?),
        None => Label::Unknown,
    };

    Ok(FlowRecord {
        src_ip: field(cols.src_ip, &mapping.src_ip)?.to_string(),
        dst_ip: field(cols.dst_ip, &mapping.dst_ip)?.to_string(),
        src_port: port(cols.src_port, &mapping.src_port)?,
        dst_port: port(cols.dst_port, &mapping.dst_port)?,
        timestamp,
        duration,
        protocol: mapping.normalize_protocol(field(cols.protocol, &mapping.protocol)?),
        num_bytes,
        num_packets,
        label,
        line_index: line,
    })
}

fn parse_count(raw: &str) -> Option<u64> {
    raw.parse::<u64>().ok().or_else(|| {
        let f: f64 = raw.parse().ok()?;
        (f.is_finite() && f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64).then_some(f as u64)
    })
}

fn parse_port(raw: &str) -> Option<u16> {
    match raw.strip_prefix("0x").or_else(|| raw.strip_prefix("0X")) {
        Some(hex) => u16::from_str_radix(hex, 16).ok(),
        None => raw.parse().ok(),
    }
}

/// Parses a timestamp into integer microseconds, truncating finer precision.
pub fn parse_timestamp(raw: &str, format: &TimestampFormat) -> Option<i64> {
    match format {
        TimestampFormat::EpochSeconds => parse_scaled_decimal(raw, 6),
        TimestampFormat::EpochMillis => parse_scaled_decimal(raw, 3),
        TimestampFormat::EpochMicros => parse_scaled_decimal(raw, 0),
        TimestampFormat::Pattern(p) => NaiveDateTime::parse_from_str(raw, p)
            .ok()
            .map(|dt| dt.and_utc().timestamp_micros()),
    }
}

/// `raw * 10^shift` computed on the decimal string, truncating extra fraction digits.
fn parse_scaled_decimal(raw: &str, shift: u32) -> Option<i64> {
    let (neg, body) = match raw.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, raw),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let scale = 10i64.checked_pow(shift)?;
    let int: i64 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
    let mut frac: i64 = 0;
    let mut digits = 0;
    for b in frac_part.bytes().take(shift as usize) {
        frac = frac * 10 + i64::from(b - b'0');
        digits += 1;
    }
    frac *= 10i64.pow(shift - digits);
    let value = int.checked_mul(scale)?.checked_add(frac)?;
    Some(if neg { -value } else { value })
}

/// Orders flows by timestamp, then by connection; full ties keep input order.
pub fn sort_flows(mut flows: Vec<FlowRecord>) -> Vec<FlowRecord> {
    flows.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.src_ip.cmp(&b.src_ip))
            .then_with(|| a.dst_ip.cmp(&b.dst_ip))
    });
    flows
}

/// Flows per connection, in order of each connection's first appearance.
pub type Connections<'a> = IndexMap<ConnectionKey, Vec<&'a FlowRecord>>;

pub fn group_by_connection(flows: &[FlowRecord]) -> Connections<'_> {
    let mut groups: Connections<'_> = IndexMap::new();
    for flow in flows {
        groups.entry(flow.connection()).or_default().push(flow);
    }
    groups
}

const CANONICAL_HEADER: [&str; 10] = [
    "timestamp_us",
    "src_ip",
    "dst_ip",
    "src_port",
    "dst_port",
    "protocol",
    "duration",
    "bytes",
    "packets",
    "label",
];

/// Writes flows in the [`ColumnMapping::canonical`] schema.
pub fn write_csv<W: Write>(writer: W, flows: &[FlowRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CANONICAL_HEADER)?;
    for f in flows {
        let port = |p: Option<u16>| p.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([
            f.timestamp.to_string(),
            f.src_ip.clone(),
            f.dst_ip.clone(),
            port(f.src_port),
            port(f.dst_port),
            f.protocol.clone(),
            f.duration.to_string(),
            f.num_bytes.to_string(),
            f.num_packets.to_string(),
            f.label.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Copies a CSV source row for row, overwriting the mapped feature columns of
/// rows whose line index appears in `replacements`.
pub fn rewrite_features<R: Read, W: Write>(
    reader: R,
    writer: W,
    mapping: &ColumnMapping,
    replacements: &BTreeMap<usize, FeatureTuple>,
) -> Result<usize> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let mut w = csv::Writer::from_writer(writer);
    let headers = rdr.headers()?.clone();
    w.write_record(&headers)?;
    let cols = mapping.resolve(&headers)?;
    let mut replaced = 0;
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line() as usize);
        match replacements.get(&line) {
            Some(t) => {
                let mut fields: Vec<String> = record.iter().map(str::to_string).collect();
                fields[cols.duration] = t.duration.to_string();
                fields[cols.protocol] = t.protocol.clone();
                fields[cols.num_bytes] = t.num_bytes.to_string();
                fields[cols.num_packets] = t.num_packets.to_string();
                w.write_record(&fields)?;
                replaced += 1;
            }
            None => w.write_record(&record)?,
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(replaced)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow(ts: i64, src: &str, dst: &str, line: usize) -> FlowRecord {
        FlowRecord {
            src_ip: src.into(),
            dst_ip: dst.into(),
            src_port: None,
            dst_port: None,
            timestamp: ts,
            duration: 0.0,
            protocol: "TCP".into(),
            num_bytes: 0,
            num_packets: 0,
            label: Label::Benign,
            line_index: line,
        }
    }

    const HEADER: &str = "ts,src,dst,sport,dport,proto,dur,bytes,pkts,label\n";

    fn mapping() -> ColumnMapping {
        ColumnMapping {
            timestamp: "ts".into(),
            duration: "dur".into(),
            protocol: "proto".into(),
            num_bytes: "bytes".into(),
            num_packets: "pkts".into(),
            src_ip: "src".into(),
            dst_ip: "dst".into(),
            src_port: Some("sport".into()),
            dst_port: Some("dport".into()),
            label: Some("label".into()),
            timestamp_format: TimestampFormat::EpochSeconds,
            protocol_map: [("tcp".to_string(), "TCP".to_string())].into(),
            labels: LabelRules::default(),
        }
    }

    #[test]
    fn three_rows_get_physical_line_numbers() {
        let csv = format!(
            "{HEADER}1.5,a,b,1,2,tcp,0.1,100,2,Benign\n2,a,b,1,2,TCP,0.2,200,3,Benign\n3,c,d,,25,UDP,0,64,1,From-Botnet\n"
        );
        let got = ingest_reader(csv.as_bytes(), &mapping(), 10).unwrap();
        assert!(got.errors.is_empty());
        let lines: Vec<_> = got.flows.iter().map(|f| f.line_index).collect();
        assert_eq!(lines, [2, 3, 4]);
        assert_eq!(got.flows[0].timestamp, 1_500_000);
        assert_eq!(got.flows[0].protocol, "TCP");
        assert_eq!(got.flows[2].src_port, None);
        assert_eq!(got.flows[2].dst_port, Some(25));
        assert_eq!(got.flows[2].label, Label::Malicious);
    }

    #[test]
    fn bad_bytes_is_a_row_error() {
        let csv = format!("{HEADER}1,a,b,1,2,tcp,0.1,abc,2,Benign\n2,a,b,1,2,tcp,0.1,5,2,Benign\n");
        let got = ingest_reader(csv.as_bytes(), &mapping(), 10).unwrap();
        assert_eq!(got.flows.len(), 1);
        assert_eq!(got.errors.len(), 1);
        assert_eq!(got.errors[0].line_index, 2);
        assert!(got.errors[0].message.contains("bytes"));
    }

    #[test]
    fn error_cap_aborts() {
        let mut csv = HEADER.to_string();
        for _ in 0..4 {
            csv.push_str("1,a,b,1,2,tcp,-1,5,2,Benign\n");
        }
        let err = ingest_reader(csv.as_bytes(), &mapping(), 3).unwrap_err();
        assert!(matches!(err, Error::TooManyRowErrors { cap: 3, .. }));
    }

    #[test]
    fn missing_column_is_named() {
        let mut m = mapping();
        m.num_packets = "TotPkts".into();
        let csv = format!("{HEADER}1,a,b,1,2,tcp,0.1,5,2,Benign\n");
        match ingest_reader(csv.as_bytes(), &m, 10) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "TotPkts"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_empty() {
        let got = ingest_reader(&b""[..], &mapping(), 10).unwrap();
        assert!(got.flows.is_empty() && got.errors.is_empty());
        let got = ingest_reader(HEADER.as_bytes(), &mapping(), 10).unwrap();
        assert!(got.flows.is_empty());
    }

    #[test]
    fn timestamp_formats() {
        assert_eq!(parse_scaled_decimal("1.1234567", 6), Some(1_123_456));
        assert_eq!(parse_scaled_decimal("12", 3), Some(12_000));
        assert_eq!(parse_scaled_decimal("-0.5", 6), Some(-500_000));
        assert_eq!(parse_scaled_decimal("x", 6), None);
        let p = TimestampFormat::Pattern("%Y/%m/%d %H:%M:%S%.f".into());
        assert_eq!(
            parse_timestamp("1970/01/01 00:00:01.250000", &p),
            Some(1_250_000)
        );
    }

    #[test]
    fn hex_ports_parse() {
        assert_eq!(parse_port("0x0303"), Some(0x0303));
        assert_eq!(parse_port("443"), Some(443));
        assert_eq!(parse_port("70000"), None);
    }

    #[test]
    fn sort_by_time_then_connection() {
        let sorted = sort_flows(vec![flow(5, "a", "b", 2), flow(3, "a", "b", 3)]);
        assert_eq!(sorted[0].timestamp, 3);

        let sorted = sort_flows(vec![flow(1, "a", "b", 2), flow(1, "a", "a", 3)]);
        assert_eq!(sorted[0].dst_ip, "a");

        let input = vec![flow(1, "a", "a", 2), flow(1, "a", "a", 3), flow(2, "a", "b", 4)];
        assert_eq!(sort_flows(input.clone()), input);
    }

    #[test]
    fn grouping_keeps_first_appearance_order() {
        let flows = vec![flow(1, "A", "B", 2), flow(2, "C", "D", 3), flow(3, "A", "B", 4)];
        let groups = group_by_connection(&flows);
        assert_eq!(groups.len(), 2);
        let (first_key, first) = groups.get_index(0).unwrap();
        assert_eq!(first_key, &ConnectionKey::new("A", "B"));
        assert_eq!(first.iter().map(|f| f.line_index).collect::<Vec<_>>(), [2, 4]);
        assert!(group_by_connection(&[]).is_empty());
    }

    #[test]
    fn label_combination() {
        use Label::*;
        assert_eq!(Label::combine([Benign, Malicious, Unknown]), Malicious);
        assert_eq!(Label::combine([Benign, Benign]), Benign);
        assert_eq!(Label::combine([Benign, Unknown]), Unknown);
        assert_eq!(Label::combine([]), Unknown);
    }

    #[test]
    fn canonical_csv_round_trips() {
        let mut f = flow(7, "10.0.0.1", "10.0.0.2", 2);
        f.duration = 0.125;
        f.num_bytes = 1540;
        f.dst_port = Some(25);
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&f)).unwrap();
        let back = ingest_reader(buf.as_slice(), &ColumnMapping::canonical(), 0).unwrap();
        assert_eq!(back.flows, vec![f]);
    }
}
