#![allow(dead_code)]

use std::path::{Path, PathBuf};

use flowstate::flow::{write_csv, ColumnMapping, FlowRecord};
use flowstate::synth::{generate, Generator, TrafficParams};

pub const CONFIG: &str = r#"
[data]
train = "train.csv"
test = "test.csv"

[data.mapping]
timestamp = "timestamp_us"
duration = "duration"
protocol = "protocol"
num_bytes = "bytes"
num_packets = "packets"
src_ip = "src_ip"
dst_ip = "dst_ip"
src_port = "src_port"
dst_port = "dst_port"
label = "label"
timestamp_format = "epoch_micros"

[eval]
repetitions = 2
frequency_min_count = 20
"#;

pub fn canonical() -> ColumnMapping {
    ColumnMapping::canonical()
}

pub fn train_flows(seed: u64) -> Vec<FlowRecord> {
    let p = TrafficParams { benign_flows: 6_000, attack_flows: 0, ..Default::default() };
    generate(&Generator::five_state(), &p, seed)
}

pub fn test_flows(seed: u64) -> Vec<FlowRecord> {
    let p = TrafficParams { benign_flows: 4_000, attack_flows: 600, ..Default::default() };
    generate(&Generator::five_state(), &p, seed)
}

pub fn write_flows(path: &Path, flows: &[FlowRecord]) {
    write_csv(std::fs::File::create(path).unwrap(), flows).unwrap();
}

/// A directory holding config.toml, train.csv and test.csv.
pub fn workspace(dir: &Path) -> PathBuf {
    write_flows(&dir.join("train.csv"), &train_flows(1));
    write_flows(&dir.join("test.csv"), &test_flows(2));
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    cfg
}
