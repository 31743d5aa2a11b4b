//! Mean state-frequency AUC over ten synthetic captures. Seed s trains on
//! capture 2s and tests on 2s+1. An optional TOML file replaces the default
//! model settings, e.g. `[score] uc_step = "positions"`.
//!
//!     cargo run --release --example synthetic_sweep -- [model.toml]

use std::time::Instant;

use flowstate::config::{EvalConfig, ModelConfig};
use flowstate::eval::run_experiment;
use flowstate::flow::ColumnMapping;
use flowstate::synth::{generate, Generator, TrafficParams};

fn main() -> flowstate::Result<()> {
    let model: ModelConfig = match std::env::args().nth(1) {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| flowstate::Error::io(&p, e))?;
            toml::from_str(&text)?
        }
        None => ModelConfig::default(),
    };
    let g = Generator::five_state();
    let started = Instant::now();
    let mut aucs = Vec::new();
    for seed in 0..10u64 {
        let train = generate(&g, &TrafficParams { benign_flows: 50_000, attack_flows: 0, ..Default::default() }, 2 * seed);
        let test = generate(&g, &TrafficParams::default(), 2 * seed + 1);
        let eval = EvalConfig { repetitions: 1, seed, attacks: vec![], ..Default::default() };
        let report = run_experiment(&train, &test, &model, &ColumnMapping::canonical(), &eval)?;
        let auc = report.cell("state_frequency", "clean").expect("clean cell");
        println!("seed {seed}: {auc:.3}");
        aucs.push(auc);
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    println!("mean {mean:.4} in {:.1?}", started.elapsed());
    Ok(())
}
