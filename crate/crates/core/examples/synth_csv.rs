//! Writes a synthetic capture pair: `train.csv` (benign only) and `test.csv`
//! (benign plus an SMTP burst), in the canonical column layout.
//!
//!     cargo run --release --example synth_csv -- <dir> [seed]

use std::fs::File;
use std::path::PathBuf;

use flowstate::flow::write_csv;
use flowstate::synth::{generate, Generator, TrafficParams};

fn main() -> flowstate::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed is an integer"));
    std::fs::create_dir_all(&dir).map_err(|e| flowstate::Error::io(&dir, e))?;

    let g = Generator::five_state();
    let train = generate(&g, &TrafficParams { benign_flows: 50_000, attack_flows: 0, ..Default::default() }, 2 * seed);
    let test = generate(&g, &TrafficParams::default(), 2 * seed + 1);
    for (name, flows) in [("train.csv", &train), ("test.csv", &test)] {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| flowstate::Error::io(&path, e))?;
        write_csv(std::io::BufWriter::new(file), flows)?;
        println!("{}: {} flows", path.display(), flows.len());
    }
    Ok(())
}
