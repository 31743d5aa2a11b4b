//! Repeated train/score/evaluate runs over the clean test set and its attacked
//! variants.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::AttackSpec;
use crate::automaton::MarkovChain;
use crate::config::{EvalConfig, ModelConfig};
use crate::error::{Error, Result, StageExt};
use crate::eval::boxplot::BoxplotModel;
use crate::eval::roc::{roc_auc, write_roc_points, RocCurve};
use crate::flow::{ColumnMapping, FlowRecord, Label};
use crate::pipeline::{score, test_traces, train};

pub const MODELS: [&str; 3] = ["state_frequency", "markov_chain", "boxplot"];
pub const CLEAN: &str = "clean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub condition: String,
    pub run: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub condition: String,
    pub mean_auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub conditions: Vec<String>,
    pub runs: Vec<RunRecord>,
    pub cells: Vec<Cell>,
    /// Parallel to `runs`.
    pub curves: Vec<RocCurve>,
}

impl ExperimentReport {
    pub fn cell(&self, model: &str, condition: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.condition == condition)
            .map(|c| c.mean_auc)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<16}", "model");
        for c in &self.conditions {
            let _ = write!(s, " {c:>21}");
        }
        s.push('\n');
        for m in MODELS {
            let _ = write!(s, "{m:<16}");
            for c in &self.conditions {
                match self.cell(m, c) {
                    Some(v) => {
                        let _ = write!(s, " {v:>21.4}");
                    }
                    None => {
                        let _ = write!(s, " {:>21}", "-");
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    /// `results.csv`, `table.txt` and one `roc/<model>_<condition>_<run>.txt`
    /// per run.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let roc_dir = dir.join("roc");
        std::fs::create_dir_all(&roc_dir).map_err(|e| Error::io(&roc_dir, e))?;
        let results = dir.join("results.csv");
        let mut w = csv::Writer::from_path(&results)?;
        for r in &self.runs {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(&results, e))?;
        let table = dir.join("table.txt");
        std::fs::write(&table, self.table()).map_err(|e| Error::io(&table, e))?;
        for (r, curve) in self.runs.iter().zip(&self.curves) {
            let path = roc_dir.join(format!("{}_{}_{}.txt", r.model, r.condition, r.run));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_roc_points(std::io::BufWriter::new(file), curve).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

struct Scored {
    model: &'static str,
    condition: String,
    curve: RocCurve,
}

fn one_run(
    train_flows: &[FlowRecord],
    test_flows: &[FlowRecord],
    model: &ModelConfig,
    mapping: &ColumnMapping,
    eval: &EvalConfig,
    run: usize,
) -> Result<Vec<Scored>> {
    let seed = eval.seed.wrapping_add(run as u64);
    let mut model = model.clone();
    model.encoder.seed = seed;
    let trained = train(train_flows.to_vec(), &model, mapping)?;
    let markov = MarkovChain::fit(&trained.traces);
    let boxplot = BoxplotModel::fit_flows(&trained.flows);

    let mut conditions: Vec<(String, Vec<FlowRecord>)> = vec![(CLEAN.to_string(), test_flows.to_vec())];
    for &kind in &eval.attacks {
        let spec = AttackSpec {
            kind,
            seed,
            min_count: eval.frequency_min_count,
            window: eval.attack_window,
        };
        conditions.push((kind.name().to_string(), spec.apply_to_stream(test_flows).stage("attack")?));
    }

    let mut out = Vec::new();
    for (condition, flows) in conditions {
        let run = score(&trained.bundle, &flows, None)?;
        let traces = test_traces(&trained.bundle, &flows);
        let flow_scores: HashMap<usize, f64> = flows
            .iter()
            .map(|f| (f.line_index, boxplot.score_flow(f)))
            .collect();

        let keep: Vec<usize> = (0..traces.len())
            .filter(|&i| traces[i].label != Label::Unknown)
            .collect();
        let labels: Vec<bool> = keep.iter().map(|&i| traces[i].label == Label::Malicious).collect();
        let per_model: [Vec<f64>; 3] = [
            keep.iter().map(|&i| run.verdicts[i].anomaly_score).collect(),
            keep.iter().map(|&i| markov.score(&traces[i].symbols)).collect(),
            keep.iter()
                .map(|&i| boxplot.score_trace(&traces[i], |l| flow_scores.get(&l).copied()))
                .collect(),
        ];
        for (m, scores) in MODELS.iter().zip(per_model) {
            let curve = roc_auc(&scores, &labels).stage("evaluate")?;
            out.push(Scored {
                model: m,
                condition: condition.clone(),
                curve,
            });
        }
    }
    Ok(out)
}

/// Every model under every condition, `eval.repetitions` times with seeds
/// `eval.seed, eval.seed + 1, ...`. The data split itself is fixed.
pub fn run_experiment(
    train_flows: &[FlowRecord],
    test_flows: &[FlowRecord],
    model: &ModelConfig,
    mapping: &ColumnMapping,
    eval: &EvalConfig,
) -> Result<ExperimentReport> {
    if eval.repetitions == 0 {
        return Err(Error::Config("at least one repetition is required".into()));
    }
    let go = |run: usize| one_run(train_flows, test_flows, model, mapping, eval, run);
    #[cfg(feature = "parallel")]
    let per_run: Vec<Result<Vec<Scored>>> = {
        use rayon::prelude::*;
        (0..eval.repetitions).into_par_iter().map(go).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_run: Vec<Result<Vec<Scored>>> = (0..eval.repetitions).map(go).collect();

    let mut conditions = vec![CLEAN.to_string()];
    conditions.extend(eval.attacks.iter().map(|k| k.name().to_string()));

    let mut runs = Vec::new();
    let mut curves = Vec::new();
    for (run, scored) in per_run.into_iter().enumerate() {
        for s in scored? {
            runs.push(RunRecord {
                model: s.model.to_string(),
                condition: s.condition,
                run,
                auc: s.curve.auc,
            });
            curves.push(s.curve);
        }
    }

    let mut cells = Vec::new();
    for m in MODELS {
        for c in &conditions {
            let aucs: Vec<f64> = runs
                .iter()
                .filter(|r| r.model == m && &r.condition == c)
                .map(|r| r.auc)
                .collect();
            cells.push(Cell {
                model: m.to_string(),
                condition: c.clone(),
                mean_auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
            });
        }
    }
    Ok(ExperimentReport {
        conditions,
        runs,
        cells,
        curves,
    })
}
