//! The work behind each subcommand, kept free of argument parsing so tests
//! can drive it directly.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flowstate::attacks::AttackSpec;
use flowstate::bundle::ModelBundle;
use flowstate::config::PipelineConfig;
use flowstate::eval::{run_experiment, ExperimentReport};
use flowstate::flow::{ingest_csv_capped, rewrite_features, ColumnMapping, FlowRecord, DEFAULT_ERROR_CAP};
use flowstate::pipeline::{self, ScoredRun};
use flowstate::scorer::{write_groups_csv, write_verdicts_csv, AnomalyGroup, TraceVerdict};
use serde::{Deserialize, Serialize};

pub const SCORED_FILE: &str = "scored.json";

/// Loads a config file and applies the global `--seed` override.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg =
        PipelineConfig::load(path).with_context(|| format!("loading config {}", path.display()))?;
    if let Some(s) = seed {
        cfg.model.encoder.seed = s;
        cfg.eval.seed = s;
    }
    Ok(cfg)
}

fn read_flows(path: &Path, mapping: &ColumnMapping, error_cap: usize) -> Result<Vec<FlowRecord>> {
    let ingested = ingest_csv_capped(path, mapping, error_cap)
        .with_context(|| format!("ingest: {}", path.display()))?;
    if !ingested.errors.is_empty() {
        tracing::warn!(
            file = %path.display(),
            skipped = ingested.errors.len(),
            first_line = ingested.errors[0].line_index,
            "skipped malformed rows"
        );
    }
    Ok(ingested.flows)
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureSummary {
    pub feature: String,
    pub clusters: usize,
    pub silhouette: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub flows: usize,
    pub traces: usize,
    pub pta_states: usize,
    pub states: usize,
    pub transitions: usize,
    pub alphabet: usize,
    pub features: Vec<FeatureSummary>,
    pub threshold: f64,
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "flows       {}", self.flows)?;
        writeln!(f, "traces      {}", self.traces)?;
        writeln!(f, "states      {} (prefix tree {})", self.states, self.pta_states)?;
        writeln!(f, "transitions {}", self.transitions)?;
        writeln!(f, "alphabet    {}", self.alphabet)?;
        writeln!(f, "threshold   {}", self.threshold)?;
        for s in &self.features {
            writeln!(f, "{:<11} k={} silhouette={:.3}", s.feature, s.clusters, s.silhouette)?;
        }
        Ok(())
    }
}

impl TrainReport {
    pub fn of(bundle: &ModelBundle) -> Self {
        Self {
            flows: bundle.summary.flows,
            traces: bundle.summary.traces,
            pta_states: bundle.summary.pta_states,
            states: bundle.automaton.num_states(),
            transitions: bundle.automaton.num_transitions(),
            alphabet: bundle.automaton.alphabet().len(),
            features: bundle
                .encodings
                .encodings
                .iter()
                .map(|e| FeatureSummary {
                    feature: e.feature.to_string(),
                    clusters: e.k,
                    silhouette: e.silhouette,
                })
                .collect(),
            threshold: bundle.threshold(),
        }
    }
}

pub fn train(cfg: &PipelineConfig, out: &Path) -> Result<TrainReport> {
    let path = cfg.train_path()?;
    let flows = read_flows(path, &cfg.data.mapping, cfg.data.error_cap)?;
    let trained = pipeline::train(flows, &cfg.model, &cfg.data.mapping)?;
    trained
        .bundle
        .save(out)
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(TrainReport::of(&trained.bundle))
}

/// Everything the triage service needs from a scoring run: the verdicts,
/// the groups at the scoring threshold, and each trace's root-cause flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFile {
    pub threshold: f64,
    pub verdicts: Vec<TraceVerdict>,
    pub groups: Vec<AnomalyGroup>,
    /// Root-cause flows of all verdicts, by line index.
    pub flows: Vec<FlowRecord>,
}

impl ScoredFile {
    pub fn new(run: ScoredRun, flows: &[FlowRecord]) -> Self {
        let lines: std::collections::BTreeSet<usize> =
            run.verdicts.iter().map(|v| v.root_cause_flow_line).collect();
        let mut linked: Vec<FlowRecord> = flows
            .iter()
            .filter(|f| lines.contains(&f.line_index))
            .cloned()
            .collect();
        linked.sort_by_key(|f| f.line_index);
        Self {
            threshold: run.threshold,
            verdicts: run.verdicts,
            groups: run.groups,
            flows: linked,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn score(
    bundle: &ModelBundle,
    test: &Path,
    error_cap: usize,
    threshold: Option<f64>,
    out_dir: &Path,
) -> Result<ScoredFile> {
    let flows = read_flows(test, &bundle.mapping, error_cap)?;
    let run = pipeline::score(bundle, &flows, threshold)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let p = out_dir.join(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    };
    write_verdicts_csv(create("verdicts.csv")?, &run.verdicts)?;
    write_groups_csv(create("groups.csv")?, &run.groups)?;
    let scored = ScoredFile::new(run, &flows);
    serde_json::to_writer(create(SCORED_FILE)?, &scored)?;
    Ok(scored)
}

/// Written next to an attacked CSV so the transformation can be traced back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: PathBuf,
    pub attack: AttackSpec,
    pub malicious_rows: usize,
    pub rewritten_rows: usize,
    /// Line indices of the rewritten rows.
    pub lines: Vec<usize>,
}

pub fn provenance_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    out.with_file_name(name)
}

/// Rewrites the malicious rows of `test` in place of their originals. Every
/// other column and row is copied untouched.
pub fn attack(bundle: &ModelBundle, test: &Path, spec: AttackSpec, out: &Path) -> Result<Provenance> {
    let flows = read_flows(test, &bundle.mapping, DEFAULT_ERROR_CAP)?;
    let attacked = spec.apply_to_stream(&flows)?;
    let replacements: BTreeMap<usize, _> = flows
        .iter()
        .zip(&attacked)
        .filter(|(before, _)| before.label == flowstate::Label::Malicious)
        .map(|(_, after)| (after.line_index, after.features()))
        .collect();
    if out == test {
        bail!("refusing to overwrite the source file {}", test.display());
    }
    let reader = File::open(test).with_context(|| format!("opening {}", test.display()))?;
    let writer = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    let rewritten = rewrite_features(reader, writer, &bundle.mapping, &replacements)?;
    let prov = Provenance {
        source: test.to_path_buf(),
        attack: spec,
        malicious_rows: replacements.len(),
        rewritten_rows: rewritten,
        lines: replacements.keys().copied().collect(),
    };
    let side = provenance_path(out);
    std::fs::write(&side, serde_json::to_string_pretty(&prov)? + "\n")
        .with_context(|| format!("writing {}", side.display()))?;
    Ok(prov)
}

pub fn eval(cfg: &PipelineConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let train = read_flows(cfg.train_path()?, &cfg.data.mapping, cfg.data.error_cap)?;
    let test = read_flows(cfg.test_path()?, &cfg.data.mapping, cfg.data.error_cap)?;
    let report = run_experiment(&train, &test, &cfg.model, &cfg.data.mapping, &cfg.eval)?;
    report
        .write(out_dir)
        .with_context(|| format!("writing report to {}", out_dir.display()))?;
    Ok(report)
}
