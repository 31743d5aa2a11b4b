//! End-to-end training and scoring.

use serde::{Deserialize, Serialize};

use crate::automaton::{build_pta, merge_states};
use crate::bundle::{ModelBundle, TrainSummary, FORMAT_VERSION};
use crate::config::{ModelConfig, ThresholdPolicy, TrainFilter};
use crate::encoder::fit_encodings;
use crate::error::{Error, Result, StageExt};
use crate::flow::{group_by_connection, sort_flows, ColumnMapping, FlowRecord, Label};
use crate::scorer::{
    group_anomalies, percentile, score_stream, AnomalyGroup, ScoreLedger, TraceVerdict,
    TrainingCounts,
};
use crate::tracegen::{build_traces, EncodingSet, Trace};

pub fn filter_training(flows: Vec<FlowRecord>, filter: TrainFilter) -> Result<Vec<FlowRecord>> {
    match filter {
        TrainFilter::None => {
            if let Some(f) = flows.iter().find(|f| f.label == Label::Malicious) {
                return Err(Error::Config(format!(
                    "training data has malicious rows (first at line {}); set a train_filter",
                    f.line_index
                )));
            }
            Ok(flows)
        }
        TrainFilter::BenignOnly => Ok(flows.into_iter().filter(|f| f.label == Label::Benign).collect()),
        TrainFilter::DropMalicious => {
            Ok(flows.into_iter().filter(|f| f.label != Label::Malicious).collect())
        }
    }
}

/// A trained bundle together with the training traces it was built from.
#[derive(Debug, Clone)]
pub struct Trained {
    pub bundle: ModelBundle,
    pub traces: Vec<Trace>,
    pub flows: Vec<FlowRecord>,
}

/// Filter, encode, window, learn and merge.
pub fn train(flows: Vec<FlowRecord>, config: &ModelConfig, mapping: &ColumnMapping) -> Result<Trained> {
    config.validate()?;
    let flows = filter_training(flows, config.train_filter).stage("filter")?;
    let sorted = sort_flows(flows);
    let groups = group_by_connection(&sorted);
    if groups.values().all(|g| g.len() < config.window.length) {
        return Err(Error::NoTraces(config.window.length).in_stage("tracegen"));
    }

    let encodings = fit_encodings(&groups, &config.features, &config.encoder).stage("encode")?;
    let encodings = EncodingSet::new(config.features.clone(), encodings).stage("encode")?;
    let traces = build_traces(&sorted, &encodings, config.window);

    let pta = build_pta(&traces);
    let automaton = merge_states(&pta, &config.merge).stage("merge")?;
    let training_counts = TrainingCounts::from_replay(&automaton, &traces);

    let validation_threshold = match config.threshold {
        ThresholdPolicy::ValidationPercentile { percentile: p } => {
            let mut ledger = ScoreLedger::new(&training_counts, &config.score);
            let verdicts = score_stream(&automaton, &mut ledger, &traces).stage("score")?;
            let scores: Vec<f64> = verdicts.iter().map(|v| v.anomaly_score).collect();
            Some(percentile(&scores, p))
        }
        ThresholdPolicy::Fixed { .. } => None,
    };

    let bundle = ModelBundle {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        mapping: mapping.clone(),
        encodings,
        automaton,
        training_counts,
        validation_threshold,
        summary: TrainSummary {
            flows: sorted.len(),
            traces: traces.len(),
            pta_states: pta.num_states(),
        },
    };
    Ok(Trained {
        bundle,
        traces,
        flows: sorted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRun {
    pub threshold: f64,
    pub verdicts: Vec<TraceVerdict>,
    pub groups: Vec<AnomalyGroup>,
}

/// Test traces for `flows` under the bundle's encoding and window.
pub fn test_traces(bundle: &ModelBundle, flows: &[FlowRecord]) -> Vec<Trace> {
    build_traces(flows, &bundle.encodings, bundle.config.window)
}

/// Scores a test capture from a fresh ledger.
pub fn score(bundle: &ModelBundle, flows: &[FlowRecord], threshold: Option<f64>) -> Result<ScoredRun> {
    let traces = test_traces(bundle, flows);
    let mut ledger = ScoreLedger::new(&bundle.training_counts, &bundle.config.score);
    let verdicts = score_stream(&bundle.automaton, &mut ledger, &traces).stage("score")?;
    let threshold = threshold.unwrap_or_else(|| bundle.threshold());
    let groups = group_anomalies(&verdicts, threshold);
    Ok(ScoredRun {
        threshold,
        verdicts,
        groups,
    })
}
