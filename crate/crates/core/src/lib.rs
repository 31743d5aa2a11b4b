//! Anomaly detection for NetFlow data by state visit frequencies.
//!
//! Flows are grouped per connection, their numeric features discretised by
//! clustering the contexts in which values occur, and the resulting symbol
//! windows used to learn a deterministic state machine. A test stream is
//! scored by how far each state's visit count drifts from what the training
//! data predicts.

pub mod attacks;
pub mod automaton;
pub mod bundle;
pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod flow;
pub mod pipeline;
pub mod scorer;
pub mod synth;
pub mod tracegen;

pub use automaton::{Automaton, MarkovChain, MergeParams};
pub use bundle::ModelBundle;
pub use config::{ModelConfig, PipelineConfig};
pub use error::{Error, Result};
pub use flow::{ColumnMapping, FlowRecord, Label};
pub use tracegen::{EventSymbol, Trace};
