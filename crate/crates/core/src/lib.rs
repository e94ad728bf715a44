//! Temporal clustering and drift analysis for web usage data.

pub mod cluster;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod io;
pub mod report;
pub mod strategies;
pub mod synth;

pub use cluster::{ClusteringConfig, Partition, Prototypes};
pub use eval::{corrected_rand, f_measure, ContingencyTable, FMeasure};
pub use features::{FeatureVector, Granularity, StandardizationScope};
pub use ingest::{Navigation, RawRequest};
pub use io::{IoError, RunManifest};
pub use report::ReportBundle;
pub use strategies::{CarryMode, StrategyKind, StrategyOutcome, TemporalDataset};
pub use synth::{DriftScenario, GeneratedData};
