//! Experiment engine: dataset ingestion, seeded splits, training, the
//! degradation evaluation protocol, and diagnostic dumps.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod inspect;

pub use config::{DegradationEntry, ExperimentConfig, ScaleMode};
pub use dataset::{scan_dataset, split, DatasetManifest, Split, SPLIT_RNG_VERSION};
pub use experiment::{
    evaluate, evaluate_on_training_set, evaluate_probes, load_image, table_from_predictions,
    train, EvalReport, PredictionRow, ProbeImage, ResultsTable,
};
pub use inspect::{inspect, InspectRequest};
