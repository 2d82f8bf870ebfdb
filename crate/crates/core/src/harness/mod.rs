//! Episodes, datasets, Monte Carlo experiments and reports.

pub mod config;
pub mod dataset;
pub mod episode;
pub mod experiment;
pub mod report;

pub use config::{preset, EstimatorKind, ErrorMode, ExperimentConfig, ShapeEntry, ShapeSetup};
pub use dataset::{collect_all, collect_dataset, Dataset, DatasetSample};
pub use episode::{run_episode, sample_error, EpisodeRecord, Estimator, TrialRecord};
pub use experiment::{run_experiment, ExperimentSummary, SummaryRow};
