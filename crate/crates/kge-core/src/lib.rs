//! Knowledge graph embedding models trained as ensembles of independent
//! low-dimensional replicas.
//!
//! The crate covers the full pipeline: loading triple datasets, initializing
//! and training embedding models (TransE, RotatE, DistMult, ComplEx and their
//! N3-regularized variants), combining `k` independently trained replicas by
//! score averaging, filtered link-prediction evaluation, and relation-pattern
//! analysis.

pub mod data;
pub mod embedding;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod patterns;
pub mod scoring;
pub mod training;

pub use data::{Dataset, FilterIndex, Triple, Vocabulary};
pub use embedding::{EmbeddingTable, ModelKind, ModelParams};
pub use ensemble::EnsembleModel;
pub use error::{Error, Result};
pub use evaluation::{MetricsReport, RankResult, RepeatedRunReport, Scorer};
pub use training::TrainConfig;
