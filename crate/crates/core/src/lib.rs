//! Gated generalized zero-shot classification built on a two-stream
//! autoencoder.
//!
//! A visual autoencoder and an attribute autoencoder share one latent
//! space. Distances from a query's latent code to the seen and unseen class
//! embeddings give a score that routes the query either to a seen-class
//! softmax classifier or to an unseen-class nearest-neighbour expert.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ae;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod experts;
pub mod linalg;
pub mod metrics;
pub mod mlp;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod scores;

pub use ae::{train, AeDims, TrainConfig, TrainingSet, TwoStreamAE};
pub use checkpoint::Checkpoint;
pub use data::{generate_synthetic, load_bundle, save_bundle, DatasetBundle, SplitSpec, SynthSpec};
pub use error::{Error, Result};
pub use experts::{Prediction, SeenClassifier, SeenClfConfig};
pub use linalg::Matrix;
pub use metrics::EvalReport;
pub use pipeline::{
    evaluate_gzsl, evaluate_no_gating, retrain_final, train_final, tune, GatedPredictor, PipelineConfig,
    SeenExpertKind, TuneGrids, TuneResult,
};
pub use rng::Rng;
pub use scores::{GateConfig, GateScores, ReferenceBanks, Route, ScoreKind};
