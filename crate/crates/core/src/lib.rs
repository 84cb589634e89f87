//! Core algorithms for imputing missing values in class-imbalanced tables
//! with a large language model.
//!
//! The pipeline is:
//!
//! 1. [`dataset`]: typed tables with an explicit missing mask, class
//!    partitioning, seeded missingness injection and example sampling.
//! 2. [`assoc`]: pairwise association across mixed column kinds (Pearson r,
//!    Cramér's V, correlation ratio η) on pairwise-complete rows.
//! 3. [`threshold`]: elbow detection on sorted association profiles,
//!    threshold resolution and predictor selection.
//! 4. [`prompt`] / [`response`]: byte-stable group-wise CSV prompts and
//!    strict parsing of the completion that answers them.
//! 5. [`backend`]: the completion interface plus the deterministic
//!    class-conditional mock used offline.
//! 6. [`orchestrator`]: relevance ordering, chunking and the sequential
//!    feature-by-feature imputation loop.
//! 7. [`eval`]: one-hot encoding, a seeded random forest and the
//!    classification report used to score imputations.
//!
//! The crate is `no_std` (it needs `alloc`). The `std` feature only turns on
//! parallel tree training; results are bit-identical either way.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assoc;
pub mod backend;
pub mod dataset;
pub mod eval;
pub mod orchestrator;
pub mod prompt;
pub mod response;
pub mod rng;
pub mod threshold;

pub use assoc::{AssociationMatrix, AssociationMeasure, AssociationProfile};
pub use backend::{BackendConfig, CompletionExchange, Completer, MockBackend, PromptRequest};
pub use dataset::{
    Cell, ClassPartition, ColumnKind, ColumnRole, ColumnSchema, Dataset, DatasetError,
    MissingnessSpec, Schema,
};
pub use orchestrator::{ImputationLog, ImputationPlan, RunOptions, RunOutcome};
pub use prompt::{PromptConfig, PromptStyle, RenderedPrompt};
pub use threshold::{ElbowResult, PredictorSet, SelectionMode};
