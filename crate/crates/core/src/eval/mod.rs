//! Scoring imputations with downstream classifiers.
//!
//! Classifiers are trained on the rows that were complete in the original
//! data and tested on the imputed rows, so a better imputation shows up as
//! better test metrics.

use alloc::string::String;

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};

pub mod encode;
pub mod forest;
pub mod metrics;

pub use encode::{encode, EncodedMatrix, Encoder};
pub use forest::{train_forest, Forest, ForestConfig, ForestMode};
pub use metrics::{classification_report, roc_auc, ClassMetrics, EvaluationReport, ReductionStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("train and test schemas differ")]
    SchemaMismatch,
    #[error("test row {row} is missing `{column}`")]
    IncompleteTest { row: usize, column: String },
    #[error("training labels hold a single class")]
    SingleClassTraining,
    #[error("expected {expected} input dimensions, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("forest needs at least one tree")]
    NoTrees,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Trains on the complete rows of `original` and scores `imputed`. The
/// minority class of `original` is the positive class.
pub fn evaluate_imputation(original: &Dataset, imputed: &Dataset, cfg: &ForestConfig) -> Result<EvaluationReport, EvalError> {
    if original.schema() != imputed.schema() {
        return Err(EvalError::SchemaMismatch);
    }
    let partition = original.class_partition()?;
    let (positive, negative) = (partition.minority(), partition.majority());
    let complete: alloc::vec::Vec<usize> = (0..original.n_rows()).filter(|&r| original.is_complete_row(r)).collect();
    let train = original.select_rows(&complete);
    let (train_m, test_m, warnings) = encode(&train, imputed, positive)?;
    let forest = train_forest(&train_m, cfg)?;
    let proba = forest.predict_proba(&test_m)?;
    let predicted: alloc::vec::Vec<bool> = proba.iter().map(|&p| p >= 0.5).collect();
    let mut report = classification_report(&test_m.labels, &predicted, &proba, positive, negative)?;
    report.model = String::from(cfg.mode.as_str());
    report.warnings.splice(0..0, warnings);
    Ok(report)
}
