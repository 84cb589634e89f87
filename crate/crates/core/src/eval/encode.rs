//! Numeric design matrices for the forest.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dataset::{Cell, ColumnKind, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub rows: Vec<Vec<f64>>,
    /// True for the positive class.
    pub labels: Vec<bool>,
    /// Emitted dimension names per source column, in column order.
    pub encoding: Vec<(String, Vec<String>)>,
}

impl EncodedMatrix {
    pub fn dim(&self) -> usize {
        self.encoding.iter().map(|(_, d)| d.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Block {
    Numeric { col: usize },
    OneHot { col: usize, categories: Vec<String> },
}

/// Encoding map fitted on a training table: numbers pass through, each
/// category becomes an indicator column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    blocks: Vec<Block>,
    names: Vec<String>,
    target: usize,
    positive: String,
}

impl Encoder {
    pub fn fit(train: &Dataset, positive: &str) -> Encoder {
        let schema = train.schema();
        let target = schema.target_index();
        let mut blocks = Vec::new();
        let mut names = Vec::new();
        for (col, c) in schema.columns().iter().enumerate() {
            if col == target {
                continue;
            }
            names.push(c.name.clone());
            blocks.push(match c.kind {
                ColumnKind::Numerical => Block::Numeric { col },
                ColumnKind::Categorical => {
                    let cats: BTreeSet<String> = (0..train.n_rows())
                        .filter_map(|r| train.cell(r, col).as_category().map(String::from))
                        .collect();
                    Block::OneHot {
                        col,
                        categories: cats.into_iter().collect(),
                    }
                }
            });
        }
        Encoder {
            blocks,
            names,
            target,
            positive: positive.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Numeric { .. } => 1,
                Block::OneHot { categories, .. } => categories.len(),
            })
            .sum()
    }

    /// Encodes `d`. Categories unseen at fit time become an all-zero block
    /// and produce a warning.
    pub fn transform(&self, d: &Dataset) -> Result<(EncodedMatrix, Vec<String>), EvalError> {
        let mut warnings = Vec::new();
        let mut rows = Vec::with_capacity(d.n_rows());
        for r in 0..d.n_rows() {
            let mut x = Vec::with_capacity(self.dim());
            for b in &self.blocks {
                let col = match b {
                    Block::Numeric { col } | Block::OneHot { col, .. } => *col,
                };
                let cell = d.cell(r, col);
                if cell.is_missing() {
                    return Err(EvalError::IncompleteTest {
                        row: r,
                        column: d.schema().column(col).name.clone(),
                    });
                }
                match (b, cell) {
                    (Block::Numeric { .. }, Cell::Number(v)) => x.push(*v),
                    (Block::OneHot { categories, .. }, Cell::Category(v)) => {
                        let hit = categories.binary_search(v).ok();
                        if hit.is_none() {
                            warnings.push(format!(
                                "row {r}: `{v}` was not seen in training for `{}`",
                                d.schema().column(col).name
                            ));
                        }
                        x.extend((0..categories.len()).map(|i| if Some(i) == hit { 1.0 } else { 0.0 }));
                    }
                    _ => return Err(EvalError::SchemaMismatch),
                }
            }
            rows.push(x);
        }
        let labels = (0..d.n_rows())
            .map(|r| d.cell(r, self.target).as_category() == Some(self.positive.as_str()))
            .collect();
        let encoding = self
            .blocks
            .iter()
            .zip(&self.names)
            .map(|(b, name)| {
                let dims = match b {
                    Block::Numeric { .. } => alloc::vec![name.clone()],
                    Block::OneHot { categories, .. } => {
                        categories.iter().map(|c| format!("{name}={c}")).collect()
                    }
                };
                (name.clone(), dims)
            })
            .collect();
        Ok((EncodedMatrix { rows, labels, encoding }, warnings))
    }
}

/// Fits the encoding on `train` only and applies it to both tables.
pub fn encode(
    train: &Dataset,
    test: &Dataset,
    positive: &str,
) -> Result<(EncodedMatrix, EncodedMatrix, Vec<String>), EvalError> {
    if train.schema() != test.schema() {
        return Err(EvalError::SchemaMismatch);
    }
    let enc = Encoder::fit(train, positive);
    let (tr, _) = enc.transform(train)?;
    let (te, warnings) = enc.transform(test)?;
    Ok((tr, te, warnings))
}
