//! Typed tables with explicit missingness and a binary class target.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("schema must declare exactly one target column, found {0}")]
    TargetCount(usize),
    #[error("duplicate column name `{0}` in schema")]
    DuplicateColumn(String),
    #[error("column `{0}` needs a non-empty, single-line description")]
    InvalidDescription(String),
    #[error("header does not match schema: expected {expected:?}, found {found:?}")]
    SchemaMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("row {row} has {found} cells, schema has {expected} columns")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: `{value}` is not a finite number")]
    UnparsableNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: cell type does not match the column kind")]
    KindMismatch { row: usize, column: String },
    #[error("row {row} has a missing target value")]
    MissingTarget { row: usize },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("target must have exactly 2 distinct values, found {0}")]
    NonBinaryTarget(usize),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not a feature column")]
    NotAFeature(String),
    #[error("unknown class label `{0}`")]
    UnknownClass(String),
    #[error("cannot mark {requested} cells missing in class `{label}`: only {available} observed")]
    InfeasibleCount {
        label: String,
        requested: usize,
        available: usize,
    },
    #[error("class `{label}` has {available} complete rows, {needed} needed")]
    InsufficientCompleteRows {
        label: String,
        needed: usize,
        available: usize,
    },
}

pub type Result<T> = core::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Target,
    Feature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub description: String,
    pub role: ColumnRole,
}

impl ColumnSchema {
    pub fn feature(name: &str, kind: ColumnKind, description: &str) -> Self {
        Self {
            name: name.to_string(),
            kind,
            description: description.to_string(),
            role: ColumnRole::Feature,
        }
    }

    pub fn target(name: &str, description: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            description: description.to_string(),
            role: ColumnRole::Target,
        }
    }
}

/// Validated, ordered column list with exactly one target.
///
/// A target declared numerical is treated as categorical: targets are class
/// labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColumnSchema>", into = "Vec<ColumnSchema>")]
pub struct Schema {
    columns: Vec<ColumnSchema>,
    target: usize,
}

impl TryFrom<Vec<ColumnSchema>> for Schema {
    type Error = DatasetError;

    fn try_from(columns: Vec<ColumnSchema>) -> Result<Self> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<ColumnSchema> {
    fn from(schema: Schema) -> Self {
        schema.columns
    }
}

impl Schema {
    pub fn new(mut columns: Vec<ColumnSchema>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(DatasetError::DuplicateColumn(col.name.clone()));
            }
            if col.description.trim().is_empty()
                || col.description.contains('\n')
                || col.description.contains('\r')
            {
                return Err(DatasetError::InvalidDescription(col.name.clone()));
            }
        }
        let targets: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == ColumnRole::Target)
            .map(|(i, _)| i)
            .collect();
        if targets.len() != 1 {
            return Err(DatasetError::TargetCount(targets.len()));
        }
        let target = targets[0];
        columns[target].kind = ColumnKind::Categorical;
        Ok(Self { columns, target })
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, idx: usize) -> &ColumnSchema {
        &self.columns[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target_name(&self) -> &str {
        &self.columns[self.target].name
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Number of non-target columns.
    pub fn feature_count(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn check_header(&self, header: &[String]) -> Result<()> {
        let expected = self.names();
        if expected.as_slice() != header {
            return Err(DatasetError::SchemaMismatch {
                expected,
                found: header.to_vec(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Missing,
    Category(String),
    Number(f64),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Cell::Category(s) => Some(s),
            _ => None,
        }
    }

    /// Canonical text of an observed cell; `None` when missing.
    pub fn render(&self) -> Option<String> {
        match self {
            Cell::Missing => None,
            Cell::Category(s) => Some(s.clone()),
            Cell::Number(v) => Some(format_number(*v)),
        }
    }
}

/// Shortest decimal text that parses back to the same value. Integral values
/// carry no fractional part.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

/// A table of typed cells. Rows are immutable once built; operations return
/// new datasets. `row_ids` records each row's index in the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Cell>>,
    row_ids: Vec<usize>,
    provenance: String,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>, provenance: &str) -> Result<Self> {
        let ids = (0..rows.len()).collect();
        Self::with_row_ids(schema, rows, ids, provenance)
    }

    pub fn with_row_ids(
        schema: Schema,
        rows: Vec<Vec<Cell>>,
        row_ids: Vec<usize>,
        provenance: &str,
    ) -> Result<Self> {
        assert_eq!(rows.len(), row_ids.len(), "one row id per row");
        let target = schema.target_index();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(DatasetError::RowWidth {
                    row: r,
                    expected: schema.len(),
                    found: row.len(),
                });
            }
            for (c, cell) in row.iter().enumerate() {
                let col = schema.column(c);
                let ok = match (cell, col.kind) {
                    (Cell::Missing, _) => true,
                    (Cell::Category(_), ColumnKind::Categorical) => true,
                    (Cell::Number(v), ColumnKind::Numerical) => v.is_finite(),
                    _ => false,
                };
                if !ok {
                    return Err(DatasetError::KindMismatch {
                        row: r,
                        column: col.name.clone(),
                    });
                }
            }
            if row[target].is_missing() {
                return Err(DatasetError::MissingTarget { row: r });
            }
        }
        Ok(Self {
            schema,
            rows,
            row_ids,
            provenance: provenance.to_string(),
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, idx: usize) -> &[Cell] {
        &self.rows[idx]
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.rows[row][col]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.rows[row][col].is_missing()
    }

    pub fn missing_mask(&self) -> Vec<Vec<bool>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(Cell::is_missing).collect())
            .collect()
    }

    pub fn missing_rows(&self, col: usize) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&r| self.rows[r][col].is_missing())
            .collect()
    }

    pub fn missing_count(&self, col: usize) -> usize {
        self.rows.iter().filter(|r| r[col].is_missing()).count()
    }

    pub fn total_missing(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|c| c.is_missing()).count())
            .sum()
    }

    /// Columns that contain at least one missing cell, in schema order.
    pub fn incomplete_columns(&self) -> Vec<String> {
        (0..self.n_cols())
            .filter(|&c| self.missing_count(c) > 0)
            .map(|c| self.schema.column(c).name.clone())
            .collect()
    }

    pub fn is_complete_row(&self, row: usize) -> bool {
        !self.rows[row].iter().any(Cell::is_missing)
    }

    /// Target label of a row.
    pub fn label(&self, row: usize) -> &str {
        match &self.rows[row][self.schema.target_index()] {
            Cell::Category(s) => s,
            _ => unreachable!("target cells are categorical and observed"),
        }
    }

    /// Sorted distinct observed categories of a categorical column.
    pub fn categories(&self, col: usize) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .rows
            .iter()
            .filter_map(|r| r[col].as_category())
            .collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            row_ids: idx.iter().map(|&i| self.row_ids[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub(crate) fn set_cell(&mut self, row: usize, col: usize, cell: Cell) {
        debug_assert_ne!(col, self.schema.target_index());
        self.rows[row][col] = cell;
    }

    /// Rows with no missing cell, and the rest. Order is preserved and the
    /// source row ids travel with each part.
    pub fn split_complete_incomplete(&self) -> (Dataset, Dataset) {
        let (complete, incomplete): (Vec<usize>, Vec<usize>) =
            (0..self.n_rows()).partition(|&r| self.is_complete_row(r));
        (self.select_rows(&complete), self.select_rows(&incomplete))
    }

    pub fn class_partition(&self) -> Result<ClassPartition> {
        let mut by_label: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for r in 0..self.n_rows() {
            by_label.entry(self.label(r).to_string()).or_default().push(r);
        }
        ClassPartition::from_map(by_label)
    }

    /// Marks `per_class_count[label]` additional cells of `spec.feature`
    /// missing in each class, sampled uniformly without replacement among
    /// that class's rows where the cell is observed. Returns the new dataset
    /// and the removed values for audit, ordered by row.
    pub fn inject_missingness(&self, spec: &MissingnessSpec) -> Result<(Dataset, Vec<AuditEntry>)> {
        let col = self.schema.require(&spec.feature)?;
        if self.schema.column(col).role != ColumnRole::Feature {
            return Err(DatasetError::NotAFeature(spec.feature.clone()));
        }
        let partition = self.class_partition()?;
        let mut rng = rng::seeded(spec.seed);
        let mut chosen = Vec::new();
        for (label, &count) in &spec.per_class_count {
            let rows = partition
                .rows(label)
                .ok_or_else(|| DatasetError::UnknownClass(label.clone()))?;
            let observed: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&r| !self.is_missing(r, col))
                .collect();
            if count > observed.len() {
                return Err(DatasetError::InfeasibleCount {
                    label: label.clone(),
                    requested: count,
                    available: observed.len(),
                });
            }
            for i in index::sample(&mut rng, observed.len(), count).iter() {
                chosen.push(observed[i]);
            }
        }
        chosen.sort_unstable();

        let mut out = self.clone();
        let mut audit = Vec::with_capacity(chosen.len());
        for r in chosen {
            let original = out.rows[r][col].render().expect("observed cell");
            audit.push(AuditEntry {
                row_index: self.row_ids[r],
                column: spec.feature.clone(),
                original_value: original,
            });
            out.rows[r][col] = Cell::Missing;
        }
        Ok((out, audit))
    }
}

/// Row indices grouped by target label, with the majority/minority pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPartition {
    majority: String,
    minority: String,
    rows_by_label: BTreeMap<String, Vec<usize>>,
}

impl ClassPartition {
    /// Builds a partition from label → rows. The larger class is the
    /// majority; on equal counts the lexicographically smaller label is.
    pub fn from_map(rows_by_label: BTreeMap<String, Vec<usize>>) -> Result<Self> {
        if rows_by_label.len() != 2 {
            return Err(DatasetError::NonBinaryTarget(rows_by_label.len()));
        }
        let mut labels: Vec<(&String, usize)> =
            rows_by_label.iter().map(|(k, v)| (k, v.len())).collect();
        // BTreeMap order makes the stable sort break ties by label.
        labels.sort_by_key(|l| core::cmp::Reverse(l.1));
        let majority = labels[0].0.clone();
        let minority = labels[1].0.clone();
        Ok(Self {
            majority,
            minority,
            rows_by_label,
        })
    }

    pub fn majority(&self) -> &str {
        &self.majority
    }

    pub fn minority(&self) -> &str {
        &self.minority
    }

    /// (majority, minority)
    pub fn group_labels(&self) -> (&str, &str) {
        (&self.majority, &self.minority)
    }

    pub fn rows(&self, label: &str) -> Option<&[usize]> {
        self.rows_by_label.get(label).map(Vec::as_slice)
    }

    pub fn rows_by_label(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.rows_by_label
    }

    pub fn label_of(&self, row: usize) -> Option<&str> {
        self.rows_by_label
            .iter()
            .find(|(_, rows)| rows.binary_search(&row).is_ok())
            .map(|(l, _)| l.as_str())
    }

    /// Same labels and majority/minority roles, keeping only rows accepted
    /// by `keep`.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> ClassPartition {
        ClassPartition {
            majority: self.majority.clone(),
            minority: self.minority.clone(),
            rows_by_label: self
                .rows_by_label
                .iter()
                .map(|(l, rows)| (l.clone(), rows.iter().copied().filter(|&r| keep(r)).collect()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub feature: String,
    pub per_class_count: BTreeMap<String, usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub row_index: usize,
    pub column: String,
    pub original_value: String,
}

/// One set of in-context examples: row indices per class label.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExampleSet {
    pub rows_by_label: BTreeMap<String, Vec<usize>>,
}

/// Draws `num_sets` example sets of `k_per_group` rows per class from
/// the partition. No row appears twice across the sets.
pub fn sample_examples(
    partition: &ClassPartition,
    k_per_group: usize,
    num_sets: usize,
    seed: u64,
) -> Result<Vec<ExampleSet>> {
    let needed = k_per_group * num_sets;
    let mut sets = alloc::vec![ExampleSet::default(); num_sets];
    let mut rng = rng::seeded(seed);
    for (label, rows) in partition.rows_by_label() {
        if rows.len() < needed {
            return Err(DatasetError::InsufficientCompleteRows {
                label: label.clone(),
                needed,
                available: rows.len(),
            });
        }
        let picks: Vec<usize> = index::sample(&mut rng, rows.len(), needed)
            .iter()
            .map(|i| rows[i])
            .collect();
        for (set, chunk) in sets.iter_mut().zip(picks.chunks(k_per_group.max(1))) {
            set.rows_by_label.insert(label.clone(), chunk.to_vec());
        }
        if k_per_group == 0 {
            for set in sets.iter_mut() {
                set.rows_by_label.insert(label.clone(), Vec::new());
            }
        }
    }
    Ok(sets)
}

/// Class-blind counterpart of [`sample_examples`]: `num_sets` sets of
/// `per_set` rows drawn from the pooled rows without replacement.
pub fn sample_examples_flat(
    partition: &ClassPartition,
    per_set: usize,
    num_sets: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let mut pool: Vec<usize> = partition
        .rows_by_label()
        .values()
        .flat_map(|rows| rows.iter().copied())
        .collect();
    pool.sort_unstable();
    let needed = per_set * num_sets;
    if pool.len() < needed {
        return Err(DatasetError::InsufficientCompleteRows {
            label: "*".to_string(),
            needed,
            available: pool.len(),
        });
    }
    let mut rng = rng::seeded(seed);
    let picks: Vec<usize> = index::sample(&mut rng, pool.len(), needed)
        .iter()
        .map(|i| pool[i])
        .collect();
    Ok((0..num_sets)
        .map(|s| picks[s * per_set..(s + 1) * per_set].to_vec())
        .collect())
}
