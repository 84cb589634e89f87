//! CSV-style imputation prompts.
//!
//! A grouped prompt is laid out top to bottom as
//!
//! ```text
//! <instruction>
//!
//! <column>: <description>          one line per included column
//!
//! <header>                         repeated once per example set
//! A.
//! <row>
//! B.
//! <row>
//!
//! Given the above data, fill in the missing values in the data sample below:
//! A.
//! <row with the feature shown as the missing marker>
//! B.
//! <row>
//! ```
//!
//! Sections are separated by one blank line and cells by ", ". The header
//! lists the target first, then the retained predictors strongest first, then
//! the imputation feature. The ungrouped variant drops the letter lines.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Cell, ClassPartition, ColumnKind, Dataset, ExampleSet};
use crate::threshold::PredictorSet;

pub const BRIDGE_LINE: &str =
    "Given the above data, fill in the missing values in the data sample below:";
pub const DEFAULT_MISSING_DISPLAY: &str = "No Record";
pub const DEFAULT_INSTRUCTION: &str = "Impute the missing values of the feature \"{feature_name}\" \
by learning from the completed example records below. Missing values are written as \"{missing_display}\". \
Output the imputed {feature_name} column only: one value per line, in the order the incomplete records \
appear, with no other text. There are exactly {missing_count} records to impute{group_counts}.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("missing marker `{0}` is also a category of the imputation feature")]
    ColumnCollision(String),
    #[error("example row {row} is missing `{column}`")]
    IncompleteExample { row: usize, column: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("class `{0}` has no group in the prompt configuration")]
    UnknownGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    Grouped,
    Ungrouped,
}

impl PromptStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptStyle::Grouped => "grouped",
            PromptStyle::Ungrouped => "ungrouped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLabel {
    pub class_value: String,
    pub display: String,
    pub letter: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub num_example_sets: usize,
    pub examples_per_group: usize,
    pub group_labels: Vec<GroupLabel>,
    pub missing_display: String,
    pub style: PromptStyle,
    pub instruction_template: String,
    /// Names shown in headers and descriptions instead of column names.
    #[serde(default)]
    pub column_labels: BTreeMap<String, String>,
}

/// "A.", "B.", ... for group positions 0, 1, ...
pub fn group_letter(i: usize) -> String {
    let c = (b'A' + (i % 26) as u8) as char;
    format!("{c}.")
}

impl PromptConfig {
    /// Groups in the given class order, lettered A., B., ...; each class is
    /// displayed as its raw value unless `display` maps it.
    pub fn new(class_order: &[&str], display: &BTreeMap<String, String>) -> Self {
        let group_labels = class_order
            .iter()
            .enumerate()
            .map(|(i, &c)| GroupLabel {
                class_value: c.to_string(),
                display: display.get(c).cloned().unwrap_or_else(|| c.to_string()),
                letter: group_letter(i),
            })
            .collect();
        Self {
            num_example_sets: 2,
            examples_per_group: 10,
            group_labels,
            missing_display: DEFAULT_MISSING_DISPLAY.to_string(),
            style: PromptStyle::Grouped,
            instruction_template: DEFAULT_INSTRUCTION.to_string(),
            column_labels: BTreeMap::new(),
        }
    }

    pub fn column_label<'a>(&'a self, name: &'a str) -> &'a str {
        self.column_labels.get(name).map_or(name, String::as_str)
    }

    /// Default layout for a partition: minority class as group A.
    pub fn for_partition(partition: &ClassPartition) -> Self {
        Self::new(&[partition.minority(), partition.majority()], &BTreeMap::new())
    }

    pub fn class_order(&self) -> Vec<&str> {
        self.group_labels.iter().map(|g| g.class_value.as_str()).collect()
    }

    fn group(&self, class_value: &str) -> Result<&GroupLabel, PromptError> {
        self.group_labels
            .iter()
            .find(|g| g.class_value == class_value)
            .ok_or_else(|| PromptError::UnknownGroup(class_value.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    /// Dataset row of each presented missing record, in presentation order.
    pub manifest: Vec<usize>,
    pub estimated_tokens: usize,
    pub included_columns: Vec<String>,
    /// Presented missing records per group letter, in group order.
    pub group_counts: Vec<(String, usize)>,
    pub warnings: Vec<String>,
}

/// Rough token count: one token per four bytes, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

/// Column indices shown in a prompt: target, predictors in set order, then
/// the imputation feature.
pub fn included_columns(data: &Dataset, set: &PredictorSet) -> Result<Vec<usize>, PromptError> {
    let schema = data.schema();
    let target = schema.target_index();
    let feature = schema
        .index_of(&set.feature)
        .ok_or_else(|| PromptError::UnknownColumn(set.feature.clone()))?;
    let mut cols = alloc::vec![target];
    for p in &set.predictors {
        let idx = schema
            .index_of(p)
            .ok_or_else(|| PromptError::UnknownColumn(p.clone()))?;
        if idx != target && idx != feature && !cols.contains(&idx) {
            cols.push(idx);
        }
    }
    cols.push(feature);
    Ok(cols)
}

struct Renderer<'a> {
    cfg: &'a PromptConfig,
    columns: Vec<usize>,
    feature: usize,
    target: usize,
    warnings: Vec<String>,
}

impl Renderer<'_> {
    fn display_cell(&self, col: usize, cell: &Cell) -> String {
        if col == self.target {
            let raw = cell.as_category().unwrap_or_default();
            return self
                .cfg
                .group_labels
                .iter()
                .find(|g| g.class_value == raw)
                .map(|g| g.display.clone())
                .unwrap_or_else(|| raw.to_string());
        }
        cell.render().unwrap_or_else(|| self.cfg.missing_display.clone())
    }

    fn example_row(&self, data: &Dataset, row: usize) -> Result<String, PromptError> {
        let mut cells = Vec::with_capacity(self.columns.len());
        for &c in &self.columns {
            let cell = data.cell(row, c);
            if cell.is_missing() {
                return Err(PromptError::IncompleteExample {
                    row,
                    column: data.schema().column(c).name.clone(),
                });
            }
            cells.push(self.display_cell(c, cell));
        }
        Ok(cells.join(", "))
    }

    fn missing_row(&mut self, data: &Dataset, row: usize) -> String {
        let mut cells = Vec::with_capacity(self.columns.len());
        for &c in &self.columns {
            if c == self.feature {
                cells.push(self.cfg.missing_display.clone());
                continue;
            }
            let cell = data.cell(row, c);
            if cell.is_missing() {
                self.warnings.push(format!(
                    "row {row}: predictor `{}` is not imputed yet and is shown as `{}`",
                    data.schema().column(c).name,
                    self.cfg.missing_display
                ));
            }
            cells.push(self.display_cell(c, cell));
        }
        cells.join(", ")
    }
}

fn check_collision(cfg: &PromptConfig, datasets: &[&Dataset], feature: usize) -> Result<(), PromptError> {
    for d in datasets {
        if d.schema().column(feature).kind != ColumnKind::Categorical {
            continue;
        }
        for cat in d.categories(feature) {
            if cat.eq_ignore_ascii_case(&cfg.missing_display) {
                return Err(PromptError::ColumnCollision(cat));
            }
        }
    }
    Ok(())
}

fn header_and_descriptions(cfg: &PromptConfig, data: &Dataset, columns: &[usize]) -> (String, String) {
    let schema = data.schema();
    let header = columns
        .iter()
        .map(|&c| cfg.column_label(&schema.column(c).name))
        .collect::<Vec<_>>()
        .join(", ");
    let mut descriptions = String::new();
    for &c in columns {
        let col = schema.column(c);
        descriptions.push_str(cfg.column_label(&col.name));
        descriptions.push_str(": ");
        descriptions.push_str(&col.description);
        descriptions.push('\n');
    }
    (header, descriptions)
}

fn instruction(cfg: &PromptConfig, feature: &str, missing: usize, group_counts: &[(String, usize)], grouped: bool) -> String {
    let counts = if grouped && !group_counts.is_empty() {
        let parts: Vec<String> = group_counts
            .iter()
            .map(|(letter, n)| format!("group {}: {n}", letter.trim_end_matches('.')))
            .collect();
        format!(" ({})", parts.join(", "))
    } else {
        String::new()
    };
    cfg.instruction_template
        .replace("{feature_name}", feature)
        .replace("{missing_display}", &cfg.missing_display)
        .replace("{missing_count}", &format!("{missing}"))
        .replace("{group_counts}", &counts)
}

fn finish(
    r: Renderer<'_>,
    data: &Dataset,
    instruction: String,
    descriptions: String,
    body: String,
    manifest: Vec<usize>,
    group_counts: Vec<(String, usize)>,
) -> RenderedPrompt {
    let mut text = instruction;
    text.push_str("\n\n");
    text.push_str(&descriptions);
    text.push_str(&body);
    RenderedPrompt {
        estimated_tokens: estimate_tokens(&text),
        text,
        manifest,
        included_columns: r
            .columns
            .iter()
            .map(|&c| data.schema().column(c).name.clone())
            .collect(),
        group_counts,
        warnings: r.warnings,
    }
}

/// Group-wise prompt. Example rows are taken from `examples`, missing
/// records from `data`; both share a schema. Missing records are grouped
/// by class in configuration order, keeping the given order within a group.
pub fn render_grouped(
    examples: &Dataset,
    sets: &[ExampleSet],
    data: &Dataset,
    missing: &[usize],
    cfg: &PromptConfig,
    predictor_set: &PredictorSet,
) -> Result<RenderedPrompt, PromptError> {
    let columns = included_columns(data, predictor_set)?;
    let feature = *columns.last().expect("feature column");
    check_collision(cfg, &[examples, data], feature)?;
    let mut r = Renderer {
        cfg,
        columns,
        feature,
        target: data.schema().target_index(),
        warnings: Vec::new(),
    };
    let (header, descriptions) = header_and_descriptions(cfg, data, &r.columns);

    let mut body = String::new();
    for set in sets {
        body.push('\n');
        body.push_str(&header);
        body.push('\n');
        for g in &cfg.group_labels {
            let rows = match set.rows_by_label.get(&g.class_value) {
                Some(rows) if !rows.is_empty() => rows,
                _ => continue,
            };
            body.push_str(&g.letter);
            body.push('\n');
            for &row in rows {
                body.push_str(&r.example_row(examples, row)?);
                body.push('\n');
            }
        }
    }

    for &row in missing {
        cfg.group(data.label(row))?;
    }
    body.push('\n');
    body.push_str(BRIDGE_LINE);
    body.push('\n');
    let mut manifest = Vec::with_capacity(missing.len());
    let mut group_counts = Vec::new();
    for g in &cfg.group_labels {
        let rows: Vec<usize> = missing
            .iter()
            .copied()
            .filter(|&row| data.label(row) == g.class_value)
            .collect();
        if rows.is_empty() {
            continue;
        }
        body.push_str(&g.letter);
        body.push('\n');
        for &row in &rows {
            let line = r.missing_row(data, row);
            body.push_str(&line);
            body.push('\n');
        }
        group_counts.push((g.letter.clone(), rows.len()));
        manifest.extend(rows);
    }
    let instr = instruction(cfg, cfg.column_label(&predictor_set.feature), manifest.len(), &group_counts, true);
    Ok(finish(r, data, instr, descriptions, body, manifest, group_counts))
}

/// Class-blind prompt: same sections without group letters. Example rows
/// and missing records appear in the given order.
pub fn render_ungrouped(
    examples: &Dataset,
    sets: &[Vec<usize>],
    data: &Dataset,
    missing: &[usize],
    cfg: &PromptConfig,
    predictor_set: &PredictorSet,
) -> Result<RenderedPrompt, PromptError> {
    let columns = included_columns(data, predictor_set)?;
    let feature = *columns.last().expect("feature column");
    check_collision(cfg, &[examples, data], feature)?;
    let mut r = Renderer {
        cfg,
        columns,
        feature,
        target: data.schema().target_index(),
        warnings: Vec::new(),
    };
    let (header, descriptions) = header_and_descriptions(cfg, data, &r.columns);

    let mut body = String::new();
    for set in sets {
        body.push('\n');
        body.push_str(&header);
        body.push('\n');
        for &row in set {
            body.push_str(&r.example_row(examples, row)?);
            body.push('\n');
        }
    }
    body.push('\n');
    body.push_str(BRIDGE_LINE);
    body.push('\n');
    for &row in missing {
        let line = r.missing_row(data, row);
        body.push_str(&line);
        body.push('\n');
    }
    let instr = instruction(cfg, cfg.column_label(&predictor_set.feature), missing.len(), &[], false);
    Ok(finish(r, data, instr, descriptions, body, missing.to_vec(), Vec::new()))
}
