//! Feature-by-feature imputation.
//!
//! Features are imputed one after another in relevance order. For each
//! feature the missing rows are cut into chunks, every chunk gets freshly
//! sampled example sets and one prompt, and the parsed answers are written
//! back before the next feature starts, so later prompts see earlier
//! imputations as ordinary context.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{mock_impute, BackendError, Completer, MockContext, PromptRequest};
use crate::dataset::{
    sample_examples, sample_examples_flat, Cell, ClassPartition, ColumnKind, ColumnRole, Dataset,
    DatasetError,
};
use crate::prompt::{render_grouped, render_ungrouped, PromptConfig, PromptError, PromptStyle, RenderedPrompt};
use crate::response::{parse_response, Domain};
use crate::rng::derive_seed;
use crate::threshold::PredictorSet;

/// Chunks sent to the backend together before cancellation is checked again.
const WAVE: usize = 32;
const UNGROUPED_POOL: &str = "*";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("`{0}` is not an imputable feature column")]
    NotAFeature(String),
    #[error("no predictor set for `{0}`")]
    MissingPredictorSet(String),
    #[error("backend failed: {0}")]
    Backend(BackendError),
    #[error("fallback for `{feature}` chunk {chunk} failed: {source}")]
    FallbackFailed {
        feature: String,
        chunk: usize,
        source: BackendError,
    },
}

/// One prompt's worth of missing rows, per class in group order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: usize,
    pub rows_by_class: Vec<(String, Vec<usize>)>,
}

impl Chunk {
    pub fn rows(&self) -> Vec<usize> {
        self.rows_by_class.iter().flat_map(|(_, r)| r.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.rows_by_class.iter().map(|(_, r)| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationPlan {
    pub ordered_features: Vec<String>,
    pub predictor_sets: BTreeMap<String, PredictorSet>,
    pub chunks: BTreeMap<String, Vec<Chunk>>,
    pub prompt_config: PromptConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub feature: String,
    pub chunk_id: usize,
    pub style: PromptStyle,
    pub rows: usize,
    pub prompt_tokens: usize,
    /// Completion calls made for this chunk, over all parse retries.
    pub attempts: u32,
    pub fallback: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationLog {
    pub backend_mode: String,
    pub records: Vec<ChunkRecord>,
}

impl ImputationLog {
    pub fn fallback_count(&self) -> usize {
        self.records.iter().filter(|r| r.fallback).count()
    }

    pub fn total_prompt_tokens(&self) -> usize {
        self.records.iter().map(|r| r.prompt_tokens).sum()
    }
}

/// A rendered prompt kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDump {
    pub feature: String,
    pub chunk_id: usize,
    pub text: String,
    /// Source row ids of the presented missing records, in order.
    pub manifest: Vec<usize>,
    pub expected: usize,
    pub estimated_tokens: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Completion retries after an unparsable answer.
    pub max_retries: u32,
    pub keep_prompts: bool,
    pub cancel: Option<&'a AtomicBool>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dataset: Dataset,
    pub log: ImputationLog,
    pub prompts: Vec<PromptDump>,
    /// False when the run stopped early on cancellation.
    pub completed: bool,
}

/// Orders features by how many other features' predictor sets contain
/// them (descending), then by fewer missing cells, then by schema order.
pub fn relevance_order(data: &Dataset, features: &[String], sets: &BTreeMap<String, PredictorSet>) -> Vec<String> {
    let score = |f: &String| {
        features
            .iter()
            .filter(|g| *g != f)
            .filter(|g| sets.get(*g).is_some_and(|s| s.contains(f)))
            .count()
    };
    let mut keyed: Vec<(usize, usize, usize, String)> = features
        .iter()
        .map(|f| {
            let idx = data.schema().index_of(f).unwrap_or(usize::MAX);
            let missing = if idx == usize::MAX { 0 } else { data.missing_count(idx) };
            (score(f), missing, idx, f.clone())
        })
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    keyed.into_iter().map(|k| k.3).collect()
}

/// Splits `rows` per class into runs of at most `k` rows (original order)
/// and zips the runs into chunks. Classes without rows in a chunk are left
/// out of it.
pub fn chunk_missing(data: &Dataset, rows: &[usize], class_order: &[&str], k: usize) -> Vec<Chunk> {
    let k = k.max(1);
    let per_class: Vec<(&str, Vec<usize>)> = class_order
        .iter()
        .map(|&c| {
            let mut mine: Vec<usize> = rows.iter().copied().filter(|&r| data.label(r) == c).collect();
            mine.sort_unstable();
            (c, mine)
        })
        .collect();
    let n = per_class.iter().map(|(_, r)| r.len().div_ceil(k)).max().unwrap_or(0);
    (0..n)
        .map(|i| Chunk {
            id: i,
            rows_by_class: per_class
                .iter()
                .filter_map(|(c, r)| r.chunks(k).nth(i).map(|s| (c.to_string(), s.to_vec())))
                .collect(),
        })
        .collect()
}

/// Resolves order and chunks for `features`.
pub fn build_plan(
    data: &Dataset,
    features: &[String],
    predictor_sets: &BTreeMap<String, PredictorSet>,
    prompt_config: PromptConfig,
    seed: u64,
) -> Result<ImputationPlan, OrchestratorError> {
    let mut sets = BTreeMap::new();
    for f in features {
        let idx = data.schema().require(f)?;
        if data.schema().column(idx).role != ColumnRole::Feature {
            return Err(OrchestratorError::NotAFeature(f.clone()));
        }
        let set = predictor_sets
            .get(f)
            .ok_or_else(|| OrchestratorError::MissingPredictorSet(f.clone()))?;
        sets.insert(f.clone(), set.clone());
    }
    let ordered_features = relevance_order(data, features, &sets);
    let class_order = prompt_config.class_order();
    let mut chunks = BTreeMap::new();
    for f in &ordered_features {
        let idx = data.schema().require(f)?;
        let rows = data.missing_rows(idx);
        let cs = chunk_missing(data, &rows, &class_order, prompt_config.examples_per_group);
        if cs.iter().map(Chunk::len).sum::<usize>() != rows.len() {
            let stray = rows
                .iter()
                .map(|&r| data.label(r))
                .find(|l| !class_order.contains(l))
                .unwrap_or_default();
            return Err(PromptError::UnknownGroup(stray.to_string()).into());
        }
        chunks.insert(f.clone(), cs);
    }
    Ok(ImputationPlan {
        ordered_features,
        predictor_sets: sets,
        chunks,
        prompt_config,
        seed,
    })
}

struct Prepared {
    chunk_id: usize,
    prompt: RenderedPrompt,
    mock: MockContext,
}

fn values_by_class(data: &Dataset, rows: impl Iterator<Item = usize>, col: usize) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in rows {
        if let Some(v) = data.cell(r, col).render() {
            out.entry(data.label(r).to_string()).or_default().push(v);
        }
    }
    out
}

fn pooled(mut by_class: BTreeMap<String, Vec<String>>) -> BTreeMap<String, Vec<String>> {
    let all: Vec<String> = core::mem::take(&mut by_class).into_values().flatten().collect();
    [(UNGROUPED_POOL.to_string(), all)].into()
}

fn prepare(
    plan: &ImputationPlan,
    work: &Dataset,
    complete: &ClassPartition,
    feature: &str,
    chunk: &Chunk,
) -> Result<Prepared, OrchestratorError> {
    let cfg = &plan.prompt_config;
    let set = plan
        .predictor_sets
        .get(feature)
        .ok_or_else(|| OrchestratorError::MissingPredictorSet(feature.to_string()))?;
    let col = work.schema().require(feature)?;
    // Keyed by schema position so a chunk sees the same examples under
    // any threshold or feature order.
    let seed = derive_seed(plan.seed, &[col as u64, chunk.id as u64]);
    let kind = Some(work.schema().column(col).kind);
    match cfg.style {
        PromptStyle::Grouped => {
            let sets = sample_examples(complete, cfg.examples_per_group, cfg.num_example_sets, seed)?;
            let prompt = render_grouped(work, &sets, work, &chunk.rows(), cfg, set)?;
            let example_rows = sets.iter().flat_map(|s| s.rows_by_label.values().flatten().copied());
            let mock = MockContext {
                kind,
                examples_by_class: values_by_class(work, example_rows, col),
                missing_classes: prompt.manifest.iter().map(|&r| work.label(r).to_string()).collect(),
            };
            Ok(Prepared {
                chunk_id: chunk.id,
                prompt,
                mock,
            })
        }
        PromptStyle::Ungrouped => {
            let per_set = cfg.examples_per_group * cfg.group_labels.len();
            let sets = sample_examples_flat(complete, per_set, cfg.num_example_sets, seed)?;
            let mut missing = chunk.rows();
            missing.sort_unstable();
            let prompt = render_ungrouped(work, &sets, work, &missing, cfg, set)?;
            // Without group blocks the mock cannot tell classes apart either.
            let mock = MockContext {
                kind,
                examples_by_class: pooled(values_by_class(work, sets.iter().flatten().copied(), col)),
                missing_classes: alloc::vec![UNGROUPED_POOL.to_string(); prompt.manifest.len()],
            };
            Ok(Prepared {
                chunk_id: chunk.id,
                prompt,
                mock,
            })
        }
    }
}

/// The prompt `run` would send for `chunk` of `feature` if `data` were the
/// current state of the table.
pub fn chunk_prompt(
    plan: &ImputationPlan,
    data: &Dataset,
    feature: &str,
    chunk: &Chunk,
) -> Result<RenderedPrompt, OrchestratorError> {
    let complete = data
        .class_partition()?
        .restrict(|r| data.is_complete_row(r));
    Ok(prepare(plan, data, &complete, feature, chunk)?.prompt)
}

fn cancelled(opts: &RunOptions<'_>) -> bool {
    opts.cancel.is_some_and(|c| c.load(Ordering::SeqCst))
}

/// Runs `plan` against `data`. Observed cells are never changed; every
/// planned missing cell is filled unless the run is cancelled.
pub fn run(
    plan: &ImputationPlan,
    data: &Dataset,
    backend: &dyn Completer,
    opts: &RunOptions<'_>,
) -> Result<RunOutcome, OrchestratorError> {
    let mut work = data.clone();
    let mut log = ImputationLog {
        backend_mode: backend.mode().to_string(),
        records: Vec::new(),
    };
    let mut prompts = Vec::new();
    let complete = data
        .class_partition()?
        .restrict(|r| data.is_complete_row(r));

    for feature in &plan.ordered_features {
        let col = work.schema().require(feature)?;
        let kind = work.schema().column(col).kind;
        let categories = data.categories(col);
        let domain = match kind {
            ColumnKind::Categorical => Domain::Categories(&categories),
            ColumnKind::Numerical => Domain::Numeric,
        };
        let pool = MockContext {
            kind: Some(kind),
            examples_by_class: values_by_class(
                data,
                complete.rows_by_label().values().flatten().copied(),
                col,
            ),
            missing_classes: Vec::new(),
        };
        let chunks = plan.chunks.get(feature).map(Vec::as_slice).unwrap_or(&[]);

        for wave in chunks.chunks(WAVE) {
            if cancelled(opts) {
                return Ok(RunOutcome {
                    dataset: work,
                    log,
                    prompts,
                    completed: false,
                });
            }
            let prepared: Vec<Prepared> = wave
                .iter()
                .map(|c| prepare(plan, &work, &complete, feature, c))
                .collect::<Result<_, _>>()?;
            let mut answers: Vec<Option<Vec<String>>> = alloc::vec![None; prepared.len()];
            let mut attempts = alloc::vec![0u32; prepared.len()];
            let mut notes: Vec<Vec<String>> = prepared.iter().map(|p| p.prompt.warnings.clone()).collect();
            let mut pending: Vec<usize> = (0..prepared.len()).collect();
            let mut failed: Vec<usize> = Vec::new();

            for round in 0..=opts.max_retries {
                if pending.is_empty() {
                    break;
                }
                let reqs: Vec<PromptRequest> = pending
                    .iter()
                    .map(|&i| PromptRequest {
                        id: format!("{feature}-{}", prepared[i].chunk_id),
                        prompt: prepared[i].prompt.clone(),
                        mock: prepared[i].mock.clone(),
                    })
                    .collect();
                let results = backend.complete_batch(&reqs);
                let mut retry = Vec::new();
                for (&i, res) in pending.iter().zip(results) {
                    match res {
                        Ok(ex) => {
                            attempts[i] += ex.attempt_count;
                            let expected = prepared[i].prompt.manifest.len();
                            match parse_response(&ex.response_text, expected, domain) {
                                Ok(p) => {
                                    notes[i].extend(p.diagnostics);
                                    answers[i] = Some(p.values);
                                }
                                Err(e) => {
                                    notes[i].push(format!("attempt {}: {e}", round + 1));
                                    retry.push(i);
                                }
                            }
                        }
                        Err(e) if e.is_fatal() => return Err(OrchestratorError::Backend(e)),
                        Err(e) => {
                            attempts[i] += 1;
                            notes[i].push(format!("backend error: {e}"));
                            failed.push(i);
                        }
                    }
                }
                pending = retry;
            }
            failed.extend(pending);

            let mut fallback = alloc::vec![false; prepared.len()];
            for i in failed {
                let ctx = MockContext {
                    missing_classes: prepared[i]
                        .prompt
                        .manifest
                        .iter()
                        .map(|&r| work.label(r).to_string())
                        .collect(),
                    ..pool.clone()
                };
                let text = mock_impute(&ctx).map_err(|source| OrchestratorError::FallbackFailed {
                    feature: feature.clone(),
                    chunk: prepared[i].chunk_id,
                    source,
                })?;
                let parsed = parse_response(&text, ctx.missing_classes.len(), domain)
                    .expect("fallback answers come from the column's own values");
                answers[i] = Some(parsed.values);
                fallback[i] = true;
            }

            for (i, p) in prepared.into_iter().enumerate() {
                let values = answers[i].take().expect("every chunk answered");
                for (&row, v) in p.prompt.manifest.iter().zip(&values) {
                    let cell = match kind {
                        ColumnKind::Numerical => Cell::Number(v.parse().expect("validated numeric")),
                        ColumnKind::Categorical => Cell::Category(v.clone()),
                    };
                    work.set_cell(row, col, cell);
                }
                log.records.push(ChunkRecord {
                    feature: feature.clone(),
                    chunk_id: p.chunk_id,
                    style: plan.prompt_config.style,
                    rows: p.prompt.manifest.len(),
                    prompt_tokens: p.prompt.estimated_tokens,
                    attempts: attempts[i],
                    fallback: fallback[i],
                    warnings: core::mem::take(&mut notes[i]),
                });
                if opts.keep_prompts {
                    prompts.push(PromptDump {
                        feature: feature.clone(),
                        chunk_id: p.chunk_id,
                        expected: p.prompt.manifest.len(),
                        manifest: p.prompt.manifest.iter().map(|&r| data.row_ids()[r]).collect(),
                        estimated_tokens: p.prompt.estimated_tokens,
                        text: p.prompt.text,
                    });
                }
            }
        }
    }
    Ok(RunOutcome {
        dataset: work,
        log,
        prompts,
        completed: true,
    })
}

/// The same pipeline with the prompt style forced to `style`. Sampling
/// sizes are equal between styles: an ungrouped set holds as many rows as
/// all groups of a grouped set together.
pub fn ablation_run(
    plan: &ImputationPlan,
    data: &Dataset,
    backend: &dyn Completer,
    style: PromptStyle,
    opts: &RunOptions<'_>,
) -> Result<RunOutcome, OrchestratorError> {
    let mut plan = plan.clone();
    plan.prompt_config.style = style;
    run(&plan, data, backend, opts)
}
