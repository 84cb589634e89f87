//! Subcommands. Each one loads the configured table, does its work, writes
//! artifacts under the output directory and finishes with `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

use impute_forge_core::backend::BackendKind;
use impute_forge_core::eval::{evaluate_imputation, EvaluationReport, ForestConfig, ForestMode};
use impute_forge_core::orchestrator::{build_plan, run, ImputationPlan, PromptDump, RunOptions, RunOutcome};
use impute_forge_core::{BackendConfig, Completer, MockBackend, PromptStyle};
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, load_workspace, resolve_run, write_analysis, write_json, PolicyRun, Workspace};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::http::HttpBackend;
use crate::io;
use crate::manifest::{Manifest, RunRecord};

pub fn make_backend(cfg: &BackendConfig) -> Result<Box<dyn Completer>, CliError> {
    Ok(match cfg.kind {
        BackendKind::Mock => Box::new(MockBackend),
        BackendKind::Http => Box::new(HttpBackend::new(cfg)?),
    })
}

fn missing_token(cfg: &RunConfig) -> &str {
    cfg.sentinels.first().map(String::as_str).unwrap_or("")
}

pub fn cmd_analyze(cfg: &RunConfig, emit_thresholds: bool) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let ws = load_workspace(cfg)?;
    let mut manifest = Manifest::new("analyze", cfg);
    if ws.features.is_empty() {
        eprintln!("no missing cells: nothing to impute");
        manifest.notes.push("no imputation features".into());
    }
    let a = analyze(&ws.full, &ws.features, &cfg.policy.runs())?;
    let dir = cfg.out.join("analysis");
    write_analysis(&a, &ws, &dir)?;
    for name in ["association_matrix.csv", "profiles.csv", "elbows.json", "policy_runs.json", "retention.csv"] {
        manifest.record(&dir.join(name))?;
    }
    if emit_thresholds {
        let t: BTreeMap<&str, &BTreeMap<String, f64>> =
            a.runs.iter().map(|r| (r.tag.as_str(), &r.thresholds)).collect();
        println!("{}", serde_json::to_string_pretty(&t)?);
    }
    for r in &a.runs {
        eprintln!(
            "{}: reduction {:.2}%, {}",
            r.tag,
            r.feature_space_reduction_pct,
            r.predictor_sets
                .values()
                .map(|s| format!("{} {}", s.feature, s.retention()))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    manifest.complete = true;
    manifest.save()?;
    Ok(manifest)
}

fn dump_prompts(dir: &Path, tag: &str, prompts: &[PromptDump], manifest: &mut Manifest) -> Result<(), CliError> {
    let dir = dir.join(tag);
    std::fs::create_dir_all(&dir)?;
    for (n, p) in prompts.iter().enumerate() {
        let txt = dir.join(format!("{n:04}.txt"));
        std::fs::write(&txt, &p.text)?;
        let meta = dir.join(format!("{n:04}.manifest.json"));
        write_json(
            &meta,
            &serde_json::json!({
                "feature": p.feature,
                "chunk_id": p.chunk_id,
                "row_indices": p.manifest,
                "expected_count": p.expected,
                "estimated_tokens": p.estimated_tokens,
            }),
        )?;
        if dir.starts_with(&manifest.config.out) {
            manifest.record(&txt)?;
            manifest.record(&meta)?;
        }
    }
    Ok(())
}

fn execute(
    cfg: &RunConfig,
    ws: &Workspace,
    policy: &PolicyRun,
    style: PromptStyle,
    backend: &dyn Completer,
    cancel: &AtomicBool,
) -> Result<(ImputationPlan, RunOutcome), CliError> {
    let partition = ws.data.class_partition()?;
    let mut plan = build_plan(
        &ws.data,
        &ws.features,
        &policy.predictor_sets,
        cfg.prompt.resolve(&partition),
        cfg.seed,
    )?;
    let opts = RunOptions {
        max_retries: cfg.backend.max_retries,
        keep_prompts: true,
        cancel: Some(cancel),
    };
    plan.prompt_config.style = style;
    let outcome = run(&plan, &ws.data, backend, &opts)?;
    Ok((plan, outcome))
}

fn record_run(
    cfg: &RunConfig,
    ws: &Workspace,
    policy: &PolicyRun,
    tag: &str,
    plan: ImputationPlan,
    outcome: &RunOutcome,
    manifest: &mut Manifest,
) -> Result<PathBuf, CliError> {
    let path = cfg.out.join("imputed").join(format!("{tag}.csv"));
    io::save_csv(&outcome.dataset, &path, missing_token(cfg))?;
    manifest.record(&path)?;
    if let Some(dir) = &cfg.dump_prompts {
        dump_prompts(dir, tag, &outcome.prompts, manifest)?;
    }
    manifest.runs.push(RunRecord {
        tag: tag.to_string(),
        style: plan.prompt_config.style,
        thresholds: policy.thresholds.clone(),
        feature_space_reduction_pct: policy.feature_space_reduction_pct,
        imputed_cells: ws.data.total_missing() - outcome.dataset.total_missing(),
        prompt_tokens: outcome.log.total_prompt_tokens(),
        fallback_chunks: outcome.log.fallback_count(),
        imputed_path: Some(format!("imputed/{tag}.csv")),
        plan,
        log: outcome.log.clone(),
    });
    Ok(path)
}

pub fn cmd_impute(cfg: &RunConfig, backend: &dyn Completer, cancel: &AtomicBool) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let ws = load_workspace(cfg)?;
    let a = analyze(&ws.full, &ws.features, &cfg.policy.runs())?;
    write_analysis(&a, &ws, &cfg.out.join("analysis"))?;
    let mut manifest = Manifest::new("impute", cfg);
    if ws.features.is_empty() {
        manifest.notes.push("no imputation features".into());
    }
    for policy in &a.runs {
        let (plan, outcome) = execute(cfg, &ws, policy, cfg.prompt.style, backend, cancel)?;
        record_run(cfg, &ws, policy, &policy.tag, plan, &outcome, &mut manifest)?;
        let last = manifest.runs.last().expect("just pushed");
        eprintln!(
            "{}: {} cells imputed, ~{} prompt tokens, {} fallback chunks",
            last.tag, last.imputed_cells, last.prompt_tokens, last.fallback_chunks
        );
        if !outcome.completed {
            manifest.notes.push(format!("run {} interrupted", policy.tag));
            manifest.save()?;
            return Err(CliError::Interrupted);
        }
    }
    manifest.complete = true;
    manifest.save()?;
    Ok(manifest)
}

/// Rows to test on: the ones with a missing cell in the working table.
fn test_rows(ws: &Workspace) -> Vec<usize> {
    (0..ws.data.n_rows()).filter(|&r| !ws.data.is_complete_row(r)).collect()
}

fn forest_config(cfg: &RunConfig, mode: ForestMode) -> ForestConfig {
    ForestConfig {
        n_trees: cfg.evaluation.n_trees,
        max_depth: cfg.evaluation.max_depth,
        min_samples_leaf: cfg.evaluation.min_samples_leaf,
        seed: cfg.seed,
        mode,
        ..ForestConfig::default()
    }
}

fn evaluate_file(cfg: &RunConfig, ws: &Workspace, rows: &[usize], path: &Path) -> Result<Vec<EvaluationReport>, CliError> {
    let imputed = io::load_csv(path, ws.data.schema().clone(), &cfg.sentinels)?;
    if imputed.n_rows() != ws.data.n_rows() {
        return Err(CliError::Data(format!(
            "{}: {} rows, expected {}",
            path.display(),
            imputed.n_rows(),
            ws.data.n_rows()
        )));
    }
    let test = imputed.select_rows(rows);
    cfg.evaluation
        .models
        .iter()
        .map(|&m| Ok(evaluate_imputation(&ws.data, &test, &forest_config(cfg, m))?))
        .collect()
}

/// One line of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run: String,
    pub model: String,
    pub minority_precision: f64,
    pub minority_recall: f64,
    pub minority_f1: f64,
    pub majority_precision: f64,
    pub majority_recall: f64,
    pub majority_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub balanced_accuracy: f64,
    pub roc_auc: f64,
    pub feature_space_reduction_pct: Option<f64>,
    pub token_reduction_pct: Option<f64>,
}

impl SummaryRow {
    pub fn new(run: &str, r: &EvaluationReport) -> Self {
        let pos = r.per_class[&r.positive_label];
        let neg = r.per_class[&r.negative_label];
        Self {
            run: run.into(),
            model: r.model.clone(),
            minority_precision: pos.precision,
            minority_recall: pos.recall,
            minority_f1: pos.f1,
            majority_precision: neg.precision,
            majority_recall: neg.recall,
            majority_f1: neg.f1,
            macro_f1: r.macro_f1,
            weighted_f1: r.weighted_f1,
            balanced_accuracy: r.balanced_accuracy,
            roc_auc: r.roc_auc,
            feature_space_reduction_pct: r.reduction_stats.feature_space_reduction_pct,
            token_reduction_pct: r.reduction_stats.token_reduction_pct,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(io::create(path)?);
    let wrap = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record([
        "run", "model", "minority_precision", "minority_recall", "minority_f1", "majority_precision",
        "majority_recall", "majority_f1", "macro_f1", "weighted_f1", "balanced_accuracy", "roc_auc",
        "feature_space_reduction_pct", "token_reduction_pct",
    ])
    .map_err(wrap)?;
    for r in rows {
        let f = |x: f64| format!("{x:.4}");
        w.write_record([
            r.run.clone(),
            r.model.clone(),
            f(r.minority_precision),
            f(r.minority_recall),
            f(r.minority_f1),
            f(r.majority_precision),
            f(r.majority_recall),
            f(r.majority_f1),
            f(r.macro_f1),
            f(r.weighted_f1),
            f(r.balanced_accuracy),
            f(r.roc_auc),
            opt(r.feature_space_reduction_pct),
            opt(r.token_reduction_pct),
        ])
        .map_err(wrap)?;
    }
    w.flush()?;
    Ok(())
}

/// The impute manifest an evaluation draws its defaults from: the archived
/// copy in the output directory, if any.
pub fn impute_manifest(out: &Path) -> Option<Manifest> {
    Manifest::load(&Manifest::archived_path(out, "impute"))
        .ok()
        .filter(|m| m.command == "impute")
}

/// Evaluates imputed tables. Without explicit files, every run recorded in
/// `source` (an impute manifest) is evaluated; its prompt token counts feed
/// the token reduction column.
pub fn cmd_evaluate(cfg: &RunConfig, imputed: &[PathBuf], source: Option<&[RunRecord]>) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let ws = load_workspace(cfg)?;
    let rows = test_rows(&ws);
    if rows.is_empty() {
        return Err(CliError::Data("the dataset has no incomplete rows to evaluate".into()));
    }
    let source = source.unwrap_or(&[]);
    let tokens: BTreeMap<String, usize> = source.iter().map(|r| (r.tag.clone(), r.prompt_tokens)).collect();
    let files: Vec<(String, PathBuf)> = if imputed.is_empty() {
        if source.is_empty() {
            return Err(CliError::Usage("no --imputed files and no impute manifest in the output directory".into()));
        }
        source
            .iter()
            .filter_map(|r| r.imputed_path.as_ref().map(|p| (r.tag.clone(), cfg.out.join(p))))
            .collect()
    } else {
        imputed
            .iter()
            .map(|p| (p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), p.clone()))
            .collect()
    };

    let profiles_for = analyze(&ws.full, &ws.features, &[])?.profiles;
    let policies: BTreeMap<String, PolicyRun> = cfg
        .policy
        .runs()
        .into_iter()
        .map(|(tag, mode)| resolve_run(&ws.data, &profiles_for, &tag, mode).map(|r| (tag, r)))
        .collect::<Result<_, _>>()?;
    let baseline_tokens = tokens.get("t0").copied();

    let mut manifest = Manifest::new("evaluate", cfg);
    manifest.inputs = files.iter().map(|(_, p)| p.clone()).collect();
    manifest.runs = source.to_vec();
    let mut summary = Vec::new();
    let dir = cfg.out.join("reports");
    for (tag, path) in &files {
        for mut report in evaluate_file(cfg, &ws, &rows, path)? {
            if let Some(p) = policies.get(tag) {
                report.reduction_stats.feature_space_reduction_pct = Some(p.feature_space_reduction_pct);
                if let impute_forge_core::SelectionMode::Fixed(t) = p.mode {
                    report.reduction_stats.threshold = Some(t);
                }
            }
            if let (Some(base), Some(&mine)) = (baseline_tokens, tokens.get(tag)) {
                if base > 0 {
                    report.reduction_stats.token_reduction_pct = Some(100.0 * (1.0 - mine as f64 / base as f64));
                }
            }
            let out = dir.join(format!("{tag}-{}.json", report.model));
            write_json(&out, &report)?;
            manifest.record(&out)?;
            summary.push(SummaryRow::new(tag, &report));
        }
    }
    let path = dir.join("summary.csv");
    write_summary(&path, &summary)?;
    manifest.record(&path)?;
    for r in &summary {
        eprintln!(
            "{} {}: minority F1 {:.4}, macro F1 {:.4}, balanced accuracy {:.4}, ROC AUC {:.4}",
            r.run, r.model, r.minority_f1, r.macro_f1, r.balanced_accuracy, r.roc_auc
        );
    }
    manifest.complete = true;
    manifest.save()?;
    Ok(manifest)
}

/// Result of one prompt style in an ablation.
#[derive(Debug, Clone)]
pub struct AblationArm {
    pub style: PromptStyle,
    pub outcome: Result<RunOutcome, String>,
    pub rows: Vec<SummaryRow>,
}

pub struct AblationReport {
    pub arms: Vec<AblationArm>,
    pub manifest: Manifest,
}

fn write_ablation(path: &Path, arms: &[AblationArm]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(io::create(path)?);
    let wrap = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record([
        "prompt", "model", "minority_precision", "minority_recall", "minority_f1", "overall_macro_f1",
        "overall_weighted_f1", "note",
    ])
    .map_err(wrap)?;
    for arm in arms {
        let style = arm.style.as_str().to_string();
        match &arm.outcome {
            Err(e) => w
                .write_record([style, String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), format!("failed: {e}")])
                .map_err(wrap)?,
            Ok(_) => {
                for r in &arm.rows {
                    let f = |x: f64| format!("{x:.4}");
                    w.write_record([
                        style.clone(),
                        r.model.clone(),
                        f(r.minority_precision),
                        f(r.minority_recall),
                        f(r.minority_f1),
                        f(r.macro_f1),
                        f(r.weighted_f1),
                        String::new(),
                    ])
                    .map_err(wrap)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the same imputation with ungrouped and grouped prompts and compares
/// the downstream metrics. A failing arm is reported, not fatal, unless both
/// fail.
pub fn cmd_ablation(cfg: &RunConfig, backend: &dyn Completer, cancel: &AtomicBool) -> Result<AblationReport, CliError> {
    cfg.validate()?;
    let ws = load_workspace(cfg)?;
    if ws.features.is_empty() {
        return Err(CliError::Data("the dataset has no missing cells to impute".into()));
    }
    let runs = cfg.policy.runs();
    let a = analyze(&ws.full, &ws.features, &runs[..1])?;
    let policy = &a.runs[0];
    let rows = test_rows(&ws);
    let mut manifest = Manifest::new("ablation", cfg);
    let mut arms = Vec::new();
    for style in [PromptStyle::Ungrouped, PromptStyle::Grouped] {
        let tag = format!("ablation-{}", style.as_str());
        let (plan, outcome) = match execute(cfg, &ws, policy, style, backend, cancel) {
            Ok((_, o)) if !o.completed => {
                manifest.save()?;
                return Err(CliError::Interrupted);
            }
            Ok((plan, o)) => (Some(plan), Ok(o)),
            Err(e) => (None, Err(e.to_string())),
        };
        let mut summary = Vec::new();
        if let (Some(plan), Ok(o)) = (plan, &outcome) {
            let path = record_run(cfg, &ws, policy, &tag, plan, o, &mut manifest)?;
            for r in evaluate_file(cfg, &ws, &rows, &path)? {
                summary.push(SummaryRow::new(style.as_str(), &r));
            }
        } else if let Err(e) = &outcome {
            manifest.notes.push(format!("{} prompts failed: {e}", style.as_str()));
        }
        arms.push(AblationArm {
            style,
            outcome,
            rows: summary,
        });
    }
    if arms.iter().all(|a| a.outcome.is_err()) {
        let msg = arms
            .iter()
            .filter_map(|a| a.outcome.as_ref().err().cloned())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CliError::Backend(format!("both prompt styles failed: {msg}")));
    }
    let path = cfg.out.join("reports").join("ablation.csv");
    write_ablation(&path, &arms)?;
    manifest.record(&path)?;
    for arm in &arms {
        for r in &arm.rows {
            eprintln!(
                "{} {}: minority P {:.4} R {:.4} F1 {:.4}, macro F1 {:.4}",
                r.run, r.model, r.minority_precision, r.minority_recall, r.minority_f1, r.macro_f1
            );
        }
    }
    manifest.complete = true;
    manifest.save()?;
    Ok(AblationReport { arms, manifest })
}

/// Outcome of replaying a manifest.
#[derive(Debug)]
pub struct Replay {
    pub manifest: Manifest,
    /// Outputs whose hash differs from (or is absent in) the original run.
    pub differences: Vec<String>,
}

/// Re-runs the command recorded in a manifest, optionally into another
/// output directory, and compares output hashes.
pub fn cmd_replay(path: &Path, out: Option<&Path>, cancel: &AtomicBool) -> Result<Replay, CliError> {
    let original = Manifest::load(path)?;
    if !original.verify() {
        return Err(CliError::Data(format!("{}: config hash does not match the stored config", path.display())));
    }
    let mut cfg = original.config.clone();
    if let Some(o) = out {
        cfg.out = o.to_path_buf();
        if let Some(d) = &cfg.dump_prompts {
            if let Ok(rel) = d.strip_prefix(&original.config.out) {
                cfg.dump_prompts = Some(o.join(rel));
            }
        }
    }
    let manifest = match original.command.as_str() {
        "analyze" => cmd_analyze(&cfg, false)?,
        "impute" => cmd_impute(&cfg, make_backend(&cfg.backend)?.as_ref(), cancel)?,
        "evaluate" => cmd_evaluate(&cfg, &original.inputs, Some(&original.runs))?,
        "ablation" => cmd_ablation(&cfg, make_backend(&cfg.backend)?.as_ref(), cancel)?.manifest,
        other => return Err(CliError::Data(format!("unknown command `{other}` in manifest"))),
    };
    let mut differences: Vec<String> = original
        .outputs
        .iter()
        .filter(|(k, v)| manifest.outputs.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect();
    differences.extend(
        manifest
            .outputs
            .keys()
            .filter(|k| !original.outputs.contains_key(*k))
            .cloned(),
    );
    Ok(Replay { manifest, differences })
}
