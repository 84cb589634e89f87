//! Loading a configured table and deriving its predictor sets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use impute_forge_core::assoc::association_matrix;
use impute_forge_core::dataset::AuditEntry;
use impute_forge_core::rng::{derive_seed, seeded};
use impute_forge_core::threshold::{
    detect_elbow, feature_space_reduction, reduction_label, resolve_policy, select_predictors,
};
use impute_forge_core::{
    AssociationMatrix, AssociationProfile, ColumnRole, Dataset, ElbowResult, MissingnessSpec,
    PredictorSet, SelectionMode,
};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::config::{FeatureSelection, RunConfig};
use crate::error::CliError;
use crate::io;

/// The configured table after loading and missingness injection.
pub struct Workspace {
    /// Rows to impute and evaluate on, plus every complete row.
    pub data: Dataset,
    /// The table before incomplete rows were subsampled; associations are
    /// measured on it.
    pub full: Dataset,
    pub audit: Vec<AuditEntry>,
    pub features: Vec<String>,
}

pub fn load_workspace(cfg: &RunConfig) -> Result<Workspace, CliError> {
    let schema = io::load_schema(&cfg.schema)?;
    let mut data = io::load_csv(&cfg.dataset, schema, &cfg.sentinels)?;
    let mut audit = Vec::new();
    for inj in &cfg.inject {
        let mut per_class_count = inj.per_class.clone();
        if inj.top_up {
            let col = data.schema().require(&inj.feature)?;
            for (label, want) in per_class_count.iter_mut() {
                let have = data
                    .missing_rows(col)
                    .into_iter()
                    .filter(|&r| data.label(r) == label)
                    .count();
                *want = want.saturating_sub(have);
            }
        }
        let spec = MissingnessSpec {
            feature: inj.feature.clone(),
            per_class_count,
            seed: inj.seed,
        };
        let (d, a) = data.inject_missingness(&spec)?;
        data = d;
        audit.extend(a);
    }
    let full = data.clone();
    if let Some(wanted) = &cfg.incomplete_per_class {
        data = subsample_incomplete(&data, wanted, derive_seed(cfg.seed, &[SUBSAMPLE_STREAM]))?;
        let kept: BTreeSet<usize> = data.row_ids().iter().copied().collect();
        audit.retain(|e| kept.contains(&e.row_index));
    }
    let features = match &cfg.features {
        FeatureSelection::Auto(_) => data.incomplete_columns(),
        FeatureSelection::List(list) => {
            for f in list {
                let idx = data.schema().require(f)?;
                if data.schema().column(idx).role != ColumnRole::Feature {
                    return Err(CliError::Usage(format!("`{f}` is the target, not an imputable feature")));
                }
            }
            list.clone()
        }
    };
    Ok(Workspace {
        data,
        full,
        audit,
        features,
    })
}

const SUBSAMPLE_STREAM: u64 = 0x5ab5;

/// Keeps every complete row and `wanted[class]` incomplete rows of each
/// class, drawn without replacement. Row order is preserved.
pub fn subsample_incomplete(data: &Dataset, wanted: &BTreeMap<String, usize>, seed: u64) -> Result<Dataset, CliError> {
    let mut rng = seeded(seed);
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for r in (0..data.n_rows()).filter(|&r| !data.is_complete_row(r)) {
        by_class.entry(data.label(r)).or_default().push(r);
    }
    let mut keep: BTreeSet<usize> = (0..data.n_rows()).filter(|&r| data.is_complete_row(r)).collect();
    for (class, rows) in &by_class {
        let n = match wanted.get(*class) {
            Some(&n) => n,
            None => rows.len(),
        };
        if n > rows.len() {
            return Err(CliError::Data(format!(
                "class `{class}` has {} incomplete rows, {n} requested",
                rows.len()
            )));
        }
        keep.extend(index::sample(&mut rng, rows.len(), n).into_iter().map(|i| rows[i]));
    }
    if let Some(c) = wanted.keys().find(|c| !by_class.contains_key(c.as_str())) {
        return Err(CliError::Data(format!("class `{c}` has no incomplete rows")));
    }
    Ok(data.select_rows(&keep.into_iter().collect::<Vec<_>>()))
}

/// Thresholds and predictor sets under one selection mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub tag: String,
    pub mode: SelectionMode,
    pub thresholds: BTreeMap<String, f64>,
    pub predictor_sets: BTreeMap<String, PredictorSet>,
    pub feature_space_reduction_pct: f64,
}

pub struct Analysis {
    pub matrix: AssociationMatrix,
    pub profiles: Vec<AssociationProfile>,
    pub elbows: BTreeMap<String, Result<ElbowResult, String>>,
    pub runs: Vec<PolicyRun>,
}

pub fn resolve_run(
    data: &Dataset,
    profiles: &[AssociationProfile],
    tag: &str,
    mode: SelectionMode,
) -> Result<PolicyRun, CliError> {
    let thresholds = resolve_policy(profiles, mode)?;
    let target = data.schema().target_name();
    let mut predictor_sets = BTreeMap::new();
    for p in profiles {
        predictor_sets.insert(p.feature.clone(), select_predictors(p, thresholds[&p.feature], target)?);
    }
    let baseline: usize = profiles.iter().map(|p| p.entries.len()).sum();
    let sets: Vec<PredictorSet> = predictor_sets.values().cloned().collect();
    let feature_space_reduction_pct = if baseline == 0 {
        0.0
    } else {
        feature_space_reduction(&sets, baseline)?
    };
    Ok(PolicyRun {
        tag: tag.to_string(),
        mode,
        thresholds,
        predictor_sets,
        feature_space_reduction_pct,
    })
}

pub fn analyze(data: &Dataset, features: &[String], runs: &[(String, SelectionMode)]) -> Result<Analysis, CliError> {
    let matrix = association_matrix(data)?;
    let profiles: Vec<AssociationProfile> = features
        .iter()
        .map(|f| matrix.profile(f))
        .collect::<Result<_, _>>()?;
    let elbows = profiles
        .iter()
        .map(|p| (p.feature.clone(), detect_elbow(p).map_err(|e| e.to_string())))
        .collect();
    let runs = runs
        .iter()
        .map(|(tag, mode)| resolve_run(data, &profiles, tag, *mode))
        .collect::<Result<_, _>>()?;
    Ok(Analysis {
        matrix,
        profiles,
        elbows,
        runs,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    Ok(csv::Writer::from_writer(io::create(path)?))
}

fn json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = io::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Writes the analysis artifacts under `dir`.
pub fn write_analysis(a: &Analysis, ws: &Workspace, dir: &Path) -> Result<(), CliError> {
    let wrap = |e: csv::Error| CliError::Data(e.to_string());

    let mut w = csv_writer(&dir.join("association_matrix.csv"))?;
    let mut header = vec![String::new()];
    header.extend(a.matrix.columns.iter().cloned());
    w.write_record(&header).map_err(wrap)?;
    for (name, row) in a.matrix.columns.iter().zip(&a.matrix.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("profiles.csv"))?;
    w.write_record(["feature", "rank", "predictor", "strength", "measure", "support"])
        .map_err(wrap)?;
    for p in &a.profiles {
        for (rank, e) in p.entries.iter().enumerate() {
            w.write_record([
                p.feature.clone(),
                rank.to_string(),
                e.predictor.clone(),
                format!("{:.6}", e.strength),
                e.measure.as_str().to_string(),
                e.support.to_string(),
            ])
            .map_err(wrap)?;
        }
    }
    w.flush()?;

    let elbows: BTreeMap<&String, serde_json::Value> = a
        .elbows
        .iter()
        .map(|(f, r)| {
            let v = match r {
                Ok(e) => serde_json::to_value(e).expect("elbow serializes"),
                Err(msg) => serde_json::json!({ "error": msg }),
            };
            (f, v)
        })
        .collect();
    json_file(&dir.join("elbows.json"), &elbows)?;
    json_file(&dir.join("policy_runs.json"), &a.runs)?;

    // One row per run: retained/total for each feature and the pooled
    // reduction.
    let mut w = csv_writer(&dir.join("retention.csv"))?;
    let mut header = vec!["run".to_string()];
    header.extend(ws.features.iter().cloned());
    header.push("reduction".into());
    w.write_record(&header).map_err(wrap)?;
    for run in &a.runs {
        let mut rec = vec![run.tag.clone()];
        rec.extend(ws.features.iter().map(|f| run.predictor_sets[f].retention()));
        rec.push(reduction_label(run.feature_space_reduction_pct));
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush()?;

    if !ws.audit.is_empty() {
        io::save_audit(&ws.audit, &dir.join("missingness_audit.csv"))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    json_file(path, value)
}
