//! Elbow detection, threshold resolution and predictor selection.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::AssociationProfile;

/// Distances below this count as a straight profile.
pub const COLLINEAR_EPS: f64 = 1e-9;
/// Elbows closer than this share one rounded threshold.
pub const CLOSENESS: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("profile of `{feature}` has {len} entries; elbow detection needs at least 2")]
    ProfileTooShort { feature: String, len: usize },
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("baseline candidate total must be positive")]
    EmptyBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub elbow_index: usize,
    pub elbow_value: f64,
    pub method: String,
    pub fallback_used: bool,
}

/// Perpendicular distance from each point `(i, values[i])` to the chord
/// joining the first and last points.
pub fn chord_distances(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    if m == 0 {
        return Vec::new();
    }
    let (first, last) = (values[0], values[m - 1]);
    let run = (m - 1) as f64;
    let rise = last - first;
    let norm = libm::hypot(rise, run);
    if norm == 0.0 {
        return alloc::vec![0.0; m];
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| libm::fabs(rise * i as f64 - run * (v - first)) / norm)
        .collect()
}

/// Elbow of a descending sequence: the point farthest from the chord,
/// preferring the smaller index on ties. A straight sequence falls back to
/// the median position.
pub fn detect_elbow_values(feature: &str, values: &[f64]) -> Result<ElbowResult, ThresholdError> {
    if values.len() < 2 {
        return Err(ThresholdError::ProfileTooShort {
            feature: feature.to_string(),
            len: values.len(),
        });
    }
    let distances = chord_distances(values);
    let (mut best, mut best_d) = (0, distances[0]);
    for (i, &d) in distances.iter().enumerate().skip(1) {
        if d > best_d {
            best = i;
            best_d = d;
        }
    }
    if best_d < COLLINEAR_EPS {
        let idx = (values.len() - 1) / 2;
        return Ok(ElbowResult {
            elbow_index: idx,
            elbow_value: values[idx],
            method: "median_fallback".to_string(),
            fallback_used: true,
        });
    }
    Ok(ElbowResult {
        elbow_index: best,
        elbow_value: values[best],
        method: "max_chord_distance".to_string(),
        fallback_used: false,
    })
}

pub fn detect_elbow(profile: &AssociationProfile) -> Result<ElbowResult, ThresholdError> {
    detect_elbow_values(&profile.feature, &profile.strengths())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "threshold")]
pub enum SelectionMode {
    PerFeature,
    GlobalMin,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub mode: SelectionMode,
    pub threshold_by_feature: BTreeMap<String, f64>,
}

impl SelectionPolicy {
    pub fn resolved(mode: SelectionMode, profiles: &[AssociationProfile]) -> Result<Self, ThresholdError> {
        Ok(Self {
            mode,
            threshold_by_feature: resolve_policy(profiles, mode)?,
        })
    }
}

/// Smallest multiple of 0.05 not below `v`.
pub fn round_up_to_step(v: f64) -> f64 {
    let k = libm::ceil(v / CLOSENESS - 1e-9);
    k / (1.0 / CLOSENESS)
}

/// Per-feature thresholds under a selection mode. When every elbow value
/// lies within 0.05 of the others, the elbow-based modes share the smallest
/// elbow rounded up to the next multiple of 0.05.
pub fn resolve_policy(
    profiles: &[AssociationProfile],
    mode: SelectionMode,
) -> Result<BTreeMap<String, f64>, ThresholdError> {
    if let SelectionMode::Fixed(t) = mode {
        if !(0.0..=1.0).contains(&t) {
            return Err(ThresholdError::InvalidThreshold(t));
        }
        return Ok(profiles.iter().map(|p| (p.feature.clone(), t)).collect());
    }
    let elbows: Vec<(String, f64)> = profiles
        .iter()
        .map(|p| detect_elbow(p).map(|e| (p.feature.clone(), e.elbow_value)))
        .collect::<Result<_, _>>()?;
    if elbows.is_empty() {
        return Ok(BTreeMap::new());
    }
    let lo = elbows.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let hi = elbows.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= CLOSENESS + 1e-12 {
        let shared = round_up_to_step(lo);
        return Ok(elbows.into_iter().map(|(f, _)| (f, shared)).collect());
    }
    Ok(match mode {
        SelectionMode::GlobalMin => elbows.into_iter().map(|(f, _)| (f, lo)).collect(),
        _ => elbows.into_iter().collect(),
    })
}

/// Columns kept as prompt context for one imputation feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSet {
    pub feature: String,
    pub threshold: f64,
    /// Strongest first; the target is always present.
    pub predictors: Vec<String>,
    pub total_candidates: usize,
    pub reduction_ratio: f64,
}

impl PredictorSet {
    pub fn retained(&self) -> usize {
        self.predictors.len()
    }

    pub fn removed(&self) -> usize {
        self.total_candidates - self.predictors.len()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.predictors.iter().any(|p| p == name)
    }

    /// "retained/total", as in a retention table.
    pub fn retention(&self) -> String {
        format!("{}/{}", self.retained(), self.total_candidates)
    }
}

/// Keeps every candidate whose association strictly exceeds `threshold`,
/// plus the target.
pub fn select_predictors(
    profile: &AssociationProfile,
    threshold: f64,
    target: &str,
) -> Result<PredictorSet, ThresholdError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ThresholdError::InvalidThreshold(threshold));
    }
    let mut predictors: Vec<String> = profile
        .entries
        .iter()
        .filter(|e| e.strength > threshold)
        .map(|e| e.predictor.clone())
        .collect();
    if !predictors.iter().any(|p| p == target) {
        predictors.push(target.to_string());
    }
    let total = profile.entries.len();
    let removed = total.saturating_sub(predictors.len());
    Ok(PredictorSet {
        feature: profile.feature.clone(),
        threshold,
        predictors,
        total_candidates: total,
        reduction_ratio: if total == 0 { 0.0 } else { removed as f64 / total as f64 },
    })
}

/// Pooled percentage of candidate columns removed across imputation
/// features, relative to `baseline_total` candidates at threshold 0.
pub fn feature_space_reduction(sets: &[PredictorSet], baseline_total: usize) -> Result<f64, ThresholdError> {
    if baseline_total == 0 {
        return Err(ThresholdError::EmptyBaseline);
    }
    let removed: usize = sets.iter().map(PredictorSet::removed).sum();
    Ok(100.0 * removed as f64 / baseline_total as f64)
}

/// Two-decimal percentage, or "-" for no reduction.
pub fn reduction_label(percent: f64) -> String {
    if percent == 0.0 {
        "-".to_string()
    } else {
        format!("{percent:.2}%")
    }
}
