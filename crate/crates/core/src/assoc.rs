//! Pairwise association across mixed column kinds.
//!
//! The measure is picked from the two column kinds: Pearson r for two
//! numerical columns, Cramér's V for two categorical columns and the
//! correlation ratio η for a categorical/numerical pair. Each pair is
//! computed on the rows observed in both columns, accumulating in ascending
//! row order. Degenerate inputs (fewer than two rows, a constant series, a
//! single category) give 0 and a [`Degeneracy`] flag instead of an error.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Cell, ColumnKind, Dataset};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssocError {
    #[error("association needs at least 2 columns")]
    TooFewColumns,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssociationMeasure {
    PearsonR,
    CramersV,
    EtaRatio,
}

impl AssociationMeasure {
    pub fn for_kinds(a: ColumnKind, b: ColumnKind) -> Self {
        match (a, b) {
            (ColumnKind::Numerical, ColumnKind::Numerical) => Self::PearsonR,
            (ColumnKind::Categorical, ColumnKind::Categorical) => Self::CramersV,
            _ => Self::EtaRatio,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PearsonR => "pearson_r",
            Self::CramersV => "cramers_v",
            Self::EtaRatio => "eta_ratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    TooFewRows,
    ConstantSeries,
    SingleCategory,
}

/// A computed association and, when the input was degenerate, why it was
/// set to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    pub value: f64,
    pub degenerate: Option<Degeneracy>,
}

impl Association {
    fn ok(value: f64) -> Self {
        Self {
            value,
            degenerate: None,
        }
    }

    fn zero(reason: Degeneracy) -> Self {
        Self {
            value: 0.0,
            degenerate: Some(reason),
        }
    }
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Signed Pearson correlation, clamped to [-1, 1].
pub fn pearson_r(x: &[f64], y: &[f64]) -> Association {
    assert_eq!(x.len(), y.len(), "pearson_r needs paired series");
    if x.len() < 2 {
        return Association::zero(Degeneracy::TooFewRows);
    }
    if is_constant(x) || is_constant(y) {
        return Association::zero(Degeneracy::ConstantSeries);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Association::ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Cramér's V of an r×c table of counts, without continuity correction.
pub fn cramers_v_from_table(table: &[Vec<f64>]) -> Association {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let mut col_sums = vec![0.0; cols];
    for r in table {
        for (c, v) in r.iter().enumerate() {
            col_sums[c] += v;
        }
    }
    let n: f64 = row_sums.iter().sum();
    if n < 2.0 {
        return Association::zero(Degeneracy::TooFewRows);
    }
    let occupied_rows = row_sums.iter().filter(|&&s| s > 0.0).count();
    let occupied_cols = col_sums.iter().filter(|&&s| s > 0.0).count();
    let k = occupied_rows.min(occupied_cols).saturating_sub(1);
    if k == 0 {
        return Association::zero(Degeneracy::SingleCategory);
    }
    let mut chi2 = 0.0;
    for (i, r) in table.iter().enumerate().take(rows) {
        for (j, &obs) in r.iter().enumerate() {
            let exp = row_sums[i] * col_sums[j] / n;
            if exp > 0.0 {
                let d = obs - exp;
                chi2 += d * d / exp;
            }
        }
    }
    Association::ok(libm::sqrt(chi2 / (n * k as f64)).clamp(0.0, 1.0))
}

/// Cramér's V between two paired categorical series.
pub fn cramers_v<A: Ord, B: Ord>(a: &[A], b: &[B]) -> Association {
    assert_eq!(a.len(), b.len(), "cramers_v needs paired series");
    let a_idx = index_levels(a);
    let b_idx = index_levels(b);
    let mut table = vec![vec![0.0; b_idx.len()]; a_idx.len()];
    for (x, y) in a.iter().zip(b) {
        table[a_idx[x]][b_idx[y]] += 1.0;
    }
    cramers_v_from_table(&table)
}

fn index_levels<T: Ord>(v: &[T]) -> BTreeMap<&T, usize> {
    let mut levels: BTreeMap<&T, usize> = v.iter().map(|x| (x, 0)).collect();
    for (i, slot) in levels.values_mut().enumerate() {
        *slot = i;
    }
    levels
}

/// Correlation ratio η of a numerical series grouped by a categorical one.
pub fn eta_ratio<G: Ord>(groups: &[G], y: &[f64]) -> Association {
    assert_eq!(groups.len(), y.len(), "eta_ratio needs paired series");
    if y.len() < 2 {
        return Association::zero(Degeneracy::TooFewRows);
    }
    if is_constant(y) {
        return Association::zero(Degeneracy::ConstantSeries);
    }
    let mut acc: BTreeMap<&G, (f64, usize)> = BTreeMap::new();
    for (g, &v) in groups.iter().zip(y) {
        let e = acc.entry(g).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    if acc.len() < 2 {
        return Association::zero(Degeneracy::SingleCategory);
    }
    let m = mean(y);
    let ss_total: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    let ss_between: f64 = acc
        .values()
        .map(|&(sum, n)| {
            let d = sum / n as f64 - m;
            n as f64 * d * d
        })
        .sum();
    Association::ok(libm::sqrt(ss_between / ss_total).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWarning {
    pub a: String,
    pub b: String,
    pub reason: Degeneracy,
}

/// Absolute association for every column pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub measures: Vec<Vec<AssociationMeasure>>,
    pub support: Vec<Vec<usize>>,
    pub warnings: Vec<PairWarning>,
}

/// Association of two dataset columns on their pairwise-complete rows,
/// signed for Pearson. Returns the association and its support.
pub fn column_association(d: &Dataset, i: usize, j: usize) -> (Association, usize) {
    let kind_i = d.schema().column(i).kind;
    let kind_j = d.schema().column(j).kind;
    let both: Vec<(&Cell, &Cell)> = d
        .rows()
        .iter()
        .map(|r| (&r[i], &r[j]))
        .filter(|(a, b)| !a.is_missing() && !b.is_missing())
        .collect();
    let support = both.len();
    let num = |c: &Cell| c.as_number().expect("numerical cell");
    let cat = |c: &Cell| c.as_category().expect("categorical cell").to_string();
    let assoc = match (kind_i, kind_j) {
        (ColumnKind::Numerical, ColumnKind::Numerical) => {
            let x: Vec<f64> = both.iter().map(|(a, _)| num(a)).collect();
            let y: Vec<f64> = both.iter().map(|(_, b)| num(b)).collect();
            pearson_r(&x, &y)
        }
        (ColumnKind::Categorical, ColumnKind::Categorical) => {
            let a: Vec<String> = both.iter().map(|(a, _)| cat(a)).collect();
            let b: Vec<String> = both.iter().map(|(_, b)| cat(b)).collect();
            cramers_v(&a, &b)
        }
        (ColumnKind::Categorical, ColumnKind::Numerical) => {
            let g: Vec<String> = both.iter().map(|(a, _)| cat(a)).collect();
            let y: Vec<f64> = both.iter().map(|(_, b)| num(b)).collect();
            eta_ratio(&g, &y)
        }
        (ColumnKind::Numerical, ColumnKind::Categorical) => {
            let g: Vec<String> = both.iter().map(|(_, b)| cat(b)).collect();
            let y: Vec<f64> = both.iter().map(|(a, _)| num(a)).collect();
            eta_ratio(&g, &y)
        }
    };
    (assoc, support)
}

pub fn association_matrix(d: &Dataset) -> Result<AssociationMatrix, AssocError> {
    let n = d.n_cols();
    if n < 2 {
        return Err(AssocError::TooFewColumns);
    }
    let schema = d.schema();
    let columns = schema.names();
    let mut values = vec![vec![1.0; n]; n];
    let mut support = vec![vec![0; n]; n];
    let mut measures = vec![vec![AssociationMeasure::PearsonR; n]; n];
    let mut warnings = Vec::new();
    for i in 0..n {
        support[i][i] = d.n_rows() - d.missing_count(i);
        measures[i][i] = AssociationMeasure::for_kinds(schema.column(i).kind, schema.column(i).kind);
        for j in (i + 1)..n {
            let (a, s) = column_association(d, i, j);
            let m = AssociationMeasure::for_kinds(schema.column(i).kind, schema.column(j).kind);
            let v = libm::fabs(a.value);
            values[i][j] = v;
            values[j][i] = v;
            support[i][j] = s;
            support[j][i] = s;
            measures[i][j] = m;
            measures[j][i] = m;
            if let Some(reason) = a.degenerate {
                warnings.push(PairWarning {
                    a: columns[i].clone(),
                    b: columns[j].clone(),
                    reason,
                });
            }
        }
    }
    Ok(AssociationMatrix {
        columns,
        values,
        measures,
        support,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub predictor: String,
    pub strength: f64,
    pub measure: AssociationMeasure,
    pub support: usize,
}

/// Associations of one feature with every other column, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationProfile {
    pub feature: String,
    pub entries: Vec<ProfileEntry>,
}

impl AssociationProfile {
    pub fn strengths(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.strength).collect()
    }

    pub fn strength_of(&self, predictor: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.predictor == predictor)
            .map(|e| e.strength)
    }
}

impl AssociationMatrix {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.values[self.index_of(a)?][self.index_of(b)?])
    }

    /// Sorted profile of `feature`. Ties keep column order.
    pub fn profile(&self, feature: &str) -> Result<AssociationProfile, AssocError> {
        let i = self
            .index_of(feature)
            .ok_or_else(|| AssocError::UnknownFeature(feature.to_string()))?;
        let mut entries: Vec<ProfileEntry> = (0..self.columns.len())
            .filter(|&j| j != i)
            .map(|j| ProfileEntry {
                predictor: self.columns[j].clone(),
                strength: self.values[i][j],
                measure: self.measures[i][j],
                support: self.support[i][j],
            })
            .collect();
        entries.sort_by(|a, b| b.strength.total_cmp(&a.strength));
        Ok(AssociationProfile {
            feature: feature.to_string(),
            entries,
        })
    }
}

pub fn association_profile(
    m: &AssociationMatrix,
    feature: &str,
) -> Result<AssociationProfile, AssocError> {
    m.profile(feature)
}
