use std::collections::BTreeMap;

use impute_forge_core::assoc::{
    association_matrix, cramers_v, eta_ratio, pearson_r, AssociationMeasure, ProfileEntry,
};
use impute_forge_core::eval::{classification_report, roc_auc};
use impute_forge_core::response::{parse_response, Domain};
use impute_forge_core::threshold::{chord_distances, detect_elbow_values, select_predictors};
use impute_forge_core::{
    AssociationProfile, Cell, ColumnKind, ColumnSchema, Dataset, MissingnessSpec, Schema,
};
use proptest::prelude::*;

fn table(rows: &[(u8, f64, u8, bool)]) -> Dataset {
    let schema = Schema::new(vec![
        ColumnSchema::feature("c", ColumnKind::Categorical, "a category"),
        ColumnSchema::feature("x", ColumnKind::Numerical, "a number"),
        ColumnSchema::feature("d", ColumnKind::Categorical, "another category"),
        ColumnSchema::target("y", "the class"),
    ])
    .unwrap();
    let rows = rows
        .iter()
        .map(|&(c, x, d, y)| {
            vec![
                Cell::Category(format!("c{c}")),
                Cell::Number(x),
                Cell::Category(format!("d{d}")),
                Cell::Category(if y { "1" } else { "0" }.into()),
            ]
        })
        .collect();
    Dataset::new(schema, rows, "generated").unwrap()
}

fn profile(strengths: &[f64]) -> AssociationProfile {
    AssociationProfile {
        feature: "f".into(),
        entries: strengths
            .iter()
            .enumerate()
            .map(|(i, &s)| ProfileEntry {
                predictor: format!("p{i}"),
                strength: s,
                measure: AssociationMeasure::CramersV,
                support: 10,
            })
            .collect(),
    }
}

fn rows_strategy() -> impl Strategy<Value = Vec<(u8, f64, u8, bool)>> {
    prop::collection::vec((0u8..3, -50i32..50, 0u8..4, any::<bool>()), 3..40)
        .prop_map(|v| v.into_iter().map(|(c, x, d, y)| (c, x as f64 / 4.0, d, y)).collect())
}

proptest! {
    #[test]
    fn measures_stay_in_range(rows in rows_strategy()) {
        let m = association_matrix(&table(&rows)).unwrap();
        for row in &m.values {
            for &v in row {
                prop_assert!((0.0..=1.0).contains(&v), "{v}");
            }
        }
        for i in 0..m.columns.len() {
            for j in 0..m.columns.len() {
                prop_assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn row_order_does_not_matter(rows in rows_strategy(), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = association_matrix(&table(&rows)).unwrap();
        let b = association_matrix(&table(&shuffled)).unwrap();
        for (ra, rb) in a.values.iter().zip(&b.values) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cramers_v_ignores_level_names(pairs in prop::collection::vec((0u8..4, 0u8..3), 2..60)) {
        let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let renamed: Vec<u8> = a.iter().map(|x| 9 - x).collect();
        let v1 = cramers_v(&a, &b).value;
        let v2 = cramers_v(&renamed, &b).value;
        let v3 = cramers_v(&b, &a).value;
        prop_assert!((v1 - v2).abs() < 1e-12);
        prop_assert!((v1 - v3).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_affine_invariant(xy in prop::collection::vec((-100i32..100, -100i32..100), 3..50),
                                   scale in 1i32..8, shift in -20i32..20) {
        let x: Vec<f64> = xy.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = xy.iter().map(|p| p.1 as f64).collect();
        let x2: Vec<f64> = x.iter().map(|v| v * scale as f64 + shift as f64).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = pearson_r(&x, &y).value;
        prop_assert!((r - pearson_r(&x2, &y).value).abs() < 1e-9);
        prop_assert!((r + pearson_r(&neg, &y).value).abs() < 1e-9);
    }

    #[test]
    fn eta_is_scale_invariant(gy in prop::collection::vec((0u8..4, -100i32..100), 3..50), scale in 1i32..9) {
        let g: Vec<u8> = gy.iter().map(|p| p.0).collect();
        let y: Vec<f64> = gy.iter().map(|p| p.1 as f64).collect();
        let y2: Vec<f64> = y.iter().map(|v| v * scale as f64 - 3.0).collect();
        prop_assert!((eta_ratio(&g, &y).value - eta_ratio(&g, &y2).value).abs() < 1e-9);
    }

    #[test]
    fn higher_threshold_keeps_a_subset(mut s in prop::collection::vec(0.0f64..1.0, 1..15),
                                       t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        s.sort_by(|a, b| b.total_cmp(a));
        let p = profile(&s);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = select_predictors(&p, lo, "p0").unwrap();
        let b = select_predictors(&p, hi, "p0").unwrap();
        prop_assert!(b.predictors.iter().all(|x| a.contains(x)));
        prop_assert!(a.contains("p0") && b.contains("p0"));
        prop_assert!(b.retained() <= a.retained());
    }

    #[test]
    fn elbow_index_is_scale_invariant(mut s in prop::collection::vec(0.01f64..1.0, 3..15), k in 0i32..3) {
        s.sort_by(|a, b| b.total_cmp(a));
        // Powers of two keep the arithmetic exact.
        let c = f64::powi(0.5, k);
        let scaled: Vec<f64> = s.iter().map(|v| v * c).collect();
        let a = detect_elbow_values("f", &s).unwrap();
        let b = detect_elbow_values("f", &scaled).unwrap();
        prop_assert_eq!(a.elbow_index, b.elbow_index);
        prop_assert!(a.elbow_index < s.len());
        let d = chord_distances(&s);
        prop_assert_eq!(d[0], 0.0);
        prop_assert_eq!(d[s.len() - 1], 0.0);
    }

    #[test]
    fn auc_is_antisymmetric_and_rank_based(v in prop::collection::vec((any::<bool>(), -20i32..20), 2..60)) {
        let labels: Vec<bool> = v.iter().map(|p| p.0).collect();
        let scores: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s * s * s + 1.0).collect();
        match roc_auc(&labels, &scores) {
            None => prop_assert!(labels.iter().all(|&b| b) || labels.iter().all(|&b| !b)),
            Some(a) => {
                prop_assert!((a + roc_auc(&labels, &flipped).unwrap() - 1.0).abs() < 1e-9);
                prop_assert!((a - roc_auc(&labels, &cubed).unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn balanced_accuracy_is_mean_recall(v in prop::collection::vec((any::<bool>(), any::<bool>()), 1..80)) {
        let truth: Vec<bool> = v.iter().map(|p| p.0).collect();
        let pred: Vec<bool> = v.iter().map(|p| p.1).collect();
        let scores: Vec<f64> = pred.iter().map(|&p| p as u8 as f64).collect();
        let r = classification_report(&truth, &pred, &scores, "1", "0").unwrap();
        let rp = r.per_class["1"].recall;
        let rn = r.per_class["0"].recall;
        prop_assert!((r.balanced_accuracy - (rp + rn) / 2.0).abs() < 1e-12);
        prop_assert_eq!(r.per_class["1"].support + r.per_class["0"].support, truth.len());
        for m in r.per_class.values() {
            prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
            prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
        }
    }

    #[test]
    fn rendered_values_parse_back(picks in prop::collection::vec(0usize..3, 1..30), comma in any::<bool>()) {
        let cats: Vec<String> = vec!["Yes".into(), "No".into(), "No Record Kept".into()];
        let values: Vec<&str> = picks.iter().map(|&i| cats[i].as_str()).collect();
        let sep = if comma { ", " } else { "\n" };
        let raw = values.join(sep);
        let parsed = parse_response(&raw, values.len(), Domain::Categories(&cats)).unwrap();
        prop_assert_eq!(parsed.values, values);
    }

    #[test]
    fn injection_hits_exact_counts(rows in rows_strategy(), seed in any::<u64>(), want in 0usize..4) {
        let d = table(&rows);
        let mut per_class = BTreeMap::new();
        let ones = rows.iter().filter(|r| r.3).count();
        let zeros = rows.len() - ones;
        prop_assume!(ones > 0 && zeros > 0 && ones != zeros);
        per_class.insert("1".to_string(), want.min(ones));
        per_class.insert("0".to_string(), want.min(zeros));
        let spec = MissingnessSpec { feature: "c".into(), per_class_count: per_class.clone(), seed };
        let (out, audit) = d.inject_missingness(&spec).unwrap();
        let (again, _) = d.inject_missingness(&spec).unwrap();
        prop_assert_eq!(&out, &again);
        prop_assert_eq!(audit.len(), per_class.values().sum::<usize>());
        for (label, &n) in &per_class {
            let got = out.missing_rows(0).into_iter().filter(|&r| out.label(r) == label).count();
            prop_assert_eq!(got, n);
        }
        for r in 0..d.n_rows() {
            for c in 1..d.n_cols() {
                prop_assert_eq!(d.cell(r, c), out.cell(r, c));
            }
        }
    }
}
