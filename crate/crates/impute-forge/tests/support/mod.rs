//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn data_dir(name: &str) -> PathBuf {
    repo_root().join("data").join(name)
}

/// The Kaggle Travel churn CSV, if it is available locally.
pub fn real_travel_csv() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("IMPUTE_FORGE_TRAVEL_CSV") {
        let p = PathBuf::from(p);
        return p.is_file().then_some(p);
    }
    let p = data_dir("travel").join("Customertravel.csv");
    p.is_file().then_some(p)
}

/// Config for a Travel-shaped run: the real table when present, otherwise
/// the synthetic stand-in. The flag tells which one was used.
pub fn travel_config(out: &Path) -> (impute_forge::RunConfig, bool) {
    let real = real_travel_csv();
    let dir = if real.is_some() { "travel" } else { "travel-synthetic" };
    let mut cfg = impute_forge::RunConfig::load(&data_dir(dir).join("config.json")).unwrap();
    if let Some(p) = real {
        cfg.dataset = p;
    }
    cfg.out = out.to_path_buf();
    (cfg, dir == "travel")
}

// Brute-force oracles. They work from raw sums and explicit contingency
// counts rather than the centred forms used by the library.

pub fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx.abs() < 1e-9 || vy.abs() < 1e-9 {
        return 0.0;
    }
    ((n * sxy - sx * sy) / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0)
}

pub fn oracle_cramers_v(a: &[String], b: &[String]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut joint: HashMap<(&str, &str), f64> = HashMap::new();
    let mut ra: HashMap<&str, f64> = HashMap::new();
    let mut cb: HashMap<&str, f64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *ra.entry(x).or_default() += 1.0;
        *cb.entry(y).or_default() += 1.0;
    }
    let k = ra.len().min(cb.len());
    if k < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mut chi2 = 0.0;
    for (x, rx) in &ra {
        for (y, cy) in &cb {
            let e = rx * cy / nf;
            let o = joint.get(&(*x, *y)).copied().unwrap_or(0.0);
            chi2 += (o - e).powi(2) / e;
        }
    }
    (chi2 / (nf * (k - 1) as f64)).sqrt().min(1.0)
}

pub fn oracle_eta(g: &[String], y: &[f64]) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let n = y.len() as f64;
    let grand = y.iter().sum::<f64>() / n;
    let total: f64 = y.iter().map(|v| (v - grand).powi(2)).sum();
    if total < 1e-12 {
        return 0.0;
    }
    let mut groups: HashMap<&str, Vec<f64>> = HashMap::new();
    for (k, v) in g.iter().zip(y) {
        groups.entry(k).or_default().push(*v);
    }
    if groups.len() < 2 {
        return 0.0;
    }
    // Within-group sum of squares; between = total - within.
    let within: f64 = groups
        .values()
        .map(|vs| {
            let m = vs.iter().sum::<f64>() / vs.len() as f64;
            vs.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum();
    ((total - within) / total).max(0.0).sqrt().min(1.0)
}

/// Share of positive/negative pairs ranked correctly, ties counted half.
pub fn oracle_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}
