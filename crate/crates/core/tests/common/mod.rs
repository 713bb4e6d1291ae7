#![allow(dead_code)]

use std::path::PathBuf;

use ewps_core::special::kolmogorov_survival;
use ewps_core::Dataset;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// Reads a single-column fixture (header line skipped); `None` when absent.
pub fn load_fixture(name: &str) -> Option<Dataset> {
    let text = std::fs::read_to_string(data_path(name)).ok()?;
    let v: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().unwrap())
        .collect();
    Some(Dataset::new(v).unwrap())
}

/// One-sample K-S: statistic and asymptotic p-value.
pub fn ks_one<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> (f64, f64) {
    let mut x = xs.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x.iter().enumerate().fold(0.0f64, |m, (i, &v)| {
        let u = cdf(v);
        m.max((i as f64 + 1.0) / n - u).max(u - i as f64 / n)
    });
    (d, kolmogorov_survival(n.sqrt() * d))
}

/// Two-sample K-S with the asymptotic p-value at effective size `nm/(n+m)`.
pub fn ks_two(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    (d, kolmogorov_survival(ne.sqrt() * d))
}

/// Brute-force K-S: supremum of |F_n - F| checked on both sides of every step.
pub fn ks_brute<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for &x in xs {
        let at = xs.iter().filter(|&&v| v <= x).count() as f64 / n;
        let before = xs.iter().filter(|&&v| v < x).count() as f64 / n;
        let u = cdf(x);
        d = d.max((at - u).abs()).max((before - u).abs());
    }
    d
}
