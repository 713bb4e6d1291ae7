//! Goodness of fit and model comparison: Kolmogorov–Smirnov with its
//! asymptotic p-value, Anderson–Darling and Cramér–von Mises on the
//! probability integral transform, AIC, the empirical scaled TTT transform
//! and the empirical survival step function.

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{domain, Result};
use crate::inference::{Model, ParamVector};
use crate::special::kolmogorov_survival;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GofReport {
    pub ks: f64,
    pub ks_pvalue: f64,
    pub neg2loglik: f64,
    pub aic: f64,
    pub ad: f64,
    pub cm: f64,
    pub k_params: usize,
}

/// `-2 log L + 2k`.
pub fn aic(neg2loglik: f64, k: usize) -> f64 {
    neg2loglik + 2.0 * k as f64
}

fn pit<F: Fn(f64) -> Result<f64>>(d: &Dataset, cdf: F) -> Result<Vec<f64>> {
    d.sorted()
        .iter()
        .map(|&y| {
            let u = cdf(y)?;
            if !(0.0..=1.0).contains(&u) {
                return domain(format!("model cdf returned {u} at y = {y}"));
            }
            Ok(u)
        })
        .collect()
}

/// `D_n = max_i max(i/n - F(y_(i)), F(y_(i)) - (i-1)/n)` and the asymptotic
/// p-value `P(K > √n D_n)`.
pub fn ks_test<F: Fn(f64) -> Result<f64>>(d: &Dataset, cdf: F) -> Result<(f64, f64)> {
    let u = pit(d, cdf)?;
    let n = u.len() as f64;
    let stat = u.iter().enumerate().fold(0.0f64, |m, (i, &ui)| {
        let i = i as f64;
        m.max((i + 1.0) / n - ui).max(ui - i / n)
    });
    Ok((stat, kolmogorov_survival(n.sqrt() * stat)))
}

/// `(AD, CM)` with `u_i = F(y_(i))`:
/// `CM = Σ (u_i - (2i-1)/(2n))² + 1/(12n)` and
/// `AD = -n - n^{-1} Σ (2i-1)[log u_i + log(1 - u_{n+1-i})]`.
pub fn ad_cm<F: Fn(f64) -> Result<f64>>(d: &Dataset, cdf: F) -> Result<(f64, f64)> {
    let u = pit(d, cdf)?;
    ad_cm_from_pit(&u)
}

/// [`ad_cm`] on already sorted PIT values.
pub fn ad_cm_from_pit(u: &[f64]) -> Result<(f64, f64)> {
    if let Some(v) = u.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return domain(format!("PIT value {v} is not strictly inside (0, 1)"));
    }
    let n = u.len();
    let nf = n as f64;
    let mut cm = 1.0 / (12.0 * nf);
    let mut s = 0.0;
    for i in 0..n {
        let k = (2 * i + 1) as f64;
        cm += (u[i] - k / (2.0 * nf)).powi(2);
        s += k * (u[i].ln() + (-u[n - 1 - i]).ln_1p());
    }
    Ok((-nf - s / nf, cm))
}

/// Full report for `model` at `p`.
pub fn gof_report(d: &Dataset, model: &Model, p: &ParamVector) -> Result<GofReport> {
    let cdf = |y| model.cdf(p, y);
    let (ks, ks_pvalue) = ks_test(d, cdf)?;
    let (ad, cm) = ad_cm(d, cdf)?;
    let neg2loglik = -2.0 * model.log_likelihood(d, p)?;
    let k = model.k_params();
    Ok(GofReport {
        ks,
        ks_pvalue,
        neg2loglik,
        aic: aic(neg2loglik, k),
        ad,
        cm,
        k_params: k,
    })
}

/// Points `(i/n, T_i)` for `i = 0..=n` with
/// `T_i = [Σ_{j≤i} y_(j) + (n-i) y_(i)] / Σ_j y_j`.
///
/// A concave polyline suggests an increasing hazard, a convex one a
/// decreasing hazard.
pub fn empirical_ttt(d: &Dataset) -> Vec<(f64, f64)> {
    let y = d.sorted();
    let n = y.len();
    let total: f64 = y.iter().sum();
    let mut out = Vec::with_capacity(n + 1);
    out.push((0.0, 0.0));
    let mut partial = 0.0;
    for i in 1..=n {
        partial += y[i - 1];
        let t = if i == n {
            1.0
        } else {
            ((partial + (n - i) as f64 * y[i - 1]) / total).min(1.0)
        };
        out.push((i as f64 / n as f64, t));
    }
    out
}

/// Right-continuous survival steps `(y, 1 - #{y_j <= y}/n)` at each
/// distinct observation; tied values form a single step.
pub fn empirical_survival(d: &Dataset) -> Vec<(f64, f64)> {
    let y = d.sorted();
    let n = y.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in y.iter().enumerate() {
        let s = (n - (i + 1) as f64) / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = s,
            _ => out.push((v, s)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ew::EwParams;

    fn expo_cdf(y: f64) -> Result<f64> {
        EwParams::new(1.0, 1.0, 1.0).unwrap().cdf(y)
    }

    #[test]
    fn aic_table_rows() {
        assert_eq!(aic(695.9917, 4), 695.9917 + 8.0);
        assert!((aic(695.9917, 4) - 703.9917).abs() < 1e-9);
        assert!((aic(696.0166, 3) - 702.0166).abs() < 1e-9);
        assert!((aic(706.598, 2) - 710.598).abs() < 1e-9);
    }

    #[test]
    fn ks_at_model_quantiles() {
        let n = 40;
        let e = EwParams::new(1.0, 1.0, 1.0).unwrap();
        let v: Vec<f64> = (1..=n)
            .map(|i| e.quantile((i as f64 - 0.5) / n as f64).unwrap())
            .collect();
        let (d, p) = ks_test(&Dataset::new(v).unwrap(), expo_cdf).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
        assert!(p > 0.999);
    }

    #[test]
    fn cm_perfect_spacing_and_hand_case() {
        let n = 10;
        let u: Vec<f64> = (1..=n)
            .map(|i| (2 * i - 1) as f64 / (2 * n) as f64)
            .collect();
        let (_, cm) = ad_cm_from_pit(&u).unwrap();
        assert!((cm - 1.0 / 120.0).abs() < 1e-15);

        let (ad, cm) = ad_cm_from_pit(&[0.2, 0.5, 0.8]).unwrap();
        let want_cm =
            (0.2f64 - 1.0 / 6.0).powi(2) + 0.0 + (0.8f64 - 5.0 / 6.0).powi(2) + 1.0 / 36.0;
        let want_ad = -3.0
            - (1.0 * (0.2f64.ln() + 0.2f64.ln())
                + 3.0 * (0.5f64.ln() + 0.5f64.ln())
                + 5.0 * (0.8f64.ln() + 0.8f64.ln()))
                / 3.0;
        assert!((cm - want_cm).abs() < 1e-15);
        assert!((ad - want_ad).abs() < 1e-14);
        assert!(ad_cm_from_pit(&[0.0, 0.5]).is_err());
    }

    #[test]
    fn ttt_shapes() {
        let d = Dataset::new(vec![2.0; 5]).unwrap();
        let t = empirical_ttt(&d);
        assert_eq!(t[0], (0.0, 0.0));
        assert!(t[1..].iter().all(|p| p.1 == 1.0));
        let d = Dataset::new(vec![0.5, 3.0, 1.0, 2.0]).unwrap();
        let t = empirical_ttt(&d);
        assert_eq!(*t.last().unwrap(), (1.0, 1.0));
        assert!(t.windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn survival_steps() {
        let d = Dataset::new(vec![1.0]).unwrap();
        assert_eq!(empirical_survival(&d), vec![(1.0, 0.0)]);
        let d = Dataset::new(vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        let s: Vec<f64> = empirical_survival(&d).iter().map(|p| p.1).collect();
        assert_eq!(s, vec![0.75, 0.5, 0.25, 0.0]);
        let d = Dataset::new(vec![1.0, 2.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            empirical_survival(&d),
            vec![(1.0, 0.8), (2.0, 0.2), (3.0, 0.0)]
        );
    }
}
