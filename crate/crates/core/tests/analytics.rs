mod common;

use ewps_core::analytics::*;
use ewps_core::quadrature::{integrate_half_line, Tolerance};
use ewps_core::{EwpsParams, MomentMethod, PowerSeriesFamily, Sampler};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn shannon_entropy_matches_monte_carlo() {
    let p = EwpsParams::new(2.0, 1.0, 1.0, 1.0, PowerSeriesFamily::Poisson).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws: Vec<f64> = p
        .sample(&mut rng, 1_000_000, Sampler::Inverse)
        .iter()
        .map(|&y| -p.ln_pdf(y).unwrap())
        .collect();
    let (m, se) = mean_se(&draws);
    let h = shannon_entropy(&p).unwrap();
    assert!((h - m).abs() < 3.0 * se, "H = {h}, MC = {m} ± {se}");
}

#[test]
fn order_statistic_moment_matches_monte_carlo() {
    let p = EwpsParams::new(1.5, 1.0, 1.2, 0.5, PowerSeriesFamily::Geometric).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let mut s = p.sample(&mut rng, 4, Sampler::Inverse);
            s.sort_by(f64::total_cmp);
            s[1] * s[1]
        })
        .collect();
    let (m, se) = mean_se(&draws);
    let q = order_stat_moment(&p, 2, 4, 2).unwrap();
    assert!((q - m).abs() < 3.0 * se, "E = {q}, MC = {m} ± {se}");
    let s = order_stat_moment_series(&p, 2, 4, 2).unwrap();
    assert!((s.value - q).abs() < 1e-5 * q);
}

#[test]
fn order_statistic_densities_integrate_to_one() {
    let p = EwpsParams::new(0.8, 2.0, 1.7, 1.5, PowerSeriesFamily::Poisson).unwrap();
    for r in 1..=3 {
        let est = integrate_half_line(
            |y| order_stat_dist(&p, r, 3, y).unwrap().0,
            p.median(),
            Tolerance::rel(1e-10),
        )
        .unwrap();
        assert!((est.value - 1.0).abs() < 1e-7, "r={r}: {}", est.value);
    }
}

#[test]
fn lorenz_curve_is_convex_and_below_the_diagonal() {
    let p = EwpsParams::new(2.0, 1.0, 1.5, 0.5, PowerSeriesFamily::Geometric).unwrap();
    let curves = InequalityCurves::new(&p).unwrap();
    let pts: Vec<(f64, f64)> = (1..20)
        .map(|i| {
            let q = i as f64 / 20.0;
            (q, curves.at(p.quantile(q).unwrap()).unwrap().lorenz)
        })
        .collect();
    assert!(pts.iter().all(|&(q, l)| l <= q));
    for w in pts.windows(3) {
        let slope1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        let slope2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
        assert!(slope2 >= slope1 - 1e-9);
    }
    assert!((curves.at(f64::INFINITY).unwrap().lorenz - 1.0).abs() < 1e-9);
}

fn arb_params() -> impl Strategy<Value = EwpsParams> {
    let fam = prop_oneof![
        (0.05f64..0.9).prop_map(|t| (PowerSeriesFamily::Geometric, t)),
        (0.05f64..4.0).prop_map(|t| (PowerSeriesFamily::Poisson, t)),
        (0.05f64..0.9).prop_map(|t| (PowerSeriesFamily::Logarithmic, t)),
        (1u32..6, 0.05f64..3.0).prop_map(|(m, t)| (PowerSeriesFamily::Binomial { m }, t)),
    ];
    (0.5f64..3.0, 0.5f64..2.0, 0.7f64..3.0, fam)
        .prop_map(|(a, b, g, (f, t))| EwpsParams::new(a, b, g, t, f).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pwm_at_zero_power_is_the_moment(p in arb_params(), s in 1u32..4) {
        let m = p.moment(s, MomentMethod::Quadrature).unwrap();
        prop_assert!((pwm(&p, s, 0).unwrap() - m).abs() <= 1e-8 * m);
    }

    #[test]
    fn first_residual_moment_is_the_mrl(p in arb_params(), q in 0.05f64..0.9) {
        let t = p.quantile(q).unwrap();
        let a = residual_moment(&p, t, 1).unwrap();
        let b = mean_residual_life(&p, t).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn mean_deviation_about_median_is_smaller(p in arb_params()) {
        let (d1, d2) = mean_deviations(&p).unwrap();
        prop_assert!(d1 >= d2 - 1e-10 && d2 > 0.0);
    }

    #[test]
    fn gini_is_a_proportion_and_both_forms_agree(p in arb_params()) {
        let g = gini(&p).unwrap();
        prop_assert!(g > 0.0 && g < 1.0);
        prop_assert!((g - gini_fubini(&p).unwrap()).abs() < 1e-5);
    }

    #[test]
    fn bonferroni_is_lorenz_over_cdf(p in arb_params(), q in 0.05f64..0.95) {
        let x = p.quantile(q).unwrap();
        let pt = inequality_curves(&p, x).unwrap();
        prop_assert!((pt.bonferroni - pt.lorenz / q).abs() <= 1e-9 * pt.bonferroni);
    }
}
