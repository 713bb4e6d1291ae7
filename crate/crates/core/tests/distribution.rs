mod common;

use ewps_core::quadrature::{integrate_half_line, Tolerance};
use ewps_core::{submodels, EwParams, EwpsParams, PowerSeriesFamily, Sampler};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{ks_one, ks_two};

fn family_cells() -> Vec<(PowerSeriesFamily, f64)> {
    vec![
        (PowerSeriesFamily::Geometric, 0.5),
        (PowerSeriesFamily::Poisson, 2.0),
        (PowerSeriesFamily::Logarithmic, 0.7),
        (PowerSeriesFamily::Binomial { m: 5 }, 1.0),
    ]
}

#[test]
fn density_integrates_to_one_across_families_and_shapes() {
    for (fam, th) in family_cells() {
        for &a in &[0.5, 1.0, 2.0] {
            for &g in &[0.5, 1.0, 2.0] {
                let p = EwpsParams::new(a, 1.3, g, th, fam.clone()).unwrap();
                let est =
                    integrate_half_line(|y| p.pdf(y).unwrap(), p.median(), Tolerance::rel(1e-11))
                        .unwrap();
                assert!(
                    (est.value - 1.0).abs() < 1e-8,
                    "{} a={a} g={g}: {}",
                    fam.name(),
                    est.value
                );
            }
        }
    }
}

#[test]
fn polynomial_family_density_integrates_to_one() {
    let fam = PowerSeriesFamily::polynomial(vec![1.0, 0.0, 0.5, 0.25]).unwrap();
    let p = EwpsParams::new(2.0, 1.0, 3.0, 1.5, fam).unwrap();
    let est =
        integrate_half_line(|y| p.pdf(y).unwrap(), p.median(), Tolerance::rel(1e-11)).unwrap();
    assert!((est.value - 1.0).abs() < 1e-8);
}

#[test]
fn samplers_agree_and_match_the_cdf() {
    let n = 100_000;
    for (k, (fam, th)) in family_cells().into_iter().enumerate() {
        let p = EwpsParams::new(1.5, 1.0, 0.8, th, fam.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let inv = p.sample(&mut rng, n, Sampler::Inverse);
        let cmp = p.sample(&mut rng, n, Sampler::Compound);
        let (_, p2) = ks_two(&inv, &cmp);
        assert!(p2 > 0.01, "{}: two-sample p = {p2}", fam.name());
        let (_, p1) = ks_one(&cmp, |y| p.cdf(y).unwrap());
        assert!(p1 > 0.01, "{}: one-sample p = {p1}", fam.name());
    }
}

#[test]
fn minimum_sampler_matches_min_variant_cdf() {
    for (k, (fam, th)) in family_cells().into_iter().enumerate() {
        let p = EwpsParams::new(2.0, 0.7, 1.4, th, fam.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(200 + k as u64);
        let xs: Vec<f64> = (0..50_000).map(|_| p.sample_min_one(&mut rng)).collect();
        let (_, pv) = ks_one(&xs, |y| p.cdf_min(y).unwrap());
        assert!(pv > 0.01, "{}: p = {pv}", fam.name());
    }
}

#[test]
fn vanishing_theta_recovers_the_ew_law() {
    for (fam, _) in family_cells() {
        let p = EwpsParams::new(1.7, 0.9, 1.3, 1e-6, fam.clone()).unwrap();
        let ew = EwParams::new(1.7, 0.9, 1.3).unwrap();
        let sup = (1..400)
            .map(|i| i as f64 * 0.01)
            .map(|y| (p.cdf(y).unwrap() - ew.cdf(y).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-5, "{}: {sup}", fam.name());
    }
}

#[test]
fn named_submodels_match_generic_composition_on_a_grid() {
    let fams = [
        (PowerSeriesFamily::Geometric, 0.4),
        (PowerSeriesFamily::Poisson, 3.0),
        (PowerSeriesFamily::Logarithmic, 0.9),
        (PowerSeriesFamily::Binomial { m: 3 }, 0.6),
    ];
    for (fam, th) in fams {
        for &(a, g) in &[(0.5, 0.7), (1.0, 1.0), (3.0, 2.5)] {
            let p = EwpsParams::new(a, 1.2, g, th, fam.clone()).unwrap();
            for &y in &[0.05, 0.3, 1.0, 2.0] {
                let f = submodels::cdf(&p, y).unwrap();
                assert!((p.cdf(y).unwrap() - f).abs() <= 1e-12 * f.max(1e-300) + 1e-15);
                let d = submodels::pdf(&p, y).unwrap();
                assert!((p.pdf(y).unwrap() - d).abs() <= 1e-12 * d);
                let h = submodels::hazard(&p, y).unwrap();
                let (_, got) = p.survival_hazard(y).unwrap();
                assert!((got - h).abs() <= 1e-10 * h, "{} y={y}", fam.name());
            }
        }
    }
}

fn arb_params() -> impl Strategy<Value = EwpsParams> {
    let fam = prop_oneof![
        (0.01f64..0.99).prop_map(|t| (PowerSeriesFamily::Geometric, t)),
        (0.01f64..8.0).prop_map(|t| (PowerSeriesFamily::Poisson, t)),
        (0.01f64..0.99).prop_map(|t| (PowerSeriesFamily::Logarithmic, t)),
        (1u32..12, 0.01f64..5.0).prop_map(|(m, t)| (PowerSeriesFamily::Binomial { m }, t)),
    ];
    (0.2f64..5.0, 0.1f64..5.0, 0.3f64..4.0, fam)
        .prop_map(|(a, b, g, (f, t))| EwpsParams::new(a, b, g, t, f).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cdf_is_a_monotone_probability(p in arb_params(), q1 in 0.01f64..0.99, q2 in 0.01f64..0.99) {
        let (lo, hi) = if q1 < q2 { (q1, q2) } else { (q2, q1) };
        let (y1, y2) = (p.quantile(lo).unwrap(), p.quantile(hi).unwrap());
        let (f1, f2) = (p.cdf(y1).unwrap(), p.cdf(y2).unwrap());
        prop_assert!((0.0..=1.0).contains(&f1) && (0.0..=1.0).contains(&f2));
        prop_assert!(f1 <= f2);
    }

    #[test]
    fn quantile_inverts_cdf(p in arb_params(), q in 0.001f64..0.999) {
        let y = p.quantile(q).unwrap();
        prop_assert!((p.cdf(y).unwrap() - q).abs() < 1e-10);
    }

    #[test]
    fn survival_complements_cdf(p in arb_params(), q in 0.001f64..0.999) {
        let y = p.quantile(q).unwrap();
        prop_assert!((p.cdf(y).unwrap() + p.survival(y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hazard_is_density_over_survival(p in arb_params(), q in 0.01f64..0.99) {
        let y = p.quantile(q).unwrap();
        let (s, h) = p.survival_hazard(y).unwrap();
        let f = p.pdf(y).unwrap();
        prop_assert!((h - f / s).abs() <= 1e-12 * h);
    }

    #[test]
    fn min_variant_is_stochastically_smaller(p in arb_params(), q in 0.05f64..0.95) {
        let y = p.quantile(q).unwrap();
        prop_assert!(p.cdf_min(y).unwrap() >= p.ew.cdf(y).unwrap() - 1e-12);
        prop_assert!(p.ew.cdf(y).unwrap() >= p.cdf(y).unwrap() - 1e-12);
    }
}
