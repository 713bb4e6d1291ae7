mod common;

use ewps_core::inference::fit_model;
use ewps_core::{gof, Model, PowerSeriesFamily};

use common::load_fixture;

fn models() -> Vec<Model> {
    vec![
        Model::ewps(PowerSeriesFamily::Geometric),
        Model::ewps(PowerSeriesFamily::Poisson),
        Model::ewps(PowerSeriesFamily::Logarithmic),
        Model::Ew,
        Model::Weibull,
    ]
}

#[test]
fn fixtures_have_documented_sizes() {
    for (name, n) in [
        ("alloy.csv", 67),
        ("aluminum.csv", 101),
        ("kevlar.csv", 101),
    ] {
        let Some(d) = load_fixture(name) else {
            eprintln!("skipping: {name} not present");
            continue;
        };
        assert_eq!(d.len(), n, "{name}");
    }
}

#[test]
fn kevlar_fits_reproduce_published_rows() {
    let Some(d) = load_fixture("kevlar.csv") else {
        eprintln!("skipping: kevlar.csv not present");
        return;
    };
    // (model, α, β, γ, θ, -2 log L, K-S, AD)
    let rows = [
        (
            Model::ewps(PowerSeriesFamily::Geometric),
            [1.0921, 3.1202, 0.661, 0.7559],
            203.66,
            0.0724,
            0.7842,
        ),
        (
            Model::ewps(PowerSeriesFamily::Poisson),
            [0.8589, 1.3032, 0.8717, 1.2661],
            204.6174,
            0.0725,
            0.8409,
        ),
        (
            Model::Ew,
            [0.7929, 0.8210, 1.0604, 0.0],
            205.5743,
            0.0844,
            0.9554,
        ),
        (
            Model::Weibull,
            [1.0, 1.0101, 0.9259, 0.0],
            205.9536,
            0.0906,
            1.1221,
        ),
    ];
    for (m, mle, ll, ks, ad) in rows {
        let fit = fit_model(&d, &m, None).unwrap();
        assert!(fit.converged, "{}", m.label());
        for (got, want) in fit.estimate.to_array().iter().zip(mle) {
            assert!(
                (got - want).abs() <= (0.02 * want.abs()).max(0.01),
                "{}: {got} vs {want}",
                m.label()
            );
        }
        let r = gof::gof_report(&d, &m, &fit.estimate).unwrap();
        assert!((r.neg2loglik - ll).abs() < 0.01, "{}", m.label());
        assert!((r.ks - ks).abs() < 0.001, "{}", m.label());
        assert!((r.ad - ad).abs() < 0.001, "{}", m.label());
    }
}

#[test]
fn fits_reach_at_least_the_published_likelihood() {
    let published: [(&str, [f64; 5]); 3] = [
        (
            "alloy.csv",
            [695.9917, 696.2272, 696.8654, 696.0166, 706.598],
        ),
        (
            "aluminum.csv",
            [913.1816, 913.4216, 913.7988, 913.498, 926.9108],
        ),
        (
            "kevlar.csv",
            [203.66, 204.6174, 202.4622, 205.5743, 205.9536],
        ),
    ];
    for (name, lls) in published {
        let Some(d) = load_fixture(name) else {
            eprintln!("skipping: {name} not present");
            continue;
        };
        for (m, ll) in models().into_iter().zip(lls) {
            let fit = fit_model(&d, &m, None).unwrap();
            assert!(
                fit.neg2loglik <= ll + 0.05,
                "{name} {}: {} vs {ll}",
                m.label(),
                fit.neg2loglik
            );
        }
    }
}
