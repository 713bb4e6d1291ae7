use std::io::Write;

use ewps_core::inference::{confidence_intervals, em_fit, fit_model, EM_TOL};
use ewps_core::{
    gof, Dataset, EwParams, EwpsParams, FitMethod, FitResult, Model, ParamVector,
    PowerSeriesFamily, Sampler,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::*;
use crate::ingest::ingest_csv;
use crate::output::{Cell, Table};
use crate::{exit, CliError, CliResult};

const EM_MAX_ITER: usize = 20_000;

pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    match &cli.command {
        Command::Fit(a) => fit(a, out, err),
        Command::Compare(a) => compare(a, out, err),
        Command::Sample(a) => sample(a, out),
        Command::Table(a) => table(a, out),
        Command::Ttt(a) => ttt(a, out, err),
        Command::Gof(a) => gof_cmd(a, out, err),
    }
}

/// Parameters supplied on the command line are user input, so domain
/// failures while building them are usage errors.
fn bad_params(e: ewps_core::Error) -> CliError {
    CliError::usage(format!("invalid parameters: {e}"))
}

fn family(opts: &ModelOpts, which: FamilyArg) -> CliResult<PowerSeriesFamily> {
    Ok(match which {
        FamilyArg::Geometric => PowerSeriesFamily::Geometric,
        FamilyArg::Poisson => PowerSeriesFamily::Poisson,
        FamilyArg::Logarithmic => PowerSeriesFamily::Logarithmic,
        FamilyArg::Binomial => PowerSeriesFamily::binomial(opts.m).map_err(bad_params)?,
        FamilyArg::Polynomial => {
            PowerSeriesFamily::polynomial(opts.coeffs.clone()).map_err(bad_params)?
        }
        FamilyArg::All => return Err(CliError::usage("--family all is only accepted by `fit`")),
    })
}

/// The models selected by `--model/--family`; `all` expands to the four
/// named families.
pub fn models(opts: &ModelOpts) -> CliResult<Vec<Model>> {
    match opts.model {
        ModelArg::Ew => Ok(vec![Model::Ew]),
        ModelArg::Weibull => Ok(vec![Model::Weibull]),
        ModelArg::Ewps if opts.family == FamilyArg::All => [
            FamilyArg::Geometric,
            FamilyArg::Poisson,
            FamilyArg::Logarithmic,
            FamilyArg::Binomial,
        ]
        .into_iter()
        .map(|f| family(opts, f).map(Model::ewps))
        .collect(),
        ModelArg::Ewps => Ok(vec![Model::ewps(family(opts, opts.family)?)]),
    }
}

fn single_model(opts: &ModelOpts) -> CliResult<Model> {
    let mut ms = models(opts)?;
    if ms.len() != 1 {
        return Err(CliError::usage("this command needs a single model"));
    }
    Ok(ms.remove(0))
}

/// A fully specified law built from command-line parameters.
#[derive(Debug, Clone)]
pub enum Law {
    Ewps(EwpsParams),
    Ew(EwParams),
}

impl Law {
    pub fn from_args(model: &Model, p: &ParamOpts) -> CliResult<(ParamVector, Law)> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::usage(format!("--{name} is required for this model")))
        };
        let beta = need(p.beta, "beta")?;
        let gamma = need(p.gamma, "gamma")?;
        match model {
            Model::Ewps { family } => {
                let pv = ParamVector::new(
                    need(p.alpha, "alpha")?,
                    beta,
                    gamma,
                    need(p.theta, "theta")?,
                );
                let law = pv.to_ewps(family).map_err(bad_params)?;
                Ok((pv, Law::Ewps(law)))
            }
            Model::Ew => {
                let pv = ParamVector::new(need(p.alpha, "alpha")?, beta, gamma, 0.0);
                Ok((pv, Law::Ew(pv.to_ew().map_err(bad_params)?)))
            }
            Model::Weibull => {
                if p.alpha.is_some_and(|a| a != 1.0) {
                    return Err(CliError::usage("the Weibull model fixes alpha = 1"));
                }
                let pv = ParamVector::new(1.0, beta, gamma, 0.0);
                Ok((pv, Law::Ew(pv.to_ew().map_err(bad_params)?)))
            }
        }
    }

    fn quantile(&self, q: f64) -> ewps_core::Result<f64> {
        match self {
            Law::Ewps(p) => p.quantile(q),
            Law::Ew(p) => p.quantile(q),
        }
    }

    /// `(pdf, cdf, survival, hazard)`; the hazard is `None` where the
    /// survival underflows.
    fn point(&self, y: f64) -> ewps_core::Result<(f64, f64, f64, Option<f64>)> {
        match self {
            Law::Ewps(p) => Ok((
                p.pdf(y)?,
                p.cdf(y)?,
                p.survival(y)?,
                p.survival_hazard(y).ok().map(|h| h.1),
            )),
            Law::Ew(p) => Ok((
                p.pdf(y)?,
                p.cdf(y)?,
                p.survival(y)?,
                p.hazard(y).ok().map(|h| h.1),
            )),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, n: usize, sampler: Sampler) -> Vec<f64> {
        match self {
            Law::Ewps(p) => p.sample(rng, n, sampler),
            Law::Ew(p) => p.sample(rng, n),
        }
    }
}

const FIT_COLUMNS: &[&str] = &[
    "model",
    "method",
    "k",
    "alpha",
    "beta",
    "gamma",
    "theta",
    "se_alpha",
    "se_beta",
    "se_gamma",
    "se_theta",
    "alpha_lo",
    "alpha_hi",
    "beta_lo",
    "beta_hi",
    "gamma_lo",
    "gamma_hi",
    "theta_lo",
    "theta_hi",
    "neg2loglik",
    "aic",
    "iterations",
    "converged",
    "score_norm",
];

fn em_start(d: &Dataset, family: &PowerSeriesFamily) -> CliResult<ParamVector> {
    let w = fit_model(d, &Model::Weibull, None)?;
    let s = family.support_upper();
    let theta = if s.is_finite() { 0.5 * s } else { 1.0 };
    Ok(ParamVector::new(
        1.0,
        w.estimate.beta,
        w.estimate.gamma,
        theta,
    ))
}

pub fn fit_one(d: &Dataset, model: &Model, method: MethodArg, tol: f64) -> CliResult<FitResult> {
    match (method, model) {
        (MethodArg::Direct, _) => Ok(fit_model(d, model, None)?),
        (MethodArg::Em, Model::Ewps { family }) => {
            Ok(em_fit(d, family, em_start(d, family)?, EM_MAX_ITER, tol)?)
        }
        (MethodArg::Em, _) => Err(CliError::usage("--method em applies to ewps models only")),
    }
}

fn fit_row(fr: &FitResult, level: f64) -> Vec<Cell> {
    let est = fr.estimate.to_array();
    let se = fr.std_errors;
    let ci = confidence_intervals(fr, level).ok();
    let method = match fr.method {
        FitMethod::Direct => "direct",
        FitMethod::Em => "em",
    };
    let mut row: Vec<Cell> = vec![fr.model.label().into(), method.into(), fr.k_params().into()];
    row.extend(est.iter().map(|&v| Cell::Num(v)));
    row.extend((0..4).map(|k| Cell::from(se.map(|s| s[k]))));
    for k in 0..4 {
        row.push(ci.map(|c| c[k].0).into());
        row.push(ci.map(|c| c[k].1).into());
    }
    row.extend([
        fr.neg2loglik.into(),
        fr.aic().into(),
        fr.iterations.into(),
        fr.converged.into(),
        fr.score_norm.into(),
    ]);
    row
}

fn fit(a: &FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::usage(format!(
            "--level must lie in (0, 1), got {}",
            a.level
        )));
    }
    let tol = a.tol.unwrap_or(EM_TOL);
    if !(tol > 0.0) {
        return Err(CliError::usage("--tol must be positive"));
    }
    let ms = models(&a.model)?;
    let d = ingest_csv(&a.data, err)?;
    let mut t = Table::new(FIT_COLUMNS);
    let mut code = exit::OK;
    for m in &ms {
        let fr = fit_one(&d, m, a.method, tol)?;
        if !fr.converged {
            writeln!(
                err,
                "warning: {} fit did not converge (score norm {:e})",
                m.label(),
                fr.score_norm
            )?;
            code = exit::NOT_CONVERGED;
        }
        t.push(fit_row(&fr, a.level));
    }
    t.write(a.format.format, out)?;
    Ok(code)
}

const COMPARE_COLUMNS: &[&str] = &[
    "model",
    "alpha",
    "beta",
    "gamma",
    "theta",
    "ks",
    "ks_pvalue",
    "neg2loglik",
    "aic",
    "ad",
    "cm",
    "k",
    "converged",
    "error",
];

/// Fit and goodness of fit for one model; failures become an error row.
fn compare_row(d: &Dataset, m: &Model) -> (f64, Vec<Cell>) {
    let result =
        fit_model(d, m, None).and_then(|fr| Ok((gof::gof_report(d, m, &fr.estimate)?, fr)));
    match result {
        Ok((g, fr)) => {
            let mut row: Vec<Cell> = vec![m.label().into()];
            row.extend(fr.estimate.to_array().iter().map(|&v| Cell::Num(v)));
            row.extend([g.ks, g.ks_pvalue, g.neg2loglik, g.aic, g.ad, g.cm].map(Cell::Num));
            row.extend([g.k_params.into(), fr.converged.into(), Cell::Missing]);
            (g.aic, row)
        }
        Err(e) => {
            let mut row: Vec<Cell> = vec![m.label().into()];
            row.extend(std::iter::repeat_n(Cell::Missing, 10));
            row.extend([m.k_params().into(), false.into(), e.to_string().into()]);
            (f64::INFINITY, row)
        }
    }
}

pub fn compare_models(m: u32) -> CliResult<Vec<Model>> {
    Ok(vec![
        Model::ewps(PowerSeriesFamily::Geometric),
        Model::ewps(PowerSeriesFamily::Poisson),
        Model::ewps(PowerSeriesFamily::Logarithmic),
        Model::ewps(PowerSeriesFamily::binomial(m).map_err(bad_params)?),
        Model::Ew,
        Model::Weibull,
    ])
}

fn compare(a: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let ms = compare_models(a.m)?;
    let d = ingest_csv(&a.data, err)?;
    let mut rows: Vec<(f64, Vec<Cell>)> = std::thread::scope(|s| {
        let handles: Vec<_> = ms.iter().map(|m| s.spawn(|| compare_row(&d, m))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fit thread panicked"))
            .collect()
    });
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut t = Table::new(COMPARE_COLUMNS);
    for (_, r) in rows {
        t.push(r);
    }
    t.write(a.format.format, out)?;
    Ok(exit::OK)
}

fn sample(a: &SampleArgs, out: &mut dyn Write) -> CliResult<i32> {
    let m = single_model(&a.model)?;
    let (_, law) = Law::from_args(&m, &a.params)?;
    let sampler = match a.sampler {
        SamplerArg::Inverse => Sampler::Inverse,
        SamplerArg::Compound => Sampler::Compound,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut t = Table::new(&["y"]);
    for y in law.sample(&mut rng, a.n, sampler) {
        t.push(vec![y.into()]);
    }
    t.write(a.format.format, out)?;
    Ok(exit::OK)
}

fn table(a: &TableArgs, out: &mut dyn Write) -> CliResult<i32> {
    let m = single_model(&a.model)?;
    let (_, law) = Law::from_args(&m, &a.params)?;
    if a.points < 2 {
        return Err(CliError::usage("--points must be at least 2"));
    }
    let lo = match a.from {
        Some(v) => v,
        None => law.quantile(0.001)?,
    };
    let hi = match a.to {
        Some(v) => v,
        None => law.quantile(0.999)?,
    };
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(CliError::usage(format!(
            "grid bounds must satisfy 0 < from < to, got [{lo}, {hi}]"
        )));
    }
    let mut t = Table::new(&["y", "pdf", "cdf", "survival", "hazard"]);
    let step = (hi - lo) / (a.points - 1) as f64;
    for i in 0..a.points {
        let y = if i + 1 == a.points {
            hi
        } else {
            lo + step * i as f64
        };
        let (f, c, s, h) = law.point(y)?;
        t.push(vec![y.into(), f.into(), c.into(), s.into(), h.into()]);
    }
    t.write(a.format.format, out)?;
    Ok(exit::OK)
}

fn ttt(a: &TttArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let d = ingest_csv(&a.data, err)?;
    let mut t = Table::new(&["kind", "x", "value"]);
    for (u, v) in gof::empirical_ttt(&d) {
        t.push(vec!["ttt".into(), u.into(), v.into()]);
    }
    for (y, s) in gof::empirical_survival(&d) {
        t.push(vec!["survival".into(), y.into(), s.into()]);
    }
    t.write(a.format.format, out)?;
    Ok(exit::OK)
}

fn gof_cmd(a: &GofArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let m = single_model(&a.model)?;
    let given = [
        a.params.alpha,
        a.params.beta,
        a.params.gamma,
        a.params.theta,
    ]
    .iter()
    .any(Option::is_some);
    let pv = if given {
        Some(Law::from_args(&m, &a.params)?.0)
    } else {
        None
    };
    let d = ingest_csv(&a.data, err)?;
    let mut code = exit::OK;
    let pv = match pv {
        Some(p) => p,
        None => {
            let fr = fit_model(&d, &m, None)?;
            if !fr.converged {
                writeln!(err, "warning: {} fit did not converge", m.label())?;
                code = exit::NOT_CONVERGED;
            }
            fr.estimate
        }
    };
    let g = gof::gof_report(&d, &m, &pv)?;
    let mut t = Table::new(&[
        "model",
        "alpha",
        "beta",
        "gamma",
        "theta",
        "ks",
        "ks_pvalue",
        "neg2loglik",
        "aic",
        "ad",
        "cm",
        "k",
    ]);
    let mut row: Vec<Cell> = vec![m.label().into()];
    row.extend(pv.to_array().iter().map(|&v| Cell::Num(v)));
    row.extend([g.ks, g.ks_pvalue, g.neg2loglik, g.aic, g.ad, g.cm].map(Cell::Num));
    row.push(g.k_params.into());
    t.push(row);
    t.write(a.format.format, out)?;
    Ok(code)
}
