//! Likelihood machinery: log-likelihood, analytic score and observed
//! information, direct maximum likelihood, the EM algorithm over the latent
//! count, and asymptotic confidence intervals.
//!
//! Three model shapes share the code: the four-parameter EWPS law, the
//! three-parameter EW law (no compounding) and the two-parameter Weibull
//! law (EW with `α = 1`). Parameters a model does not use are held fixed
//! and carry zero standard error.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{domain, Error, Result};
use crate::ew::EwParams;
use crate::ewps::EwpsParams;
use crate::power_series::PowerSeriesFamily;
use crate::special::normal_quantile;

/// Score sup-norm below which a direct fit counts as converged.
pub const SCORE_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 500;
/// Default relative parameter change that stops the EM iteration.
pub const EM_TOL: f64 = 1e-8;

const ALPHA: usize = 0;
const BETA: usize = 1;
const GAMMA: usize = 2;
const THETA: usize = 3;

/// `(α, β, γ, θ)` in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl ParamVector {
    pub fn new(alpha: f64, beta: f64, gamma: f64, theta: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            theta,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.gamma, self.theta]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_ewps(&self, family: &PowerSeriesFamily) -> Result<EwpsParams> {
        EwpsParams::new(
            self.alpha,
            self.beta,
            self.gamma,
            self.theta,
            family.clone(),
        )
    }

    pub fn to_ew(&self) -> Result<EwParams> {
        EwParams::new(self.alpha, self.beta, self.gamma)
    }
}

impl From<&EwpsParams> for ParamVector {
    fn from(p: &EwpsParams) -> Self {
        Self::new(p.alpha(), p.beta(), p.gamma(), p.theta)
    }
}

/// The model being fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Model {
    Ewps {
        family: PowerSeriesFamily,
    },
    /// Exponentiated Weibull, `θ` unused.
    Ew,
    /// Weibull, `α = 1` and `θ` unused.
    Weibull,
}

impl Model {
    pub fn ewps(family: PowerSeriesFamily) -> Self {
        Self::Ewps { family }
    }

    /// Short label: EWG, EWP, EWL, EWB, EWPS (literal coefficients), EW or
    /// Weibull.
    pub fn label(&self) -> String {
        match self {
            Self::Ewps { family } => match family {
                PowerSeriesFamily::Geometric => "EWG".into(),
                PowerSeriesFamily::Poisson => "EWP".into(),
                PowerSeriesFamily::Logarithmic => "EWL".into(),
                PowerSeriesFamily::Binomial { .. } => "EWB".into(),
                PowerSeriesFamily::Polynomial { .. } => "EWPS".into(),
            },
            Self::Ew => "EW".into(),
            Self::Weibull => "Weibull".into(),
        }
    }

    pub fn k_params(&self) -> usize {
        self.free().iter().filter(|f| **f).count()
    }

    fn free(&self) -> [bool; 4] {
        match self {
            Self::Ewps { .. } => [true; 4],
            Self::Ew => [true, true, true, false],
            Self::Weibull => [false, true, true, false],
        }
    }

    fn free_indices(&self) -> Vec<usize> {
        (0..4).filter(|&k| self.free()[k]).collect()
    }

    fn family(&self) -> Option<&PowerSeriesFamily> {
        match self {
            Self::Ewps { family } => Some(family),
            _ => None,
        }
    }

    /// Replaces the parameters a model does not use by their fixed values.
    pub fn normalize(&self, p: ParamVector) -> ParamVector {
        match self {
            Self::Ewps { .. } => p,
            Self::Ew => ParamVector { theta: 0.0, ..p },
            Self::Weibull => ParamVector {
                alpha: 1.0,
                theta: 0.0,
                ..p
            },
        }
    }

    pub fn validate(&self, p: &ParamVector) -> Result<()> {
        match self {
            Self::Ewps { family } => p.to_ewps(family).map(|_| ()),
            _ => p.to_ew().map(|_| ()),
        }
    }

    pub fn cdf(&self, p: &ParamVector, y: f64) -> Result<f64> {
        match self {
            Self::Ewps { family } => p.to_ewps(family)?.cdf(y),
            _ => self.normalize(*p).to_ew()?.cdf(y),
        }
    }

    pub fn ln_pdf(&self, p: &ParamVector, y: f64) -> Result<f64> {
        match self {
            Self::Ewps { family } => p.to_ewps(family)?.ln_pdf(y),
            _ => self.normalize(*p).to_ew()?.ln_pdf(y),
        }
    }

    /// `Σ log f(y_i)`. A term of `-∞` (or NaN) is reported as an overflow
    /// error naming the observation rather than returned.
    pub fn log_likelihood(&self, d: &Dataset, p: &ParamVector) -> Result<f64> {
        let p = self.normalize(*p);
        self.validate(&p)?;
        match self {
            Self::Ewps { family } => {
                let law = p.to_ewps(family)?;
                sum_ln_density(d, law.ln_norm(), |y| law.ln_pdf_kernel(y))
            }
            _ => {
                let law = p.to_ew()?;
                sum_ln_density(d, law.ln_norm(), |y| law.ln_pdf_kernel(y).0)
            }
        }
    }

    pub fn score(&self, d: &Dataset, p: &ParamVector) -> Result<[f64; 4]> {
        let p = self.normalize(*p);
        self.validate(&p)?;
        Ok(derivs(self, d, &p).grad)
    }

    /// `-∂²ℓ`, with zero rows and columns for fixed parameters.
    pub fn observed_information(&self, d: &Dataset, p: &ParamVector) -> Result<[[f64; 4]; 4]> {
        let p = self.normalize(*p);
        self.validate(&p)?;
        let h = derivs(self, d, &p).hess;
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = -h[i][j];
            }
        }
        Ok(out)
    }
}

pub fn log_likelihood(d: &Dataset, p: &ParamVector, family: &PowerSeriesFamily) -> Result<f64> {
    Model::ewps(family.clone()).log_likelihood(d, p)
}

/// `Σ (norm + kernel(y_i))` over the (positive, finite) observations.
fn sum_ln_density(d: &Dataset, norm: f64, kernel: impl Fn(f64) -> f64) -> Result<f64> {
    let mut ll = 0.0;
    for (i, &y) in d.values().iter().enumerate() {
        let v = norm + kernel(y);
        if !v.is_finite() {
            return Err(Error::Overflow(format!(
                "log density is {v} at observation {i} (y = {y})"
            )));
        }
        ll += v;
    }
    Ok(ll)
}

/// `(∂ℓ/∂α, ∂ℓ/∂β, ∂ℓ/∂γ, ∂ℓ/∂θ)`.
pub fn score(d: &Dataset, p: &ParamVector, family: &PowerSeriesFamily) -> Result<[f64; 4]> {
    Model::ewps(family.clone()).score(d, p)
}

/// The 4×4 observed information `-∂²ℓ/∂Θ∂Θᵀ`.
pub fn observed_information(
    d: &Dataset,
    p: &ParamVector,
    family: &PowerSeriesFamily,
) -> Result<[[f64; 4]; 4]> {
    Model::ewps(family.clone()).observed_information(d, p)
}

/// Ratio of the largest to the smallest absolute eigenvalue of the block of
/// `info` belonging to the free parameters of `model`; infinite when the
/// block is singular.
pub fn information_condition(model: &Model, info: &[[f64; 4]; 4]) -> f64 {
    let idx = model.free_indices();
    let m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| info[idx[i]][idx[j]]);
    let eig = SymmetricEigen::new(m).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

// ------------------------------------------------------------ derivatives

/// Per-observation pieces of `t = (βy)^γ` and `w = log(1 - e^{-t})`.
struct Obs {
    lt: f64,
    t: f64,
    tb: f64,
    tg: f64,
    tbb: f64,
    tbg: f64,
    tgg: f64,
    w: f64,
    /// `dw/dt = 1/(e^t - 1)`
    q: f64,
    /// `d²w/dt² = -q(1 + q)`
    w2: f64,
}

impl Obs {
    fn new(y: f64, beta: f64, gamma: f64) -> Self {
        Self::at(beta.ln() + y.ln(), beta, gamma)
    }

    /// From `lt = log(βy)`.
    fn at(lt: f64, beta: f64, gamma: f64) -> Self {
        let t = (gamma * lt).exp();
        // w and q = 1/(e^t - 1) from a single exponential
        let (w, q) = if t <= std::f64::consts::LN_2 {
            let em = (-t).exp_m1();
            ((-em).ln(), (1.0 + em) / -em)
        } else {
            let e = (-t).exp();
            ((-e).ln_1p(), e / (1.0 - e))
        };
        Self {
            lt,
            t,
            tb: gamma * t / beta,
            tg: t * lt,
            tbb: gamma * (gamma - 1.0) * t / (beta * beta),
            tbg: t / beta * (1.0 + gamma * lt),
            tgg: t * lt * lt,
            w,
            q,
            w2: -q * (1.0 + q),
        }
    }

    /// `(∂_β, ∂_γ, ∂_ββ, ∂_βγ, ∂_γγ)` of `w`.
    fn w_derivs(&self) -> [f64; 5] {
        [
            self.q * self.tb,
            self.q * self.tg,
            self.w2 * self.tb * self.tb + self.q * self.tbb,
            self.w2 * self.tb * self.tg + self.q * self.tbg,
            self.w2 * self.tg * self.tg + self.q * self.tgg,
        ]
    }
}

struct Derivs {
    ll: f64,
    grad: [f64; 4],
    hess: [[f64; 4]; 4],
}

/// Log-likelihood with its exact gradient and Hessian.
///
/// Per observation `log f = log α + log γ + γ log β + (γ-1) log y - t +
/// (α-1) w + log θ - log C(θ) + A(v)` where `A = log C'(u)`,
/// `u = θ e^{αw}` and `v = log u`. With `ρ₁ = C''/C'`, `ρ₂ = C'''/C'`:
/// `dA/dv = uρ₁` and `d²A/dv² = uρ₁ + u²(ρ₂ - ρ₁²)`, so the compounding
/// term contributes `A_v v_a` to the score and `A_vv v_a v_b + A_v v_ab`
/// to the Hessian.
fn derivs(model: &Model, d: &Dataset, p: &ParamVector) -> Derivs {
    let (a, b, g, th) = (p.alpha, p.beta, p.gamma, p.theta);
    let mut ll = 0.0;
    let mut gr = [0.0; 4];
    let mut h = [[0.0; 4]; 4];
    let n = d.len() as f64;
    for &y in d.values() {
        let o = Obs::new(y, b, g);
        let [wb, wg, wbb, wbg, wgg] = o.w_derivs();
        ll += g * o.lt - y.ln() - o.t + (a - 1.0) * o.w;
        gr[ALPHA] += o.w;
        gr[BETA] += -o.tb + (a - 1.0) * wb;
        gr[GAMMA] += o.lt - o.tg + (a - 1.0) * wg;
        h[ALPHA][BETA] += wb;
        h[ALPHA][GAMMA] += wg;
        h[BETA][BETA] += -o.tbb + (a - 1.0) * wbb;
        h[BETA][GAMMA] += -o.tbg + (a - 1.0) * wbg;
        h[GAMMA][GAMMA] += -o.tgg + (a - 1.0) * wgg;

        if let Some(fam) = model.family() {
            let v = th.ln() + a * o.w;
            let u = v.exp();
            let r1 = fam.ratio2(u);
            let r2 = fam.ratio3(u);
            let q1 = u * r1;
            let q2 = q1 + u * u * (r2 - r1 * r1);
            ll += fam.ln_derivative1(u);
            let dv = [o.w, a * wb, a * wg, 1.0 / th];
            let mut dvv = [[0.0; 4]; 4];
            dvv[ALPHA][BETA] = wb;
            dvv[ALPHA][GAMMA] = wg;
            dvv[BETA][BETA] = a * wbb;
            dvv[BETA][GAMMA] = a * wbg;
            dvv[GAMMA][GAMMA] = a * wgg;
            dvv[THETA][THETA] = -1.0 / (th * th);
            for i in 0..4 {
                gr[i] += q1 * dv[i];
                for j in i..4 {
                    h[i][j] += q2 * dv[i] * dv[j] + q1 * dvv[i][j];
                }
            }
        }
    }
    ll += n * (a.ln() + g.ln());
    gr[ALPHA] += n / a;
    gr[BETA] += n * g / b;
    gr[GAMMA] += n / g;
    h[ALPHA][ALPHA] += -n / (a * a);
    h[BETA][BETA] += -n * g / (b * b);
    h[BETA][GAMMA] += n / b;
    h[GAMMA][GAMMA] += -n / (g * g);
    if let Some(fam) = model.family() {
        // log θ - log C(θ) per observation
        let k = fam.mean_count(th) / th; // C'/C
        ll += n * (th.ln() - fam.ln_c(th));
        gr[THETA] += n * (1.0 / th - k);
        h[THETA][THETA] += n * (-1.0 / (th * th) + k * k - fam.ratio2(th) * k);
    }
    let free = model.free();
    for i in 0..4 {
        if !free[i] {
            gr[i] = 0.0;
        }
        for j in 0..i {
            h[i][j] = h[j][i];
        }
    }
    for i in 0..4 {
        for j in 0..4 {
            if !free[i] || !free[j] {
                h[i][j] = 0.0;
            }
        }
    }
    Derivs {
        ll,
        grad: gr,
        hess: h,
    }
}

// ------------------------------------------------------- transformations

/// Unconstrained coordinate for component `k`: log for positive
/// parameters, `logit(θ/s)` for `θ` of a family with finite upper bound `s`.
#[derive(Clone, Copy)]
enum Coord {
    Log,
    Logit(f64),
}

impl Coord {
    fn of(model: &Model, k: usize) -> Self {
        match (k, model.family()) {
            (THETA, Some(f)) if f.support_upper().is_finite() => Coord::Logit(f.support_upper()),
            _ => Coord::Log,
        }
    }

    fn to_eta(self, x: f64) -> f64 {
        match self {
            Coord::Log => x.ln(),
            Coord::Logit(s) => (x / s).ln() - (-x / s).ln_1p(),
        }
    }

    fn from_eta(self, e: f64) -> f64 {
        match self {
            Coord::Log => e.exp(),
            Coord::Logit(s) => s / (1.0 + (-e).exp()),
        }
    }

    /// `(dx/dη, d²x/dη²)` at `x`.
    fn jac(self, x: f64) -> (f64, f64) {
        match self {
            Coord::Log => (x, x),
            Coord::Logit(s) => {
                let d1 = x * (1.0 - x / s);
                (d1, d1 * (1.0 - 2.0 * x / s))
            }
        }
    }
}

// ------------------------------------------------------------- fitting

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Direct,
    Em,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub estimate: ParamVector,
    pub neg2loglik: f64,
    /// `None` when the information matrix is not positive definite.
    pub std_errors: Option<[f64; 4]>,
    pub cov: Option<[[f64; 4]; 4]>,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm of the score over the free parameters at the estimate.
    pub score_norm: f64,
    pub method: FitMethod,
    /// Observed-data log-likelihood after each iteration.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn k_params(&self) -> usize {
        self.model.k_params()
    }

    pub fn aic(&self) -> f64 {
        crate::gof::aic(self.neg2loglik, self.k_params())
    }
}

/// Direct maximum likelihood for an EWPS law.
pub fn mle_fit(
    d: &Dataset,
    family: &PowerSeriesFamily,
    init: Option<ParamVector>,
) -> Result<FitResult> {
    fit_model(d, &Model::ewps(family.clone()), init)
}

/// Direct maximum likelihood by Newton's method in unconstrained
/// coordinates with the analytic Hessian, Levenberg damping when the
/// Hessian is not negative definite, and a backtracking line search.
///
/// Without `init`, five deterministic starts derived from a Weibull
/// probability-plot regression are tried and the highest likelihood kept.
pub fn fit_model(d: &Dataset, model: &Model, init: Option<ParamVector>) -> Result<FitResult> {
    d.require_fit_size()?;
    let starts = match init {
        Some(p) => {
            let p = model.normalize(p);
            model.validate(&p)?;
            vec![p]
        }
        None => default_starts(d, model),
    };
    let mut best: Option<Newton> = None;
    let mut last_err = None;
    for s in starts {
        match newton(d, model, s) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.ll > b.ll) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some(best) = best else {
        return Err(last_err.unwrap_or_else(|| Error::Fit {
            reason: "no usable starting point".into(),
            last: [f64::NAN; 4],
            score: [f64::NAN; 4],
        }));
    };
    Ok(finish_fit(
        d,
        model,
        best.p,
        best.iterations,
        best.trace,
        FitMethod::Direct,
        None,
    ))
}

fn finish_fit(
    d: &Dataset,
    model: &Model,
    p: ParamVector,
    iterations: usize,
    trace: Vec<f64>,
    method: FitMethod,
    em_converged: Option<bool>,
) -> FitResult {
    let dv = derivs(model, d, &p);
    let idx = model.free_indices();
    let score_norm = sup_norm(&idx, &dv.grad);
    let info = DMatrix::from_fn(idx.len(), idx.len(), |i, j| -dv.hess[idx[i]][idx[j]]);
    let cov = info.clone().cholesky().map(|c| {
        let inv = c.inverse();
        let mut out = [[0.0; 4]; 4];
        for (i, &a) in idx.iter().enumerate() {
            for (j, &b) in idx.iter().enumerate() {
                out[a][b] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            }
        }
        out
    });
    let std_errors = cov.map(|c| {
        [
            c[0][0].sqrt(),
            c[1][1].sqrt(),
            c[2][2].sqrt(),
            c[3][3].sqrt(),
        ]
    });
    let converged = match em_converged {
        Some(c) => c && cov.is_some(),
        None => score_norm < SCORE_TOL && cov.is_some(),
    };
    FitResult {
        model: model.clone(),
        estimate: p,
        neg2loglik: -2.0 * dv.ll,
        std_errors,
        cov,
        iterations,
        converged,
        score_norm,
        method,
        trace,
    }
}

/// `(β, γ)` from least squares of `log(-log Ŝ)` on `log y` with plotting
/// positions `Ŝ_i = 1 - (i - 1/2)/n`.
fn weibull_regression(d: &Dataset) -> (f64, f64) {
    let n = d.len() as f64;
    let pts: Vec<(f64, f64)> = d
        .sorted()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let s = 1.0 - (i as f64 + 0.5) / n;
            (y.ln(), (-s.ln()).ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let gamma = if sxx > 0.0 && sxy > 0.0 {
        sxy / sxx
    } else {
        1.0
    };
    let beta = ((my - gamma * mx) / gamma).exp();
    let median = d.sorted()[d.len() / 2];
    if beta.is_finite() && beta > 0.0 {
        (beta, gamma)
    } else {
        (std::f64::consts::LN_2 / median, 1.0)
    }
}

fn default_starts(d: &Dataset, model: &Model) -> Vec<ParamVector> {
    let (beta0, gamma0) = weibull_regression(d);
    if *model == Model::Weibull {
        return vec![ParamVector::new(1.0, beta0, gamma0, 0.0)];
    }
    let median = d.sorted()[d.len() / 2];
    let mut out = Vec::new();
    // (α multiplier, θ as a fraction of s or as an absolute value)
    let plan: [(f64, f64); 5] = [(1.0, 0.5), (3.0, 0.2), (0.3, 0.8), (10.0, 0.5), (1.0, 0.05)];
    for (am, tf) in plan {
        let alpha = am;
        let (theta, g_med) = match model.family() {
            Some(f) => {
                let s = f.support_upper();
                let theta = if s.is_finite() { tf * s } else { 2.0 * tf };
                // G at the median solves C(θG) = C(θ)/2
                let c = f.eval_c(theta, 0).unwrap_or(1.0);
                let g = f.inverse_c(0.5 * c).map(|u| u / theta).unwrap_or(0.5);
                (theta, g.clamp(1e-6, 1.0 - 1e-6))
            }
            None => (0.0, 0.5),
        };
        if model.family().is_none() && out.iter().any(|p: &ParamVector| p.alpha == alpha) {
            continue;
        }
        // place the model median at the sample median
        let t = -(-g_med.powf(1.0 / alpha)).ln_1p();
        let beta = t.powf(1.0 / gamma0) / median;
        let p = ParamVector::new(
            alpha,
            if beta.is_finite() { beta } else { beta0 },
            gamma0,
            theta,
        );
        if model.validate(&model.normalize(p)).is_ok() {
            out.push(model.normalize(p));
        }
    }
    out
}

struct Newton {
    p: ParamVector,
    ll: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn newton(d: &Dataset, model: &Model, start: ParamVector) -> Result<Newton> {
    let idx = model.free_indices();
    let coords: Vec<Coord> = idx.iter().map(|&k| Coord::of(model, k)).collect();
    let mut p = start;
    let mut dv = derivs(model, d, &p);
    if !dv.ll.is_finite() {
        return Err(Error::Fit {
            reason: "log-likelihood is not finite at the starting point".into(),
            last: p.to_array(),
            score: dv.grad,
        });
    }
    let mut trace = vec![dv.ll];
    let m = idx.len();
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let info_ok = DMatrix::from_fn(m, m, |i, j| -dv.hess[idx[i]][idx[j]])
            .cholesky()
            .is_some();
        if sup_norm(&idx, &dv.grad) < SCORE_TOL && info_ok {
            break;
        }
        iterations += 1;
        let x = p.to_array();
        let jac: Vec<(f64, f64)> = idx.iter().zip(&coords).map(|(&k, c)| c.jac(x[k])).collect();
        let g = DVector::from_fn(m, |i, _| jac[i].0 * dv.grad[idx[i]]);
        let mut neg_h =
            DMatrix::from_fn(m, m, |i, j| -jac[i].0 * jac[j].0 * dv.hess[idx[i]][idx[j]]);
        for i in 0..m {
            neg_h[(i, i)] -= jac[i].1 * dv.grad[idx[i]];
        }
        let step = damped_solve(&neg_h, &g).ok_or_else(|| Error::Fit {
            reason: "Newton system could not be solved".into(),
            last: x,
            score: dv.grad,
        })?;
        let step = cap(step, 2.0);
        let slope = g.dot(&step);
        let eta: Vec<f64> = idx
            .iter()
            .zip(&coords)
            .map(|(&k, c)| c.to_eta(x[k]))
            .collect();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut y = x;
            for (i, &k) in idx.iter().enumerate() {
                y[k] = coords[i].from_eta(eta[i] + t * step[i]);
            }
            let q = ParamVector::from_array(y);
            if model.validate(&q).is_ok() {
                let nd = derivs(model, d, &q);
                let sufficient = nd.ll >= dv.ll + 1e-4 * t * slope;
                // near the optimum ℓ changes only at rounding level; accept a
                // full step that shrinks the score instead
                let polish = t == 1.0
                    && nd.ll >= dv.ll - 1e-13 * dv.ll.abs()
                    && sup_norm(&idx, &nd.grad) < sup_norm(&idx, &dv.grad);
                if nd.ll.is_finite() && (sufficient || polish) {
                    accepted = Some((q, nd));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((q, nd)) => {
                p = q;
                dv = nd;
                trace.push(dv.ll);
            }
            // no ascent possible in floating point
            None => break,
        }
    }
    Ok(Newton {
        p,
        ll: dv.ll,
        iterations,
        trace,
    })
}

fn sup_norm(idx: &[usize], g: &[f64; 4]) -> f64 {
    idx.iter().fold(0.0f64, |m, &k| m.max(g[k].abs()))
}

/// Solves `(A + λI) x = b` for the smallest `λ ≥ 0` on a geometric ladder
/// that makes the matrix positive definite.
fn damped_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = (0..a.nrows())
        .fold(0.0f64, |s, i| s.max(a[(i, i)].abs()))
        .max(1e-12);
    let mut lambda = 0.0;
    for _ in 0..40 {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += lambda;
        }
        if let Some(c) = m.cholesky() {
            let x = c.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        lambda = if lambda == 0.0 {
            1e-10 * scale
        } else {
            lambda * 10.0
        };
    }
    None
}

fn cap(v: DVector<f64>, max: f64) -> DVector<f64> {
    let big = v.amax();
    if big > max {
        v * (max / big)
    } else {
        v
    }
}

// ------------------------------------------------------------------ EM

/// Posterior means `E(N | Y = y_i)` of the latent count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentExpectation {
    pub z: Vec<f64>,
}

/// `z_i = 1 + u_i C''(u_i)/C'(u_i)` with `u_i = θ G(y_i)`.
pub fn em_expected_z(
    d: &Dataset,
    p: &ParamVector,
    family: &PowerSeriesFamily,
) -> Result<LatentExpectation> {
    let ewps = p.to_ewps(family)?;
    Ok(LatentExpectation {
        z: d.values()
            .iter()
            .map(|&y| expected_count(&ewps, y))
            .collect(),
    })
}

/// Latent means `z_i` together with the observed log-likelihood, from one
/// pass over `obs` evaluated at the current `(β, γ)`.
fn e_pass(d: &Dataset, ln_y: &[f64], obs: &[Obs], p: &EwpsParams) -> Result<(Vec<f64>, f64)> {
    let norm = p.ln_norm();
    let (alpha, gamma) = (p.alpha(), p.gamma());
    let mut ll = 0.0;
    let mut z = Vec::with_capacity(obs.len());
    for (i, (o, &ly)) in obs.iter().zip(ln_y).enumerate() {
        let u = p.theta * (alpha * o.w).exp();
        let v = norm + gamma * o.lt - ly - o.t + (alpha - 1.0) * o.w + p.family.ln_derivative1(u);
        if !v.is_finite() {
            let y = d.values()[i];
            return Err(Error::Overflow(format!(
                "log density is {v} at observation {i} (y = {y})"
            )));
        }
        ll += v;
        z.push(1.0 + u * p.family.ratio2(u));
    }
    Ok((z, ll))
}

fn expected_count(p: &EwpsParams, y: f64) -> f64 {
    let u = p.theta * p.ew.cdf(y).unwrap_or(0.0);
    1.0 + u * p.family.ratio2(u)
}

/// Solves `θC'(θ)/C(θ) = target` by bisection in the unconstrained
/// coordinate of `θ`; the left side increases from 1 over `(0, s)`.
fn solve_theta(family: &PowerSeriesFamily, target: f64) -> f64 {
    let coord = match family.support_upper() {
        s if s.is_finite() => Coord::Logit(s),
        _ => Coord::Log,
    };
    let (mut lo, mut hi) = (-36.0, 36.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = family.mean_count(coord.from_eta(mid));
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    coord.from_eta(0.5 * (lo + hi))
}

/// EM over the latent count. The M-step maximizes the expected
/// complete-data log-likelihood jointly: `θ` from the count-mean equation,
/// and `(β, γ)` by damped Newton on the surrogate with `α` profiled out
/// through its closed form `α(β, γ) = -n / Σ z_i w_i`. Every M-step
/// increases the surrogate, so the observed-data log-likelihood never
/// decreases.
///
/// Stops when the largest relative parameter change falls below `tol`.
pub fn em_fit(
    d: &Dataset,
    family: &PowerSeriesFamily,
    init: ParamVector,
    max_iter: usize,
    tol: f64,
) -> Result<FitResult> {
    d.require_fit_size()?;
    let model = Model::ewps(family.clone());
    let mut p = init;
    model.validate(&p)?;
    let ln_y: Vec<f64> = d.values().iter().map(|y| y.ln()).collect();
    let mut obs = shape_obs(&ln_y, p.beta, p.gamma);
    let (mut z, ll) = e_pass(d, &ln_y, &obs, &p.to_ewps(family)?)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let zbar = z.iter().sum::<f64>() / d.len() as f64;
        let theta = solve_theta(family, zbar);
        let (alpha, beta, gamma) = m_step_shape(
            &ln_y,
            &z,
            &mut obs,
            p.beta,
            p.gamma,
            (1e-2 * tol).clamp(1e-12, 1e-8),
        );
        let next = ParamVector::new(alpha, beta, gamma, theta);
        if model.validate(&next).is_err() {
            return Err(Error::Fit {
                reason: format!("EM left the parameter space at iteration {iterations}"),
                last: next.to_array(),
                score: [f64::NAN; 4],
            });
        }
        let change = p
            .to_array()
            .iter()
            .zip(next.to_array())
            .fold(0.0f64, |m, (a, b)| m.max((b - a).abs() / a.abs()));
        p = next;
        let (zn, ll) = e_pass(d, &ln_y, &obs, &p.to_ewps(family)?)?;
        z = zn;
        trace.push(ll);
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(finish_fit(
        d,
        &model,
        p,
        iterations,
        trace,
        FitMethod::Em,
        Some(converged),
    ))
}

fn shape_obs(ln_y: &[f64], beta: f64, gamma: f64) -> Vec<Obs> {
    let ln_b = beta.ln();
    ln_y.iter()
        .map(|&ly| Obs::at(ln_b + ly, beta, gamma))
        .collect()
}

/// Value, gradient and Hessian in `(β, γ)` of the profiled surrogate below,
/// with the profiled `α` first.
fn profiled_surrogate(
    ln_y: &[f64],
    z: &[f64],
    obs: &[Obs],
    b: f64,
    g: f64,
) -> (f64, f64, [f64; 2], [[f64; 2]; 2]) {
    let n = ln_y.len() as f64;
    let ln_g = g.ln();
    let mut base = 0.0;
    let mut s = 0.0;
    let mut sd = [0.0; 2];
    let mut sdd = [[0.0; 2]; 2];
    let mut wd = [0.0; 2];
    let mut wdd = [[0.0; 2]; 2];
    let mut bd = [0.0; 2];
    let mut bdd = [[0.0; 2]; 2];
    for ((o, &ly), &zi) in obs.iter().zip(ln_y).zip(z) {
        let [wb, wg, wbb, wbg, wgg] = o.w_derivs();
        base += ln_g + g * o.lt - ly - o.t - o.w;
        s += zi * o.w;
        sd[0] += zi * wb;
        sd[1] += zi * wg;
        sdd[0][0] += zi * wbb;
        sdd[0][1] += zi * wbg;
        sdd[1][1] += zi * wgg;
        wd[0] += wb;
        wd[1] += wg;
        wdd[0][0] += wbb;
        wdd[0][1] += wbg;
        wdd[1][1] += wgg;
        bd[0] += g / b - o.tb;
        bd[1] += 1.0 / g + o.lt - o.tg;
        bdd[0][0] += -g / (b * b) - o.tbb;
        bdd[0][1] += 1.0 / b - o.tbg;
        bdd[1][1] += -1.0 / (g * g) - o.tgg;
    }
    let alpha = -n / s;
    let q = n * alpha.ln() - n + base;
    let gr = [bd[0] + alpha * sd[0] - wd[0], bd[1] + alpha * sd[1] - wd[1]];
    let mut h = [[0.0; 2]; 2];
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        h[i][j] = bdd[i][j] + alpha * sdd[i][j] - wdd[i][j] + alpha * alpha / n * sd[i] * sd[j];
    }
    h[1][0] = h[0][1];
    (alpha, q, gr, h)
}

/// Maximizes `Σ [log α + log γ + γ log β + (γ-1) log y - t + (z α - 1) w]`
/// over `(α, β, γ)`. With `S = Σ z w < 0` the optimal `α` is `-n/S`, which
/// leaves `n log(-n/S) - n + Σ [log γ + γ log β + (γ-1) log y - t - w]` to
/// maximize over `(β, γ)` in log coordinates. Its gradient is the partial
/// gradient at `α(β, γ)`; its Hessian adds `(α²/n) ∇S ∇Sᵀ`.
///
/// `obs` holds the per-observation pieces at `(beta, gamma)` on entry and
/// at the returned point on exit. Newton stops once the next log-scale step
/// is below `step_tol` or below `1e-3` of the first one; the remainder is
/// quadratic in the first step and vanishes at the EM fixed point.
fn m_step_shape(
    ln_y: &[f64],
    z: &[f64],
    obs: &mut Vec<Obs>,
    beta: f64,
    gamma: f64,
    step_tol: f64,
) -> (f64, f64, f64) {
    let n = ln_y.len() as f64;
    let (mut b, mut g) = (beta, gamma);
    let (mut alpha, mut q, mut gr, mut h) = profiled_surrogate(ln_y, z, obs, b, g);
    let mut first = 0.0f64;
    for _ in 0..100 {
        let x = [b, g];
        let ge = DVector::from_fn(2, |i, _| x[i] * gr[i]);
        if ge.amax() < 1e-10 * n {
            break;
        }
        let mut a = DMatrix::from_fn(2, 2, |i, j| -x[i] * x[j] * h[i][j]);
        for i in 0..2 {
            a[(i, i)] -= x[i] * gr[i];
        }
        let Some(step) = damped_solve(&a, &ge) else {
            break;
        };
        if step.amax() < step_tol.max(1e-3 * first) {
            break;
        }
        if first == 0.0 {
            first = step.amax();
        }
        // a gain this small cannot be confirmed by comparing surrogate
        // values, so the full Newton step is taken on trust and ends the loop
        let tiny = ge.dot(&step) < 1e-12 * q.abs();
        let step = cap(step, 1.0);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let (nb, ng) = (b * (t * step[0]).exp(), g * (t * step[1]).exp());
            let trial = shape_obs(ln_y, nb, ng);
            let (na, nq, ngr, nh) = profiled_surrogate(ln_y, z, &trial, nb, ng);
            if nq.is_finite() && na.is_finite() && (nq >= q || tiny) {
                moved = nq > q || t == 1.0;
                b = nb;
                g = ng;
                alpha = na;
                q = nq;
                gr = ngr;
                h = nh;
                *obs = trial;
                break;
            }
            t *= 0.5;
        }
        if !moved || tiny {
            break;
        }
    }
    (alpha, b, g)
}

// -------------------------------------------------- confidence intervals

/// `Θ̂_r ± z_{(1-level)/2} √(Σ̂_rr)` for each component.
pub fn confidence_intervals(fr: &FitResult, level: f64) -> Result<[(f64, f64); 4]> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("confidence level must lie in (0, 1), got {level}"));
    }
    let se = fr
        .std_errors
        .ok_or_else(|| Error::Domain("no covariance available for this fit".into()))?;
    let z = normal_quantile(0.5 + 0.5 * level);
    let est = fr.estimate.to_array();
    Ok(std::array::from_fn(|k| {
        (est[k] - z * se[k], est[k] + z * se[k])
    }))
}
