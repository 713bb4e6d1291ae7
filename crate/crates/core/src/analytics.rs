//! Reliability and shape analytics of an EWPS law: entropies, order
//! statistics, residual and reversed residual life, probability weighted
//! moments, mean deviations and inequality curves.
//!
//! Every quantity is defined by an integral and evaluated by adaptive
//! quadrature. The incomplete-gamma and power-series expansions are kept as
//! independent `*_series` evaluators returning a [`SeriesSum`] with its
//! error bookkeeping, and fail with [`Error::Convergence`] instead of
//! returning an inaccurate value.

use crate::error::{domain, Error, Result};
use crate::ewps::{EwpsParams, MomentMethod};
use crate::power_series::{power_coeffs, PowerSeriesFamily};
use crate::quadrature::{
    integrate, integrate_from_zero, integrate_half_line, integrate_to_infinity, Tolerance,
};
use crate::series::{binomial_series, count_mixture, power_binomial_series, SeriesSum};
use crate::special::{binom, gamma, gamma_p, gamma_q, ln_gamma};

/// Relative accuracy demanded of the series evaluators.
const SERIES_TOL: f64 = 1e-6;

/// The Rényi inner sums decay only like a power of the index.
const RENYI_TOL: f64 = 1e-6;

fn tight() -> Tolerance {
    Tolerance {
        rel: 1e-13,
        abs: 0.0,
        max_intervals: 4000,
    }
}

fn mean(p: &EwpsParams) -> Result<f64> {
    p.moment(1, MomentMethod::Quadrature)
}

/// Length scale of the conditional tail beyond `t`, used to map `[t, ∞)`.
fn tail_scale(p: &EwpsParams, t: f64) -> f64 {
    let med = p.median();
    if t <= 0.0 {
        return med;
    }
    match p.survival_hazard(t) {
        Ok((_, h)) if h > 0.0 && h.is_finite() => (1.0 / h).clamp(1e-3 * med, 1e3 * (med + t)),
        _ => med,
    }
}

fn check_order(r: u32, n: u32) -> Result<()> {
    if r == 0 || r > n {
        return domain(format!(
            "order statistic needs 1 <= r <= n, got r = {r}, n = {n}"
        ));
    }
    Ok(())
}

fn finish(value: f64, err: f64, abs_sum: f64, terms: usize, what: &str) -> Result<SeriesSum> {
    finish_at(value, err, abs_sum, terms, what, SERIES_TOL)
}

fn finish_at(
    value: f64,
    err: f64,
    abs_sum: f64,
    terms: usize,
    what: &str,
    tol: f64,
) -> Result<SeriesSum> {
    let out = SeriesSum {
        value,
        terms,
        tail: err,
        noise: f64::EPSILON * abs_sum,
    };
    if !value.is_finite() || out.rel_error() > tol {
        return Err(Error::Convergence {
            what: format!("{what}: error estimate {:e} relative", out.rel_error()),
            iterations: terms,
            last_term: value,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- entropy

/// Rényi entropy `(1 - r)^{-1} log ∫ f^r`.
pub fn renyi_entropy(p: &EwpsParams, r: f64) -> Result<f64> {
    p.validate()?;
    check_renyi(p, r)?;
    let est = integrate_half_line(
        |y| (r * p.ln_pdf_unchecked(y)).exp(),
        p.median(),
        Tolerance::default(),
    )?;
    Ok(est.value.ln() / (1.0 - r))
}

fn check_renyi(p: &EwpsParams, r: f64) -> Result<()> {
    if !(r > 0.0) || r == 1.0 || !r.is_finite() {
        return domain(format!(
            "Renyi order must be positive and different from 1, got {r}"
        ));
    }
    if r * (p.alpha() * p.gamma() - 1.0) <= -1.0 {
        return Err(Error::Integrability(format!(
            "f^r is not integrable at the origin for r = {r} and alpha*gamma = {}",
            p.alpha() * p.gamma()
        )));
    }
    Ok(())
}

/// Rényi entropy from the expansion of `[C'(θG)]^r` in powers of `θG`,
/// with each power of `G` integrated term by term.
pub fn renyi_entropy_series(p: &EwpsParams, r: f64) -> Result<SeriesSum> {
    p.validate()?;
    check_renyi(p, r)?;
    let (a, b, c) = (p.alpha(), p.beta(), p.gamma());
    let theta = p.theta;
    let i_max = match (&p.family, r.fract() == 0.0) {
        (PowerSeriesFamily::Binomial { m }, true) => (*m as usize - 1) * r as usize,
        (PowerSeriesFamily::Polynomial { coeffs }, true) => (coeffs.len() - 1) * r as usize,
        _ => 2000,
    };
    // C'(u) = Σ_i (i+1) a_{i+1} u^i
    let w: Vec<f64> = (0..=i_max as u64)
        .map(|i| (i + 1) as f64 * p.family.coeff(i + 1))
        .collect();
    let cs = power_coeffs(&w, r, i_max)?;
    let sp = (r * (c - 1.0) + 1.0) / c;
    let bound = r.powf(-sp);
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut abs_sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut quiet = 0;
    let mut terms = 0;
    for (i, &ci) in cs.iter().enumerate() {
        terms = i + 1;
        let weight = ci * theta.powi(i as i32);
        if weight == 0.0 {
            continue;
        }
        let x = a * (r + i as f64) - r;
        let inner = power_binomial_series(x, r, sp, 0.1 * RENYI_TOL)?;
        let term = weight * inner.value;
        sum += term;
        abs_sum += term.abs();
        err += weight.abs() * inner.error();
        if err > RENYI_TOL * sum.abs() && i >= 2 {
            return Err(Error::Convergence {
                what: format!("Renyi series: inner sum for power {i} lost precision"),
                iterations: terms,
                last_term: term,
            });
        }
        // for x >= 0 the inner sum is ∫ u^{s'-1} e^{-ru} (1-e^{-u})^x du / Γ(s') <= r^{-s'}
        let rho = weight.abs() / prev;
        if x >= 0.0
            && rho < 1.0
            && weight.abs() * rho / (1.0 - rho) * bound <= 1e-3 * RENYI_TOL * sum.abs()
        {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
        prev = weight.abs();
        if i == i_max && i_max == 2000 {
            return Err(Error::Convergence {
                what: "Renyi series over powers of theta".into(),
                iterations: terms,
                last_term: term,
            });
        }
    }
    // K^r β^{-r(γ-1)-1} Γ(s') / γ with K = αθγβ^γ / C(θ)
    let ln_pref =
        r * (a * theta * c / p.family.eval_c(theta, 0)?).ln() + (r - 1.0) * b.ln() + ln_gamma(sp)
            - c.ln();
    let pref = ln_pref.exp();
    let integral = finish_at(
        pref * sum,
        pref * err,
        pref * abs_sum,
        terms,
        "Renyi series",
        RENYI_TOL,
    )?;
    let value = integral.value.ln() / (1.0 - r);
    Ok(SeriesSum {
        value,
        terms: integral.terms,
        tail: integral.tail / (integral.value * (1.0 - r).abs()),
        noise: integral.noise / (integral.value * (1.0 - r).abs()),
    })
}

/// Shannon entropy `E[-log f(Y)]`.
pub fn shannon_entropy(p: &EwpsParams) -> Result<f64> {
    p.validate()?;
    let est = integrate_half_line(
        |y| {
            let lf = p.ln_pdf_unchecked(y);
            if lf == f64::NEG_INFINITY {
                0.0
            } else {
                -lf * lf.exp()
            }
        },
        p.median(),
        Tolerance::default(),
    )?;
    Ok(est.value)
}

// ------------------------------------------------------- order statistics

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `(f_{r:n}(y), F_{r:n}(y))` for the `r`-th smallest of `n` draws.
pub fn order_stat_dist(p: &EwpsParams, r: u32, n: u32, y: f64) -> Result<(f64, f64)> {
    p.validate()?;
    check_order(r, n)?;
    if !(y > 0.0) || !y.is_finite() {
        return domain(format!("order statistic needs finite y > 0, got {y}"));
    }
    Ok((order_pdf(p, r, n, y), order_cdf(p, r, n, y)))
}

fn order_pdf(p: &EwpsParams, r: u32, n: u32, y: f64) -> f64 {
    let (rf, nf) = (r as f64, n as f64);
    let lf = p.ln_pdf_unchecked(y);
    let lcdf = p.cdf_unchecked(y).ln();
    let lsurv = p.survival_unchecked(y).ln();
    let mut ln = lf - ln_beta(rf, nf - rf + 1.0);
    if r > 1 {
        ln += (rf - 1.0) * lcdf;
    }
    if n > r {
        ln += (nf - rf) * lsurv;
    }
    ln.exp()
}

fn order_cdf(p: &EwpsParams, r: u32, n: u32, y: f64) -> f64 {
    let f = p.cdf_unchecked(y);
    let s = p.survival_unchecked(y);
    if f <= 0.0 {
        return 0.0;
    }
    let (lf, ls) = (f.ln(), s.ln());
    (r..=n)
        .map(|k| {
            let mut ln = binom(n as u64, k as u64).ln() + k as f64 * lf;
            if n > k {
                ln += (n - k) as f64 * ls;
            }
            ln.exp()
        })
        .sum::<f64>()
        .min(1.0)
}

/// `E(Y_{r:n}^k)` by quadrature of `y^k f_{r:n}(y)`.
pub fn order_stat_moment(p: &EwpsParams, r: u32, n: u32, k: u32) -> Result<f64> {
    p.validate()?;
    check_order(r, n)?;
    if k == 0 {
        return domain("moment order must be at least 1");
    }
    let pivot = p.quantile_unchecked(r as f64 / (n as f64 + 1.0));
    let est = integrate_half_line(
        |y| y.powi(k as i32) * order_pdf(p, r, n, y),
        pivot,
        Tolerance::default(),
    )?;
    Ok(est.value)
}

/// `E(Y_{r:n}^k) = k Σ_{j=n-r+1}^{n} (-1)^{j-n+r-1} C(j-1, n-r) C(n, j) ∫ y^{k-1} S(y)^j dy`,
/// the survival-power representation.
pub fn order_stat_moment_series(p: &EwpsParams, r: u32, n: u32, k: u32) -> Result<SeriesSum> {
    p.validate()?;
    check_order(r, n)?;
    if k == 0 {
        return domain("moment order must be at least 1");
    }
    let pivot = p.median();
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut abs_sum = 0.0;
    for j in (n - r + 1)..=n {
        let sign = if (j + r - n - 1).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let coef = k as f64 * binom((j - 1) as u64, (n - r) as u64) * binom(n as u64, j as u64);
        let est = integrate_half_line(
            |y| y.powi(k as i32 - 1) * p.survival_unchecked(y).powi(j as i32),
            pivot,
            Tolerance::default(),
        )?;
        sum += sign * coef * est.value;
        abs_sum += coef * est.value.abs();
        err += coef * est.abs_error;
    }
    finish(
        sum,
        err,
        abs_sum,
        r as usize,
        "order-statistic survival-power sum",
    )
}

// ----------------------------------------------------- partial moments

/// `∫_b^∞ y^k f(y) dy`.
pub fn upper_partial_moment(p: &EwpsParams, b: f64, k: u32) -> Result<f64> {
    p.validate()?;
    if !(b >= 0.0) {
        return domain(format!("partial moment needs b >= 0, got {b}"));
    }
    if b == 0.0 {
        return Ok(p.expect(|y| y.powi(k as i32), Tolerance::default())?.value);
    }
    let scale = tail_scale(p, b);
    let s = p.survival_unchecked(b);
    let tol = Tolerance {
        abs: 1e-16 * s * b.powi(k as i32),
        ..tight()
    };
    Ok(integrate_to_infinity(|y| y.powi(k as i32) * p.pdf_unchecked(y), b, scale, tol)?.value)
}

/// Upper partial moment from the incomplete-gamma expansion
/// `β^{-k} Γ(s) Σ_n P(N=n) nα Σ_j (-1)^j C(nα-1, j) (j+1)^{-s} Q(s, (j+1)(βb)^γ)`
/// with `s = k/γ + 1` and `Q` the regularized upper incomplete gamma.
pub fn upper_partial_moment_series(p: &EwpsParams, b: f64, k: u32) -> Result<SeriesSum> {
    p.validate()?;
    if !(b >= 0.0) {
        return domain(format!("partial moment needs b >= 0, got {b}"));
    }
    let s = k as f64 / p.gamma() + 1.0;
    let tau = (p.beta() * b).powf(p.gamma());
    let sum = p.binomial_mixture(
        |j| {
            let jp = j as f64 + 1.0;
            jp.powf(-s) * gamma_q(s, jp * tau)
        },
        SERIES_TOL,
        "upper partial moment series",
    )?;
    Ok(scale_sum(sum, p.beta().powi(-(k as i32)) * gamma(s)))
}

/// Lower partial moment `∫_0^b y^k f(y) dy` by the same expansion with the
/// lower incomplete gamma.
pub fn lower_partial_moment_series(p: &EwpsParams, b: f64, k: u32) -> Result<SeriesSum> {
    p.validate()?;
    if !(b > 0.0) {
        return domain(format!("lower partial moment needs b > 0, got {b}"));
    }
    let s = k as f64 / p.gamma() + 1.0;
    let tau = (p.beta() * b).powf(p.gamma());
    let sum = p.binomial_mixture(
        |j| {
            let jp = j as f64 + 1.0;
            jp.powf(-s) * gamma_p(s, jp * tau)
        },
        SERIES_TOL,
        "lower partial moment series",
    )?;
    Ok(scale_sum(sum, p.beta().powi(-(k as i32)) * gamma(s)))
}

fn scale_sum(s: SeriesSum, k: f64) -> SeriesSum {
    SeriesSum {
        value: s.value * k,
        terms: s.terms,
        tail: s.tail * k.abs(),
        noise: s.noise * k.abs(),
    }
}

// ---------------------------------------------------------- residual life

/// `m_r(t) = E[(Y - t)^r | Y > t]`.
pub fn residual_moment(p: &EwpsParams, t: f64, r: u32) -> Result<f64> {
    p.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("residual life needs finite t >= 0, got {t}"));
    }
    if r == 0 {
        return domain("residual moment order must be at least 1");
    }
    let s = p.survival_unchecked(t);
    if s <= 0.0 {
        return Err(Error::Overflow(format!("survival underflows at t = {t}")));
    }
    let ri = r as i32;
    let est = if t == 0.0 {
        p.expect(|y| y.powi(ri), tight())?
    } else {
        let tol = Tolerance {
            abs: 1e-17 * s,
            ..tight()
        };
        integrate_to_infinity(
            |y| (y - t).powi(ri) * p.pdf_unchecked(y),
            t,
            tail_scale(p, t),
            tol,
        )?
    };
    Ok(est.value / s)
}

/// `m_r(t) = S(t)^{-1} Σ_i C(r, i) (-t)^i ∫_t^∞ y^{r-i} f(y) dy` with every
/// partial moment, `S(t)` included, from the incomplete-gamma series.
pub fn residual_moment_series(p: &EwpsParams, t: f64, r: u32) -> Result<SeriesSum> {
    p.validate()?;
    if !(t >= 0.0) || !t.is_finite() || r == 0 {
        return domain(format!(
            "residual series needs t >= 0 and r >= 1, got t = {t}, r = {r}"
        ));
    }
    let surv = upper_partial_moment_series(p, t, 0)?;
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut abs_sum = 0.0;
    for i in 0..=r {
        let part = upper_partial_moment_series(p, t, r - i)?;
        let coef = binom(r as u64, i as u64) * (-t).powi(i as i32);
        sum += coef * part.value;
        err += coef.abs() * part.error();
        abs_sum += (coef * part.value).abs();
    }
    let value = sum / surv.value;
    let err = err / surv.value + value.abs() * surv.rel_error();
    finish(
        value,
        err,
        abs_sum / surv.value,
        r as usize + 1,
        "residual moment series",
    )
}

/// `I(t) = ∫_0^t F(y) dy`.
pub fn integrated_cdf(p: &EwpsParams, t: f64) -> Result<f64> {
    p.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("integrated cdf needs finite t >= 0, got {t}"));
    }
    Ok(integrate_from_zero(|y| p.cdf_unchecked(y), t, tight())?.value)
}

/// `I(t) = Σ_n P(N=n) Σ_k (-1)^k C(nα, k) h_k` with `h_0 = t` and
/// `h_k = Ψ(1/γ; k(βt)^γ) / (βγ k^{1/γ})`.
pub fn integrated_cdf_series(p: &EwpsParams, t: f64) -> Result<SeriesSum> {
    p.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("integrated cdf needs finite t >= 0, got {t}"));
    }
    let (a, b, c) = (p.alpha(), p.beta(), p.gamma());
    let tau = (b * t).powf(c);
    let g = gamma(1.0 / c);
    let h = |k: u64| {
        if k == 0 {
            t
        } else {
            let kf = k as f64;
            g * gamma_p(1.0 / c, kf * tau) / (b * c * kf.powf(1.0 / c))
        }
    };
    count_mixture(
        &p.family,
        p.theta,
        |n| binomial_series(n as f64 * a, h, 1e-3 * SERIES_TOL),
        SERIES_TOL,
        "integrated cdf series",
    )
}

/// Mean residual life `m(t) = (μ + I(t) - t) / S(t)`.
pub fn mean_residual_life(p: &EwpsParams, t: f64) -> Result<f64> {
    p.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("mean residual life needs finite t >= 0, got {t}"));
    }
    let s = p.survival_unchecked(t);
    if s <= 0.0 {
        return Err(Error::Overflow(format!("survival underflows at t = {t}")));
    }
    let mu = p.expect(|y| y, tight())?.value;
    if t == 0.0 {
        return Ok(mu);
    }
    Ok((mu + integrated_cdf(p, t)? - t) / s)
}

/// Mean residual life with `μ`, `I(t)` and `S(t)` all taken from their
/// series forms.
pub fn mean_residual_life_series(p: &EwpsParams, t: f64) -> Result<SeriesSum> {
    let mu = upper_partial_moment_series(p, 0.0, 1)?;
    let i = integrated_cdf_series(p, t)?;
    let s = upper_partial_moment_series(p, t, 0)?;
    let num = mu.value + i.value - t;
    let value = num / s.value;
    let err = (mu.error() + i.error()) / s.value + value.abs() * s.rel_error();
    finish(
        value,
        err,
        (mu.value + i.value + t) / s.value,
        mu.terms + i.terms,
        "mean residual life series",
    )
}

// ------------------------------------------------- reversed residual life

/// Smallest `F(t)` for which the reversed residual life is evaluated.
pub const MIN_REVERSED_MASS: f64 = 1e-9;

/// `M_r(t) = E[(t - Y)^r | Y <= t]`.
pub fn reversed_residual_moment(p: &EwpsParams, t: f64, r: u32) -> Result<f64> {
    p.validate()?;
    let f = check_reversed(p, t, r)?;
    let ri = r as i32;
    let tol = Tolerance {
        abs: 1e-17 * f * t.powi(ri),
        ..tight()
    };
    let est = if t.is_infinite() {
        return Ok(f64::INFINITY);
    } else {
        integrate_from_zero(|y| (t - y).powi(ri) * p.pdf_unchecked(y), t, tol)?
    };
    Ok(est.value / f)
}

fn check_reversed(p: &EwpsParams, t: f64, r: u32) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("reversed residual life needs t > 0, got {t}"));
    }
    if r == 0 {
        return domain("reversed residual moment order must be at least 1");
    }
    let f = p.cdf_unchecked(t);
    if f < MIN_REVERSED_MASS {
        return domain(format!("F({t}) = {f:e} is below {MIN_REVERSED_MASS:e}; the conditioning event is numerically empty"));
    }
    Ok(f)
}

/// `M_r(t) = F(t)^{-1} Σ_i C(r, i) t^{r-i} (-1)^i ∫_0^t y^i f(y) dy` with
/// the lower partial moments (`i >= 1`) from the incomplete-gamma series;
/// the `i = 0` term is `F(t)` itself.
pub fn reversed_residual_moment_series(p: &EwpsParams, t: f64, r: u32) -> Result<SeriesSum> {
    p.validate()?;
    let mass = check_reversed(p, t, r)?;
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut abs_sum = 0.0;
    for i in 0..=r {
        let part = if i == 0 {
            SeriesSum {
                value: mass,
                terms: 0,
                tail: 0.0,
                noise: f64::EPSILON * mass,
            }
        } else {
            lower_partial_moment_series(p, t, i)?
        };
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let coef = binom(r as u64, i as u64) * t.powi((r - i) as i32);
        sum += sign * coef * part.value;
        err += coef * part.error();
        abs_sum += (coef * part.value).abs();
    }
    let value = sum / mass;
    finish(
        value,
        err / mass,
        abs_sum / mass,
        r as usize + 1,
        "reversed residual series",
    )
}

// ------------------------------------------ probability weighted moments

/// `τ_{s,r} = E[Y^s F(Y)^r]`.
pub fn pwm(p: &EwpsParams, s: u32, r: u32) -> Result<f64> {
    p.validate()?;
    if s == 0 {
        return domain("probability weighted moment needs s >= 1");
    }
    let est = p.expect(
        |y| y.powi(s as i32) * p.cdf_unchecked(y).powi(r as i32),
        Tolerance::default(),
    )?;
    Ok(est.value)
}

/// `τ_{s,r} = αβ^{-s} Γ(1+s/γ) C(θ)^{-r-1} Σ_q θ^{q+1+r} D_q S((q+1+r)α - 1, 1+s/γ)`
/// where `D_q = Σ_{n=1}^{q+1} n a_n c_{q+1-n}`, `c` are the coefficients of
/// `(C(u)/u)^r` and `S(x, s) = Σ_j (-1)^j C(x, j)(j+1)^{-s}`.
///
/// The truncation error is bounded by the exact total weight
/// `Σ_q θ^{q+1+r} D_q = θC'(θ)C(θ)^r` minus the part already summed, since
/// `0 < S <= 1` once `x >= 0`. Summation stops early once `S` is no larger
/// than its own rounding noise.
pub fn pwm_series(p: &EwpsParams, s: u32, r: u32) -> Result<SeriesSum> {
    p.validate()?;
    if s == 0 {
        return domain("probability weighted moment needs s >= 1");
    }
    let (a, b, c) = (p.alpha(), p.beta(), p.gamma());
    let theta = p.theta;
    let sx = 1.0 + s as f64 / c;
    let q_max = match p.family.max_count() {
        Some(m) => (m as usize - 1) * (r as usize + 1),
        None => 3000,
    };
    let w: Vec<f64> = (0..=q_max as u64).map(|i| p.family.coeff(i + 1)).collect();
    let cs = power_coeffs(&w, r as f64, q_max)?;
    let total = theta * p.family.eval_c(theta, 1)? * p.family.eval_c(theta, 0)?.powi(r as i32);
    let mut weight_sum = 0.0;
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut abs_sum = 0.0;
    let mut tail = f64::INFINITY;
    let mut terms = 0;
    for q in 0..=q_max {
        terms = q + 1;
        let d: f64 = (1..=q + 1)
            .map(|n| n as f64 * p.family.coeff(n as u64) * cs[q + 1 - n])
            .sum();
        let weight = theta.powi((q + 1 + r as usize) as i32) * d;
        if weight == 0.0 {
            continue;
        }
        let x = (q + 1 + r as usize) as f64 * a - 1.0;
        let infinite = p.family.max_count().is_none();
        let inner = match power_binomial_series(x, 1.0, sx, 1e-3 * SERIES_TOL) {
            Ok(v) => v,
            Err(_) if infinite && x >= 0.0 && tail.is_finite() => break,
            Err(e) => return Err(e),
        };
        // past this point the inner sums are rounding noise
        if infinite && x >= 0.0 && tail.is_finite() && inner.error() >= inner.value.abs() {
            break;
        }
        weight_sum += weight;
        sum += weight * inner.value;
        abs_sum += (weight * inner.value).abs();
        err += weight.abs() * inner.error();
        tail = (total - weight_sum).max(0.0);
        if x >= 0.0 && tail <= 1e-13 * sum.abs() {
            break;
        }
    }
    if p.family.max_count().is_some() {
        tail = 0.0;
    }
    let pref = a * b.powi(-(s as i32)) * gamma(sx) / p.family.eval_c(theta, 0)?.powi(r as i32 + 1);
    finish(
        pref * sum,
        pref * (err + tail),
        pref * abs_sum,
        terms,
        "PWM series",
    )
}

// --------------------------------------------------------- mean deviations

/// `(δ1, δ2)`: mean absolute deviations about the mean and the median.
pub fn mean_deviations(p: &EwpsParams) -> Result<(f64, f64)> {
    p.validate()?;
    let mu = mean(p)?;
    let med = p.median();
    let d1 = 2.0 * mu * p.cdf_unchecked(mu) - 2.0 * mu + 2.0 * upper_partial_moment(p, mu, 1)?;
    let d2 = 2.0 * upper_partial_moment(p, med, 1)? - mu;
    Ok((d1, d2))
}

/// Mean deviations with `μ` and `L(b) = ∫_b^∞ y f` from the series forms.
pub fn mean_deviations_series(p: &EwpsParams) -> Result<(SeriesSum, SeriesSum)> {
    p.validate()?;
    let mu = upper_partial_moment_series(p, 0.0, 1)?;
    let med = p.median();
    let lm = upper_partial_moment_series(p, mu.value, 1)?;
    let lmed = upper_partial_moment_series(p, med, 1)?;
    let m = mu.value;
    let d1 = 2.0 * m * p.cdf_unchecked(m) - 2.0 * m + 2.0 * lm.value;
    let d2 = 2.0 * lmed.value - m;
    let d1 = finish(
        d1,
        4.0 * mu.error() + 2.0 * lm.error(),
        4.0 * m + 2.0 * lm.value,
        mu.terms,
        "mean deviation series",
    )?;
    let d2 = finish(
        d2,
        mu.error() + 2.0 * lmed.error(),
        m + 2.0 * lmed.value,
        mu.terms,
        "mean deviation series",
    )?;
    Ok((d1, d2))
}

// ------------------------------------------------------ inequality curves

/// Bonferroni, Lorenz and scaled total-time-on-test curves at one point,
/// together with the Gini index of the law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityPoint {
    pub bonferroni: f64,
    pub lorenz: f64,
    pub ttt: f64,
    pub gini: f64,
}

/// Evaluates the inequality curves at many points while computing the mean
/// and Gini index once.
#[derive(Debug, Clone)]
pub struct InequalityCurves<'a> {
    p: &'a EwpsParams,
    mu: f64,
    gini: f64,
}

impl<'a> InequalityCurves<'a> {
    pub fn new(p: &'a EwpsParams) -> Result<Self> {
        p.validate()?;
        let mu = mean(p)?;
        Ok(Self {
            p,
            mu,
            gini: gini(p)?,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    pub fn gini(&self) -> f64 {
        self.gini
    }

    /// `x = ∞` is accepted and gives the limiting values.
    pub fn at(&self, x: f64) -> Result<InequalityPoint> {
        if !(x > 0.0) {
            return domain(format!("inequality curves need x > 0, got {x}"));
        }
        let p = self.p;
        let fx = if x.is_infinite() {
            1.0
        } else {
            p.cdf_unchecked(x)
        };
        if fx <= 0.0 {
            return domain(format!("F({x}) = 0, the Bonferroni curve is undefined"));
        }
        let tol = Tolerance::default();
        let (partial, area) = if x.is_infinite() {
            (
                integrate_half_line(|u| u * p.pdf_unchecked(u), p.median(), tol)?.value,
                integrate_half_line(|u| p.survival_unchecked(u), p.median(), tol)?.value,
            )
        } else {
            (
                integrate_from_zero(|u| u * p.pdf_unchecked(u), x, tol)?.value,
                integrate_from_zero(|u| p.survival_unchecked(u), x, tol)?.value,
            )
        };
        let lorenz = partial / self.mu;
        Ok(InequalityPoint {
            bonferroni: lorenz / fx,
            lorenz,
            ttt: area / self.mu,
            gini: self.gini,
        })
    }
}

/// Bonferroni, Lorenz and TTT curves at `x` plus the Gini index.
pub fn inequality_curves(p: &EwpsParams, x: f64) -> Result<InequalityPoint> {
    InequalityCurves::new(p)?.at(x)
}

/// Gini index `1 - ∫ S_F[F(t)] f(t) dt` with `S_F[F(t)] = μ^{-1} ∫_0^t S`,
/// by nested quadrature (outer relative tolerance `1e-6`).
pub fn gini(p: &EwpsParams) -> Result<f64> {
    p.validate()?;
    let mu = mean(p)?;
    let inner_tol = Tolerance::rel(1e-10);
    let mut failure = None;
    let outer = integrate_half_line(
        |t| {
            let f = p.pdf_unchecked(t);
            if f == 0.0 {
                return 0.0;
            }
            match integrate(|u| p.survival_unchecked(u), 0.0, t, inner_tol) {
                Ok(e) => f * e.value / mu,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        p.median(),
        Tolerance::rel(1e-6),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(1.0 - outer.value)
}

/// Gini index from the single integral `1 - μ^{-1} ∫ S(y)^2 dy`.
pub fn gini_fubini(p: &EwpsParams) -> Result<f64> {
    p.validate()?;
    let mu = mean(p)?;
    let est = integrate_half_line(
        |y| p.survival_unchecked(y).powi(2),
        p.median(),
        Tolerance::default(),
    )?;
    Ok(1.0 - est.value / mu)
}
