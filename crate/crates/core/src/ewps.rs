//! The EWPS law: the maximum of `N` independent EW lifetimes with `N`
//! drawn from a zero-truncated power-series law, `F(y) = C(θG(y)) / C(θ)`.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ew::EwParams;
use crate::power_series::PowerSeriesFamily;
use crate::quadrature::{integrate_half_line, Estimate, Tolerance};
use crate::series::{binomial_series, count_mixture, power_binomial_series, SeriesSum};
use crate::special::gamma;

/// Full parameter set `(α, β, γ, θ)` with its compounding family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwpsParams {
    pub ew: EwParams,
    pub family: PowerSeriesFamily,
    pub theta: f64,
}

/// The EW cdf value `G(y)` at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTransform {
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Quantile transform of uniforms.
    Inverse,
    /// Draw `N`, then return the maximum of `N` EW draws.
    Compound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    Series,
    Quadrature,
}

/// Per-point quantities shared by cdf, pdf and survival.
struct Point {
    /// `ln G(y)`.
    ln_g: f64,
    /// `θ G(y)`.
    u: f64,
}

impl EwpsParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        theta: f64,
        family: PowerSeriesFamily,
    ) -> Result<Self> {
        let p = Self {
            ew: EwParams { alpha, beta, gamma },
            family,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.ew.validate()?;
        if !self.family.contains(self.theta) {
            return domain(format!(
                "theta = {} outside (0, {}) for the {} family",
                self.theta,
                self.family.support_upper(),
                self.family.name()
            ));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.ew.alpha
    }
    pub fn beta(&self) -> f64 {
        self.ew.beta
    }
    pub fn gamma(&self) -> f64 {
        self.ew.gamma
    }

    /// The same law with `β` replaced.
    pub fn with_beta(&self, beta: f64) -> Self {
        let mut p = self.clone();
        p.ew.beta = beta;
        p
    }

    #[inline]
    fn point(&self, y: f64) -> Point {
        let ln_g = self.ew.ln_g(y);
        Point {
            ln_g,
            u: self.theta * ln_g.exp(),
        }
    }

    pub fn g_transform(&self, y: f64) -> Result<GTransform> {
        Ok(GTransform { g: self.ew.cdf(y)? })
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        if y < 0.0 || y.is_nan() {
            return domain(format!("cdf argument {y} must be nonnegative"));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        Ok(self.cdf_unchecked(y))
    }

    pub(crate) fn cdf_unchecked(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let pt = self.point(y);
        if pt.u <= 0.0 {
            return 0.0;
        }
        (self.family.ln_c(pt.u) - self.family.ln_c(self.theta))
            .exp()
            .min(1.0)
    }

    /// `1 - F(y)`, computed from `C(θ) - C(θG)` so the upper tail keeps its
    /// relative accuracy.
    pub fn survival(&self, y: f64) -> Result<f64> {
        if y < 0.0 || y.is_nan() {
            return domain(format!("survival argument {y} must be nonnegative"));
        }
        if y == 0.0 {
            return Ok(1.0);
        }
        Ok(self.survival_unchecked(y))
    }

    pub(crate) fn survival_unchecked(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        let pt = self.point(y);
        let delta = -self.theta * pt.ln_g.exp_m1();
        let c_theta = self.family.derivative(self.theta, 0);
        (self.family.c_diff(self.theta, pt.u, delta) / c_theta).clamp(0.0, 1.0)
    }

    pub fn pdf(&self, y: f64) -> Result<f64> {
        Ok(self.ln_pdf(y)?.exp())
    }

    pub fn ln_pdf(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return domain(format!("density argument {y} must be positive"));
        }
        if y.is_infinite() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.ln_pdf_unchecked(y))
    }

    pub(crate) fn ln_pdf_unchecked(&self, y: f64) -> f64 {
        self.ln_norm() + self.ln_pdf_kernel(y)
    }

    /// The part of `ln f` free of `y`.
    pub(crate) fn ln_norm(&self) -> f64 {
        self.theta.ln() + self.ew.ln_norm() - self.family.ln_c(self.theta)
    }

    /// `ln f(y)` minus [`Self::ln_norm`].
    #[inline]
    pub(crate) fn ln_pdf_kernel(&self, y: f64) -> f64 {
        let (k, w) = self.ew.ln_pdf_kernel(y);
        k + self
            .family
            .ln_derivative1(self.theta * (self.alpha() * w).exp())
    }

    pub(crate) fn pdf_unchecked(&self, y: f64) -> f64 {
        if y <= 0.0 || y.is_infinite() {
            return 0.0;
        }
        self.ln_pdf_unchecked(y).exp()
    }

    /// `(S(y), h(y))`.
    pub fn survival_hazard(&self, y: f64) -> Result<(f64, f64)> {
        let s = self.survival(y)?;
        if s <= 0.0 {
            return Err(Error::Overflow(format!("survival underflows at y = {y}")));
        }
        let f = self.pdf(y)?;
        Ok((s, f / s))
    }

    /// `G^{-1}(C^{-1}(q C(θ)) / θ)`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return domain(format!("quantile level {q} outside (0, 1)"));
        }
        Ok(self.quantile_unchecked(q))
    }

    pub(crate) fn quantile_unchecked(&self, q: f64) -> f64 {
        let target = q * self.family.derivative(self.theta, 0);
        let inner = self.family.inverse_unchecked(target);
        let ln_g = (inner.ln() - self.theta.ln()).min(-f64::EPSILON * 0.5);
        self.ew.quantile_from_ln(ln_g)
    }

    pub fn median(&self) -> f64 {
        self.quantile_unchecked(0.5)
    }

    /// Distribution of the minimum of `N` EW draws,
    /// `1 - C(θ(1 - G(y))) / C(θ)`.
    pub fn cdf_min(&self, y: f64) -> Result<f64> {
        if y < 0.0 || y.is_nan() {
            return domain(format!("cdf argument {y} must be nonnegative"));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let g = self.ew.ln_g(y).exp();
        let sg = -self.ew.ln_g(y).exp_m1();
        let c_theta = self.family.derivative(self.theta, 0);
        Ok((self
            .family
            .c_diff(self.theta, self.theta * sg, self.theta * g)
            / c_theta)
            .clamp(0.0, 1.0))
    }

    /// `Σ_{n=1}^{n_max} P(N = n) g(y; nα, β, γ)`, the EW mixture form of the
    /// density; each component is the density of the largest of `n` EW
    /// draws.
    pub fn mixture_pdf(&self, y: f64, n_max: u64) -> Result<f64> {
        if n_max == 0 {
            return domain("mixture needs at least one component");
        }
        if !(y > 0.0) {
            return domain(format!("density argument {y} must be positive"));
        }
        let upper = self.family.max_count().map_or(n_max, |m| m.min(n_max));
        let mut acc = 0.0;
        for n in 1..=upper {
            let w = self.family.pmf_unchecked(self.theta, n);
            if w == 0.0 {
                continue;
            }
            let comp = EwParams {
                alpha: n as f64 * self.ew.alpha,
                ..self.ew
            };
            acc += w * comp.ln_pdf_unchecked(y).exp();
        }
        Ok(acc)
    }

    /// Draw the latent count `N` by inversion of its pmf.
    pub fn sample_count<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.sample(Open01);
        let max = self.family.max_count().unwrap_or(u64::MAX);
        let mut cum = 0.0;
        let mut n = 0;
        while n < max {
            n += 1;
            cum += self.family.pmf_unchecked(self.theta, n);
            if cum >= u {
                return n;
            }
            if n > 10_000_000 {
                break;
            }
        }
        n
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R, sampler: Sampler) -> f64 {
        match sampler {
            Sampler::Inverse => {
                let u: f64 = rng.sample(Open01);
                self.quantile_unchecked(u)
            }
            Sampler::Compound => {
                let n = self.sample_count(rng);
                (0..n).map(|_| self.ew.sample_one(rng)).fold(0.0, f64::max)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, sampler: Sampler) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng, sampler)).collect()
    }

    /// Minimum of `N` EW draws, the law described by [`Self::cdf_min`].
    pub fn sample_min_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = self.sample_count(rng);
        (0..n)
            .map(|_| self.ew.sample_one(rng))
            .fold(f64::INFINITY, f64::min)
    }

    /// `∫_0^∞ h(y) f(y) dy` by adaptive quadrature split at the median.
    pub fn expect<H: FnMut(f64) -> f64>(&self, mut h: H, tol: Tolerance) -> Result<Estimate> {
        integrate_half_line(|y| h(y) * self.pdf_unchecked(y), self.median(), tol)
    }

    pub fn moment(&self, k: u32, method: MomentMethod) -> Result<f64> {
        if k == 0 {
            return domain("moment order must be at least 1");
        }
        match method {
            MomentMethod::Quadrature => Ok(self
                .expect(|y| y.powi(k as i32), Tolerance::default())?
                .value),
            MomentMethod::Series => self.moment_series(k),
        }
    }

    /// `E(Y^k) = Σ_n P(N = n) nα β^{-k} Γ(k/γ+1) Σ_j (-1)^j C(nα-1, j) (j+1)^{-(k/γ+1)}`.
    ///
    /// The inner sums lose precision to cancellation as `nα` grows even in
    /// double-double arithmetic; the evaluation fails with a convergence
    /// error once the accumulated error exceeds `1e-7` of the result.
    pub fn moment_series(&self, k: u32) -> Result<f64> {
        let s = k as f64 / self.gamma() + 1.0;
        let alpha = self.alpha();
        let sum = count_mixture(
            &self.family,
            self.theta,
            |n| {
                let na = n as f64 * alpha;
                let inner = power_binomial_series(na - 1.0, 1.0, s, 1e-10)?;
                Ok(SeriesSum {
                    value: na * inner.value,
                    terms: inner.terms,
                    tail: na * inner.tail,
                    noise: na * inner.noise,
                })
            },
            1e-7,
            "moment series",
        )?;
        Ok(sum.value * self.beta().powi(-(k as i32)) * gamma(s))
    }

    /// `Σ_n P(N = n) nα Σ_j (-1)^j C(nα-1, j) h(j)`, the shape shared by the
    /// series for moments, partial moments and residual life.
    pub(crate) fn binomial_mixture<H>(&self, h: H, rel_tol: f64, what: &str) -> Result<SeriesSum>
    where
        H: Fn(u64) -> f64,
    {
        let alpha = self.alpha();
        count_mixture(
            &self.family,
            self.theta,
            |n| {
                let nf = n as f64;
                let inner = binomial_series(nf * alpha - 1.0, &h, 1e-3 * rel_tol)?;
                Ok(SeriesSum {
                    value: nf * alpha * inner.value,
                    terms: inner.terms,
                    tail: nf * alpha * inner.tail,
                    noise: nf * alpha * inner.noise,
                })
            },
            rel_tol,
            what,
        )
    }

    /// `(E Y, Var Y)` from quadrature moments.
    pub fn mean_var(&self) -> Result<(f64, f64)> {
        let m1 = self.moment(1, MomentMethod::Quadrature)?;
        let m2 = self.moment(2, MomentMethod::Quadrature)?;
        Ok((m1, m2 - m1 * m1))
    }

    fn check_mgf_domain(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return domain("mgf argument must be finite");
        }
        if t > 0.0 && self.gamma() < 1.0 {
            return domain(format!("mgf does not exist for t = {t} > 0 when gamma < 1"));
        }
        if t > 0.0 && self.gamma() == 1.0 && t >= self.beta() {
            return domain(format!(
                "mgf does not exist for t = {t} >= beta when gamma = 1"
            ));
        }
        Ok(())
    }

    /// `E e^{tY}` by quadrature.
    pub fn mgf(&self, t: f64) -> Result<f64> {
        self.check_mgf_domain(t)?;
        if t == 0.0 {
            return Ok(1.0);
        }
        Ok(self.expect(|y| (t * y).exp(), Tolerance::default())?.value)
    }

    /// `E e^{tY} = Σ_i t^i E(Y^i) / i!` with the moments taken from the
    /// double series. Diverges for `γ < 1`, which surfaces as a convergence
    /// error.
    pub fn mgf_series(&self, t: f64) -> Result<f64> {
        self.check_mgf_domain(t)?;
        if t == 0.0 {
            return Ok(1.0);
        }
        let mut sum = 1.0;
        let mut ln_fact = 0.0;
        let mut small = 0;
        let mut last = f64::INFINITY;
        for i in 1..=400u32 {
            ln_fact += (i as f64).ln();
            let m = self.moment_series(i)?;
            let term =
                t.signum().powi(i as i32) * (i as f64 * t.abs().ln() + m.ln() - ln_fact).exp();
            if !term.is_finite() {
                break;
            }
            sum += term;
            last = term;
            if term.abs() < 1e-14 * sum.abs() {
                small += 1;
                if small >= 3 {
                    return Ok(sum);
                }
            } else {
                small = 0;
            }
        }
        Err(Error::Convergence {
            what: format!("mgf power series at t = {t}"),
            iterations: 400,
            last_term: last,
        })
    }
}
