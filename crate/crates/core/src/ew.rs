//! The exponentiated Weibull law `G(x) = (1 - e^{-(βx)^γ})^α`.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::series::power_binomial_series;
use crate::special::{binom, gamma, ln_one_minus_exp_neg};

/// Shape `α`, rate `β` and Weibull shape `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EwParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self { alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} = {v} must be positive and finite"));
            }
        }
        Ok(())
    }

    /// `(t, ln(1 - e^{-t}))` with `t = (βx)^γ`. Small `t` goes through
    /// `ln t` so the logarithm survives when `t` itself underflows.
    #[inline]
    pub(crate) fn t_and_w(&self, x: f64) -> (f64, f64) {
        let (_, t, w) = self.lt_t_w(x);
        (t, w)
    }

    /// `(ln t, t, w)` with `t = (βx)^γ` and `w = ln(1 - e^{-t})`.
    #[inline]
    pub(crate) fn lt_t_w(&self, x: f64) -> (f64, f64, f64) {
        let lt = self.gamma * (self.beta * x).ln();
        let t = lt.exp();
        let w = if t < 1e-9 {
            lt - 0.5 * t
        } else {
            ln_one_minus_exp_neg(t)
        };
        (lt, t, w)
    }

    /// `ln G(x)` for `x > 0`.
    #[inline]
    pub(crate) fn ln_g(&self, x: f64) -> f64 {
        self.alpha * self.t_and_w(x).1
    }

    /// `ln g(x)` for `x > 0`, without the parameter check.
    #[inline]
    pub(crate) fn ln_pdf_unchecked(&self, x: f64) -> f64 {
        self.ln_norm() + self.ln_pdf_kernel(x).0
    }

    /// `ln α + ln γ`, the part of `ln g` free of `x`.
    pub(crate) fn ln_norm(&self) -> f64 {
        self.alpha.ln() + self.gamma.ln()
    }

    /// `(ln g(x) - ln α - ln γ, w(x))`.
    #[inline]
    pub(crate) fn ln_pdf_kernel(&self, x: f64) -> (f64, f64) {
        let (lt, t, w) = self.lt_t_w(x);
        (lt - x.ln() - t + (self.alpha - 1.0) * w, w)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return domain(format!("cdf argument {x} must be nonnegative"));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok(self.ln_g(x).exp())
    }

    pub fn survival(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return domain(format!("survival argument {x} must be nonnegative"));
        }
        if x == 0.0 {
            return Ok(1.0);
        }
        Ok(-self.ln_g(x).exp_m1())
    }

    /// Density on the open support `x > 0`. At the origin the density tends
    /// to 0 for `αγ > 1`, to `β` for `αγ = 1` and diverges for `αγ < 1`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return domain(format!("density argument {x} must be positive"));
        }
        if x.is_infinite() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.ln_pdf_unchecked(x))
    }

    /// `(S(x), h(x))`.
    pub fn hazard(&self, x: f64) -> Result<(f64, f64)> {
        let s = self.survival(x)?;
        if s <= 0.0 {
            return Err(Error::Overflow(format!("survival underflows at x = {x}")));
        }
        let f = self.pdf(x)?;
        Ok((s, f / s))
    }

    /// `G^{-1}(q) = (1/β)(-ln(1 - q^{1/α}))^{1/γ}`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return domain(format!("quantile level {q} outside (0, 1)"));
        }
        Ok(self.quantile_from_ln(q.ln()))
    }

    /// Quantile given `ln q`, which keeps accuracy for `q` near one when the
    /// caller already works in log space.
    pub(crate) fn quantile_from_ln(&self, ln_q: f64) -> f64 {
        // 1 - q^{1/α}
        let one_minus = -(ln_q / self.alpha).exp_m1();
        (-one_minus.ln()).powf(1.0 / self.gamma) / self.beta
    }

    /// `E(X^k)`: the finite closed form when `α` is an integer, otherwise
    /// the alternating binomial series summed to a `1e-12` relative tail.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return domain("moment order must be at least 1");
        }
        if self.alpha.fract() == 0.0 && self.alpha <= 1000.0 {
            Ok(self.moment_closed_form(k))
        } else {
            self.moment_series(k)
        }
    }

    fn moment_closed_form(&self, k: u32) -> f64 {
        let s = k as f64 / self.gamma + 1.0;
        let a = self.alpha as u64;
        let mut ak = 1.0;
        for j in 1..a {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            ak += sign * binom(a - 1, j) * (j as f64 + 1.0).powf(-s);
        }
        self.alpha * self.beta.powi(-(k as i32)) * gamma(s) * ak
    }

    /// `E(X^k)` by the general series, for any `α`.
    pub fn moment_series(&self, k: u32) -> Result<f64> {
        let s = k as f64 / self.gamma + 1.0;
        let sum = power_binomial_series(self.alpha - 1.0, 1.0, s, 1e-12)?;
        Ok(self.alpha * self.beta.powi(-(k as i32)) * gamma(s) * sum.value)
    }

    /// One draw by inversion.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile_from_ln(u.ln())
    }

    /// `n` draws by inversion of independent uniforms from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_from_zero, integrate_half_line, Tolerance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(a: f64, b: f64, g: f64) -> EwParams {
        EwParams::new(a, b, g).unwrap()
    }

    #[test]
    fn exponential_and_weibull_cases() {
        let e = p(1.0, 1.0, 1.0);
        assert!((e.cdf(1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(e.cdf(0.0).unwrap(), 0.0);
        assert!((e.pdf(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let w = p(1.0, 1.0, 2.0);
        assert!((w.pdf(1.0).unwrap() - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let (s, h) = e.hazard(2.0).unwrap();
        assert!((s - (-2.0f64).exp()).abs() < 1e-15 && (h - 1.0).abs() < 1e-12);
        let (s, h) = w.hazard(1.0).unwrap();
        assert!((s - (-1.0f64).exp()).abs() < 1e-15 && (h - 2.0).abs() < 1e-12);
    }

    #[test]
    fn domain_guards() {
        assert!(EwParams::new(0.0, 1.0, 1.0).is_err());
        assert!(EwParams::new(1.0, f64::INFINITY, 1.0).is_err());
        let e = p(1.0, 1.0, 1.0);
        assert!(e.cdf(-1.0).is_err());
        assert!(e.pdf(0.0).is_err());
        assert!(e.quantile(1.0).is_err());
        assert!(e.moment(0).is_err());
        assert!(matches!(e.hazard(1e5), Err(Error::Overflow(_))));
    }

    #[test]
    fn cdf_matches_integrated_pdf() {
        let q = p(2.0, 0.5, 1.5);
        let r = integrate_from_zero(|x| q.pdf(x).unwrap(), 3.0, Tolerance::default()).unwrap();
        assert!((r.value - q.cdf(3.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pdf_matches_cdf_difference() {
        let q = p(3.0, 2.0, 0.7);
        let h = 1e-6;
        let fd = (q.cdf(0.4 + h).unwrap() - q.cdf(0.4 - h).unwrap()) / (2.0 * h);
        let f = q.pdf(0.4).unwrap();
        assert!((fd - f).abs() < 1e-6 * f);
    }

    #[test]
    fn hazard_ratio() {
        let q = p(2.0, 1.0, 0.5);
        let (s, h) = q.hazard(1.0).unwrap();
        let f = q.pdf(1.0).unwrap();
        let sv = 1.0 - (1.0 - (-1.0f64).exp()).powi(2);
        assert!((s - sv).abs() < 1e-15);
        assert!((h - f / sv).abs() < 1e-14 * h);
    }

    #[test]
    fn quantile_examples() {
        let e = p(1.0, 1.0, 1.0);
        assert!((e.quantile(1.0 - (-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-14);
        let q = p(2.0, 1.0, 1.0);
        assert!((q.quantile(0.25).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let q = p(1.7, 0.3, 2.2);
        for &u in &[0.01, 0.1, 0.5, 0.9, 0.99] {
            let y = q.quantile(u).unwrap();
            assert!((q.cdf(y).unwrap() - u).abs() < 1e-10);
        }
    }

    #[test]
    fn density_integrates_to_one_on_shape_grid() {
        for &a in &[0.5, 1.0, 2.5] {
            for &g in &[0.6, 1.0, 2.0] {
                let q = p(a, 1.3, g);
                let med = q.quantile(0.5).unwrap();
                let r =
                    integrate_half_line(|x| q.pdf(x).unwrap(), med, Tolerance::default()).unwrap();
                assert!((r.value - 1.0).abs() < 1e-9, "α={a} γ={g}: {}", r.value);
            }
        }
    }

    #[test]
    fn moments() {
        let e = p(1.0, 1.0, 1.0);
        assert!((e.moment(1).unwrap() - 1.0).abs() < 1e-14);
        assert!((e.moment(2).unwrap() - 2.0).abs() < 1e-13);
        let q = p(2.5, 0.8, 1.3);
        let med = q.quantile(0.5).unwrap();
        let r = integrate_half_line(|x| x * q.pdf(x).unwrap(), med, Tolerance::default()).unwrap();
        let m = q.moment(1).unwrap();
        assert!((m - r.value).abs() < 1e-6 * r.value, "{m} vs {}", r.value);
    }

    #[test]
    fn closed_form_and_series_agree_for_integer_alpha() {
        for &a in &[1.0, 2.0, 3.0, 7.0] {
            for &g in &[0.5, 1.0, 2.5] {
                for k in 1..4 {
                    let q = p(a, 0.7, g);
                    let c = q.moment_closed_form(k);
                    let s = q.moment_series(k).unwrap();
                    assert!((c - s).abs() <= 1e-12 * c, "α={a} γ={g} k={k}");
                }
            }
        }
    }

    #[test]
    fn sampling() {
        let e = p(1.0, 1.0, 1.0);
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(e.sample(&mut a, 50), e.sample(&mut b, 50));
        let n = 100_000;
        let xs = e.sample(&mut a, n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn fixed_uniform_gives_median() {
        let q = p(1.7, 0.3, 2.2);
        assert_eq!(q.quantile_from_ln(0.5f64.ln()), q.quantile(0.5).unwrap());
    }
}
