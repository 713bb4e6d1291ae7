//! Zero-truncated power-series laws `P(N = n) = a_n θ^n / C(θ)` used as the
//! compounding distribution of the sample size.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::{binom, ln_gamma};

/// The compounding law. `Polynomial` holds literal coefficients
/// `a_1, a_2, ...` of a finite series (e.g. `C(θ) = θ + θ^20`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PowerSeriesFamily {
    Geometric,
    Poisson,
    Logarithmic,
    Binomial { m: u32 },
    Polynomial { coeffs: Vec<f64> },
}

impl PowerSeriesFamily {
    /// Builds a literal-coefficient family after checking `a_n >= 0` and
    /// `a_1 > 0`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs[0] <= 0.0 {
            return domain("polynomial family needs a_1 > 0");
        }
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return domain("polynomial coefficients must be finite and nonnegative");
        }
        Ok(Self::Polynomial { coeffs })
    }

    pub fn binomial(m: u32) -> Result<Self> {
        if m == 0 {
            return domain("binomial family needs m >= 1");
        }
        Ok(Self::Binomial { m })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Geometric => "geometric",
            Self::Poisson => "poisson",
            Self::Logarithmic => "logarithmic",
            Self::Binomial { .. } => "binomial",
            Self::Polynomial { .. } => "polynomial",
        }
    }

    /// Upper end `s` of the admissible `θ` interval `(0, s)`.
    pub fn support_upper(&self) -> f64 {
        match self {
            Self::Geometric | Self::Logarithmic => 1.0,
            _ => f64::INFINITY,
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta > 0.0 && theta < self.support_upper() && theta.is_finite()
    }

    fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            domain(format!(
                "theta = {theta} outside (0, {}) for the {} family",
                self.support_upper(),
                self.name()
            ))
        }
    }

    /// Largest `n` with `a_n > 0`, if finite.
    pub fn max_count(&self) -> Option<u64> {
        match self {
            Self::Binomial { m } => Some(*m as u64),
            Self::Polynomial { coeffs } => Some(coeffs.len() as u64),
            _ => None,
        }
    }

    /// Coefficient `a_n` for `n >= 1`.
    pub fn coeff(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            Self::Geometric => 1.0,
            Self::Poisson => (-ln_gamma(n as f64 + 1.0)).exp(),
            Self::Logarithmic => 1.0 / n as f64,
            Self::Binomial { m } => binom(*m as u64, n),
            Self::Polynomial { coeffs } => coeffs.get(n as usize - 1).copied().unwrap_or(0.0),
        }
    }

    /// `ln a_n`, `-inf` where the coefficient vanishes.
    pub fn ln_coeff(&self, n: u64) -> f64 {
        match self {
            Self::Poisson if n >= 1 => -ln_gamma(n as f64 + 1.0),
            _ => self.coeff(n).ln(),
        }
    }

    /// `C^{(order)}(u)` for `u` in `[0, s)` without a domain check.
    pub(crate) fn derivative(&self, u: f64, order: u8) -> f64 {
        match self {
            Self::Geometric => {
                let q = 1.0 - u;
                match order {
                    0 => u / q,
                    1 => q.powi(-2),
                    2 => 2.0 * q.powi(-3),
                    _ => 6.0 * q.powi(-4),
                }
            }
            Self::Poisson => match order {
                0 => u.exp_m1(),
                _ => u.exp(),
            },
            Self::Logarithmic => {
                let q = 1.0 - u;
                match order {
                    0 => -(-u).ln_1p(),
                    1 => 1.0 / q,
                    2 => q.powi(-2),
                    _ => 2.0 * q.powi(-3),
                }
            }
            Self::Binomial { m } => {
                let mf = *m as f64;
                let l = u.ln_1p();
                match order {
                    0 => (mf * l).exp_m1(),
                    1 => mf * ((mf - 1.0) * l).exp(),
                    2 => mf * (mf - 1.0) * ((mf - 2.0) * l).exp(),
                    _ => mf * (mf - 1.0) * (mf - 2.0) * ((mf - 3.0) * l).exp(),
                }
            }
            Self::Polynomial { coeffs } => {
                let k = order as i32;
                let mut acc = 0.0;
                for (idx, &a) in coeffs.iter().enumerate() {
                    let n = idx as i32 + 1;
                    if n < k || a == 0.0 {
                        continue;
                    }
                    let mut falling = 1.0;
                    for r in 0..k {
                        falling *= (n - r) as f64;
                    }
                    acc += a * falling * u.powi(n - k);
                }
                acc
            }
        }
    }

    /// `C(θ)`, `C'(θ)`, `C''(θ)` or `C'''(θ)` in closed form.
    pub fn eval_c(&self, theta: f64, order: u8) -> Result<f64> {
        self.check(theta)?;
        if order > 3 {
            return domain("only derivatives up to order 3 are available");
        }
        Ok(self.derivative(theta, order))
    }

    /// `ln C(θ)`.
    pub(crate) fn ln_c(&self, theta: f64) -> f64 {
        match self {
            Self::Poisson if theta > 30.0 => theta + (-(-theta).exp()).ln_1p(),
            Self::Binomial { m } if theta > 1.0 => {
                let a = *m as f64 * theta.ln_1p();
                a + (-(-a).exp()).ln_1p()
            }
            _ => self.derivative(theta, 0).ln(),
        }
    }

    /// `ln C'(u)` for `u` in `[0, s)`.
    pub(crate) fn ln_derivative1(&self, u: f64) -> f64 {
        match self {
            Self::Geometric => -2.0 * (-u).ln_1p(),
            Self::Poisson => u,
            Self::Logarithmic => -(-u).ln_1p(),
            Self::Binomial { m } => (*m as f64).ln() + (*m as f64 - 1.0) * u.ln_1p(),
            Self::Polynomial { .. } => self.derivative(u, 1).ln(),
        }
    }

    /// Mean of the count law, `θ C'(θ) / C(θ)`.
    pub fn mean_count(&self, theta: f64) -> f64 {
        (theta.ln() + self.ln_derivative1(theta) - self.ln_c(theta)).exp()
    }

    /// `C''(u) / C'(u)`.
    pub(crate) fn ratio2(&self, u: f64) -> f64 {
        match self {
            Self::Geometric => 2.0 / (1.0 - u),
            Self::Poisson => 1.0,
            Self::Logarithmic => 1.0 / (1.0 - u),
            Self::Binomial { m } => (*m as f64 - 1.0) / (1.0 + u),
            Self::Polynomial { .. } => self.derivative(u, 2) / self.derivative(u, 1),
        }
    }

    /// `C'''(u) / C'(u)`.
    pub(crate) fn ratio3(&self, u: f64) -> f64 {
        match self {
            Self::Geometric => 6.0 / (1.0 - u).powi(2),
            Self::Poisson => 1.0,
            Self::Logarithmic => 2.0 / (1.0 - u).powi(2),
            Self::Binomial { m } => {
                let mf = *m as f64;
                (mf - 1.0) * (mf - 2.0) / (1.0 + u).powi(2)
            }
            Self::Polynomial { .. } => self.derivative(u, 3) / self.derivative(u, 1),
        }
    }

    /// `C(θ) - C(u)` for `0 <= u <= θ`, given `delta = θ - u` computed
    /// accurately by the caller. Avoids the cancellation in the survival
    /// function when `u` approaches `θ`.
    pub(crate) fn c_diff(&self, theta: f64, u: f64, delta: f64) -> f64 {
        match self {
            Self::Geometric => delta / ((1.0 - theta) * (1.0 - u)),
            Self::Poisson => u.exp() * delta.exp_m1(),
            Self::Logarithmic => (delta / (1.0 - theta)).ln_1p(),
            Self::Binomial { m } => {
                let mf = *m as f64;
                (mf * u.ln_1p()).exp() * (mf * (delta / (1.0 + u)).ln_1p()).exp_m1()
            }
            Self::Polynomial { coeffs } => {
                if u <= 0.0 {
                    return self.derivative(theta, 0);
                }
                let lr = (delta / u).ln_1p();
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(idx, &a)| {
                        let n = idx as f64 + 1.0;
                        a * u.powf(n) * (n * lr).exp_m1()
                    })
                    .sum()
            }
        }
    }

    /// Supremum of `C` on `(0, s)`.
    pub fn c_sup(&self) -> f64 {
        f64::INFINITY
    }

    /// The `θ` with `C(θ) = u`.
    pub fn inverse_c(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) || !u.is_finite() {
            return domain(format!("inverse_c argument {u} outside (0, ∞)"));
        }
        Ok(self.inverse_unchecked(u))
    }

    pub(crate) fn inverse_unchecked(&self, u: f64) -> f64 {
        match self {
            Self::Geometric => u / (1.0 + u),
            Self::Poisson => u.ln_1p(),
            Self::Logarithmic => -(-u).exp_m1(),
            Self::Binomial { m } => (u.ln_1p() / *m as f64).exp_m1(),
            Self::Polynomial { .. } => self.invert_numerically(u),
        }
    }

    fn invert_numerically(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        // bracket then bisect with Newton steps; C is increasing and convex
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.derivative(hi, 0) < u {
            lo = hi;
            hi *= 2.0;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fx = self.derivative(x, 0) - u;
            if fx == 0.0 {
                return x;
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.derivative(x, 1);
            let newton = x - fx / d;
            x = if newton >= lo && newton <= hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) <= 1e-16 * hi || fx.abs() <= 1e-16 * u {
                break;
            }
        }
        x
    }

    /// `P(N = n) = a_n θ^n / C(θ)`.
    pub fn pmf(&self, theta: f64, n: u64) -> Result<f64> {
        self.check(theta)?;
        if n == 0 {
            return domain("the count law is zero-truncated; n must be >= 1");
        }
        Ok(self.pmf_unchecked(theta, n))
    }

    pub(crate) fn pmf_unchecked(&self, theta: f64, n: u64) -> f64 {
        let la = self.ln_coeff(n);
        if la == f64::NEG_INFINITY {
            return 0.0;
        }
        (la + n as f64 * theta.ln() - self.ln_c(theta)).exp()
    }

    /// Number of terms after which the remaining pmf mass is below `tail`.
    pub fn truncation_point(&self, theta: f64, tail: f64) -> u64 {
        if let Some(max) = self.max_count() {
            return max;
        }
        let mut cum = 0.0;
        let mut n = 0;
        loop {
            n += 1;
            cum += self.pmf_unchecked(theta, n);
            if 1.0 - cum < tail || n > 100_000 {
                // the pmf is unimodal; one more check that terms are shrinking
                let next = self.pmf_unchecked(theta, n + 1);
                if next <= self.pmf_unchecked(theta, n) || n > 100_000 {
                    return n;
                }
            }
        }
    }
}

/// Coefficients `c_0, ..., c_{i_max}` of `(Σ_i w_i u^i)^j`, by the
/// recurrence `c_i = (i w_0)^{-1} Σ_{m=1}^{i} (j m - i + m) w_m c_{i-m}`
/// with `c_0 = w_0^j`. `j` may be any real power.
pub fn power_coeffs(w: &[f64], j: f64, i_max: usize) -> Result<Vec<f64>> {
    let w0 = w.first().copied().unwrap_or(0.0);
    if w0 == 0.0 {
        return domain("power_coeffs requires w_0 != 0");
    }
    let mut c = Vec::with_capacity(i_max + 1);
    c.push(w0.powf(j));
    for i in 1..=i_max {
        let mut acc = 0.0;
        for m in 1..=i.min(w.len().saturating_sub(1)) {
            let mf = m as f64;
            acc += (j * mf - i as f64 + mf) * w[m] * c[i - m];
        }
        c.push(acc / (i as f64 * w0));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn families() -> Vec<PowerSeriesFamily> {
        vec![
            PowerSeriesFamily::Geometric,
            PowerSeriesFamily::Poisson,
            PowerSeriesFamily::Logarithmic,
            PowerSeriesFamily::Binomial { m: 10 },
            PowerSeriesFamily::Binomial { m: 2 },
            PowerSeriesFamily::polynomial(vec![1.0, 0.0, 0.5, 2.0]).unwrap(),
        ]
    }

    fn theta_grid(f: &PowerSeriesFamily) -> Vec<f64> {
        if f.support_upper() == 1.0 {
            vec![1e-6, 0.05, 0.3, 0.5, 0.8, 0.95]
        } else {
            vec![1e-6, 0.05, 0.3, 1.0, 2.5, 7.0]
        }
    }

    #[test]
    fn table_values() {
        let g = PowerSeriesFamily::Geometric;
        assert!((g.eval_c(0.5, 0).unwrap() - 1.0).abs() < 1e-15);
        let p = PowerSeriesFamily::Poisson;
        assert!((p.eval_c(1.0, 0).unwrap() - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        let l = PowerSeriesFamily::Logarithmic;
        assert!((l.eval_c(0.5, 1).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(PowerSeriesFamily::Geometric.eval_c(1.0, 0).is_err());
        assert!(PowerSeriesFamily::Poisson.eval_c(-0.1, 0).is_err());
        assert!(PowerSeriesFamily::Poisson.eval_c(0.1, 4).is_err());
        assert!(PowerSeriesFamily::Geometric.pmf(0.5, 0).is_err());
        assert!(PowerSeriesFamily::Geometric.inverse_c(0.0).is_err());
        assert!(power_coeffs(&[0.0, 1.0], 2.0, 3).is_err());
        assert!(PowerSeriesFamily::polynomial(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn inverse_values() {
        assert!((PowerSeriesFamily::Geometric.inverse_c(1.0).unwrap() - 0.5).abs() < 1e-15);
        let e1 = std::f64::consts::E - 1.0;
        assert!((PowerSeriesFamily::Poisson.inverse_c(e1).unwrap() - 1.0).abs() < 1e-15);
        let b = PowerSeriesFamily::Binomial { m: 10 };
        let u = b.eval_c(0.1, 0).unwrap();
        assert!((b.inverse_c(u).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn inverse_round_trip_on_grid() {
        for f in families() {
            for theta in theta_grid(&f) {
                let u = f.eval_c(theta, 0).unwrap();
                let back = f.inverse_c(u).unwrap();
                assert!(
                    (back - theta).abs() <= 1e-12 * theta,
                    "{f:?} θ={theta} back={back}"
                );
                // and C(C^{-1}(u)) = u
                let again = f.eval_c(back, 0).unwrap();
                assert!((again - u).abs() <= 1e-12 * u);
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        for f in families() {
            for theta in theta_grid(&f) {
                if theta < 1e-3 {
                    continue;
                }
                let h = 1e-5 * theta.min(f.support_upper() - theta).min(1.0);
                for order in 0..3u8 {
                    let fd = (f.derivative(theta + h, order) - f.derivative(theta - h, order))
                        / (2.0 * h);
                    let exact = f.derivative(theta, order + 1);
                    let rel = (fd - exact).abs() / exact.abs().max(1e-300);
                    assert!(rel < 1e-7, "{f:?} θ={theta} order {} rel {rel}", order + 1);
                    assert!(exact > 0.0 || (order + 1 >= 2 && exact >= 0.0));
                }
            }
        }
    }

    #[test]
    fn ratios_and_c_diff_are_consistent() {
        for f in families() {
            for theta in theta_grid(&f) {
                let u = 0.3 * theta;
                let r2 = f.derivative(u, 2) / f.derivative(u, 1);
                let r3 = f.derivative(u, 3) / f.derivative(u, 1);
                assert!((f.ratio2(u) - r2).abs() <= 1e-12 * r2.abs().max(1.0));
                assert!((f.ratio3(u) - r3).abs() <= 1e-12 * r3.abs().max(1.0));
                let diff = f.c_diff(theta, u, theta - u);
                let naive = f.derivative(theta, 0) - f.derivative(u, 0);
                assert!(
                    (diff - naive).abs() <= 1e-9 * naive.abs(),
                    "{f:?} θ={theta}"
                );
                assert!((f.ln_c(theta) - f.derivative(theta, 0).ln()).abs() < 1e-12);
                assert!((f.ln_derivative1(u) - f.derivative(u, 1).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pmf_examples() {
        assert!((PowerSeriesFamily::Geometric.pmf(0.5, 1).unwrap() - 0.5).abs() < 1e-15);
        let e1 = std::f64::consts::E - 1.0;
        assert!((PowerSeriesFamily::Poisson.pmf(1.0, 1).unwrap() - 1.0 / e1).abs() < 1e-15);
        let b = PowerSeriesFamily::Binomial { m: 10 };
        let want = 0.2f64.powi(10) / (1.2f64.powi(10) - 1.0);
        assert!((b.pmf(0.2, 10).unwrap() - want).abs() <= 1e-14 * want);
        assert_eq!(b.pmf(0.2, 11).unwrap(), 0.0);
    }

    #[test]
    fn pmf_sums_to_one() {
        for f in families() {
            for theta in theta_grid(&f) {
                let n_star = f.truncation_point(theta, 1e-12);
                let mut total = 0.0;
                for n in 1..=n_star {
                    let p = f.pmf(theta, n).unwrap();
                    assert!(p >= 0.0);
                    total += p;
                }
                assert!(
                    (1.0 - 1e-10..=1.0 + 1e-12).contains(&total),
                    "{f:?} θ={theta} sum={total}"
                );
            }
        }
    }

    #[test]
    fn power_coeffs_examples() {
        assert_eq!(
            power_coeffs(&[1.0, 1.0], 2.0, 2).unwrap(),
            vec![1.0, 2.0, 1.0]
        );
        let id = power_coeffs(&[1.0, 0.0, 0.0], 7.0, 4).unwrap();
        assert_eq!(id, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        // cube of 1 + 2u + 3u^2 by direct multiplication
        let w = [1.0, 2.0, 3.0];
        let mut brute = vec![1.0];
        for _ in 0..3 {
            let mut next = vec![0.0; brute.len() + w.len() - 1];
            for (i, a) in brute.iter().enumerate() {
                for (k, b) in w.iter().enumerate() {
                    next[i + k] += a * b;
                }
            }
            brute = next;
        }
        let got = power_coeffs(&w, 3.0, 4).unwrap();
        for i in 0..=4 {
            assert!((got[i] - brute[i]).abs() < 1e-12, "i={i}");
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn power_coeffs_j1_is_identity(w in proptest::collection::vec(-3.0f64..3.0, 1..8), k in 0usize..10) {
                // the recurrence divides by w_0, so keep it away from zero
                prop_assume!(w[0].abs() > 0.5);
                let c = power_coeffs(&w, 1.0, k).unwrap();
                for i in 0..=k {
                    let want = w.get(i).copied().unwrap_or(0.0);
                    prop_assert!((c[i] - want).abs() <= 1e-9 * want.abs().max(1.0));
                }
            }

            #[test]
            fn geometric_and_logarithmic_inverse(theta in 1e-8f64..0.999) {
                for f in [PowerSeriesFamily::Geometric, PowerSeriesFamily::Logarithmic] {
                    let u = f.eval_c(theta, 0).unwrap();
                    let back = f.inverse_c(u).unwrap();
                    prop_assert!((back - theta).abs() <= 1e-12 * theta);
                }
            }
        }
    }
}
