//! Numerical primitives shared by the distribution code: stable
//! exponential/log compositions, generalized binomial coefficients and the
//! incomplete gamma pair.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma as sg;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// `1 - e^{-t}` for `t >= 0` without cancellation near zero.
#[inline]
pub fn one_minus_exp_neg(t: f64) -> f64 {
    -(-t).exp_m1()
}

/// `ln(1 - e^{-t})` for `t > 0`.
///
/// Switches between `ln(-expm1(-t))` and `ln1p(-e^{-t})` at `ln 2`.
#[inline]
pub fn ln_one_minus_exp_neg(t: f64) -> f64 {
    if t <= std::f64::consts::LN_2 {
        (-(-t).exp_m1()).ln()
    } else {
        (-(-t).exp()).ln_1p()
    }
}

/// `1 / (e^t - 1)`, the derivative of `ln(1 - e^{-t})`.
#[inline]
pub fn inv_expm1(t: f64) -> f64 {
    1.0 / t.exp_m1()
}

/// `1 - x^a` for `x` in `[0, 1]`, accurate when `x^a` is close to one.
#[inline]
pub fn one_minus_pow(x: f64, a: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    -(a * x.ln()).exp_m1()
}

/// `ln |Γ(z)|` together with the sign of `Γ(z)`, for any real `z` that is not
/// a non-positive integer.
pub fn ln_gamma_signed(z: f64) -> (f64, f64) {
    if z > 0.0 {
        return (sg::ln_gamma(z), 1.0);
    }
    // reflection: Γ(z) Γ(1-z) = π / sin(πz)
    let s = (std::f64::consts::PI * z).sin();
    let ln_abs = std::f64::consts::PI.ln() - s.abs().ln() - sg::ln_gamma(1.0 - z);
    let sign = if z.floor() as i64 % 2 == 0 { 1.0 } else { -1.0 };
    (ln_abs, sign)
}

/// Generalized binomial coefficient `C(x, j) = Γ(x+1) / (Γ(j+1) Γ(x-j+1))`
/// for real `x > -1` and integer `j >= 0`.
///
/// Integer `x` with `j > x` gives exactly zero. Small `j` uses the falling
/// product, larger `j` goes through log-gamma with sign tracking.
pub fn gen_binom(x: f64, j: u64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let is_int = x.fract() == 0.0 && x >= 0.0;
    if is_int && (j as f64) > x {
        return 0.0;
    }
    if j <= 30 {
        let mut acc = 1.0;
        for k in 0..j {
            acc *= (x - k as f64) / (k as f64 + 1.0);
        }
        return acc;
    }
    let jf = j as f64;
    let (ln_num, s_num) = ln_gamma_signed(x + 1.0);
    let (ln_den, s_den) = ln_gamma_signed(x - jf + 1.0);
    s_num * s_den * (ln_num - sg::ln_gamma(jf + 1.0) - ln_den).exp()
}

/// Ordinary binomial coefficient as `f64`.
pub fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    if acc < 9.0e15 {
        acc.round()
    } else {
        acc
    }
}

/// Lower incomplete gamma `Ψ(s; t) = ∫_0^t x^{s-1} e^{-x} dx`.
pub fn lower_incomplete_gamma(s: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t.is_infinite() {
        return sg::gamma(s);
    }
    sg::gamma_lr(s, t) * sg::gamma(s)
}

/// Upper incomplete gamma `Φ(s; t) = ∫_t^∞ x^{s-1} e^{-x} dx`.
pub fn upper_incomplete_gamma(s: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return sg::gamma(s);
    }
    if t.is_infinite() {
        return 0.0;
    }
    sg::gamma_ur(s, t) * sg::gamma(s)
}

/// Regularized upper incomplete gamma `Φ(s; t) / Γ(s)`.
pub fn gamma_q(s: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    sg::gamma_ur(s, t)
}

/// Regularized lower incomplete gamma `Ψ(s; t) / Γ(s)`.
pub fn gamma_p(s: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t.is_infinite() {
        return 1.0;
    }
    sg::gamma_lr(s, t)
}

/// The pair of incomplete gamma functions used by the residual-life series.
#[derive(Debug, Clone, Copy, Default)]
pub struct IncompleteGammaPair;

impl IncompleteGammaPair {
    pub fn lower(&self, s: f64, t: f64) -> f64 {
        lower_incomplete_gamma(s, t)
    }

    pub fn upper(&self, s: f64, t: f64) -> f64 {
        upper_incomplete_gamma(s, t)
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²x²}`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // the alternating form converges slowly here; use the theta-dual
        // K(x) = sqrt(2π)/x Σ_{k≥1} e^{-(2k-1)²π²/(8x²)}
        let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut s = 0.0;
        for k in 1..50 {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * c).exp();
            s += term;
            if term < 1e-300 {
                break;
            }
        }
        return 1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 * s.abs().max(1e-300) {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1mexp_branches_agree_with_naive() {
        for &t in &[1e-8f64, 1e-3, 0.5, 0.693, 0.7, 2.0, 5.0] {
            let naive = (1.0 - (-t).exp()).ln();
            let got = ln_one_minus_exp_neg(t);
            assert!((got - naive).abs() <= 1e-7 * naive.abs(), "t={t}");
        }
        // large t: ln(1 - e^{-t}) ≈ -e^{-t} - e^{-2t}/2
        let e = (-30.0f64).exp();
        assert!((ln_one_minus_exp_neg(30.0) + e + 0.5 * e * e).abs() <= 1e-15 * e);
        // tiny t keeps full precision where the naive form loses it
        assert!((ln_one_minus_exp_neg(1e-300) - (1e-300f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn gen_binom_matches_integer_binomials() {
        for n in 0..25u64 {
            for k in 0..=n + 2 {
                let want = binom(n, k);
                let got = gen_binom(n as f64, k);
                assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{n} {k}");
            }
        }
    }

    #[test]
    fn gen_binom_product_and_log_gamma_routes_agree() {
        // j=31..40 go through log-gamma; compare with the falling product.
        for &x in &[0.5, 3.7, 40.3, 79.0 - 0.25] {
            for j in 31..40u64 {
                let mut prod = 1.0;
                for k in 0..j {
                    prod *= (x - k as f64) / (k as f64 + 1.0);
                }
                let got = gen_binom(x, j);
                assert!(
                    (got - prod).abs() <= 1e-10 * prod.abs().max(1e-300),
                    "x={x} j={j} got={got} prod={prod}"
                );
            }
        }
    }

    #[test]
    fn incomplete_gamma_pair_sums_to_gamma() {
        let pair = IncompleteGammaPair;
        for &s in &[0.3, 1.0, 1.5, 2.7, 6.0] {
            for &t in &[1e-3, 0.5, 1.0, 3.0, 12.0] {
                let sum = pair.lower(s, t) + pair.upper(s, t);
                assert!((sum - gamma(s)).abs() <= 1e-12 * gamma(s), "s={s} t={t}");
            }
        }
    }

    #[test]
    fn kolmogorov_survival_known_points() {
        // Q(1.3581) ≈ 0.05 and Q(1.6276) ≈ 0.01
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        // both branches agree at the switch point
        let a = 1.0 - {
            let c = std::f64::consts::PI.powi(2) / (8.0 * 0.3 * 0.3);
            (2.0 * std::f64::consts::PI).sqrt() / 0.3
                * (1..50)
                    .map(|k| {
                        let m = (2 * k - 1) as f64;
                        (-m * m * c).exp()
                    })
                    .sum::<f64>()
        };
        let mut s = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * 0.09f64).exp();
            s += if k % 2 == 1 { term } else { -term };
        }
        assert!((a - 2.0 * s).abs() < 1e-12);
    }

    #[test]
    fn normal_quantile_975() {
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
    }
}
