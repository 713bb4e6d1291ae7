//! Truncated-series evaluation with explicit error bookkeeping, shared by the
//! series forms of moments, residual life, probability weighted moments and
//! entropy.
//!
//! Every series here is a cross-check on a quadrature value. Instead of
//! returning a silently wrong number, each evaluator tracks a tail bound and
//! the rounding noise of the partial sums and fails with
//! [`Error::Convergence`] when their sum exceeds the requested tolerance.

use crate::dd::{Dd, DD_EPS};
use crate::error::{Error, Result};
use crate::power_series::PowerSeriesFamily;

/// A partial sum together with what is known about its error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    /// Number of terms added.
    pub terms: usize,
    /// Estimated bound on the truncated tail.
    pub tail: f64,
    /// Rounding noise, `ε Σ |term|`.
    pub noise: f64,
}

impl SeriesSum {
    pub fn error(&self) -> f64 {
        self.tail + self.noise
    }

    /// Combined truncation and rounding error relative to the value.
    pub fn rel_error(&self) -> f64 {
        self.error() / self.value.abs().max(f64::MIN_POSITIVE)
    }
}

const TERM_CAP: usize = 2_000_000;
const COUNT_CAP: u64 = 100_000;

/// `Σ_{j≥0} (-1)^j C(x, j) h(j)` for real `x > -1` and a weight `h` that is
/// nonnegative and eventually nonincreasing.
///
/// Integer `x` gives a finite sum. Otherwise the terms keep one sign once
/// `j > x`, and the tail is bounded from the ratio `ρ` of the last two
/// terms as `|term| ρ / (1 - ρ)`, which covers both geometric and
/// power-law decay.
pub(crate) fn binomial_series<H: FnMut(u64) -> f64>(
    x: f64,
    mut h: H,
    rel_tol: f64,
) -> Result<SeriesSum> {
    let exact = x >= 0.0 && x.fract() == 0.0;
    let mut d = 1.0; // (-1)^j C(x, j)
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut prev = f64::INFINITY;
    for j in 0..TERM_CAP {
        let jf = j as f64;
        let term = d * h(j as u64);
        if !term.is_finite() {
            return Err(Error::Overflow(format!(
                "binomial series term {j} is not finite"
            )));
        }
        sum += term;
        abs_sum += term.abs();
        d *= (jf - x) / (jf + 1.0);
        if exact && d == 0.0 {
            return Ok(SeriesSum {
                value: sum,
                terms: j + 1,
                tail: 0.0,
                noise: f64::EPSILON * abs_sum,
            });
        }
        if jf > x + 1.0 {
            let rho = term.abs() / prev;
            if rho < 1.0 {
                let tail = term.abs() * rho / (1.0 - rho);
                if tail <= rel_tol * sum.abs() || (term == 0.0 && j > 0) {
                    return Ok(SeriesSum {
                        value: sum,
                        terms: j + 1,
                        tail,
                        noise: f64::EPSILON * abs_sum,
                    });
                }
            }
        }
        prev = term.abs();
    }
    Err(Error::Convergence {
        what: format!("binomial series in C({x}, j)"),
        iterations: TERM_CAP,
        last_term: prev,
    })
}

/// `Σ_{j≥0} (-1)^j C(x, j) (c + j)^{-s}` for `c > 0`, `s > 0`, summed in
/// double-double arithmetic.
///
/// The terms grow like `2^x` before cancelling down to a value of order one,
/// which exhausts `f64` precision once `x` is a few dozen; the extended
/// format keeps full `f64` accuracy up to `x ≈ 60`. Tail handling is as in
/// [`binomial_series`].
pub(crate) fn power_binomial_series(x: f64, c: f64, s: f64, rel_tol: f64) -> Result<SeriesSum> {
    let exact = x >= 0.0 && x.fract() == 0.0;
    let mut d = Dd::ONE; // (-1)^j C(x, j)
    let mut sum = Dd::ZERO;
    let mut noise = 0.0;
    let mut prev = f64::INFINITY;
    let done = |sum: Dd, terms: usize, tail: f64, noise: f64| {
        let value = sum.to_f64();
        Ok(SeriesSum {
            value,
            terms,
            tail,
            noise: noise + f64::EPSILON * value.abs(),
        })
    };
    for j in 0..TERM_CAP {
        let jf = j as f64;
        let base = c + jf;
        let term = d * Dd::new(base).powf_neg(s);
        let t = term.to_f64().abs();
        if !t.is_finite() {
            return Err(Error::Overflow(format!(
                "binomial series term {j} is not finite"
            )));
        }
        sum = sum + term;
        // exp/ln carry an error proportional to the size of the exponent,
        // the coefficient recurrence one per step
        noise += DD_EPS * t * (8.0 + 2.0 * jf + s * base.ln().abs());
        d = d.mul_f64(jf - x).div_f64(jf + 1.0);
        if exact && d.hi == 0.0 {
            return done(sum, j + 1, 0.0, noise);
        }
        if jf > x + 1.0 {
            let rho = t / prev;
            if rho < 1.0 {
                let tail = t * rho / (1.0 - rho);
                if tail <= rel_tol * sum.to_f64().abs() || (t == 0.0 && j > 0) {
                    return done(sum, j + 1, tail, noise);
                }
            }
        }
        prev = t;
    }
    Err(Error::Convergence {
        what: format!("binomial series in C({x}, j)"),
        iterations: TERM_CAP,
        last_term: prev,
    })
}

/// `Σ_{n≥1} P(N = n) v_n`, where `v(n)` returns an inner value together
/// with its own error bound.
///
/// Infinite families stop once the ratio-based tail bound of the weighted
/// contributions has been below `rel_tol / 1000` of the sum twice in a row,
/// or as soon as a contribution is smaller than its own error: the inner
/// alternating sums for large `n` carry rounding noise growing like
/// `ε 2^{nα}`, so later terms add more noise than information. The tail
/// bound is carried in the returned error and the call fails when the total
/// error exceeds `rel_tol` of the result.
pub(crate) fn count_mixture<V>(
    family: &PowerSeriesFamily,
    theta: f64,
    mut v: V,
    rel_tol: f64,
    what: &str,
) -> Result<SeriesSum>
where
    V: FnMut(u64) -> Result<SeriesSum>,
{
    let max = family.max_count();
    let mut acc = 0.0;
    let mut err = 0.0;
    let mut abs_acc = 0.0;
    let mut prev = f64::INFINITY;
    let mut quiet = 0;
    let mut tail = if max.is_some() { 0.0 } else { f64::INFINITY };
    let mut n = 0u64;
    loop {
        n += 1;
        if max.is_some_and(|m| n > m) {
            break;
        }
        if n > COUNT_CAP {
            return Err(Error::Convergence {
                what: format!("{what}: outer sum over the count"),
                iterations: n as usize,
                last_term: prev,
            });
        }
        let w = family.pmf_unchecked(theta, n);
        if w == 0.0 {
            if max.is_none() {
                break;
            }
            continue;
        }
        let inner = match v(n) {
            Ok(inner) => inner,
            Err(_) if max.is_none() && n >= 3 && tail.is_finite() => break,
            Err(e) => return Err(e),
        };
        let contrib = w * inner.value;
        let term_err = w * inner.error();
        if max.is_none() && n >= 3 && term_err >= contrib.abs() && tail.is_finite() {
            break;
        }
        acc += contrib;
        abs_acc += contrib.abs();
        err += term_err;
        if max.is_none() {
            let rho = contrib.abs() / prev;
            if rho < 1.0 {
                tail = contrib.abs() * rho / (1.0 - rho);
                if tail <= 1e-3 * rel_tol * acc.abs() {
                    quiet += 1;
                    if quiet >= 2 {
                        break;
                    }
                } else {
                    quiet = 0;
                }
            } else {
                quiet = 0;
                tail = f64::INFINITY;
            }
        }
        prev = contrib.abs();
    }
    let out = SeriesSum {
        value: acc,
        terms: n as usize,
        tail,
        noise: err + f64::EPSILON * abs_acc,
    };
    if out.rel_error() > rel_tol {
        return Err(Error::Convergence {
            what: format!("{what}: error estimate {:e} relative", out.rel_error()),
            iterations: n as usize,
            last_term: prev,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::binom;

    #[test]
    fn finite_binomial_sums_are_exact() {
        // Σ (-1)^j C(4, j) = 0 and Σ (-1)^j C(4, j)/(j+1) = 1/5
        let s = binomial_series(4.0, |_| 1.0, 1e-15).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.terms, 5);
        let s = binomial_series(4.0, |j| 1.0 / (j as f64 + 1.0), 1e-15).unwrap();
        assert!((s.value - 0.2).abs() < 1e-15);
    }

    #[test]
    fn extended_precision_survives_cancellation() {
        // reference values from 60-digit arithmetic
        let s = 1.0 / 1.4 + 1.0;
        let got = power_binomial_series(59.0, 1.0, s, 1e-15).unwrap();
        let want = 0.054_674_499_425_378_24;
        assert!((got.value - want).abs() < 1e-14 * want, "{}", got.value);
        // past the reach of the format the error estimate owns up to it
        for (x, want) in [
            (89.0, 0.038_704_033_653_585_32),
            (120.0, 0.029_989_057_001_375_5),
        ] {
            let got = power_binomial_series(x, 1.0, s, 1e-15).unwrap();
            assert!(
                (got.value - want).abs() <= got.error(),
                "x={x}: {} {}",
                got.value,
                got.error()
            );
        }
        // Σ (-1)^j C(n, j)/(j+1) = 1/(n+1)
        let got = power_binomial_series(60.0, 1.0, 1.0, 1e-15).unwrap();
        assert!((got.value * 61.0 - 1.0).abs() < 1e-14);
        // the f64 route agrees where it still has digits
        let a = power_binomial_series(6.5, 2.0, 1.3, 1e-13).unwrap();
        let b = binomial_series(6.5, |j| (2.0 + j as f64).powf(-1.3), 1e-13).unwrap();
        assert!((a.value - b.value).abs() < 1e-12, "{} {}", a.value, b.value);
    }

    #[test]
    fn non_integer_sum_matches_integral_form() {
        // Σ (-1)^j C(x, j) (j+1)^{-2} = ∫_0^∞ u e^{-u} (1 - e^{-u})^x du
        let x = 1.5;
        let s = binomial_series(x, |j| (j as f64 + 1.0).powi(-2), 1e-10).unwrap();
        let q = crate::quadrature::integrate_half_line(
            |u| u * (-u).exp() * (1.0 - (-u).exp()).powf(x),
            1.0,
            Default::default(),
        )
        .unwrap();
        assert!((s.value - q.value).abs() < 1e-9, "{} {}", s.value, q.value);
        assert!(s.tail > 0.0);
    }

    #[test]
    fn geometric_decay_stops_quickly() {
        let s = binomial_series(0.5, |j| (-(j as f64)).exp(), 1e-15).unwrap();
        // (1 - e^{-1})^{0.5}
        assert!((s.value - (1.0 - (-1.0f64).exp()).sqrt()).abs() < 1e-14);
        assert!(s.terms < 60);
    }

    #[test]
    fn count_mixture_of_ones_is_one() {
        for f in [
            PowerSeriesFamily::Geometric,
            PowerSeriesFamily::Poisson,
            PowerSeriesFamily::Logarithmic,
            PowerSeriesFamily::Binomial { m: 7 },
        ] {
            let one = |_| {
                Ok(SeriesSum {
                    value: 1.0,
                    terms: 1,
                    tail: 0.0,
                    noise: 0.0,
                })
            };
            let s = count_mixture(&f, 0.6, one, 1e-12, "mass").unwrap();
            assert!((s.value - 1.0).abs() < 1e-13, "{f:?} {}", s.value);
        }
        // E N for the binomial law is mθ/(1+θ) / (1 - (1+θ)^{-m})
        let f = PowerSeriesFamily::Binomial { m: 7 };
        let s = count_mixture(
            &f,
            0.6,
            |n| {
                Ok(SeriesSum {
                    value: n as f64,
                    terms: 1,
                    tail: 0.0,
                    noise: 0.0,
                })
            },
            1e-12,
            "mean",
        )
        .unwrap();
        let direct: f64 = (1..=7)
            .map(|n| n as f64 * binom(7, n) * 0.6f64.powi(n as i32))
            .sum::<f64>()
            / (1.6f64.powi(7) - 1.0);
        assert!((s.value - direct).abs() < 1e-13);
        assert!((f.mean_count(0.6) - direct).abs() < 1e-13);
    }

    #[test]
    fn precision_loss_is_reported() {
        let r = count_mixture(
            &PowerSeriesFamily::Poisson,
            1.0,
            |_| {
                Ok(SeriesSum {
                    value: 1.0,
                    terms: 1,
                    tail: 0.0,
                    noise: 1e-3,
                })
            },
            1e-6,
            "noisy",
        );
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }
}
