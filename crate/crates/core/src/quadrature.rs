//! Globally adaptive 21-point Gauss–Kronrod quadrature with the
//! half-line transforms used by every integral over a lifetime density.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

/// Tolerances for [`integrate`] and the half-line helpers.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-12,
            abs: 1e-15,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Self {
            rel,
            ..Self::default()
        }
    }
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = sanitize(f(center));
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv = [(0.0, 0.0); 10];
    for (j, slot) in fv.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = sanitize(f(center - dx));
        let f2 = sanitize(f(center + dx));
        *slot = (f1, f2);
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for (j, &(f1, f2)) in fv.iter().enumerate() {
        resasc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let result = resk * half;
    let resasc = resasc * half.abs();
    let resabs = resabs * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(round);
    }
    (result, err)
}

// Transformed integrands can hit 0·∞ at the far end of a mapping; those
// points carry no mass.
#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Integrate `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let (v, e) = kronrod(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a,
        b,
        value: v,
        err: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut count = 1;
    while total_err > tol.abs.max(tol.rel * total.abs()) && count < tol.max_intervals {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        count += 1;
    }
    // re-sum to shed accumulated update error
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let abs_error: f64 = heap.iter().map(|p| p.err).sum();
    if !value.is_finite() {
        return Err(Error::Integrability(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    let target = tol.abs.max(tol.rel * value.abs());
    if abs_error > 1e4 * target && abs_error > 1e-8 * value.abs().max(1e-300) {
        return Err(Error::Integrability(format!(
            "quadrature on [{a}, {b}] stalled at {value:e} ± {abs_error:e} after {count} subdivisions"
        )));
    }
    Ok(Estimate {
        value,
        abs_error,
        intervals: count,
    })
}

/// `∫_a^∞ f(x) dx` via `x = a + scale·t/(1-t)`.
///
/// Reports an integrability error when `x f(x)` has not decayed far out in
/// the tail, which is where the mapped integrand of a divergent integral
/// would hide its mass.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let est = integrate(
        |t| {
            let one_minus = 1.0 - t;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let x = a + scale * t / one_minus;
            if !x.is_finite() {
                return 0.0;
            }
            f(x) * scale / (one_minus * one_minus)
        },
        0.0,
        1.0,
        tol,
    )?;
    let far = a + scale * 1e12;
    let tail = (far * f(far)).abs();
    if tail.is_finite() && tail > tol.abs.max(tol.rel * est.value.abs()) {
        return Err(Error::Integrability(format!(
            "integrand has not decayed at x = {far:e} (x f(x) = {tail:e})"
        )));
    }
    Ok(est)
}

/// `∫_0^b f(x) dx` via `x = b·e^{-s}`, which turns integrable power-law
/// singularities at the origin into exponential decay.
///
/// Reports an integrability error when `x f(x)` is still significant at
/// `x = b·e^{-600}`, i.e. the singularity is not integrable in double
/// precision.
pub fn integrate_from_zero<F: FnMut(f64) -> f64>(
    mut f: F,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if b <= 0.0 {
        return Ok(Estimate {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let g = |s: f64, f: &mut F| {
        let x = b * (-s).exp();
        if x <= 0.0 {
            return 0.0;
        }
        f(x) * x
    };
    let est = integrate(
        |t| {
            let one_minus = 1.0 - t;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let s = t / one_minus;
            g(s, &mut f) / (one_minus * one_minus)
        },
        0.0,
        1.0,
        tol,
    )?;
    let tail = g(600.0, &mut f).abs();
    if !tail.is_finite() || tail > tol.abs.max(tol.rel * est.value.abs()) {
        return Err(Error::Integrability(format!(
            "integrand is not integrable at the origin (x f(x) = {tail:e} at x = {:e})",
            b * (-600.0f64).exp()
        )));
    }
    Ok(est)
}

/// `∫_0^∞ f(x) dx`, split at `pivot` (typically a median of the density).
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    mut f: F,
    pivot: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let lo = integrate_from_zero(&mut f, pivot, tol)?;
    let hi = integrate_to_infinity(&mut f, pivot, pivot, tol)?;
    Ok(Estimate {
        value: lo.value + hi.value,
        abs_error: lo.abs_error + hi.abs_error,
        intervals: lo.intervals + hi.intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((r.value - 10.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_half_line() {
        let r = integrate_half_line(|x| (-x).exp(), 1.0, Tolerance::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-13, "{}", r.value);
    }

    #[test]
    fn inverse_sqrt_singularity_at_origin() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = integrate_from_zero(|x| x.powf(-0.5), 1.0, Tolerance::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12, "{}", r.value);
        // ∫_0^∞ x^{-0.7} e^{-x} dx = Γ(0.3)
        let g = crate::special::gamma(0.3);
        let r =
            integrate_half_line(|x| x.powf(-0.7) * (-x).exp(), 1.0, Tolerance::default()).unwrap();
        assert!((r.value - g).abs() < 1e-11 * g, "{} vs {g}", r.value);
    }

    #[test]
    fn divergent_integral_is_reported() {
        assert!(integrate_from_zero(|x| 1.0 / x, 1.0, Tolerance::default()).is_err());
        assert!(integrate_to_infinity(|x| 1.0 / x, 1.0, 1.0, Tolerance::default()).is_err());
    }
}
