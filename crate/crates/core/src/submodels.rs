//! Closed-form cdf, pdf and hazard of the four named sub-models (EWB, EWP,
//! EWG, EWL), written out directly rather than through the generic
//! `C(θG)/C(θ)` composition so they can serve as an independent check on it.

use crate::error::{domain, Result};
use crate::ewps::EwpsParams;
use crate::power_series::PowerSeriesFamily;

struct Parts {
    /// `G(y) = (1 - e^{-(βy)^γ})^α`
    g: f64,
    /// `1 - G(y)` without cancellation
    sg: f64,
    /// `αγβ^γ y^{γ-1} e^{-(βy)^γ} (1 - e^{-(βy)^γ})^{α-1}`
    base: f64,
}

fn parts(p: &EwpsParams, y: f64) -> Result<Parts> {
    if !(y > 0.0) {
        return domain(format!("closed forms need y > 0, got {y}"));
    }
    let (a, b, c) = (p.alpha(), p.beta(), p.gamma());
    let e = (-(b * y).powf(c)).exp();
    let one = 1.0 - e;
    Ok(Parts {
        g: one.powf(a),
        sg: -(a * (-e).ln_1p()).exp_m1(),
        base: a * c * b.powf(c) * y.powf(c - 1.0) * e * one.powf(a - 1.0),
    })
}

fn unsupported<T>(p: &EwpsParams) -> Result<T> {
    domain(format!(
        "no closed-form sub-model for the {} family",
        p.family.name()
    ))
}

pub fn cdf(p: &EwpsParams, y: f64) -> Result<f64> {
    let Parts { g, .. } = parts(p, y)?;
    let th = p.theta;
    Ok(match p.family {
        PowerSeriesFamily::Binomial { m } => {
            let m = m as i32;
            let m = m as f64;
            (m * (th * g).ln_1p()).exp_m1() / (m * th.ln_1p()).exp_m1()
        }
        PowerSeriesFamily::Poisson => (th * g).exp_m1() / th.exp_m1(),
        PowerSeriesFamily::Geometric => (1.0 - th) * g / (1.0 - th * g),
        PowerSeriesFamily::Logarithmic => (-th * g).ln_1p() / (-th).ln_1p(),
        PowerSeriesFamily::Polynomial { .. } => return unsupported(p),
    })
}

pub fn pdf(p: &EwpsParams, y: f64) -> Result<f64> {
    let Parts { g, base, .. } = parts(p, y)?;
    let th = p.theta;
    Ok(match p.family {
        PowerSeriesFamily::Binomial { m } => {
            let mi = m as i32;
            m as f64 * th * base * (th * g + 1.0).powi(mi - 1) / (m as f64 * th.ln_1p()).exp_m1()
        }
        PowerSeriesFamily::Poisson => th * base * (th * g).exp() / th.exp_m1(),
        PowerSeriesFamily::Geometric => (1.0 - th) * base / (1.0 - th * g).powi(2),
        PowerSeriesFamily::Logarithmic => th * base / ((th * g - 1.0) * (-th).ln_1p()),
        PowerSeriesFamily::Polynomial { .. } => return unsupported(p),
    })
}

pub fn hazard(p: &EwpsParams, y: f64) -> Result<f64> {
    let Parts { g, sg, base } = parts(p, y)?;
    let th = p.theta;
    Ok(match p.family {
        PowerSeriesFamily::Binomial { m } => {
            // (1+θ)^m - (1+θG)^m = (1+θG)^m (e^{m ln(1 + θ(1-G)/(1+θG))} - 1)
            let m = m as f64;
            let diff = (m * (th * sg / (1.0 + th * g)).ln_1p()).exp_m1();
            m * th * base / ((th * g + 1.0) * diff)
        }
        PowerSeriesFamily::Poisson => th * base / (th * sg).exp_m1(),
        PowerSeriesFamily::Geometric => (1.0 - th) * base / ((1.0 - th * g) * sg),
        PowerSeriesFamily::Logarithmic => {
            th * base / ((th * g - 1.0) * (-th * sg / (1.0 - th * g)).ln_1p())
        }
        PowerSeriesFamily::Polynomial { .. } => return unsupported(p),
    })
}
