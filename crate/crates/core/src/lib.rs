//! Exponentiated Weibull power series (EWPS) lifetime distributions.
//!
//! The EWPS law is the maximum of `N` independent exponentiated Weibull
//! lifetimes where `N` follows a zero-truncated power-series distribution.

pub mod analytics;
pub mod dataset;
mod dd;
pub mod error;
pub mod ew;
pub mod ewps;
pub mod gof;
pub mod inference;
pub mod power_series;
pub mod quadrature;
pub mod series;
pub mod special;
pub mod submodels;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use ew::EwParams;
pub use ewps::{EwpsParams, MomentMethod, Sampler};
pub use inference::{FitMethod, FitResult, Model, ParamVector};
pub use power_series::{power_coeffs, PowerSeriesFamily};
