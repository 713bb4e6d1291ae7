use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ewps",
    version,
    about = "Fit, compare and simulate exponentiated Weibull power series lifetime models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum likelihood fit with standard errors and confidence intervals.
    Fit(FitArgs),
    /// Fit EWG, EWP, EWL, EWB, EW and Weibull and rank them by AIC.
    Compare(CompareArgs),
    /// Draw a seeded random sample.
    Sample(SampleArgs),
    /// Tabulate pdf, cdf, survival and hazard on a grid.
    Table(TableArgs),
    /// Empirical scaled TTT transform and survival steps of a dataset.
    Ttt(TttArgs),
    /// Goodness-of-fit report for given or fitted parameters.
    Gof(GofArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Ewps,
    Ew,
    Weibull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Geometric,
    Poisson,
    Logarithmic,
    Binomial,
    Polynomial,
    /// Geometric, Poisson, logarithmic and binomial in turn.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
    /// Aligned columns with 4 decimals.
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Direct,
    Em,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Inverse,
    Compound,
}

#[derive(Debug, Clone, Args)]
pub struct ModelOpts {
    #[arg(long, value_enum, default_value = "ewps")]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "geometric")]
    pub family: FamilyArg,
    /// Number of binomial replicas.
    #[arg(long, default_value_t = 2)]
    pub m: u32,
    /// Coefficients a_1,a_2,... of a literal polynomial family.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamOpts {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FormatOpts {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelOpts,
    #[arg(long, value_enum, default_value = "direct")]
    pub method: MethodArg,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Relative parameter change that stops the EM iteration.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub format: FormatOpts,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Number of binomial replicas for the EWB row.
    #[arg(long, default_value_t = 2)]
    pub m: u32,
    #[command(flatten)]
    pub format: FormatOpts,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelOpts,
    #[command(flatten)]
    pub params: ParamOpts,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "inverse")]
    pub sampler: SamplerArg,
    #[command(flatten)]
    pub format: FormatOpts,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub model: ModelOpts,
    #[command(flatten)]
    pub params: ParamOpts,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Lower grid end; defaults to the 0.001 quantile.
    #[arg(long)]
    pub from: Option<f64>,
    /// Upper grid end; defaults to the 0.999 quantile.
    #[arg(long)]
    pub to: Option<f64>,
    #[command(flatten)]
    pub format: FormatOpts,
}

#[derive(Debug, Args)]
pub struct TttArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub format: FormatOpts,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Parameters to test; when omitted the model is fitted first.
    #[command(flatten)]
    pub params: ParamOpts,
    #[command(flatten)]
    pub format: FormatOpts,
}
