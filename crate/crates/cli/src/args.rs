use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Exact, Monte Carlo and large-deviation analysis of the k-draw elephant
/// random walk.
///
/// Defaults: initial condition (M=2, m=1), seed 0, λ grid geometric
/// 1e-3..10 with 200 points.
#[derive(Parser, Debug)]
#[command(name = "erw", version)]
pub struct Cli {
    /// Worker thread cap [default: machine parallelism]; results do not depend on it
    #[arg(long, global = true, env = "ERW_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Fixed points of the urn function with their crossing type
    FixedPoints(FixedPointsArgs),
    /// Critical memory parameters p_c, p*, p**
    Critical(CriticalArgs),
    /// Exact law of the positive-step count at time N
    ExactDist(ExactDistArgs),
    /// Entropy density: finite-N profile or extrapolation over several N
    Entropy(EntropyArgs),
    /// Monte Carlo ensemble of final counts
    Mc(McArgs),
    /// Level-crossing statistics of y_t
    Crossings(CrossingsArgs),
    /// Zero-cost trajectory ending at a given share
    Trajectory(TrajectoryArgs),
    /// Variational optimal path and its rate
    OptimalPath(OptimalPathArgs),
    /// Cumulant generating function
    Cgf(CgfArgs),
    /// Entropy density by Legendre transform of the CGF
    Legendre(LegendreArgs),
    /// Region classification over a (p, x) grid
    PhaseScan(PhaseScanArgs),
    /// Power-law decay exponent of an interval mass
    DecayExponent(DecayArgs),
    /// Interval mass conservation along zero-cost paths
    CurrentCheck(CurrentCheckArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UrnKind {
    Majority,
    Linear,
    Kgw,
    StepLimit,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct UrnArgs {
    /// Urn function family
    #[arg(long, value_enum, default_value = "majority")]
    pub kind: UrnKind,
    /// Number of memory draws (odd)
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Probability of following the majority (majority, step-limit)
    #[arg(long, default_value_t = 0.9)]
    pub p: f64,
    /// Intercept of the linear urn π(y) = a + b y
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    /// Slope of the linear urn
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
    /// Coupling of the tanh urn
    #[arg(long = "j", default_value_t = 1.0)]
    pub j: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct InitArgs {
    /// Number of initial frozen steps M
    #[arg(long = "init-steps", default_value_t = 2)]
    pub init_steps: usize,
    /// Positive steps among the initial ones m
    #[arg(long = "init-positive", default_value_t = 1)]
    pub init_positive: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Output file; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Also write a matplotlib script next to the output file
    #[arg(long)]
    pub emit_plot_script: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointsArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CriticalArgs {
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Report the thresholds of the step-limit urn instead
    #[arg(long)]
    pub step_limit: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ExactDistArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub init: InitArgs,
    /// Total number of steps N
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub init: InitArgs,
    /// One N for the finite-N profile; several (comma separated) to extrapolate
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub y_min: f64,
    #[arg(long, default_value_t = 0.95)]
    pub y_max: f64,
    #[arg(long, default_value_t = 46)]
    pub y_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismArg {
    Direct,
    Collapsed,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct McArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "collapsed")]
    pub mechanism: MechanismArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CrossingsArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reference level for y_t
    #[arg(long, default_value_t = 0.5)]
    pub level: f64,
    /// Report the fraction of samples with no crossing after this time
    #[arg(long, default_value_t = 1000)]
    pub after: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    /// Final share ψ(1)
    #[arg(long)]
    pub y: f64,
    /// Smallest τ of the log-spaced grid
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_001)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OptimalPathArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[arg(long)]
    pub y: f64,
    /// Number of τ cells T
    #[arg(long, default_value_t = 200)]
    pub time_steps: usize,
    /// Number of φ cells S (a multiple of T)
    #[arg(long, default_value_t = 12_800)]
    pub phi_levels: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CgfSource {
    Ode,
    ClosedForm,
    FiniteN,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    /// log E[e^{+λn}] / N
    Increasing,
    /// log E[e^{-λn}] / N
    Decreasing,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CgfOptions {
    #[arg(long, value_enum, default_value = "ode")]
    pub source: CgfSource,
    #[arg(long, value_enum, default_value = "increasing")]
    pub convention: ConventionArg,
    /// N for the finite-N source
    #[arg(long, default_value_t = 8000)]
    pub n: usize,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 200)]
    pub lambda_points: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CgfArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub cgf: CgfOptions,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LegendreArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub cgf: CgfOptions,
    #[arg(long, default_value_t = 0.5)]
    pub y_min: f64,
    #[arg(long, default_value_t = 0.95)]
    pub y_max: f64,
    #[arg(long, default_value_t = 46)]
    pub y_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PhaseScanArgs {
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long, default_value_t = 0.5)]
    pub p_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p_max: f64,
    #[arg(long, default_value_t = 101)]
    pub p_points: usize,
    /// Points on x ∈ [-1, 1]
    #[arg(long, default_value_t = 201)]
    pub x_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DecayArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long, default_value_t = 0.4)]
    pub y1: f64,
    #[arg(long, default_value_t = 0.6)]
    pub y2: f64,
    /// System sizes, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000,16000")]
    pub n: Vec<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CurrentCheckArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[arg(long)]
    pub y1: f64,
    #[arg(long)]
    pub y2: f64,
    /// (N, τ) pairs as N:τ, comma separated, with τN integral
    #[arg(long, value_delimiter = ',', default_value = "8000:0.5")]
    pub pairs: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FixedPoints(_) => "fixed-points",
            Command::Critical(_) => "critical",
            Command::ExactDist(_) => "exact-dist",
            Command::Entropy(_) => "entropy",
            Command::Mc(_) => "mc",
            Command::Crossings(_) => "crossings",
            Command::Trajectory(_) => "trajectory",
            Command::OptimalPath(_) => "optimal-path",
            Command::Cgf(_) => "cgf",
            Command::Legendre(_) => "legendre",
            Command::PhaseScan(_) => "phase-scan",
            Command::DecayExponent(_) => "decay-exponent",
            Command::CurrentCheck(_) => "current-check",
        }
    }

    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::FixedPoints(a) => &a.output,
            Command::Critical(a) => &a.output,
            Command::ExactDist(a) => &a.output,
            Command::Entropy(a) => &a.output,
            Command::Mc(a) => &a.output,
            Command::Crossings(a) => &a.output,
            Command::Trajectory(a) => &a.output,
            Command::OptimalPath(a) => &a.output,
            Command::Cgf(a) => &a.output,
            Command::Legendre(a) => &a.output,
            Command::PhaseScan(a) => &a.output,
            Command::DecayExponent(a) => &a.output,
            Command::CurrentCheck(a) => &a.output,
        }
    }
}
