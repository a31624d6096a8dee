//! Argument parsing and cross-flag validation.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use saddle_flow_core::experiments::{example1, example2, multiplier_line_problem, random_qp, Figure};
use saddle_flow_core::integrate::{DEFAULT_ATOL, DEFAULT_RTOL, DEFAULT_STEP};
use saddle_flow_core::{AahParams, IntegratorConfig, PrimalDualState, SaddleProblem};

use crate::error::CliError;
use crate::io::load_problem;

/// Default output directory when neither `--out` nor `SADDLE_FLOW_OUT` is set.
pub const DEFAULT_OUT_DIR: &str = "saddle-flow-out";

#[derive(Debug, Parser)]
#[command(name = "saddle-flow", version, about = "Primal-dual gradient flows for linearly constrained convex problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a flow on a problem and write its diagnostic series
    Run(RunArgs),
    /// Regenerate the data behind a reference figure
    Replicate(ReplicateArgs),
    /// Print predicted decay rates for given constants
    Rates(RatesArgs),
    /// Run the invariant suite on a problem and report each check
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Built-in problem (example1, example2, multiplier-line, random) or a JSON problem file
    #[arg(long, default_value = "example1")]
    pub problem: String,
    /// Hessian multiple for example2 [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Seed of the random problem [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of variables of the random problem [default: 4]
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of constraints of the random problem [default: 2]
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlowKind {
    /// First-order flow on (x, λ)
    Ah,
    /// First-order flow on the two-block lift (x, y, λ)
    Gah,
    /// Accelerated second-order flow on the two-block lift
    Aah,
}

impl FlowKind {
    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::Ah => "ah",
            FlowKind::Gah => "gah",
            FlowKind::Aah => "aah",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodKind {
    /// Classical Runge–Kutta with a fixed step
    Rk4,
    /// Adaptive Dormand–Prince 5(4) with dense output
    Dp54,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = FlowKind::Ah)]
    pub flow: FlowKind,
    #[arg(long, value_enum, default_value_t = MethodKind::Rk4)]
    pub method: MethodKind,
    /// Final time of the run
    #[arg(long, default_value_t = 50.0)]
    pub horizon: f64,
    /// Step of the fixed-step method [default: 0.001]
    #[arg(long)]
    pub step: Option<f64>,
    /// Relative tolerance of the adaptive method [default: 1e-9]
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute tolerance of the adaptive method [default: 1e-12]
    #[arg(long)]
    pub atol: Option<f64>,
    /// Spacing of output samples
    #[arg(long, default_value_t = 0.05)]
    pub sample_interval: f64,
    /// Damping exponent of the accelerated flow [default: 3]
    #[arg(long)]
    pub nu: Option<f64>,
    /// Exploration coefficient of the accelerated flow, within [1/(nu-1), 1/2] [default: 0.5]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Augmentation of the Lagrangian in the accelerated flow [default: 0.5]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Start time of the accelerated flow [default: 1]
    #[arg(long)]
    pub t0: Option<f64>,
    /// Output directory
    #[arg(long, env = "SADDLE_FLOW_OUT", default_value = DEFAULT_OUT_DIR)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureArg {
    /// First-order and accelerated flows on Example 1
    Fig1,
    /// First-order flow on Example 2 for alpha in {1, 2, 3}
    Fig2,
}

impl From<FigureArg> for Figure {
    fn from(f: FigureArg) -> Self {
        match f {
            FigureArg::Fig1 => Figure::Fig1,
            FigureArg::Fig2 => Figure::Fig2,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReplicateArgs {
    #[arg(value_enum)]
    pub figure: FigureArg,
    /// Output directory
    #[arg(long, env = "SADDLE_FLOW_OUT", default_value = DEFAULT_OUT_DIR)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RatesArgs {
    /// Strong convexity constant
    #[arg(long)]
    pub alpha: f64,
    /// Lower bound of the constraint operator
    #[arg(long)]
    pub beta: f64,
    /// Upper bound of the Hessian
    #[arg(long)]
    pub gamma: f64,
    /// Treat the Hessian as alpha times the identity and report the damping regime
    #[arg(long)]
    pub scalar_hessian: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Final time of the trajectory checks
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
}

/// A resolved problem source.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Example1,
    Example2 { alpha: f64 },
    MultiplierLine,
    Random { seed: u64, n: usize, m: usize },
    File(PathBuf),
}

/// Initial multiplier of runs on the multiplier-line problem.
pub const MULTIPLIER_LINE_LAMBDA0: [f64; 2] = [4.0, -2.0];

impl ProblemSpec {
    /// File-name friendly label.
    pub fn label(&self) -> String {
        match self {
            ProblemSpec::Example1 => String::from("example1"),
            ProblemSpec::Example2 { alpha } => format!("example2_alpha{alpha}"),
            ProblemSpec::MultiplierLine => String::from("multiplier-line"),
            ProblemSpec::Random { seed, n, m } => format!("random_seed{seed}_n{n}_m{m}"),
            ProblemSpec::File(p) => {
                p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| String::from("problem"))
            }
        }
    }

    /// Problem and its reference initial point.
    pub fn load(&self) -> Result<(SaddleProblem, PrimalDualState), CliError> {
        Ok(match self {
            ProblemSpec::Example1 => {
                let ex = example1();
                (ex.problem, ex.initial)
            }
            ProblemSpec::Example2 { alpha } => {
                let ex = example2(*alpha);
                (ex.problem, ex.initial)
            }
            ProblemSpec::MultiplierLine => {
                (multiplier_line_problem(), PrimalDualState::new(vec![0.0], MULTIPLIER_LINE_LAMBDA0.to_vec()))
            }
            ProblemSpec::Random { seed, n, m } => {
                let qp = random_qp(*seed, *n, *m, (0.5, 1.0), (1.5, 3.0))?;
                let z0 = PrimalDualState::zeros(*n, *m);
                (qp.problem, z0)
            }
            ProblemSpec::File(path) => {
                let pf = load_problem(path)?;
                let p = pf.to_problem()?;
                let z0 = pf.initial(&p)?;
                (p, z0)
            }
        })
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn reject_unless(present: bool, allowed: bool, flag: &str, requirement: &str) -> Result<(), CliError> {
    if present && !allowed {
        return Err(usage(format!("{flag} is only valid {requirement}")));
    }
    Ok(())
}

fn positive(v: f64, flag: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("{flag} must be positive and finite, got {v}")))
    }
}

impl ProblemArgs {
    pub fn resolve(&self) -> Result<ProblemSpec, CliError> {
        let name = self.problem.as_str();
        reject_unless(self.alpha.is_some(), name == "example2", "--alpha", "with --problem example2")?;
        for (present, flag) in [(self.seed.is_some(), "--seed"), (self.n.is_some(), "--n"), (self.m.is_some(), "--m")] {
            reject_unless(present, name == "random", flag, "with --problem random")?;
        }
        Ok(match name {
            "example1" => ProblemSpec::Example1,
            "example2" => ProblemSpec::Example2 { alpha: positive(self.alpha.unwrap_or(1.0), "--alpha")? },
            "multiplier-line" => ProblemSpec::MultiplierLine,
            "random" => {
                let (n, m) = (self.n.unwrap_or(4), self.m.unwrap_or(2));
                if !(1 <= m && m <= n) {
                    return Err(usage(format!("--m must satisfy 1 <= m <= n, got n = {n}, m = {m}")));
                }
                ProblemSpec::Random { seed: self.seed.unwrap_or(0), n, m }
            }
            path => ProblemSpec::File(PathBuf::from(path)),
        })
    }
}

/// A fully validated `run` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub flow: FlowKind,
    pub integrator: IntegratorConfig,
    pub aah: AahParams,
    pub out: PathBuf,
    pub format: Format,
}

impl RunConfig {
    /// Start time of the run.
    pub fn t_start(&self) -> f64 {
        if self.flow == FlowKind::Aah {
            self.aah.t0
        } else {
            0.0
        }
    }
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let problem = self.problem.resolve()?;
        let aah = self.flow == FlowKind::Aah;
        for (present, flag) in [
            (self.nu.is_some(), "--nu"),
            (self.theta.is_some(), "--theta"),
            (self.mu.is_some(), "--mu"),
            (self.t0.is_some(), "--t0"),
        ] {
            reject_unless(present, aah, flag, "with --flow aah")?;
        }
        let fixed = self.method == MethodKind::Rk4;
        reject_unless(self.step.is_some(), fixed, "--step", "with --method rk4")?;
        reject_unless(self.rtol.is_some(), !fixed, "--rtol", "with --method dp54")?;
        reject_unless(self.atol.is_some(), !fixed, "--atol", "with --method dp54")?;

        let d = AahParams::default();
        let params = AahParams::new(
            self.nu.unwrap_or(d.nu),
            self.theta.unwrap_or(d.theta),
            self.mu.unwrap_or(d.mu),
            self.t0.unwrap_or(d.t0),
        )
        .map_err(|e| usage(format!("invalid accelerated-flow parameters: {e}")))?;

        let horizon = positive(self.horizon, "--horizon")?;
        let sample = positive(self.sample_interval, "--sample-interval")?;
        let integrator = if fixed {
            let step = positive(self.step.unwrap_or(DEFAULT_STEP), "--step")?;
            if sample < step {
                return Err(usage("--sample-interval must be at least --step"));
            }
            IntegratorConfig::fixed(step, horizon, sample)
        } else {
            let rtol = positive(self.rtol.unwrap_or(DEFAULT_RTOL), "--rtol")?;
            let atol = positive(self.atol.unwrap_or(DEFAULT_ATOL), "--atol")?;
            IntegratorConfig::adaptive(rtol, atol, horizon, sample)
        };
        let cfg =
            RunConfig { problem, flow: self.flow, integrator, aah: params, out: self.out.clone(), format: self.format };
        if !(horizon > cfg.t_start()) {
            return Err(usage(format!("--horizon must exceed the start time {}", cfg.t_start())));
        }
        Ok(cfg)
    }
}
