//! Execution of parsed subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use saddle_flow_core::diagnostics::{diagnostics_series, theoretical_rates, DiagnosticsSeries};
use saddle_flow_core::experiments::{replicate, structured_lift, Figure};
use saddle_flow_core::flows::{AahFlow, AhFlow, GahFlow, SecondOrderState, StructuredPoint};
use saddle_flow_core::{integrate, SaddlePoint};

use crate::cli::{Cli, Command, FlowKind, Format, RatesArgs, RunConfig};
use crate::error::CliError;
use crate::io::{ensure_dir, summary_json, write_csv, write_file, RunRecord};
use crate::validate::validate_problem;

fn out_err(e: std::io::Error) -> CliError {
    CliError::io(Path::new("<stdout>"), e)
}

/// Runs a parsed command, writing human-readable progress to `stdout`.
pub fn execute<W: Write>(cli: Cli, stdout: &mut W) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => run(&args.resolve()?, stdout),
        Command::Replicate(args) => replicate_to(args.figure.into(), &args.out, stdout).map(|_| ()),
        Command::Rates(args) => rates(&args, stdout),
        Command::Validate(args) => {
            let source = args.problem.resolve()?;
            if !(args.horizon > 0.0) {
                return Err(CliError::Usage(format!("--horizon must be positive, got {}", args.horizon)));
            }
            let (p, z0) = source.load()?;
            let checks = validate_problem(&p, &z0, args.horizon)?;
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                writeln!(stdout, "{tag} {}: {}", c.name, c.detail).map_err(out_err)?;
            }
            match checks.iter().find(|c| !c.passed) {
                Some(c) => Err(CliError::Validation(String::from(c.name))),
                None => Ok(()),
            }
        }
    }
}

/// Integrates the configured flow and returns the diagnostics with the
/// saddle point they are anchored at.
pub fn simulate(cfg: &RunConfig) -> Result<(DiagnosticsSeries, SaddlePoint), CliError> {
    let (p, z0) = cfg.problem.load()?;
    let saddle = p.certified_saddle()?;
    Ok(match cfg.flow {
        FlowKind::Ah => {
            let traj = integrate(&AhFlow::new(&p), &z0.to_flat(), 0.0, &cfg.integrator)?;
            (diagnostics_series(&p, &traj, &saddle), saddle)
        }
        FlowKind::Gah | FlowKind::Aah => {
            let lift = structured_lift(&p);
            let (_, lifted) = lift.kkt_solve()?;
            let start = StructuredPoint { x: z0.x.clone(), y: vec![0.0], lambda: z0.lambda.clone() };
            let traj = if cfg.flow == FlowKind::Gah {
                integrate(&GahFlow { problem: &lift }, &start.to_flat(), 0.0, &cfg.integrator)?
            } else {
                let rest = StructuredPoint { x: vec![0.0; p.n()], y: vec![0.0], lambda: vec![0.0; p.m()] };
                let s0 = SecondOrderState { position: start, velocity: rest };
                integrate(&AahFlow::new(&lift, cfg.aah), &s0.to_flat(), cfg.aah.t0, &cfg.integrator)?
            };
            (diagnostics_series(&lift, &traj, &lifted), lifted)
        }
    })
}

pub fn run<W: Write>(cfg: &RunConfig, stdout: &mut W) -> Result<(), CliError> {
    let (ds, saddle) = simulate(cfg)?;
    ensure_dir(&cfg.out)?;
    let label = cfg.problem.label();
    let flow = cfg.flow.name();
    let (path, bytes) = match cfg.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(&mut buf, &ds).map_err(out_err)?;
            (cfg.out.join(format!("{label}_{flow}.csv")), buf)
        }
        Format::Json => {
            let np = saddle.xi.len();
            let record = RunRecord {
                problem: &label,
                flow,
                saddle_x: &saddle.xi[..np],
                saddle_lambda: &saddle.eta,
                t: &ds.times,
                gap: &ds.gap,
                vel_sq: &ds.vel_sq,
                err_sq_full: &ds.err_sq_full,
                err_sq_primal: &ds.err_sq_primal,
                cesaro_gap: &ds.cesaro_gap,
            };
            let mut s = serde_json::to_string_pretty(&record).expect("record serializes");
            s.push('\n');
            (cfg.out.join(format!("{label}_{flow}.json")), s.into_bytes())
        }
    };
    write_file(&path, &bytes)?;
    let last = ds.len() - 1;
    writeln!(
        stdout,
        "wrote {} ({} samples); at t = {}: gap {:.6e}, vel_sq {:.6e}, err_sq_full {:.6e}",
        path.display(),
        ds.len(),
        ds.times[last],
        ds.gap[last],
        ds.vel_sq[last],
        ds.err_sq_full[last]
    )
    .map_err(out_err)
}

/// Writes one CSV per curve and a JSON rate summary; returns the written
/// paths in order.
pub fn replicate_to<W: Write>(figure: Figure, out: &Path, stdout: &mut W) -> Result<Vec<PathBuf>, CliError> {
    let curves = replicate(figure)?;
    ensure_dir(out)?;
    let mut written = Vec::new();
    for c in &curves {
        let mut buf = Vec::new();
        write_csv(&mut buf, &c.series).map_err(out_err)?;
        let path = out.join(format!("{}.csv", c.id));
        write_file(&path, &buf)?;
        written.push(path);
    }
    let path = out.join(format!("{}_summary.json", figure.id()));
    write_file(&path, summary_json(&curves).as_bytes())?;
    written.push(path);
    for c in &curves {
        for s in &c.summaries {
            writeln!(
                stdout,
                "{}: fitted rate {:.5}, theoretical {:.5}, r² {:.6}, {}",
                s.curve, s.fitted_rate, s.theoretical_rate, s.r_squared, s.regime
            )
            .map_err(out_err)?;
        }
    }
    for p in &written {
        writeln!(stdout, "wrote {}", p.display()).map_err(out_err)?;
    }
    Ok(written)
}

pub fn rates<W: Write>(args: &RatesArgs, stdout: &mut W) -> Result<(), CliError> {
    let r = theoretical_rates(args.alpha, args.beta, args.gamma, args.scalar_hessian)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut text = format!("rho={}\ncase={}\ndiscriminant={}\n", r.rho, r.case.label(), r.case_discriminant);
    if let Some(regime) = r.regime {
        text.push_str(&format!("regime={}\n", regime.label()));
    }
    if let Some(delta) = r.delta {
        text.push_str(&format!("delta={delta}\n"));
    }
    text.push_str(&format!("exponent={}\npoly_degree={}\n", r.predicted_exponent, r.poly_degree));
    stdout.write_all(text.as_bytes()).map_err(out_err)
}
