//! Invariant suite run by `saddle-flow validate`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Uniform};
use saddle_flow_core::diagnostics::{
    cesaro_bound_check, diagnostics_series, fit_rate, monotonicity_violations, FitMode,
};
use saddle_flow_core::experiments::structured_lift;
use saddle_flow_core::flows::{ah_field, lagrangian_identity_residual, AhFlow, GahFlow, StructuredPoint};
use saddle_flow_core::integrate::{field_spectrum, slowest_decay_rate};
use saddle_flow_core::linalg::{self, dot, norm, norm_sq};
use saddle_flow_core::model::{condition_c_residual, SADDLE_CERT_TOL};
use saddle_flow_core::{integrate, IntegratorConfig, PrimalDualState, SaddleProblem};

use crate::error::CliError;

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Random pairs and states drawn per algebraic check.
pub const SAMPLES: usize = 100;
const SEED: u64 = 0x5add1e;

fn random_state(rng: &mut ChaCha20Rng, n: usize, m: usize, scale: f64) -> PrimalDualState {
    let u = Uniform::new_inclusive(-scale, scale).expect("ordered range");
    PrimalDualState::new((0..n).map(|_| u.sample(rng)).collect(), (0..m).map(|_| u.sample(rng)).collect())
}

/// Runs every check on `p`, integrating the first-order flow from `z0` to
/// `horizon`. Fails early only when `p` has no certified saddle point.
pub fn validate_problem(p: &SaddleProblem, z0: &PrimalDualState, horizon: f64) -> Result<Vec<Check>, CliError> {
    let (n, m) = (p.n(), p.m());
    let saddle = p.certified_saddle()?;
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut checks = Vec::new();

    let worst = saddle.stationarity_residual.max(saddle.feasibility_residual);
    checks.push(Check::new("kkt residuals", worst <= SADDLE_CERT_TOL, format!("max residual {worst:.3e}")));

    let op = norm(&p.saddle_operator(&saddle.state())?.to_flat());
    checks.push(Check::new("operator vanishes at saddle", op <= 1e-10, format!("|T(z*)| = {op:.3e}")));

    let mut worst_mono = f64::INFINITY;
    let mut worst_identity = 0.0_f64;
    let mut worst_c = 0.0_f64;
    for _ in 0..SAMPLES {
        let z = random_state(&mut rng, n, m, 10.0);
        let w = random_state(&mut rng, n, m, 10.0);
        let dz = linalg::sub(&z.to_flat(), &w.to_flat());
        let dt = linalg::sub(&p.saddle_operator(&z)?.to_flat(), &p.saddle_operator(&w)?.to_flat());
        worst_mono = worst_mono.min(dot(&dt, &dz) / norm_sq(&dz).max(f64::MIN_POSITIVE));

        let zdot = ah_field(p, &z)?;
        let r = lagrangian_identity_residual(p, &z, &zdot)? / (1.0 + zdot.norm_sq());
        worst_identity = worst_identity.max(r);

        let c = condition_c_residual(&p.objective, &z.x, &w.x)?;
        worst_c = worst_c.max(c.abs() / (1.0 + norm_sq(&linalg::sub(&z.x, &w.x))));
    }
    checks.push(Check::new(
        "operator monotonicity",
        worst_mono >= -1e-12,
        format!("min normalized inner product {worst_mono:.3e}"),
    ));
    checks.push(Check::new(
        "lagrangian identity",
        worst_identity <= 1e-12,
        format!("max relative residual {worst_identity:.3e}"),
    ));
    checks.push(Check::new(
        "condition c for quadratics",
        worst_c <= 1e-12,
        format!("max relative residual {worst_c:.3e}"),
    ));

    let mut worst_idem = 0.0_f64;
    for _ in 0..SAMPLES {
        let l = random_state(&mut rng, 0, m, 10.0).lambda;
        let pl = p.multiplier_projection(&saddle.xi, &l)?;
        let ppl = p.multiplier_projection(&saddle.xi, &pl)?;
        worst_idem = worst_idem.max(linalg::dist_sq(&pl, &ppl).sqrt() / (1.0 + norm(&pl)));
    }
    checks.push(Check::new(
        "multiplier projection idempotent",
        worst_idem <= 1e-10,
        format!("max deviation {worst_idem:.3e}"),
    ));

    let flow = AhFlow::new(p);
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-13, horizon, horizon / 1000.0);
    let traj = integrate(&flow, &z0.to_flat(), 0.0, &cfg)?;
    checks.push(Check::new(
        "trajectory invariants",
        traj.check_invariants(&flow, 0.0),
        format!("{} samples", traj.len()),
    ));

    let ds = diagnostics_series(p, &traj, &saddle);
    let min_gap = ds.gap.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(Check::new("gap nonnegative", min_gap >= -1e-9, format!("min gap {min_gap:.3e}")));
    let vel = monotonicity_violations(&ds.vel_sq, 1e-9);
    checks.push(Check::new("velocity non-increasing", vel.is_clean(), format!("{} violations", vel.count)));
    let dist = monotonicity_violations(&ds.err_sq_full, 1e-9);
    checks.push(Check::new("distance non-increasing", dist.is_clean(), format!("{} violations", dist.count)));
    let slack = cesaro_bound_check(&ds, ds.err_sq_full[0]);
    checks.push(Check::new("ergodic gap bound", slack <= 1e-6, format!("max excess {slack:.3e}")));

    let rate_check = match slowest_decay_rate(&field_spectrum(p), 1e-9) {
        Some(slow) => {
            let window = (0.5 * horizon, 0.9 * horizon);
            match fit_rate(&ds.times, &ds.err_sq_full, window, FitMode::Raw) {
                Ok(fit) if fit.r_squared >= 0.99 => {
                    let rel = (fit.rate() - 2.0 * slow).abs() / (2.0 * slow);
                    Check::new(
                        "rate matches spectrum",
                        rel <= 0.05,
                        format!("fitted {:.5}, spectral {:.5}", fit.rate(), 2.0 * slow),
                    )
                }
                Ok(fit) => {
                    Check::new("rate matches spectrum", true, format!("not applicable, r² = {:.4}", fit.r_squared))
                }
                Err(e) => Check::new("rate matches spectrum", true, format!("not applicable, {e}")),
            }
        }
        None => Check::new("rate matches spectrum", true, String::from("not applicable, no decaying mode")),
    };
    checks.push(rate_check);

    let lift = structured_lift(p);
    let start = StructuredPoint { x: z0.x.clone(), y: vec![0.0], lambda: z0.lambda.clone() };
    let g = integrate(&GahFlow { problem: &lift }, &start.to_flat(), 0.0, &cfg)?;
    let mut worst_lift = 0.0_f64;
    for (zg, za) in g.states.iter().zip(&traj.states) {
        let mut xl = zg[..n].to_vec();
        xl.extend_from_slice(&zg[n + 1..]);
        worst_lift = worst_lift.max(linalg::dist_sq(&xl, za).sqrt() / (1.0 + norm(za)));
    }
    checks.push(Check::new("lift preserves dynamics", worst_lift <= 1e-8, format!("max deviation {worst_lift:.3e}")));

    Ok(checks)
}
