//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured quantity and wall time. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Uniform};
use saddle_flow_core::diagnostics::{
    cesaro_bound_check, diagnostics_series, exp_bound_supremum, fit_rate, monotonicity_violations, weighted_tail_ratio,
    FitMode,
};
use saddle_flow_core::experiments::{
    example1, example2, fig1_aah_initial, fig2_curve, fit_power_law, multiplier_line_problem, random_qp, run_aah,
    structured_lift,
};
use saddle_flow_core::flows::{
    ah_field, ah_second_derivative, lagrangian_identity_residual, oscillator_residual_primal, AahParams, AhFlow,
    GahFlow, StructuredPoint,
};
use saddle_flow_core::integrate::{field_spectrum, slowest_decay_rate, LinearFlowOracle};
use saddle_flow_core::linalg::dist_sq;
use saddle_flow_core::{integrate, IntegratorConfig, PrimalDualState};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Criterion = fn() -> Outcome;

fn kkt_oracle() -> Outcome {
    let p = example1().problem;
    let _ = p.kkt_solve();
    let start = Instant::now();
    let sp = p.kkt_solve().expect("example 1 has a saddle point");
    let elapsed = start.elapsed();
    let err = dist_sq(&sp.xi, &[1.0, 1.0]).max(dist_sq(&sp.eta, &[-0.5, -0.5])).sqrt();
    let res = sp.stationarity_residual.max(sp.feasibility_residual);
    outcome(
        err <= 1e-12 && res <= 1e-12 && elapsed < Duration::from_millis(1),
        format!("xi = {:?}, eta = {:?}, residual {res:.1e}, solve {elapsed:?}", sp.xi, sp.eta),
    )
}

fn lagrangian_identity() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let u = Uniform::new_inclusive(-50.0, 50.0).expect("ordered range");
    let mut worst = 0.0_f64;
    let mut states = 0;
    let mut check = |p: &saddle_flow_core::SaddleProblem, rng: &mut ChaCha20Rng, count: usize| {
        for _ in 0..count {
            let z = PrimalDualState::new(
                (0..p.n()).map(|_| u.sample(rng)).collect(),
                (0..p.m()).map(|_| u.sample(rng)).collect(),
            );
            let zdot = ah_field(p, &z).expect("dimensions match");
            let r = lagrangian_identity_residual(p, &z, &zdot).expect("dimensions match");
            worst = worst.max(r / (1.0 + zdot.norm_sq()));
            states += 1;
        }
    };
    check(&example1().problem, &mut rng, 10_000);
    for seed in 0..50 {
        let qp = random_qp(seed, 6, 3, (0.1, 1.0), (1.0, 10.0)).expect("valid arguments");
        check(&qp.problem, &mut rng, 200);
    }
    outcome(worst <= 1e-12, format!("max residual / (1 + |z'|^2) = {worst:.2e} over {states} states"))
}

fn example1_dp54(horizon: f64, interval: f64) -> saddle_flow_core::diagnostics::DiagnosticsSeries {
    let ex = example1();
    let sp = ex.problem.certified_saddle().expect("certified");
    let traj = integrate(
        &AhFlow::new(&ex.problem),
        &ex.initial.to_flat(),
        0.0,
        &IntegratorConfig::adaptive(1e-9, 1e-12, horizon, interval),
    )
    .expect("integrates");
    diagnostics_series(&ex.problem, &traj, &sp)
}

fn monotonicity() -> Outcome {
    let ds = example1_dp54(50.0, 0.01);
    let v = monotonicity_violations(&ds.vel_sq, 1e-9);
    let d = monotonicity_violations(&ds.err_sq_full, 1e-9);
    outcome(
        v.is_clean() && d.is_clean(),
        format!("{} samples, violations: vel_sq {}, err_sq_full {}", ds.len(), v.count, d.count),
    )
}

fn ergodic_bound() -> Outcome {
    let ds = example1_dp54(50.0, 0.01);
    let bound = 0.5 * ds.err_sq_full[0];
    let worst = (0..ds.len())
        .filter(|&i| ds.times[i] >= 1.0)
        .map(|i| ds.elapsed(i) * ds.cesaro_gap[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let whole = cesaro_bound_check(&ds, ds.err_sq_full[0]);
    outcome(
        (bound - 4.25).abs() < 1e-12 && worst <= 4.25 + 1e-6 && whole <= 1e-6,
        format!("max t*cesaro_gap on [1,50] = {worst:.6} vs bound {bound}"),
    )
}

fn tail_decay() -> Outcome {
    let ds = example1_dp54(50.0, 0.05);
    let gap = weighted_tail_ratio(&ds.times, &ds.gap, 5.0, 50.0, 0.5);
    let vel = weighted_tail_ratio(&ds.times, &ds.velocity_norm(), 5.0, 50.0, 0.5);
    outcome(gap <= 0.1 && vel <= 0.1, format!("sqrt(t)*gap ratio {gap:.2e}, sqrt(t)*|z'| ratio {vel:.2e}"))
}

fn exponential_rate() -> Outcome {
    let ex = example1();
    let sp = ex.problem.certified_saddle().expect("certified");
    let traj =
        integrate(&AhFlow::new(&ex.problem), &ex.initial.to_flat(), 0.0, &IntegratorConfig::fixed(1e-3, 50.0, 0.01))
            .expect("integrates");
    let ds = diagnostics_series(&ex.problem, &traj, &sp);
    let fit = fit_rate(&ds.times, &ds.err_sq_primal, (20.0, 40.0), FitMode::Envelope).expect("enough maxima");
    let sup = exp_bound_supremum(&ds.times, &ds.err_sq_primal, 0.5).expect("positive rate");
    outcome(
        fit.slope <= -0.475 && sup.value.is_finite() && sup.time < 10.0,
        format!(
            "envelope slope {:.5} (r^2 {:.6}), sup e^(t/2) err_sq_primal = {:.4} at t = {}",
            fit.slope, fit.r_squared, sup.value, sup.time
        ),
    )
}

fn trichotomy() -> Outcome {
    let targets = [(1.0, 1.0, 0.10), (2.0, 2.0, 0.10), (3.0, 3.0 - 5f64.sqrt(), 0.05)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (alpha, target, tol) in targets {
        let curve = fig2_curve(alpha).expect("runs");
        let fitted = curve.summaries[0].fitted_rate;
        let spectral = 2.0 * slowest_decay_rate(&field_spectrum(&example2(alpha).problem), 1e-9).expect("decaying");
        let good = (fitted - target).abs() <= tol * target && (fitted - spectral).abs() <= 0.05 * spectral;
        ok &= good;
        parts.push(format!("alpha={alpha}: fitted {fitted:.5}, target {target:.5}, spectral {spectral:.5}"));
    }
    outcome(ok, parts.join("; "))
}

fn projection() -> Outcome {
    let p = multiplier_line_problem();
    let z0 = PrimalDualState::new(vec![0.0], vec![4.0, -2.0]);
    let traj = integrate(&AhFlow::new(&p), &z0.to_flat(), 0.0, &IntegratorConfig::fixed(1e-3, 200.0, 1.0))
        .expect("integrates");
    let lambda = &traj.last_state()[1..];
    let sp = p.certified_saddle().expect("certified");
    let proj = p.multiplier_projection(&sp.xi, &z0.lambda).expect("non-empty multiplier set");
    let to_ref = dist_sq(lambda, &[2.5, -3.5]).sqrt();
    let to_proj = dist_sq(lambda, &proj).sqrt();
    outcome(
        to_ref <= 1e-4 && to_proj <= 1e-4,
        format!("lambda(200) = {lambda:?}, |.-(2.5,-3.5)| = {to_ref:.1e}, |.-proj| = {to_proj:.1e}"),
    )
}

fn oscillator() -> Outcome {
    let ex = example2(1.0);
    let p = &ex.problem;
    let sp = p.certified_saddle().expect("certified");
    let traj = integrate(&AhFlow::new(p), &ex.initial.to_flat(), 0.0, &IntegratorConfig::fixed(1e-3, 20.0, 0.01))
        .expect("integrates");
    let mut worst = 0.0_f64;
    for (z, d) in traj.states.iter().zip(&traj.derivatives) {
        let z = PrimalDualState::from_flat(z, 2);
        let zdot = PrimalDualState::from_flat(d, 2);
        let zdd = ah_second_derivative(p, &z, &zdot).expect("quadratic");
        worst = worst.max(oscillator_residual_primal(p, &z.x, &zdot.x, &zdd.x, &sp.xi).expect("scalar Hessian"));
    }
    outcome(worst <= 1e-8, format!("sup residual {worst:.2e} over {} samples", traj.len()))
}

fn integrator_order() -> Outcome {
    let ex = example2(2.0);
    let p = &ex.problem;
    let z0 = ex.initial.to_flat();
    let exact = LinearFlowOracle::new(p).expect("saddle exists").at(&z0, 1.0);
    let err = |h: f64| {
        let traj = integrate(&AhFlow::new(p), &z0, 0.0, &IntegratorConfig::fixed(h, 1.0, 1.0)).expect("integrates");
        dist_sq(traj.last_state(), &exact).sqrt()
    };
    let (coarse, fine) = (err(0.02), err(0.01));
    let ratio = coarse / fine;
    outcome((12.0..=20.0).contains(&ratio), format!("errors {coarse:.3e} -> {fine:.3e}, ratio {ratio:.3}"))
}

fn structured_flows() -> Outcome {
    let ex = example1();
    let lift = structured_lift(&ex.problem);
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-13, 20.0, 0.05);
    let start = StructuredPoint { x: ex.initial.x.clone(), y: vec![0.0], lambda: ex.initial.lambda.clone() };
    let g = integrate(&GahFlow { problem: &lift }, &start.to_flat(), 0.0, &cfg).expect("integrates");
    let a = integrate(&AhFlow::new(&ex.problem), &ex.initial.to_flat(), 0.0, &cfg).expect("integrates");
    let mut lift_err = 0.0_f64;
    for (zg, za) in g.states.iter().zip(&a.states) {
        let xl = [zg[0], zg[1], zg[3], zg[4]];
        lift_err = lift_err.max(dist_sq(&xl, za).sqrt());
    }

    let params = AahParams::new(3.0, 0.5, 0.5, 1.0).expect("valid parameters");
    let (ds, _) =
        run_aah(&lift, params, &fig1_aah_initial(), &IntegratorConfig::fixed(1e-3, 100.0, 0.05)).expect("runs");
    let weighted: Vec<f64> = ds.times.iter().zip(&ds.gap).map(|(t, g)| t * t * g).collect();
    let mid = ds.times.iter().position(|&t| t >= 50.5).expect("horizon past midpoint");
    let first = weighted[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let second = weighted[mid..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let power = fit_power_law(&ds.times, &ds.gap, (10.0, 90.0)).map(|f| f.rate()).unwrap_or(f64::NAN);
    outcome(
        lift_err <= 1e-6 && first.is_finite() && second <= first,
        format!(
            "GAH vs AH max deviation {lift_err:.1e}; max t^2*gap on [1,50.5) {first:.4}, on [50.5,100] {second:.4}; fitted gap power {power:.3}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion, Duration); 11] = [
        ("KKT oracle on Example 1", kkt_oracle, Duration::from_millis(1)),
        ("Lagrangian identity", lagrangian_identity, Duration::from_secs(1)),
        ("velocity and distance monotone", monotonicity, Duration::from_secs(5)),
        ("ergodic gap bound", ergodic_bound, Duration::from_secs(5)),
        ("sqrt(t) tail decay", tail_decay, Duration::from_secs(5)),
        ("exponential rate on Example 1", exponential_rate, Duration::from_secs(5)),
        ("damping trichotomy on Example 2", trichotomy, Duration::from_secs(10)),
        ("multiplier projection limit", projection, Duration::from_secs(5)),
        ("oscillator equivalence", oscillator, Duration::from_secs(5)),
        ("RK4 order", integrator_order, Duration::from_secs(1)),
        ("structured and accelerated flows", structured_flows, Duration::from_secs(10)),
    ];
    let mut failures = 0;
    for (k, (name, criterion, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = criterion();
        let elapsed = start.elapsed();
        // the KKT criterion times its own solve; the budget of the rest is wall time
        let in_time = k == 0 || elapsed <= *budget;
        let passed = result.passed && in_time;
        failures += usize::from(!passed);
        println!(
            "{} [{:>2}] {name}: {} ({elapsed:.2?}, budget {budget:?})",
            if passed { "PASS" } else { "FAIL" },
            k + 1,
            result.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
