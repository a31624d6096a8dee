//! Built-in problem instances, seeded random quadratic programs and the
//! in-memory drivers behind the two replication figures.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::diagnostics::{
    default_window, diagnostics_series, fit_rate, theoretical_rates, DiagnosticsSeries, FitMode, RateFit,
};
use crate::error::{DiagnosticsError, IntegrateError, ModelError};
use crate::flows::{AahFlow, AahParams, AhFlow, SecondOrderState, StructuredPoint, StructuredProblem};
use crate::integrate::{integrate, IntegratorConfig, DEFAULT_STEP};
use crate::linalg::{self, Matrix};
use crate::model::{LinearConstraint, PrimalDualState, QuadraticObjective, SaddlePoint, SaddleProblem};

/// `(α, γ, β)` of a reference instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceConstants {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
}

/// A built-in instance with its reference data.
#[derive(Clone, Debug, PartialEq)]
pub struct PaperExample {
    pub problem: SaddleProblem,
    /// Known saddle point, when available in closed form.
    pub saddle: Option<PrimalDualState>,
    pub initial: PrimalDualState,
    pub constants: ReferenceConstants,
}

fn build(q: Matrix, a: Matrix, b: Vec<f64>) -> SaddleProblem {
    let objective = QuadraticObjective::pure(q).expect("built-in objective is convex");
    let constraint = LinearConstraint::new(a, b).expect("built-in constraint is well formed");
    SaddleProblem::new(objective, constraint).expect("built-in dimensions agree")
}

/// `f(x) = (x₁² − x₁x₂ + x₂²)/2` subject to `x = (1, 1)`.
pub fn example1() -> PaperExample {
    let q = Matrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).expect("rectangular");
    PaperExample {
        problem: build(q, Matrix::identity(2), vec![1.0, 1.0]),
        saddle: Some(PrimalDualState::new(vec![1.0, 1.0], vec![-0.5, -0.5])),
        initial: PrimalDualState::new(vec![-1.0, 1.0], vec![1.0, 1.0]),
        constants: ReferenceConstants { alpha: 0.5, gamma: 1.5, beta: 1.0 },
    }
}

/// Right-hand side used by [`example2`].
pub const EXAMPLE2_RHS: f64 = 1.0;

/// `f(x) = α‖x‖²/2` subject to `(x₁ + x₂)/√2 = 1`.
///
/// # Panics
/// If `alpha` is not positive and finite.
pub fn example2(alpha: f64) -> PaperExample {
    assert!(alpha > 0.0 && alpha.is_finite(), "alpha must be positive, got {alpha}");
    let r = core::f64::consts::FRAC_1_SQRT_2;
    let a = Matrix::from_row_major(1, 2, vec![r, r]).expect("1x2");
    // ξ = b·aᵀ, η = −α·b
    let xi = EXAMPLE2_RHS * r;
    PaperExample {
        problem: build(Matrix::identity(2).scaled(alpha), a, vec![EXAMPLE2_RHS]),
        saddle: Some(PrimalDualState::new(vec![xi, xi], vec![-alpha * EXAMPLE2_RHS])),
        initial: PrimalDualState::new(vec![-1.0, 1.0], vec![1.0]),
        constants: ReferenceConstants { alpha, gamma: alpha, beta: 1.0 },
    }
}

/// `f(x) = x²/2` subject to `x = 1` stated twice: the multiplier set is the
/// line `λ₁ + λ₂ = −1`.
pub fn multiplier_line_problem() -> SaddleProblem {
    build(Matrix::identity(1), Matrix::from_row_major(2, 1, vec![1.0, 1.0]).expect("2x1"), vec![1.0, 1.0])
}

/// Seeded random instance with its certified saddle point.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomQp {
    pub problem: SaddleProblem,
    pub saddle: SaddlePoint,
    /// Feasible point used to build `b`.
    pub feasible: Vec<f64>,
}

fn gaussian(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_row_major(rows, cols, data).expect("sized")
}

/// Orthogonal factor of a QR decomposition (modified Gram–Schmidt), with the
/// sign convention `diag(R) > 0`.
fn orthogonal_factor(g: &Matrix) -> Option<Matrix> {
    let n = g.rows();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| g[(i, j)]).collect()).collect();
    for j in 0..n {
        for k in 0..j {
            let proj = linalg::dot(&cols[k], &cols[j]);
            let qk = cols[k].clone();
            linalg::axpy(-proj, &qk, &mut cols[j]);
        }
        let nrm = linalg::norm(&cols[j]);
        if !(nrm > 1e-10) {
            return None;
        }
        cols[j].iter_mut().for_each(|v| *v /= nrm);
    }
    let mut q = Matrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            q[(i, j)] = c[i];
        }
    }
    Some(q)
}

/// Deterministic random quadratic program on `n` variables with `m`
/// equality constraints, drawn from a ChaCha20 stream seeded with `seed`.
///
/// The Hessian is `U·diag(s)·Uᵀ` with `U` orthogonal; its smallest eigenvalue
/// lies in `alpha_range`, its largest in `gamma_range` and the rest between.
/// `A` is Gaussian with full row rank and `b = A·x_f` for a Gaussian `x_f`.
pub fn random_qp(
    seed: u64,
    n: usize,
    m: usize,
    alpha_range: (f64, f64),
    gamma_range: (f64, f64),
) -> Result<RandomQp, ModelError> {
    let ranges_ok = alpha_range.0 > 0.0
        && alpha_range.0 <= alpha_range.1
        && gamma_range.0 <= gamma_range.1
        && alpha_range.1 <= gamma_range.0;
    if !(1 <= m && m <= n) {
        return Err(ModelError::Unsupported("1 <= m <= n"));
    }
    if !ranges_ok {
        return Err(ModelError::Unsupported("positive ranges with max(alpha_range) <= min(gamma_range)"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha20Rng, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            Uniform::new_inclusive(lo, hi).expect("ordered range").sample(rng)
        }
    };

    let alpha = pick(&mut rng, alpha_range);
    let gamma = pick(&mut rng, gamma_range);
    let mut spectrum = vec![alpha; n];
    if n > 1 {
        spectrum[n - 1] = gamma;
        for s in spectrum.iter_mut().take(n - 1).skip(1) {
            *s = pick(&mut rng, (alpha, gamma));
        }
    }
    let u = loop {
        if let Some(u) = orthogonal_factor(&gaussian(&mut rng, n, n)) {
            break u;
        }
    };
    let mut q = u.matmul(&Matrix::diagonal(&spectrum)).matmul(&u.transpose());
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (q[(i, j)] + q[(j, i)]);
            q[(i, j)] = s;
            q[(j, i)] = s;
        }
    }
    let linear: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();

    let a = loop {
        let a = gaussian(&mut rng, m, n);
        let eig = linalg::symmetric_eigen(&a.outer_gram());
        if eig.min() > 1e-3 * eig.max() {
            break a;
        }
    };
    let feasible: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b = a.mul_vec(&feasible);

    let objective = QuadraticObjective::new(q, linear, 0.0)?;
    let problem = SaddleProblem::new(objective, LinearConstraint::new(a, b)?)?;
    let saddle = problem.certified_saddle()?;
    Ok(RandomQp { problem, saddle, feasible })
}

/// Two-block form of `p` with `g(y) = ½‖y‖²` on one coordinate, `B = 0`, `c = b`.
pub fn structured_lift(p: &SaddleProblem) -> StructuredProblem {
    let g = QuadraticObjective::pure(Matrix::identity(1)).expect("identity is convex");
    StructuredProblem::new(
        p.objective.clone(),
        g,
        p.constraint.a.clone(),
        Matrix::zeros(p.m(), 1),
        p.constraint.b.clone(),
    )
    .expect("lift preserves dimensions")
}

/// Failures of the replication drivers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Which replication to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
}

impl Figure {
    pub fn id(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
        }
    }
}

/// Fitted and predicted decay of one quantity along one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSummary {
    pub curve: String,
    pub fitted_rate: f64,
    pub theoretical_rate: f64,
    pub r_squared: f64,
    pub regime: String,
}

/// One integrated run with its diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub id: String,
    pub series: DiagnosticsSeries,
    pub summaries: Vec<RateSummary>,
}

/// Horizon and step of the first-order runs in the first figure.
pub const FIG1_AH_HORIZON: f64 = 50.0;
/// Horizon of the accelerated run in the first figure (starting at `t0 = 1`).
pub const FIG1_AAH_HORIZON: f64 = 100.0;
/// Horizon of the runs in the second figure.
pub const FIG2_HORIZON: f64 = 20.0;
/// Fit window of the runs in the second figure.
pub const FIG2_WINDOW: (f64, f64) = (5.0, 18.0);
/// Sampling interval of every replication run.
pub const SAMPLE_INTERVAL: f64 = 0.05;
/// `α` values of the second figure.
pub const FIG2_ALPHAS: [f64; 3] = [1.0, 2.0, 3.0];

/// Runs the flow `ż = −T(z)` on `p` from `z0` with fixed-step RK4.
pub fn run_ah(
    p: &SaddleProblem,
    z0: &PrimalDualState,
    cfg: &IntegratorConfig,
) -> Result<(DiagnosticsSeries, SaddlePoint), ExperimentError> {
    let saddle = p.certified_saddle()?;
    let traj = integrate(&AhFlow::new(p), &z0.to_flat(), 0.0, cfg)?;
    Ok((diagnostics_series(p, &traj, &saddle), saddle))
}

/// Runs the accelerated flow on `sp` from `t0 = params.t0`.
pub fn run_aah(
    sp: &StructuredProblem,
    params: AahParams,
    s0: &SecondOrderState,
    cfg: &IntegratorConfig,
) -> Result<(DiagnosticsSeries, SaddlePoint), ExperimentError> {
    let (_, saddle) = sp.kkt_solve()?;
    let traj = integrate(&AahFlow::new(sp, params), &s0.to_flat(), params.t0, cfg)?;
    Ok((diagnostics_series(sp, &traj, &saddle), saddle))
}

fn summary(curve: String, fit: &RateFit, theoretical_rate: f64, regime: &str) -> RateSummary {
    RateSummary {
        curve,
        fitted_rate: fit.rate(),
        theoretical_rate,
        r_squared: fit.r_squared,
        regime: String::from(regime),
    }
}

/// Fits `v(t) ≈ C·t^{−p}` on `window` using the local maxima of `v`; the
/// returned rate is `p`.
pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit, DiagnosticsError> {
    let log_t: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    fit_rate(&log_t, values, (window.0.ln(), window.1.ln()), FitMode::Envelope)
}

/// Initial phase state of the accelerated run in the first figure: Example 1
/// data lifted with `y0 = 0`, zero primal velocity and dual velocity `(1, 1)`.
pub fn fig1_aah_initial() -> SecondOrderState {
    let ex = example1();
    SecondOrderState {
        position: StructuredPoint { x: ex.initial.x.clone(), y: vec![0.0], lambda: ex.initial.lambda.clone() },
        velocity: StructuredPoint { x: vec![0.0; 2], y: vec![0.0], lambda: vec![1.0, 1.0] },
    }
}

/// First figure: the first-order flow and the accelerated flow on Example 1.
pub fn fig1() -> Result<Vec<Curve>, ExperimentError> {
    let ex = example1();
    let c = ex.constants;
    let th = theoretical_rates(c.alpha, c.beta, c.gamma, false)?;

    let cfg = IntegratorConfig::fixed(DEFAULT_STEP, FIG1_AH_HORIZON, SAMPLE_INTERVAL);
    let (ah, _) = run_ah(&ex.problem, &ex.initial, &cfg)?;
    let window = default_window(FIG1_AH_HORIZON);
    let mut ah_summaries = Vec::new();
    let quantities = [
        ("gap", &ah.gap, FitMode::Envelope),
        ("vel_sq", &ah.vel_sq, FitMode::Raw),
        ("err_sq_primal", &ah.err_sq_primal, FitMode::Envelope),
    ];
    for (name, values, mode) in quantities {
        let fit = fit_rate(&ah.times, values, window, mode)?;
        ah_summaries.push(summary(format!("fig1_ah:{name}"), &fit, th.predicted_exponent, th.case.label()));
    }

    let params = AahParams::default();
    let lift = structured_lift(&ex.problem);
    let cfg = IntegratorConfig::fixed(DEFAULT_STEP, FIG1_AAH_HORIZON, SAMPLE_INTERVAL);
    let (aah, _) = run_aah(&lift, params, &fig1_aah_initial(), &cfg)?;
    let fit = fit_power_law(&aah.times, &aah.gap, (10.0, 0.9 * FIG1_AAH_HORIZON))?;
    let aah_summary = summary(String::from("fig1_aah:gap"), &fit, 2.0, "O(1/t^2)");

    Ok(vec![
        Curve { id: String::from("fig1_ah"), series: ah, summaries: ah_summaries },
        Curve { id: String::from("fig1_aah"), series: aah, summaries: vec![aah_summary] },
    ])
}

/// Fit mode matching the damping regime of `example2(alpha)`.
pub fn fig2_fit_mode(alpha: f64) -> Result<FitMode, DiagnosticsError> {
    let th = theoretical_rates(alpha, 1.0, alpha, true)?;
    Ok(match th.regime {
        Some(crate::diagnostics::Regime::Under) => FitMode::Envelope,
        Some(crate::diagnostics::Regime::Critical) => FitMode::PolyCorrected(th.poly_degree as f64),
        _ => FitMode::Raw,
    })
}

/// One run of the second figure.
pub fn fig2_curve(alpha: f64) -> Result<Curve, ExperimentError> {
    let ex = example2(alpha);
    let c = ex.constants;
    let th = theoretical_rates(c.alpha, c.beta, c.gamma, true)?;
    let cfg = IntegratorConfig::fixed(DEFAULT_STEP, FIG2_HORIZON, SAMPLE_INTERVAL);
    let (series, _) = run_ah(&ex.problem, &ex.initial, &cfg)?;
    let fit = fit_rate(&series.times, &series.err_sq_primal, FIG2_WINDOW, fig2_fit_mode(alpha)?)?;
    let id = format!("fig2_alpha{alpha}");
    let regime = th.regime.map(|r| r.label()).unwrap_or("unknown");
    let s = summary(format!("{id}:err_sq_primal"), &fit, th.predicted_exponent, regime);
    Ok(Curve { id, series, summaries: vec![s] })
}

/// Second figure: the first-order flow on `example2(α)` for each `α` in
/// [`FIG2_ALPHAS`].
pub fn fig2() -> Result<Vec<Curve>, ExperimentError> {
    FIG2_ALPHAS.iter().map(|&a| fig2_curve(a)).collect()
}

pub fn replicate(figure: Figure) -> Result<Vec<Curve>, ExperimentError> {
    match figure {
        Figure::Fig1 => fig1(),
        Figure::Fig2 => fig2(),
    }
}
