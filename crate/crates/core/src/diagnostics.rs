//! Gap, velocity and error series along trajectories, ergodic averages, and
//! log-linear decay-rate fits.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::DiagnosticsError;
use crate::flows::StructuredProblem;
use crate::integrate::Trajectory;
use crate::linalg::{self, dist_sq};
use crate::model::{Objective, SaddlePoint, SaddleProblem};

/// Values at or below this are dropped from log fits.
pub const LOG_FLOOR: f64 = 1e-300;
/// Fewest samples accepted by a raw or polynomially corrected fit.
pub const MIN_FIT_POINTS: usize = 5;
/// Fewest local maxima accepted by an envelope fit.
pub const MIN_ENVELOPE_POINTS: usize = 3;

/// A convex-concave Lagrangian over flat primal and dual blocks.
///
/// For two-block problems the primal block is `[x, y]`.
pub trait LagrangianSystem {
    fn primal_dim(&self) -> usize;
    fn dual_dim(&self) -> usize;
    fn lagrangian(&self, primal: &[f64], dual: &[f64]) -> f64;
}

impl<O: Objective> LagrangianSystem for SaddleProblem<O> {
    fn primal_dim(&self) -> usize {
        self.n()
    }

    fn dual_dim(&self) -> usize {
        self.m()
    }

    fn lagrangian(&self, primal: &[f64], dual: &[f64]) -> f64 {
        self.lagrangian_at(primal, dual)
    }
}

impl<F: Objective, G: Objective> LagrangianSystem for StructuredProblem<F, G> {
    fn primal_dim(&self) -> usize {
        self.n() + self.p()
    }

    fn dual_dim(&self) -> usize {
        self.m()
    }

    fn lagrangian(&self, primal: &[f64], dual: &[f64]) -> f64 {
        let (x, y) = primal.split_at(self.n());
        self.lagrangian_at(x, y, dual)
    }
}

/// Per-sample quantities along a trajectory, anchored at a saddle point.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    /// `L(x(t), η) − L(ξ, λ(t))`.
    pub gap: Vec<f64>,
    /// `‖ẋ‖² + ‖λ̇‖²`, from stored field evaluations.
    pub vel_sq: Vec<f64>,
    /// `‖(x, λ) − (ξ, η)‖²`.
    pub err_sq_full: Vec<f64>,
    /// `‖x − ξ‖²`.
    pub err_sq_primal: Vec<f64>,
    /// Running time average of the position `[x, λ]`; the first entry is the
    /// initial position.
    pub cesaro_state: Vec<Vec<f64>>,
    /// `L(σ(t), η) − L(ξ, ω(t))`; NaN at the first sample where the average
    /// is undefined.
    pub cesaro_gap: Vec<f64>,
}

impl DiagnosticsSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Elapsed time since the first sample.
    pub fn elapsed(&self, i: usize) -> f64 {
        self.times[i] - self.times[0]
    }

    /// `√‖ż‖²` per sample.
    pub fn velocity_norm(&self) -> Vec<f64> {
        self.vel_sq.iter().map(|v| v.sqrt()).collect()
    }
}

/// Computes every series for a trajectory of a first-order flow (`[primal,
/// dual]` layout) or of the accelerated flow (positions first, velocities
/// second); in both cases the leading `primal + dual` entries of a stored
/// derivative are the velocity.
pub fn diagnostics_series<S: LagrangianSystem + ?Sized>(
    system: &S,
    traj: &Trajectory,
    saddle: &SaddlePoint,
) -> DiagnosticsSeries {
    let np = system.primal_dim();
    let nd = system.dual_dim();
    let width = np + nd;
    let anchor_value =
        |primal: &[f64], dual: &[f64]| system.lagrangian(primal, &saddle.eta) - system.lagrangian(&saddle.xi, dual);

    let len = traj.len();
    let mut gap = Vec::with_capacity(len);
    let mut vel_sq = Vec::with_capacity(len);
    let mut err_sq_full = Vec::with_capacity(len);
    let mut err_sq_primal = Vec::with_capacity(len);
    let mut cesaro_state = Vec::with_capacity(len);
    let mut cesaro_gap = Vec::with_capacity(len);

    let mut integral = vec![0.0; width];
    for (i, (z, d)) in traj.states.iter().zip(&traj.derivatives).enumerate() {
        let (x, lambda) = z[..width].split_at(np);
        gap.push(anchor_value(x, lambda));
        vel_sq.push(linalg::norm_sq(&d[..width]));
        let ep = dist_sq(x, &saddle.xi);
        err_sq_primal.push(ep);
        err_sq_full.push(ep + dist_sq(lambda, &saddle.eta));

        if i == 0 {
            cesaro_state.push(z[..width].to_vec());
            cesaro_gap.push(f64::NAN);
            continue;
        }
        let dt = traj.times[i] - traj.times[i - 1];
        let prev = &traj.states[i - 1];
        for k in 0..width {
            integral[k] += 0.5 * dt * (prev[k] + z[k]);
        }
        let elapsed = traj.times[i] - traj.times[0];
        let avg: Vec<f64> = integral.iter().map(|v| v / elapsed).collect();
        let (sx, sl) = avg.split_at(np);
        cesaro_gap.push(anchor_value(sx, sl));
        cesaro_state.push(avg);
    }

    DiagnosticsSeries { times: traj.times.clone(), gap, vel_sq, err_sq_full, err_sq_primal, cesaro_state, cesaro_gap }
}

/// `max_{t>0} t·cesaro_gap(t) − z0_err_sq/2`, with `t` the elapsed time.
///
/// A non-positive result certifies the ergodic `O(1/t)` bound
/// `L(σ, η) − L(ξ, ω) ≤ ‖z0 − z*‖² / (2t)` on the sampled horizon.
pub fn cesaro_bound_check(ds: &DiagnosticsSeries, z0_err_sq: f64) -> f64 {
    let bound = 0.5 * z0_err_sq;
    let worst = (1..ds.len())
        .map(|i| ds.elapsed(i) * ds.cesaro_gap[i])
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if worst == f64::NEG_INFINITY {
        -bound
    } else {
        worst - bound
    }
}

/// Outcome of [`monotonicity_violations`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub count: usize,
    /// Largest increase `s[i+1] − s[i]` among violations (0 if none).
    pub worst_jump: f64,
    /// Index `i` of the worst violation.
    pub worst_index: Option<usize>,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.count == 0
    }
}

/// Counts indices with `s[i+1] > s[i] + tol·(1 + |s[i]|)`.
pub fn monotonicity_violations(series: &[f64], tol: f64) -> MonotonicityReport {
    let mut report = MonotonicityReport { count: 0, worst_jump: 0.0, worst_index: None };
    for (i, w) in series.windows(2).enumerate() {
        if w[1] > w[0] + tol * (1.0 + w[0].abs()) {
            report.count += 1;
            let jump = w[1] - w[0];
            if report.worst_index.is_none() || jump > report.worst_jump {
                report.worst_jump = jump;
                report.worst_index = Some(i);
            }
        }
    }
    report
}

/// How a series is prepared before the log-linear fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FitMode {
    /// Fit `log v(t)` directly.
    Raw,
    /// Fit only the local maxima, for oscillating series.
    Envelope,
    /// Fit `log v(t) − k·log t`, for `t^k e^{−ct}` decay.
    PolyCorrected(f64),
}

/// Least-squares line through `(t, log v(t))` on a window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub window: (f64, f64),
    /// Slope per unit time of the (corrected) log series.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub mode: FitMode,
    pub points: usize,
}

impl RateFit {
    /// Decay rate, `−slope`.
    pub fn rate(&self) -> f64 {
        -self.slope
    }
}

/// `[T/2, 0.9T]`.
pub fn default_window(horizon: f64) -> (f64, f64) {
    (0.5 * horizon, 0.9 * horizon)
}

pub fn fit_rate(times: &[f64], values: &[f64], window: (f64, f64), mode: FitMode) -> Result<RateFit, DiagnosticsError> {
    if times.len() != values.len() {
        return Err(DiagnosticsError::LengthMismatch { times: times.len(), values: values.len() });
    }
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(DiagnosticsError::InvalidWindow { lo, hi });
    }
    let usable = |i: usize| {
        let (t, v) = (times[i], values[i]);
        t >= lo && t <= hi && v.is_finite() && v > LOG_FLOOR
    };
    let candidates: Vec<usize> = match mode {
        FitMode::Envelope => (1..values.len().saturating_sub(1))
            .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
            .filter(|&i| usable(i))
            .collect(),
        FitMode::PolyCorrected(_) => (0..values.len()).filter(|&i| usable(i) && times[i] > 0.0).collect(),
        FitMode::Raw => (0..values.len()).filter(|&i| usable(i)).collect(),
    };
    let required = if mode == FitMode::Envelope { MIN_ENVELOPE_POINTS } else { MIN_FIT_POINTS };
    if candidates.len() < required {
        return Err(DiagnosticsError::InsufficientData { usable: candidates.len(), required });
    }
    let pts: Vec<(f64, f64)> = candidates
        .iter()
        .map(|&i| {
            let y = match mode {
                FitMode::PolyCorrected(k) => values[i].ln() - k * times[i].ln(),
                _ => values[i].ln(),
            };
            (times[i], y)
        })
        .collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit { window, slope, intercept, r_squared, mode, points: pts.len() })
}

/// Case split of the primal exponential estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateCase {
    /// `ρ² − γρ + β > 0`: `O(e^{−2ρt})`.
    Exponential,
    /// `ρ² − γρ + β = 0`: `O(t² e^{−2ρt})`.
    PolyExponential,
    /// `ρ² − γρ + β < 0`: no estimate.
    Uncovered,
}

impl RateCase {
    pub fn label(&self) -> &'static str {
        match self {
            RateCase::Exponential => "case (i)",
            RateCase::PolyExponential => "case (ii)",
            RateCase::Uncovered => "uncovered",
        }
    }
}

/// Damping regime when the Hessian is `α·I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `α² < 4β`
    Under,
    /// `α² = 4β`
    Critical,
    /// `α² > 4β`
    Over,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Under => "under-damped",
            Regime::Critical => "critically-damped",
            Regime::Over => "over-damped",
        }
    }
}

/// Predicted exponential rates from `(α, β, γ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoreticalRates {
    pub rho: f64,
    /// `ρ² − γρ + β`.
    pub case_discriminant: f64,
    pub case: RateCase,
    /// Only for scalar Hessians.
    pub regime: Option<Regime>,
    /// `√(α² − 4β)`, only in the over-damped regime.
    pub delta: Option<f64>,
    /// Predicted exponent `c` in `err_sq = O(t^k e^{−ct})`.
    pub predicted_exponent: f64,
    /// Polynomial prefactor degree `k` (0 or 2).
    pub poly_degree: u32,
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Decay constants for strong convexity `α`, bounded-below modulus `β` and
/// Hessian bound `γ`.
///
/// `ρ = α/2` when `γ² ≤ 4β`, else `min{α, γ − √(γ² − 4β)}/2`. With
/// `scalar_hessian` the regime refines the prediction for the squared error:
/// `α` (under), `α` with a `t²` factor (critical) or `α − δ` (over).
pub fn theoretical_rates(
    alpha: f64,
    beta: f64,
    gamma: f64,
    scalar_hessian: bool,
) -> Result<TheoreticalRates, DiagnosticsError> {
    if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0) {
        return Err(DiagnosticsError::InvalidConstants { alpha, beta, gamma });
    }
    let g2 = gamma * gamma;
    let rho = if g2 <= 4.0 * beta || nearly_equal(g2, 4.0 * beta) {
        alpha / 2.0
    } else {
        alpha.min(gamma - (g2 - 4.0 * beta).sqrt()) / 2.0
    };
    let disc = rho * rho - gamma * rho + beta;
    let case = if nearly_equal(rho * rho + beta, gamma * rho) {
        RateCase::PolyExponential
    } else if disc > 0.0 {
        RateCase::Exponential
    } else {
        RateCase::Uncovered
    };

    let (regime, delta, predicted_exponent, poly_degree) = if scalar_hessian {
        let a2 = alpha * alpha;
        if nearly_equal(a2, 4.0 * beta) {
            (Some(Regime::Critical), None, alpha, 2)
        } else if a2 < 4.0 * beta {
            (Some(Regime::Under), None, alpha, 0)
        } else {
            let d = (a2 - 4.0 * beta).sqrt();
            (Some(Regime::Over), Some(d), alpha - d, 0)
        }
    } else {
        let k = if case == RateCase::PolyExponential { 2 } else { 0 };
        (None, None, 2.0 * rho, k)
    };
    Ok(TheoreticalRates { rho, case_discriminant: disc, case, regime, delta, predicted_exponent, poly_degree })
}

/// Supremum of `e^{rate·t}·v(t)` over the samples, tracked in log space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpSupremum {
    /// `log sup`; `−∞` when every value is non-positive.
    pub log_value: f64,
    pub value: f64,
    /// Time at which the supremum is attained.
    pub time: f64,
}

pub fn exp_bound_supremum(times: &[f64], values: &[f64], rate: f64) -> Result<ExpSupremum, DiagnosticsError> {
    if times.len() != values.len() {
        return Err(DiagnosticsError::LengthMismatch { times: times.len(), values: values.len() });
    }
    if !(rate > 0.0) {
        return Err(DiagnosticsError::NonPositiveRate(rate));
    }
    let mut best =
        ExpSupremum { log_value: f64::NEG_INFINITY, value: 0.0, time: times.first().copied().unwrap_or(0.0) };
    for (&t, &v) in times.iter().zip(values) {
        if v > 0.0 {
            let lv = rate * t + v.ln();
            if lv > best.log_value {
                best.log_value = lv;
                best.time = t;
            }
        }
    }
    best.value = best.log_value.exp();
    Ok(best)
}

/// `t_b^p·v(t_b) / (t_a^p·v(t_a))` using the samples nearest `t_a` and `t_b`.
pub fn weighted_tail_ratio(times: &[f64], values: &[f64], t_a: f64, t_b: f64, power: f64) -> f64 {
    let nearest =
        |t: f64| (0..times.len()).min_by(|&i, &j| (times[i] - t).abs().total_cmp(&(times[j] - t).abs())).unwrap_or(0);
    let (ia, ib) = (nearest(t_a), nearest(t_b));
    (times[ib].powf(power) * values[ib]) / (times[ia].powf(power) * values[ia])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::example1;
    use crate::flows::AhFlow;
    use crate::integrate::{integrate, IntegratorConfig};

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|k| lo + k as f64 * step).collect()
    }

    #[test]
    fn constant_trajectory_at_saddle_is_all_zero() {
        let p = example1().problem;
        let sp = p.kkt_solve().unwrap();
        let flow = AhFlow::new(&p);
        let traj = integrate(&flow, &sp.state().to_flat(), 0.0, &IntegratorConfig::fixed(0.1, 2.0, 0.1)).unwrap();
        let ds = diagnostics_series(&p, &traj, &sp);
        for i in 0..ds.len() {
            assert_eq!(ds.gap[i], 0.0);
            assert_eq!(ds.vel_sq[i], 0.0);
            assert_eq!(ds.err_sq_full[i], 0.0);
            assert_eq!(ds.err_sq_primal[i], 0.0);
            if i > 0 {
                assert_eq!(ds.cesaro_gap[i], 0.0);
            }
        }
        assert!(ds.cesaro_gap[0].is_nan());
        assert_eq!(cesaro_bound_check(&ds, 0.0), 0.0);
    }

    #[test]
    fn initial_values_for_example1() {
        let ex = example1();
        let sp = ex.problem.kkt_solve().unwrap();
        let flow = AhFlow::new(&ex.problem);
        let traj = integrate(&flow, &ex.initial.to_flat(), 0.0, &IntegratorConfig::fixed(0.01, 1.0, 0.5)).unwrap();
        let ds = diagnostics_series(&ex.problem, &traj, &sp);
        assert!((ds.err_sq_full[0] - 8.5).abs() < 1e-12);
        assert!((ds.gap[0] - 2.0).abs() < 1e-12);
        assert!((ds.err_sq_primal[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_counts() {
        let inc: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let r = monotonicity_violations(&inc, 1e-9);
        assert_eq!(r.count, 9);
        assert_eq!(r.worst_jump, 1.0);
        let dec: Vec<f64> = (0..10).map(|i| -(i as f64)).collect();
        assert!(monotonicity_violations(&dec, 1e-9).is_clean());
        // tiny upticks inside tolerance are ignored
        assert!(monotonicity_violations(&[1.0, 1.0 + 1e-12, 0.5], 1e-9).is_clean());
    }

    #[test]
    fn fit_exact_exponential() {
        let t = grid(0.0, 50.0, 0.1);
        let v: Vec<f64> = t.iter().map(|t| (-0.5 * t).exp()).collect();
        let fit = fit_rate(&t, &v, (10.0, 40.0), FitMode::Raw).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn fit_poly_corrected() {
        let t = grid(0.0, 30.0, 0.05);
        let v: Vec<f64> = t.iter().map(|t| t * t * (-2.0 * t).exp()).collect();
        let fit = fit_rate(&t, &v, (5.0, 15.0), FitMode::PolyCorrected(2.0)).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-9);
        let raw = fit_rate(&t, &v, (5.0, 15.0), FitMode::Raw).unwrap();
        assert!(raw.rate() < 2.0);
    }

    #[test]
    fn fit_envelope_of_oscillation() {
        let t = grid(0.0, 60.0, 0.01);
        let v: Vec<f64> = t.iter().map(|t| (-t).exp() * (1.0 + 0.9 * (1.7 * t).cos())).collect();
        let fit = fit_rate(&t, &v, (10.0, 50.0), FitMode::Envelope).unwrap();
        assert!((fit.rate() - 1.0).abs() < 1e-3, "{}", fit.rate());
    }

    #[test]
    fn fit_errors() {
        let t = grid(0.0, 1.0, 0.5);
        let v = vec![1.0; t.len()];
        assert!(matches!(fit_rate(&t, &v, (0.0, 1.0), FitMode::Raw), Err(DiagnosticsError::InsufficientData { .. })));
        assert!(matches!(fit_rate(&t, &v, (1.0, 0.0), FitMode::Raw), Err(DiagnosticsError::InvalidWindow { .. })));
        assert!(fit_rate(&t, &v[..1], (0.0, 1.0), FitMode::Raw).is_err());
        // below-floor values are dropped
        let t = grid(0.0, 10.0, 1.0);
        let v: Vec<f64> = t.iter().map(|&t| if t > 3.0 { 0.0 } else { (-t).exp() }).collect();
        assert!(fit_rate(&t, &v, (0.0, 10.0), FitMode::Raw).is_err());
    }

    #[test]
    fn rates_for_example_constants() {
        let r = theoretical_rates(0.5, 1.0, 1.5, false).unwrap();
        assert!((r.rho - 0.25).abs() < 1e-15);
        assert!((r.case_discriminant - 0.6875).abs() < 1e-15);
        assert_eq!(r.case, RateCase::Exponential);
        assert!((r.predicted_exponent - 0.5).abs() < 1e-15);

        let r = theoretical_rates(2.0, 1.0, 2.0, true).unwrap();
        assert_eq!(r.regime, Some(Regime::Critical));
        assert_eq!(r.poly_degree, 2);
        assert_eq!(r.predicted_exponent, 2.0);

        let r = theoretical_rates(3.0, 1.0, 3.0, true).unwrap();
        assert_eq!(r.regime, Some(Regime::Over));
        assert!((r.delta.unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!((r.predicted_exponent - (3.0 - 5f64.sqrt())).abs() < 1e-15);

        let r = theoretical_rates(1.0, 1.0, 1.0, true).unwrap();
        assert_eq!(r.regime, Some(Regime::Under));
        assert_eq!(r.predicted_exponent, 1.0);

        assert!(theoretical_rates(0.0, 1.0, 1.0, false).is_err());
    }

    #[test]
    fn rho_branch_with_large_gamma() {
        // γ² > 4β: ρ = min{α, γ − √(γ² − 4β)}/2
        let r = theoretical_rates(1.0, 1.0, 4.0, false).unwrap();
        let expect = (4.0 - 12f64.sqrt()) / 2.0;
        assert!((r.rho - expect).abs() < 1e-15);
    }

    #[test]
    fn exp_supremum_cases() {
        let t = grid(0.0, 20.0, 0.1);
        let v: Vec<f64> = t.iter().map(|t| (-0.7 * t).exp()).collect();
        let s = exp_bound_supremum(&t, &v, 0.7).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        // too-large rate: supremum keeps growing with the horizon
        let short = exp_bound_supremum(&t[..101], &v[..101], 1.4).unwrap();
        let long = exp_bound_supremum(&t, &v, 1.4).unwrap();
        assert!(long.value > 100.0 * short.value);
        assert_eq!(long.time, 20.0);
        assert!(exp_bound_supremum(&t, &v, 0.0).is_err());
    }

    #[test]
    fn tail_ratio_of_power_law() {
        let t = grid(1.0, 50.0, 0.5);
        let v: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
        let r = weighted_tail_ratio(&t, &v, 5.0, 50.0, 0.5);
        assert!((r - (5.0f64 / 50.0).sqrt()).abs() < 1e-12);
    }
}
