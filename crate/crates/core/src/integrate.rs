//! Time stepping for the flows, and an exact oracle for affine flows.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;

use crate::error::{IntegrateError, ModelError};
use crate::flows::VectorField;
use crate::linalg::{self, Matrix};
use crate::model::{QuadraticObjective, SaddleProblem};

/// Default fixed step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Default adaptive relative tolerance.
pub const DEFAULT_RTOL: f64 = 1e-9;
/// Default adaptive absolute tolerance.
pub const DEFAULT_ATOL: f64 = 1e-12;
/// Smallest step the adaptive integrator will attempt.
pub const MIN_STEP: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    FixedRk4,
    /// Dormand–Prince 5(4) with PI step control and dense output.
    AdaptiveDp54,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step for [`Method::FixedRk4`].
    pub step: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Final time `T` (absolute, not a duration).
    pub horizon: f64,
    /// Output spacing `Δs`; samples are taken at `t_start + kΔs`.
    pub sample_interval: f64,
}

impl IntegratorConfig {
    pub fn fixed(step: f64, horizon: f64, sample_interval: f64) -> Self {
        Self { method: Method::FixedRk4, step, rtol: DEFAULT_RTOL, atol: DEFAULT_ATOL, horizon, sample_interval }
    }

    pub fn adaptive(rtol: f64, atol: f64, horizon: f64, sample_interval: f64) -> Self {
        Self { method: Method::AdaptiveDp54, step: DEFAULT_STEP, rtol, atol, horizon, sample_interval }
    }

    pub fn validate(&self, t_start: f64) -> Result<(), IntegrateError> {
        if !(self.horizon > t_start) {
            return Err(IntegrateError::InvalidConfig("horizon must exceed the start time"));
        }
        if !(self.sample_interval > 0.0) || !self.sample_interval.is_finite() {
            return Err(IntegrateError::InvalidConfig("sample interval must be positive"));
        }
        match self.method {
            Method::FixedRk4 => {
                if !(self.step > 0.0) || !self.step.is_finite() {
                    return Err(IntegrateError::InvalidConfig("step must be positive"));
                }
                if self.sample_interval < self.step * (1.0 - 1e-12) {
                    return Err(IntegrateError::InvalidConfig("sample interval must be at least the step"));
                }
            }
            Method::AdaptiveDp54 => {
                if !(self.rtol > 0.0) || !(self.atol > 0.0) {
                    return Err(IntegrateError::InvalidConfig("rtol and atol must be positive"));
                }
            }
        }
        Ok(())
    }

    /// `t_start + kΔs` for every `k` with the result not past the horizon.
    pub fn sample_times(&self, t_start: f64) -> Vec<f64> {
        let span = self.horizon - t_start;
        let count = (span / self.sample_interval + 1e-9).floor() as usize;
        (0..=count).map(|k| t_start + k as f64 * self.sample_interval).collect()
    }
}

/// Sampled solution of an initial value problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Field evaluated at each stored state.
    pub derivatives: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Index of the sample closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &ti) in self.times.iter().enumerate() {
            if (ti - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    /// Checks strictly increasing times, matching lengths and that stored
    /// derivatives are the field at stored states (to `tol`, absolute).
    pub fn check_invariants<F: VectorField + ?Sized>(&self, field: &F, tol: f64) -> bool {
        if self.states.len() != self.times.len() || self.derivatives.len() != self.times.len() {
            return false;
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return false;
        }
        let mut buf = Vec::new();
        self.times.iter().zip(&self.states).zip(&self.derivatives).all(|((&t, z), d)| {
            buf.resize(z.len(), 0.0);
            field.eval(t, z, &mut buf);
            buf.iter().zip(d).all(|(a, b)| (a - b).abs() <= tol)
        })
    }
}

fn ensure_finite(z: &[f64], t: f64) -> Result<(), IntegrateError> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(IntegrateError::BlowUp { t })
    }
}

/// Scratch space for RK4 so repeated steps do not allocate.
struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

/// `out = z + c·k`.
fn offset(out: &mut [f64], z: &[f64], k: &[f64], c: f64) {
    for ((o, zi), ki) in out.iter_mut().zip(z).zip(k) {
        *o = zi + c * ki;
    }
}

impl Rk4Work {
    fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    fn step<F: VectorField + ?Sized>(
        &mut self,
        field: &F,
        t: f64,
        z: &mut [f64],
        h: f64,
    ) -> Result<(), IntegrateError> {
        field.eval(t, z, &mut self.k1);
        ensure_finite(&self.k1, t)?;
        offset(&mut self.tmp, z, &self.k1, 0.5 * h);
        field.eval(t + 0.5 * h, &self.tmp, &mut self.k2);
        ensure_finite(&self.k2, t)?;
        offset(&mut self.tmp, z, &self.k2, 0.5 * h);
        field.eval(t + 0.5 * h, &self.tmp, &mut self.k3);
        ensure_finite(&self.k3, t)?;
        offset(&mut self.tmp, z, &self.k3, h);
        field.eval(t + h, &self.tmp, &mut self.k4);
        ensure_finite(&self.k4, t)?;
        for (i, zi) in z.iter_mut().enumerate() {
            *zi += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        ensure_finite(z, t + h)
    }
}

/// One classical Runge–Kutta step of size `h` from `(t, z)`.
pub fn rk4_step<F: VectorField + ?Sized>(field: &F, t: f64, z: &[f64], h: f64) -> Result<Vec<f64>, IntegrateError> {
    if !(h > 0.0) {
        return Err(IntegrateError::InvalidConfig("step must be positive"));
    }
    let mut out = z.to_vec();
    Rk4Work::new(z.len()).step(field, t, &mut out, h)?;
    Ok(out)
}

/// Integrates `ż = F(t, z)` from `(t_start, z0)` and samples the solution at
/// `t_start + kΔs` up to the horizon.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    z0: &[f64],
    t_start: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    cfg.validate(t_start)?;
    ensure_finite(z0, t_start)?;
    let samples = cfg.sample_times(t_start);
    let states = match cfg.method {
        Method::FixedRk4 => run_rk4(field, z0, &samples, cfg.step)?,
        Method::AdaptiveDp54 => run_dp54(field, z0, &samples, cfg.rtol, cfg.atol)?,
    };
    let derivatives = samples
        .iter()
        .zip(&states)
        .map(|(&t, z)| {
            let mut d = vec![0.0; z.len()];
            field.eval(t, z, &mut d);
            ensure_finite(&d, t).map(|_| d)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory { times: samples, states, derivatives })
}

fn run_rk4<F: VectorField + ?Sized>(
    field: &F,
    z0: &[f64],
    samples: &[f64],
    step: f64,
) -> Result<Vec<Vec<f64>>, IntegrateError> {
    let mut work = Rk4Work::new(z0.len());
    let mut z = z0.to_vec();
    let mut states = Vec::with_capacity(samples.len());
    states.push(z.clone());
    for w in samples.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let substeps = ((t1 - t0) / step - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / substeps as f64;
        for j in 0..substeps {
            work.step(field, t0 + j as f64 * h, &mut z, h)?;
        }
        states.push(z.clone());
    }
    Ok(states)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn scaled_rms(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sk = atol + rtol * a.abs().max(b.abs());
            (e / sk) * (e / sk)
        })
        .sum();
    (s / err.len() as f64).sqrt()
}

fn initial_step<F: VectorField + ?Sized>(field: &F, t: f64, y0: &[f64], f0: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = y0.len().max(1) as f64;
    let sk = |y: f64| atol + rtol * y.abs();
    let d0 = (y0.iter().map(|y| (y / sk(*y)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(y0).map(|(f, y)| (f / sk(*y)).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    field.eval(t + h0, &y1, &mut f1);
    let d2 = (f1.iter().zip(f0).zip(y0).map(|((a, b), y)| ((a - b) / sk(*y)).powi(2)).sum::<f64>() / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / 5.0) };
    (100.0 * h0).min(h1)
}

fn run_dp54<F: VectorField + ?Sized>(
    field: &F,
    z0: &[f64],
    samples: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<Vec<f64>>, IntegrateError> {
    const SAFETY: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO1: f64 = 0.2 - BETA * 0.75;
    const FAC_MIN: f64 = 0.2;
    const FAC_MAX: f64 = 10.0;

    let n = z0.len();
    let t_end = *samples.last().expect("at least one sample");
    let mut states = Vec::with_capacity(samples.len());
    states.push(z0.to_vec());
    let mut next_sample = 1;

    let mut t = samples[0];
    let mut y = z0.to_vec();
    let mut k1 = vec![0.0; n];
    field.eval(t, &y, &mut k1);
    ensure_finite(&k1, t)?;
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut rcont = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    let span = t_end - t;
    let mut h = initial_step(field, t, &y, &k1, rtol, atol).min(span);
    let mut fac_old = 1e-4_f64;
    let mut last_rejected = false;

    while next_sample < samples.len() {
        if h < MIN_STEP * t.abs().max(1.0) {
            return Err(IntegrateError::StepUnderflow { t, h });
        }
        let mut hit_end = false;
        if t + 1.01 * h >= t_end {
            h = t_end - t;
            hit_end = true;
        }

        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        field.eval(t + C2 * h, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        field.eval(t + C3 * h, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        field.eval(t + C4 * h, &ys, &mut k4);
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        field.eval(t + C5 * h, &ys, &mut k5);
        for i in 0..n {
            ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        field.eval(t + h, &ys, &mut k6);
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        field.eval(t + h, &y1, &mut k7);
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }

        let stages_finite = [&k2, &k3, &k4, &k5, &k6, &k7, &y1].iter().all(|v| v.iter().all(|x| x.is_finite()));
        let e = if stages_finite { scaled_rms(&err, &y, &y1, rtol, atol) } else { f64::INFINITY };

        if e <= 1.0 {
            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - h * k7[i] - bspl;
                rcont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let t_new = if hit_end { t_end } else { t + h };
            while next_sample < samples.len() && samples[next_sample] <= t_new {
                let ts = samples[next_sample];
                if ts == t_new {
                    states.push(y1.clone());
                } else {
                    let theta = (ts - t) / h;
                    let theta1 = 1.0 - theta;
                    let s: Vec<f64> = (0..n)
                        .map(|i| {
                            rcont[0][i]
                                + theta
                                    * (rcont[1][i]
                                        + theta1 * (rcont[2][i] + theta * (rcont[3][i] + theta1 * rcont[4][i])))
                        })
                        .collect();
                    states.push(s);
                }
                next_sample += 1;
            }
            t = t_new;
            core::mem::swap(&mut y, &mut y1);
            core::mem::swap(&mut k1, &mut k7);

            let fac11 = e.max(1e-300).powf(EXPO1);
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = e.max(1e-4);
            last_rejected = false;
            h = h_new;
        } else {
            if !stages_finite && h < MIN_STEP * t.abs().max(1.0) * 10.0 {
                return Err(IntegrateError::BlowUp { t });
            }
            let shrink = if e.is_finite() { (e.powf(EXPO1) / SAFETY).min(1.0 / FAC_MIN) } else { 1.0 / FAC_MIN };
            h /= shrink;
            last_rejected = true;
        }
    }
    for s in &states {
        ensure_finite(s, t)?;
    }
    Ok(states)
}

/// Constant field matrix `M = [[−Q, −Aᵀ], [A, 0]]` and offset `(−q, −b)` of
/// the affine flow `ż = Mz + offset` on a quadratic problem.
pub fn field_matrix(p: &SaddleProblem<QuadraticObjective>) -> (Matrix, Vec<f64>) {
    let (n, m) = (p.n(), p.m());
    let q = p.objective.hessian();
    let a = &p.constraint.a;
    let mut mat = Matrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            mat[(i, j)] = -q[(i, j)];
        }
    }
    for r in 0..m {
        for c in 0..n {
            mat[(c, n + r)] = -a[(r, c)];
            mat[(n + r, c)] = a[(r, c)];
        }
    }
    let mut offset: Vec<f64> = p.objective.linear().iter().map(|v| -v).collect();
    offset.extend(p.constraint.b.iter().map(|v| -v));
    (mat, offset)
}

/// Eigenvalues of the field matrix, sorted by real part.
pub fn field_spectrum(p: &SaddleProblem<QuadraticObjective>) -> Vec<Complex64> {
    linalg::eigenvalues(&field_matrix(p).0)
}

/// Slowest exponential decay rate `−max Re(s)` over eigenvalues with
/// `Re(s) < −tol`; `None` if no eigenvalue decays.
pub fn slowest_decay_rate(spectrum: &[Complex64], tol: f64) -> Option<f64> {
    spectrum.iter().filter(|s| s.re < -tol).map(|s| -s.re).min_by(|a, b| a.total_cmp(b))
}

/// Exact solution of the affine flow on a quadratic problem,
/// `z(t) = z* + exp(tM)(z0 − z*)`.
#[derive(Clone, Debug)]
pub struct LinearFlowOracle {
    matrix: Matrix,
    equilibrium: Vec<f64>,
}

impl LinearFlowOracle {
    pub fn new(p: &SaddleProblem<QuadraticObjective>) -> Result<Self, ModelError> {
        let sp = p.kkt_solve()?;
        let mut equilibrium = sp.xi;
        equilibrium.extend(sp.eta);
        Ok(Self { matrix: field_matrix(p).0, equilibrium })
    }

    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }

    pub fn at(&self, z0: &[f64], t: f64) -> Vec<f64> {
        let dev = linalg::sub(z0, &self.equilibrium);
        let prop = linalg::expm(&self.matrix.scaled(t));
        let mut z = prop.mul_vec(&dev);
        linalg::axpy(1.0, &self.equilibrium, &mut z);
        z
    }
}

/// Exact state of the primal-dual flow at time `t` from `z0` (flat `[x, λ]`).
pub fn linear_flow_oracle(p: &SaddleProblem<QuadraticObjective>, z0: &[f64], t: f64) -> Result<Vec<f64>, ModelError> {
    if z0.len() != p.n() + p.m() {
        return Err(ModelError::DimensionMismatch {
            context: "initial state",
            expected: p.n() + p.m(),
            found: z0.len(),
        });
    }
    Ok(LinearFlowOracle::new(p)?.at(z0, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{example1, example2};
    use crate::flows::AhFlow;

    #[test]
    fn rk4_on_exponential_decay() {
        let f = |_t: f64, z: &[f64], out: &mut [f64]| out[0] = -z[0];
        let z = rk4_step(&f, 0.0, &[1.0], 0.1).unwrap();
        // 1 − h + h²/2 − h³/6 + h⁴/24 at h = 0.1
        assert!((z[0] - 0.9048375).abs() < 1e-12);
    }

    #[test]
    fn rk4_zero_field_and_bad_step() {
        let f = |_t: f64, _z: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(rk4_step(&f, 0.0, &[3.0, -2.0], 0.5).unwrap(), vec![3.0, -2.0]);
        assert!(rk4_step(&f, 0.0, &[3.0], 0.0).is_err());
    }

    #[test]
    fn rk4_matches_quartic_taylor_on_linear_systems() {
        let p = example1().problem;
        let (m, _) = field_matrix(&p);
        let h = 0.3;
        let z0 = [0.5, -1.0, 2.0, 0.25];
        let flow = AhFlow::new(&p);
        let step = rk4_step(&flow, 0.0, &z0, h).unwrap();
        // affine field: deviation from equilibrium evolves by Σ_{k≤4} (hM)^k/k!
        let zs = [1.0, 1.0, -0.5, -0.5];
        let dev = linalg::sub(&z0, &zs);
        let mut term = dev.clone();
        let mut sum = dev.clone();
        for k in 1..=4 {
            term = m.mul_vec(&term).iter().map(|v| v * h / k as f64).collect();
            linalg::axpy(1.0, &term, &mut sum);
        }
        for i in 0..4 {
            assert!((step[i] - (zs[i] + sum[i])).abs() < 1e-14, "{i}");
        }
    }

    #[test]
    fn rk4_blow_up_is_reported() {
        let f = |_t: f64, z: &[f64], out: &mut [f64]| out[0] = z[0] * z[0];
        let cfg = IntegratorConfig::fixed(0.1, 10.0, 0.1);
        let err = integrate(&f, &[1.0], 0.0, &cfg).unwrap_err();
        assert!(matches!(err, IntegrateError::BlowUp { .. }));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::fixed(0.0, 1.0, 0.1).validate(0.0).is_err());
        assert!(IntegratorConfig::fixed(0.1, 1.0, 0.05).validate(0.0).is_err());
        assert!(IntegratorConfig::fixed(0.1, 0.0, 0.1).validate(0.0).is_err());
        assert!(IntegratorConfig::adaptive(0.0, 1e-12, 1.0, 0.1).validate(0.0).is_err());
        assert!(IntegratorConfig::adaptive(1e-9, 1e-12, 1.0, 0.1).validate(0.0).is_ok());
        let times = IntegratorConfig::fixed(0.01, 1.0, 0.1).sample_times(0.0);
        assert_eq!(times.len(), 11);
        assert_eq!(times[10], 1.0);
    }

    #[test]
    fn equilibrium_is_constant() {
        let p = example1().problem;
        let flow = AhFlow::new(&p);
        let zs = [1.0, 1.0, -0.5, -0.5];
        for cfg in [IntegratorConfig::fixed(0.01, 5.0, 0.5), IntegratorConfig::adaptive(1e-9, 1e-12, 5.0, 0.5)] {
            let traj = integrate(&flow, &zs, 0.0, &cfg).unwrap();
            for s in &traj.states {
                assert_eq!(s.as_slice(), &zs);
            }
            assert!(traj.check_invariants(&flow, 0.0));
        }
    }

    #[test]
    fn dp54_tracks_oracle_on_example1() {
        let p = example1().problem;
        let flow = AhFlow::new(&p);
        let z0 = [-1.0, 1.0, 1.0, 1.0];
        let oracle = LinearFlowOracle::new(&p).unwrap();
        let traj = integrate(&flow, &z0, 0.0, &IntegratorConfig::adaptive(1e-9, 1e-12, 50.0, 0.25)).unwrap();
        assert!(traj.check_invariants(&flow, 0.0));
        for (t, z) in traj.times.iter().zip(&traj.states).step_by(7) {
            let exact = oracle.at(&z0, *t);
            assert!(linalg::dist_sq(z, &exact).sqrt() < 1e-7, "t = {t}");
        }
        let last = traj.last_state();
        // slowest mode decays like e^{-t/4}
        assert!(linalg::dist_sq(last, &[1.0, 1.0, -0.5, -0.5]).sqrt() < 1e-4);
    }

    #[test]
    fn dense_output_off_grid_samples_are_accurate() {
        let f = |_t: f64, z: &[f64], out: &mut [f64]| {
            out[0] = z[1];
            out[1] = -z[0];
        };
        let traj = integrate(&f, &[0.0, 1.0], 0.0, &IntegratorConfig::adaptive(1e-10, 1e-12, 10.0, 0.037)).unwrap();
        for (t, z) in traj.times.iter().zip(&traj.states) {
            assert!((z[0] - t.sin()).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn adaptive_agrees_with_fixed() {
        let p = example2(2.0).problem;
        let flow = AhFlow::new(&p);
        let z0 = [-1.0, 1.0, 1.0];
        let a = integrate(&flow, &z0, 0.0, &IntegratorConfig::adaptive(1e-9, 1e-12, 10.0, 0.5)).unwrap();
        let f = integrate(&flow, &z0, 0.0, &IntegratorConfig::fixed(1e-3, 10.0, 0.5)).unwrap();
        assert_eq!(a.times, f.times);
        for (za, zf) in a.states.iter().zip(&f.states) {
            let scale = 1e-9 * linalg::norm(zf);
            assert!(linalg::dist_sq(za, zf).sqrt() <= scale.max(1e-12) * 10.0 + 1e-9);
        }
    }

    #[test]
    fn oracle_basics() {
        let p = example1().problem;
        let z0 = [0.3, -0.2, 4.0, 1.0];
        let at0 = linear_flow_oracle(&p, &z0, 0.0).unwrap();
        for i in 0..4 {
            assert!((at0[i] - z0[i]).abs() < 1e-15);
        }
        let zs = [1.0, 1.0, -0.5, -0.5];
        let still = linear_flow_oracle(&p, &zs, 17.0).unwrap();
        assert!(linalg::dist_sq(&still, &zs) == 0.0);
        assert!(linear_flow_oracle(&p, &[0.0; 3], 1.0).is_err());
    }

    #[test]
    fn field_matrix_blocks_and_spectrum() {
        let p = example1().problem;
        let (m, off) = field_matrix(&p);
        let expect = [[-1.0, 0.5, -1.0, 0.0], [0.5, -1.0, 0.0, -1.0], [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
        assert_eq!(m, Matrix::from_rows(&expect).unwrap());
        assert_eq!(off, vec![0.0, 0.0, -1.0, -1.0]);
        for s in field_spectrum(&p) {
            assert!(s.re <= 1e-12);
        }
        // q ∈ {1/2, 3/2} → s² + qs + 1: real parts −1/4 and −3/4
        let eigs = field_spectrum(&p);
        assert!((slowest_decay_rate(&eigs, 1e-9).unwrap() - 0.25).abs() < 1e-10);
    }

    #[test]
    fn example2_spectra_follow_oscillator_roots() {
        // eigenvalues: −α (kernel direction of A) and roots of s² + αs + 1
        let eigs = field_spectrum(&example2(3.0).problem);
        let d = 5f64.sqrt();
        assert!((slowest_decay_rate(&eigs, 1e-9).unwrap() - (3.0 - d) / 2.0).abs() < 1e-10);
        let eigs = field_spectrum(&example2(2.0).problem);
        let near_minus_one = eigs.iter().filter(|s| (s.re + 1.0).abs() < 1e-6 && s.im.abs() < 1e-6).count();
        assert_eq!(near_minus_one, 2);
        assert!((slowest_decay_rate(&eigs, 1e-9).unwrap() - 1.0).abs() < 1e-6);
        let eigs = field_spectrum(&example2(1.0).problem);
        assert!((slowest_decay_rate(&eigs, 1e-9).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fixed_step_order_four() {
        let p = example2(2.0).problem;
        let flow = AhFlow::new(&p);
        let z0 = [-1.0, 1.0, 1.0];
        let exact = linear_flow_oracle(&p, &z0, 1.0).unwrap();
        let err = |h: f64| {
            let traj = integrate(&flow, &z0, 0.0, &IntegratorConfig::fixed(h, 1.0, 1.0)).unwrap();
            linalg::dist_sq(traj.last_state(), &exact).sqrt()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }
}
