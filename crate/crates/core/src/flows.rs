//! Vector fields of the primal-dual dynamics.
//!
//! Three systems are provided:
//!
//! * the first-order primal-dual gradient flow on a [`SaddleProblem`]
//!   (`ẋ = −∇f(x) − Aᵀλ`, `λ̇ = Ax − b`),
//! * its generalisation to two-block problems `f(x) + g(y)` subject to
//!   `Ax + By = c`,
//! * a second-order, non-autonomous accelerated variant with vanishing
//!   damping `ν/t` and extrapolated ("exploration") gradient evaluations of
//!   the augmented Lagrangian.
//!
//! All fields write into caller-provided buffers and implement
//! [`VectorField`], so one integrator serves them all.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ModelError, ParamError};
use crate::linalg::{self, dot, norm, Matrix};
use crate::model::{LinearConstraint, Objective, PrimalDualState, QuadraticObjective, SaddlePoint, SaddleProblem};

/// Right-hand side `ż = F(t, z)` of an ODE on flat state vectors.
pub trait VectorField {
    fn eval(&self, t: f64, z: &[f64], out: &mut [f64]);
}

impl<F> VectorField for F
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn eval(&self, t: f64, z: &[f64], out: &mut [f64]) {
        self(t, z, out)
    }
}

/// First-order primal-dual gradient flow on `[x, λ]`.
#[derive(Clone, Copy, Debug)]
pub struct AhFlow<'a, O> {
    pub problem: &'a SaddleProblem<O>,
}

impl<'a, O: Objective> AhFlow<'a, O> {
    pub fn new(problem: &'a SaddleProblem<O>) -> Self {
        Self { problem }
    }

    pub fn dim(&self) -> usize {
        self.problem.n() + self.problem.m()
    }
}

impl<O: Objective> VectorField for AhFlow<'_, O> {
    fn eval(&self, _t: f64, z: &[f64], out: &mut [f64]) {
        let n = self.problem.n();
        let (x, lambda) = z.split_at(n);
        let (dx, dl) = out.split_at_mut(n);
        self.problem.lagrangian_grad_into(x, lambda, dx, dl);
        dx.iter_mut().for_each(|v| *v = -*v);
    }
}

/// `(ẋ, λ̇) = (−∇f(x) − Aᵀλ, Ax − b)`, the negated saddle operator.
pub fn ah_field<O: Objective>(p: &SaddleProblem<O>, z: &PrimalDualState) -> Result<PrimalDualState, ModelError> {
    let (mut gx, gl) = p.lagrangian_grad(z)?;
    gx.iter_mut().for_each(|v| *v = -*v);
    Ok(PrimalDualState::new(gx, gl))
}

/// Analytic second derivative along the flow:
/// `ẍ = −∇²f(x)ẋ − Aᵀλ̇`, `λ̈ = Aẋ`.
pub fn ah_second_derivative<O: Objective>(
    p: &SaddleProblem<O>,
    z: &PrimalDualState,
    zdot: &PrimalDualState,
) -> Result<PrimalDualState, ModelError> {
    p.check_state(z)?;
    p.check_state(zdot)?;
    let mut xdd = p.objective.hessian_apply(&z.x, &zdot.x).ok_or(ModelError::Unsupported("a Hessian action"))?;
    p.constraint.a.tr_mul_vec_add(&zdot.lambda, &mut xdd);
    xdd.iter_mut().for_each(|v| *v = -*v);
    let ldd = p.constraint.a.mul_vec(&zdot.x);
    Ok(PrimalDualState::new(xdd, ldd))
}

/// `‖ẍ + αẋ + AᵀA(x − x̄)‖` for an objective with Hessian `α·I`.
///
/// Along exact solutions of the first-order flow this vanishes whenever
/// `Ax̄ = b`: the primal component obeys a damped harmonic oscillator.
pub fn oscillator_residual_primal(
    p: &SaddleProblem<QuadraticObjective>,
    x: &[f64],
    xdot: &[f64],
    xddot: &[f64],
    xbar: &[f64],
) -> Result<f64, ModelError> {
    let alpha =
        p.objective.scalar_hessian().ok_or(ModelError::Unsupported("a Hessian that is a multiple of the identity"))?;
    let a = &p.constraint.a;
    let shift = a.mul_vec(&linalg::sub(x, xbar));
    let mut r: Vec<f64> = xddot.iter().zip(xdot).map(|(dd, d)| dd + alpha * d).collect();
    a.tr_mul_vec_add(&shift, &mut r);
    Ok(norm(&r))
}

/// `‖λ̈ + αλ̇ + AAᵀ(λ − λ̄)‖` for an objective with Hessian `α·I`; vanishes
/// along exact solutions when `λ̄` is a multiplier.
pub fn oscillator_residual_dual(
    p: &SaddleProblem<QuadraticObjective>,
    lambda: &[f64],
    ldot: &[f64],
    lddot: &[f64],
    lbar: &[f64],
) -> Result<f64, ModelError> {
    let alpha =
        p.objective.scalar_hessian().ok_or(ModelError::Unsupported("a Hessian that is a multiple of the identity"))?;
    let a = &p.constraint.a;
    let back = a.tr_mul_vec(&linalg::sub(lambda, lbar));
    let shift = a.mul_vec(&back);
    let r: Vec<f64> = lddot.iter().zip(ldot).zip(&shift).map(|((dd, d), s)| dd + alpha * d + s).collect();
    Ok(norm(&r))
}

/// `inf { f(x) + g(y) | Ax + By = c }`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredProblem<F = QuadraticObjective, G = QuadraticObjective> {
    pub f: F,
    pub g: G,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Vec<f64>,
}

/// Point `(x, y, λ)` of a structured problem.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl StructuredPoint {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&self.lambda);
        v
    }
}

impl<F: Objective, G: Objective> StructuredProblem<F, G> {
    pub fn new(f: F, g: G, a: Matrix, b: Matrix, c: Vec<f64>) -> Result<Self, ModelError> {
        let m = c.len();
        if a.rows() != m || b.rows() != m {
            return Err(ModelError::DimensionMismatch {
                context: "rows of A and B vs length of c",
                expected: m,
                found: if a.rows() != m { a.rows() } else { b.rows() },
            });
        }
        if a.cols() != f.dim() {
            return Err(ModelError::DimensionMismatch {
                context: "columns of A vs dim f",
                expected: f.dim(),
                found: a.cols(),
            });
        }
        if b.cols() != g.dim() {
            return Err(ModelError::DimensionMismatch {
                context: "columns of B vs dim g",
                expected: g.dim(),
                found: b.cols(),
            });
        }
        Ok(Self { f, g, a, b, c })
    }

    pub fn n(&self) -> usize {
        self.f.dim()
    }

    pub fn p(&self) -> usize {
        self.g.dim()
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }

    /// Length of the flat `[x, y, λ]` state.
    pub fn dim(&self) -> usize {
        self.n() + self.p() + self.m()
    }

    /// `Ax + By − c`.
    pub fn residual(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut r = self.a.mul_vec(x);
        let by = self.b.mul_vec(y);
        for ((ri, bi), ci) in r.iter_mut().zip(&by).zip(&self.c) {
            *ri += bi - ci;
        }
        r
    }

    pub fn lagrangian_at(&self, x: &[f64], y: &[f64], lambda: &[f64]) -> f64 {
        self.f.value(x) + self.g.value(y) + dot(lambda, &self.residual(x, y))
    }

    /// `L_μ(x, y, λ) = f(x) + g(y) + ⟨λ, r⟩ + (μ/2)‖r‖²` with `r = Ax + By − c`.
    pub fn augmented_lagrangian_at(&self, mu: f64, x: &[f64], y: &[f64], lambda: &[f64]) -> f64 {
        let r = self.residual(x, y);
        self.f.value(x) + self.g.value(y) + dot(lambda, &r) + 0.5 * mu * linalg::norm_sq(&r)
    }

    /// Partial gradients of `L_μ`:
    /// `(∇f + Aᵀ(λ + μr), ∇g + Bᵀ(λ + μr), r)`.
    pub fn augmented_lagrangian_grads(
        &self,
        mu: f64,
        x: &[f64],
        y: &[f64],
        lambda: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let r = self.residual(x, y);
        let shifted: Vec<f64> = lambda.iter().zip(&r).map(|(l, ri)| l + mu * ri).collect();
        let mut gx = self.f.gradient(x);
        self.a.tr_mul_vec_add(&shifted, &mut gx);
        let mut gy = self.g.gradient(y);
        self.b.tr_mul_vec_add(&shifted, &mut gy);
        (gx, gy, r)
    }

    /// Structured saddle operator `T(x, y, λ) = (∇f + Aᵀλ, ∇g + Bᵀλ, c − Ax − By)`.
    pub fn operator(&self, pt: &StructuredPoint) -> StructuredPoint {
        let (x, y, mut r) = self.augmented_lagrangian_grads(0.0, &pt.x, &pt.y, &pt.lambda);
        r.iter_mut().for_each(|v| *v = -*v);
        StructuredPoint { x, y, lambda: r }
    }

    /// Writes the generalized flow field into `out` (layout `[x, y, λ]`).
    pub fn gah_field_into(&self, z: &[f64], out: &mut [f64]) {
        let (n, p) = (self.n(), self.p());
        let (x, rest) = z.split_at(n);
        let (y, lambda) = rest.split_at(p);
        let (dx, rest) = out.split_at_mut(n);
        let (dy, dl) = rest.split_at_mut(p);
        self.f.gradient_into(x, dx);
        self.a.tr_mul_vec_add(lambda, dx);
        self.g.gradient_into(y, dy);
        self.b.tr_mul_vec_add(lambda, dy);
        dx.iter_mut().chain(dy.iter_mut()).for_each(|v| *v = -*v);
        self.a.mul_vec_into(x, dl);
        let by = self.b.mul_vec(y);
        for ((d, b), c) in dl.iter_mut().zip(&by).zip(&self.c) {
            *d += b - c;
        }
    }
}

impl StructuredProblem<QuadraticObjective, QuadraticObjective> {
    /// The same problem seen as a single-block problem over `(x, y)` with
    /// block-diagonal Hessian and constraint matrix `[A B]`.
    pub fn combined(&self) -> SaddleProblem<QuadraticObjective> {
        let (n, p, m) = (self.n(), self.p(), self.m());
        let mut q = Matrix::zeros(n + p, n + p);
        let (qf, qg) = (self.f.hessian(), self.g.hessian());
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] = qf[(i, j)];
            }
        }
        for i in 0..p {
            for j in 0..p {
                q[(n + i, n + j)] = qg[(i, j)];
            }
        }
        let mut lin = self.f.linear().to_vec();
        lin.extend_from_slice(self.g.linear());
        let mut ab = Matrix::zeros(m, n + p);
        for r in 0..m {
            for j in 0..n {
                ab[(r, j)] = self.a[(r, j)];
            }
            for j in 0..p {
                ab[(r, n + j)] = self.b[(r, j)];
            }
        }
        let objective = QuadraticObjective::new(q, lin, self.f.constant() + self.g.constant())
            .expect("block-diagonal of convex quadratics is convex");
        let constraint = LinearConstraint::new(ab, self.c.clone()).expect("dimensions checked at construction");
        SaddleProblem::new(objective, constraint).expect("dimensions checked at construction")
    }

    /// Saddle point `(ξ, ψ, η)` via the combined KKT system.
    pub fn kkt_solve(&self) -> Result<(StructuredPoint, SaddlePoint), ModelError> {
        let sp = self.combined().kkt_solve()?;
        let n = self.n();
        let pt = StructuredPoint { x: sp.xi[..n].to_vec(), y: sp.xi[n..].to_vec(), lambda: sp.eta.clone() };
        Ok((pt, sp))
    }
}

/// `(ẋ, ẏ, λ̇) = (−∇f(x) − Aᵀλ, −∇g(y) − Bᵀλ, Ax + By − c)`.
pub fn gah_field<F: Objective, G: Objective>(
    p: &StructuredProblem<F, G>,
    pt: &StructuredPoint,
) -> Result<StructuredPoint, ModelError> {
    for (ctx, expected, found) in
        [("x", p.n(), pt.x.len()), ("y", p.p(), pt.y.len()), ("lambda", p.m(), pt.lambda.len())]
    {
        if expected != found {
            return Err(ModelError::DimensionMismatch { context: ctx, expected, found });
        }
    }
    let mut out = vec![0.0; p.dim()];
    p.gah_field_into(&pt.to_flat(), &mut out);
    let (n, q) = (p.n(), p.p());
    Ok(StructuredPoint { x: out[..n].to_vec(), y: out[n..n + q].to_vec(), lambda: out[n + q..].to_vec() })
}

/// Generalized flow as a [`VectorField`] on `[x, y, λ]`.
#[derive(Clone, Copy, Debug)]
pub struct GahFlow<'a, F, G> {
    pub problem: &'a StructuredProblem<F, G>,
}

impl<F: Objective, G: Objective> VectorField for GahFlow<'_, F, G> {
    fn eval(&self, _t: f64, z: &[f64], out: &mut [f64]) {
        self.problem.gah_field_into(z, out)
    }
}

/// Parameters of the accelerated second-order flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AahParams {
    /// Damping exponent `ν ≥ 3`; the damping coefficient is `ν/t`.
    pub nu: f64,
    /// Exploration coefficient `θ ∈ [1/(ν−1), 1/2]`.
    pub theta: f64,
    /// Augmentation `μ ≥ 0` of the Lagrangian.
    pub mu: f64,
    /// Start time `t0 > 0`.
    pub t0: f64,
}

impl AahParams {
    pub fn new(nu: f64, theta: f64, mu: f64, t0: f64) -> Result<Self, ParamError> {
        if !(nu >= 3.0) {
            return Err(ParamError::Nu(nu));
        }
        let lo = 1.0 / (nu - 1.0);
        if !(theta >= lo && theta <= 0.5) {
            return Err(ParamError::Theta { theta, lo });
        }
        if !(mu >= 0.0) {
            return Err(ParamError::Mu(mu));
        }
        if !(t0 > 0.0) {
            return Err(ParamError::T0(t0));
        }
        Ok(Self { nu, theta, mu, t0 })
    }
}

impl Default for AahParams {
    /// `ν = 3`, `θ = 1/2`, `μ = 1/2`, `t0 = 1`.
    fn default() -> Self {
        Self { nu: 3.0, theta: 0.5, mu: 0.5, t0: 1.0 }
    }
}

/// Phase state of the accelerated flow: positions then velocities, each in
/// `[x, y, λ]` layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderState {
    pub position: StructuredPoint,
    pub velocity: StructuredPoint,
}

impl SecondOrderState {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.position.to_flat();
        v.extend(self.velocity.to_flat());
        v
    }

    pub fn from_flat(z: &[f64], n: usize, p: usize) -> Self {
        let half = z.len() / 2;
        let split =
            |s: &[f64]| StructuredPoint { x: s[..n].to_vec(), y: s[n..n + p].to_vec(), lambda: s[n + p..].to_vec() };
        Self { position: split(&z[..half]), velocity: split(&z[half..]) }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// Accelerated flow as a [`VectorField`] on the flat phase vector.
#[derive(Clone, Copy, Debug)]
pub struct AahFlow<'a, F, G> {
    pub problem: &'a StructuredProblem<F, G>,
    pub params: AahParams,
}

impl<'a, F: Objective, G: Objective> AahFlow<'a, F, G> {
    pub fn new(problem: &'a StructuredProblem<F, G>, params: AahParams) -> Self {
        Self { problem, params }
    }

    pub fn dim(&self) -> usize {
        2 * self.problem.dim()
    }
}

impl<F: Objective, G: Objective> VectorField for AahFlow<'_, F, G> {
    /// `t` must not precede `params.t0`; [`aah_field`] reports that as an error.
    fn eval(&self, t: f64, s: &[f64], out: &mut [f64]) {
        let pr = self.problem;
        let AahParams { nu, theta, mu, .. } = self.params;
        let (n, p, d) = (pr.n(), pr.p(), pr.dim());
        let (pos, vel) = s.split_at(d);
        let (x, rest) = pos.split_at(n);
        let (y, lambda) = rest.split_at(p);
        let (vx, rest) = vel.split_at(n);
        let (vy, vl) = rest.split_at(p);

        out[..d].copy_from_slice(vel);
        let damping = nu / t;
        let reach = theta * t;

        let lambda_ext: Vec<f64> = lambda.iter().zip(vl).map(|(l, v)| l + reach * v).collect();
        let (gx, gy, _) = pr.augmented_lagrangian_grads(mu, x, y, &lambda_ext);
        let x_ext: Vec<f64> = x.iter().zip(vx).map(|(a, v)| a + reach * v).collect();
        let y_ext: Vec<f64> = y.iter().zip(vy).map(|(a, v)| a + reach * v).collect();
        let (_, _, gl) = pr.augmented_lagrangian_grads(mu, &x_ext, &y_ext, lambda);

        let acc = &mut out[d..];
        for i in 0..n {
            acc[i] = -damping * vx[i] - gx[i];
        }
        for i in 0..p {
            acc[n + i] = -damping * vy[i] - gy[i];
        }
        for i in 0..pr.m() {
            acc[n + p + i] = -damping * vl[i] + gl[i];
        }
    }
}

/// Phase derivative of the accelerated flow at time `t`.
pub fn aah_field<F: Objective, G: Objective>(
    p: &StructuredProblem<F, G>,
    params: &AahParams,
    t: f64,
    s: &SecondOrderState,
) -> Result<SecondOrderState, ParamError> {
    if t < params.t0 {
        return Err(ParamError::BeforeStart { t, t0: params.t0 });
    }
    let flow = AahFlow::new(p, *params);
    let mut out = vec![0.0; flow.dim()];
    flow.eval(t, &s.to_flat(), &mut out);
    Ok(SecondOrderState::from_flat(&out, p.n(), p.p()))
}

/// `|⟨∇ₓL, ẋ⟩ + ⟨∇_λL, λ̇⟩ + ‖ẋ‖² − ‖λ̇‖²|` at a state with `ż = F(z)`.
///
/// The time derivative of `L(x(t), λ(t))` plus `‖ẋ‖²` equals `‖λ̇‖²` along
/// the flow; for `ż` produced by [`ah_field`] this is an algebraic identity,
/// so the result is pure roundoff.
pub fn lagrangian_identity_residual<O: Objective>(
    p: &SaddleProblem<O>,
    z: &PrimalDualState,
    zdot: &PrimalDualState,
) -> Result<f64, ModelError> {
    p.check_state(zdot)?;
    let (gx, gl) = p.lagrangian_grad(z)?;
    let r = dot(&gx, &zdot.x) + dot(&gl, &zdot.lambda) + linalg::norm_sq(&zdot.x) - linalg::norm_sq(&zdot.lambda);
    Ok(r.abs())
}
