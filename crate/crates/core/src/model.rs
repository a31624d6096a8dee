//! Linearly constrained convex problems, their Lagrangian and saddle operator,
//! and the KKT oracle.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{ModelError, NoSaddleReason};
use crate::linalg::{self, dot, norm, Matrix};

/// Tolerance used to certify a computed saddle point.
pub const SADDLE_CERT_TOL: f64 = 1e-8;

/// A convex, continuously differentiable objective.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇f(x)` into `out`.
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Hessian action `∇²f(x) v`, when available.
    fn hessian_apply(&self, _x: &[f64], _v: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Strong convexity modulus, if known.
    fn alpha(&self) -> Option<f64> {
        None
    }

    /// Upper bound on the Hessian, if known.
    fn gamma(&self) -> Option<f64> {
        None
    }
}

/// `f(x) = ½ xᵀQx + qᵀx + c0` with symmetric positive semidefinite `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective {
    hessian: Matrix,
    linear: Vec<f64>,
    constant: f64,
    alpha: f64,
    gamma: f64,
}

impl QuadraticObjective {
    /// Largest allowed asymmetry `|Q_ij − Q_ji|`, relative to `max|Q|`.
    pub const SYMMETRY_TOL: f64 = 1e-12;
    /// Most negative eigenvalue still accepted as convex.
    pub const CONVEXITY_TOL: f64 = 1e-10;

    pub fn new(hessian: Matrix, linear: Vec<f64>, constant: f64) -> Result<Self, ModelError> {
        if !hessian.is_square() {
            return Err(ModelError::DimensionMismatch {
                context: "Q must be square",
                expected: hessian.rows(),
                found: hessian.cols(),
            });
        }
        if linear.len() != hessian.rows() {
            return Err(ModelError::DimensionMismatch {
                context: "linear term q",
                expected: hessian.rows(),
                found: linear.len(),
            });
        }
        if !hessian.is_finite() || linear.iter().any(|v| !v.is_finite()) || !constant.is_finite() {
            return Err(ModelError::NonFinite("quadratic objective"));
        }
        let n = hessian.rows();
        let mut asym = 0.0_f64;
        for i in 0..n {
            for j in 0..i {
                asym = asym.max((hessian[(i, j)] - hessian[(j, i)]).abs());
            }
        }
        if asym > Self::SYMMETRY_TOL * hessian.max_abs().max(1.0) {
            return Err(ModelError::NotSymmetric { asymmetry: asym });
        }
        let eig = linalg::symmetric_eigen(&hessian);
        let (alpha, gamma) = (eig.min(), eig.max());
        if alpha < -Self::CONVEXITY_TOL {
            return Err(ModelError::NotConvex { min_eigenvalue: alpha });
        }
        Ok(Self { hessian, linear, constant, alpha, gamma })
    }

    /// `½ xᵀQx` with no linear or constant term.
    pub fn pure(hessian: Matrix) -> Result<Self, ModelError> {
        let n = hessian.rows();
        Self::new(hessian, vec![0.0; n], 0.0)
    }

    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `(λ_min(Q), λ_max(Q))`.
    pub fn convexity_constants(&self) -> (f64, f64) {
        (self.alpha, self.gamma)
    }

    /// Returns `a` when `Q = a·I` exactly.
    pub fn scalar_hessian(&self) -> Option<f64> {
        let n = self.hessian.rows();
        let a = if n > 0 { self.hessian[(0, 0)] } else { return None };
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { a } else { 0.0 };
                if self.hessian[(i, j)] != expect {
                    return None;
                }
            }
        }
        Some(a)
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let qx = self.hessian.mul_vec(x);
        0.5 * dot(x, &qx) + dot(&self.linear, x) + self.constant
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.hessian.mul_vec_into(x, out);
        for (o, l) in out.iter_mut().zip(&self.linear) {
            *o += l;
        }
    }

    fn hessian_apply(&self, _x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        Some(self.hessian.mul_vec(v))
    }

    fn alpha(&self) -> Option<f64> {
        Some(self.alpha)
    }

    fn gamma(&self) -> Option<f64> {
        Some(self.gamma)
    }
}

type ValueFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type HessFn = Box<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Objective given by closures, for non-quadratic experiments.
pub struct SmoothObjective {
    dim: usize,
    value: ValueFn,
    gradient: GradFn,
    hessian: Option<HessFn>,
    declared_alpha: Option<f64>,
    declared_gamma: Option<f64>,
}

impl SmoothObjective {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: None,
            declared_alpha: None,
            declared_gamma: None,
        }
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }

    pub fn with_constants(mut self, alpha: Option<f64>, gamma: Option<f64>) -> Self {
        self.declared_alpha = alpha;
        self.declared_gamma = gamma;
        self
    }
}

impl core::fmt::Debug for SmoothObjective {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SmoothObjective")
            .field("dim", &self.dim)
            .field("has_hessian", &self.hessian.is_some())
            .field("declared_alpha", &self.declared_alpha)
            .field("declared_gamma", &self.declared_gamma)
            .finish()
    }
}

impl Objective for SmoothObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    fn hessian_apply(&self, x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        let h = self.hessian.as_ref()?;
        let mut out = vec![0.0; self.dim];
        h(x, v, &mut out);
        Some(out)
    }

    fn alpha(&self) -> Option<f64> {
        self.declared_alpha
    }

    fn gamma(&self) -> Option<f64> {
        self.declared_gamma
    }
}

/// Randomized directional finite-difference check of `∇f` against `f`.
///
/// Samples `samples` points uniformly in the box `center ± radius` and a
/// random unit direction at each, and compares `⟨∇f(x), d⟩` with the central
/// difference of `f` at step `1e-6`. Returns the worst relative error, where
/// the denominator is `max(1, |⟨∇f(x), d⟩|)`.
pub fn gradient_check<O: Objective + ?Sized>(
    objective: &O,
    center: &[f64],
    radius: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let n = objective.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let h = 1e-6;
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let x: Vec<f64> = center.iter().map(|c| c + radius * unit.sample(&mut rng)).collect();
        let mut d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let dn = norm(&d).max(f64::MIN_POSITIVE);
        d.iter_mut().for_each(|v| *v /= dn);
        let analytic = dot(&objective.gradient(&x), &d);
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let numeric = (objective.value(&xp) - objective.value(&xm)) / (2.0 * h);
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(1.0));
    }
    worst
}

/// Linear equality constraint `A x = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl LinearConstraint {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self, ModelError> {
        if a.rows() != b.len() {
            return Err(ModelError::DimensionMismatch {
                context: "constraint rows of A vs length of b",
                expected: a.rows(),
                found: b.len(),
            });
        }
        if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("linear constraint"));
        }
        Ok(Self { a, b })
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    /// `A x − b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }

    /// Spectral constants of `A`: bounded-below moduli of `A` and `Aᵀ`, and `‖A‖²`.
    pub fn operator_constants(&self) -> OperatorConstants {
        operator_constants(self)
    }
}

/// `β` constants of the constraint operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorConstants {
    /// `λ_min(AᵀA)`; `A` is bounded below iff this is positive.
    pub beta_primal: f64,
    /// `λ_min(AAᵀ)`; `Aᵀ` is bounded below iff this is positive.
    pub beta_dual: f64,
    /// `λ_max(AᵀA) = ‖A‖²`.
    pub a_norm_sq: f64,
}

/// Eigenvalue extremes of `AᵀA` and `AAᵀ`. Values within roundoff of zero
/// are reported as exactly zero.
pub fn operator_constants(c: &LinearConstraint) -> OperatorConstants {
    let (m, n) = (c.rows(), c.cols());
    if m == 0 || n == 0 {
        return OperatorConstants { beta_primal: 0.0, beta_dual: 0.0, a_norm_sq: 0.0 };
    }
    let ata = linalg::symmetric_eigen(&c.a.gram());
    let aat = linalg::symmetric_eigen(&c.a.outer_gram());
    let a_norm_sq = ata.max().max(0.0);
    let floor = 1e-13 * a_norm_sq.max(f64::MIN_POSITIVE);
    let clean = |v: f64| if v <= floor { 0.0 } else { v.min(a_norm_sq) };
    OperatorConstants { beta_primal: clean(ata.min()), beta_dual: clean(aat.min()), a_norm_sq }
}

/// `(λ_min(Q), λ_max(Q))` of a quadratic objective.
pub fn convexity_constants(o: &QuadraticObjective) -> (f64, f64) {
    o.convexity_constants()
}

/// `D_f(y, x) = f(y) − f(x) − ⟨∇f(x), y − x⟩`.
pub fn bregman_distance<O: Objective + ?Sized>(o: &O, y: &[f64], x: &[f64]) -> f64 {
    let g = o.gradient(x);
    let diff = linalg::sub(y, x);
    o.value(y) - o.value(x) - dot(&g, &diff)
}

/// `2 D_f(y, x) − ⟨∇²f(x)(x − y), x − y⟩`; condition (C) holds where this is
/// non-negative.
pub fn condition_c_residual<O: Objective + ?Sized>(o: &O, x: &[f64], y: &[f64]) -> Result<f64, ModelError> {
    let d = linalg::sub(x, y);
    let hd = o.hessian_apply(x, &d).ok_or(ModelError::Unsupported("a Hessian action"))?;
    Ok(2.0 * bregman_distance(o, y, x) - dot(&hd, &d))
}

/// Primal-dual pair `(x, λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualState {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl PrimalDualState {
    pub fn new(x: Vec<f64>, lambda: Vec<f64>) -> Self {
        Self { x, lambda }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self { x: vec![0.0; n], lambda: vec![0.0; m] }
    }

    /// Splits a flat `[x, λ]` vector.
    pub fn from_flat(z: &[f64], n: usize) -> Self {
        Self { x: z[..n].to_vec(), lambda: z[n..].to_vec() }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.x.len() + self.lambda.len());
        z.extend_from_slice(&self.x);
        z.extend_from_slice(&self.lambda);
        z
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.lambda).all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        linalg::norm_sq(&self.x) + linalg::norm_sq(&self.lambda)
    }
}

/// A certified saddle point `(ξ, η)` of the Lagrangian.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddlePoint {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// `‖∇f(ξ) + Aᵀη‖`.
    pub stationarity_residual: f64,
    /// `‖Aξ − b‖`.
    pub feasibility_residual: f64,
    /// Set when the multiplier set is not a singleton and `eta` is its
    /// minimum-norm element.
    pub multiplier_min_norm: bool,
    /// Orthonormal basis of `ker Aᵀ`, the direction space of the multiplier
    /// set. Empty when the multiplier is unique.
    pub multiplier_directions: Vec<Vec<f64>>,
}

impl SaddlePoint {
    pub fn is_certified(&self) -> bool {
        self.stationarity_residual <= SADDLE_CERT_TOL && self.feasibility_residual <= SADDLE_CERT_TOL
    }

    pub fn state(&self) -> PrimalDualState {
        PrimalDualState::new(self.xi.clone(), self.eta.clone())
    }
}

/// `inf { f(x) | Ax = b }` together with its Lagrangian `L(x, λ) = f(x) + ⟨λ, Ax − b⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleProblem<O = QuadraticObjective> {
    pub objective: O,
    pub constraint: LinearConstraint,
}

impl<O: Objective> SaddleProblem<O> {
    pub fn new(objective: O, constraint: LinearConstraint) -> Result<Self, ModelError> {
        if objective.dim() != constraint.cols() {
            return Err(ModelError::DimensionMismatch {
                context: "objective dimension vs columns of A",
                expected: constraint.cols(),
                found: objective.dim(),
            });
        }
        Ok(Self { objective, constraint })
    }

    /// Primal dimension.
    pub fn n(&self) -> usize {
        self.objective.dim()
    }

    /// Dual dimension.
    pub fn m(&self) -> usize {
        self.constraint.rows()
    }

    pub fn check_state(&self, z: &PrimalDualState) -> Result<(), ModelError> {
        if z.x.len() != self.n() {
            return Err(ModelError::DimensionMismatch {
                context: "primal state",
                expected: self.n(),
                found: z.x.len(),
            });
        }
        if z.lambda.len() != self.m() {
            return Err(ModelError::DimensionMismatch {
                context: "dual state",
                expected: self.m(),
                found: z.lambda.len(),
            });
        }
        Ok(())
    }

    /// `L(x, λ)` on raw slices; panics on dimension mismatch.
    pub fn lagrangian_at(&self, x: &[f64], lambda: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n());
        assert_eq!(lambda.len(), self.m());
        self.objective.value(x) + dot(lambda, &self.constraint.residual(x))
    }

    pub fn lagrangian(&self, z: &PrimalDualState) -> Result<f64, ModelError> {
        self.check_state(z)?;
        Ok(self.lagrangian_at(&z.x, &z.lambda))
    }

    /// `(∇f(x) + Aᵀλ, Ax − b)` written into the two output blocks.
    pub fn lagrangian_grad_into(&self, x: &[f64], lambda: &[f64], gx: &mut [f64], gl: &mut [f64]) {
        self.objective.gradient_into(x, gx);
        self.constraint.a.tr_mul_vec_add(lambda, gx);
        self.constraint.a.mul_vec_into(x, gl);
        for (g, b) in gl.iter_mut().zip(&self.constraint.b) {
            *g -= b;
        }
    }

    /// `(∇ₓL, ∇_λL) = (∇f(x) + Aᵀλ, Ax − b)`.
    pub fn lagrangian_grad(&self, z: &PrimalDualState) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        self.check_state(z)?;
        let mut gx = vec![0.0; self.n()];
        let mut gl = vec![0.0; self.m()];
        self.lagrangian_grad_into(&z.x, &z.lambda, &mut gx, &mut gl);
        Ok((gx, gl))
    }

    /// `T(x, λ) = (∇f(x) + Aᵀλ, b − Ax)`; vanishes exactly at saddle points.
    pub fn saddle_operator(&self, z: &PrimalDualState) -> Result<PrimalDualState, ModelError> {
        let (gx, mut gl) = self.lagrangian_grad(z)?;
        gl.iter_mut().for_each(|v| *v = -*v);
        Ok(PrimalDualState::new(gx, gl))
    }

    /// Anchored primal-dual gap `L(x, η) − L(ξ, λ)`.
    pub fn gap(&self, x: &[f64], lambda: &[f64], saddle: &SaddlePoint) -> f64 {
        self.lagrangian_at(x, &saddle.eta) - self.lagrangian_at(&saddle.xi, lambda)
    }

    /// Residuals `(‖∇f(ξ) + Aᵀη‖, ‖Aξ − b‖)`.
    pub fn kkt_residuals(&self, xi: &[f64], eta: &[f64]) -> (f64, f64) {
        let mut gx = vec![0.0; self.n()];
        let mut gl = vec![0.0; self.m()];
        self.lagrangian_grad_into(xi, eta, &mut gx, &mut gl);
        (norm(&gx), norm(&gl))
    }

    /// Orthogonal projection of `lambda0` onto the multiplier set
    /// `M = {λ : Aᵀλ = −∇f(ξ)}`, by a least-squares correction along range(A).
    pub fn multiplier_projection(&self, xi: &[f64], lambda0: &[f64]) -> Result<Vec<f64>, ModelError> {
        if xi.len() != self.n() {
            return Err(ModelError::DimensionMismatch { context: "xi", expected: self.n(), found: xi.len() });
        }
        if lambda0.len() != self.m() {
            return Err(ModelError::DimensionMismatch { context: "lambda0", expected: self.m(), found: lambda0.len() });
        }
        let a = &self.constraint.a;
        let target: Vec<f64> = self.objective.gradient(xi).iter().map(|g| -g).collect();
        let mismatch = linalg::sub(&a.tr_mul_vec(lambda0), &target);
        let w = linalg::symmetric_pinv_solve(&a.gram(), &mismatch, 1e-12);
        let correction = a.mul_vec(&w);
        let projected = linalg::sub(lambda0, &correction);
        let residual = norm(&linalg::sub(&a.tr_mul_vec(&projected), &target));
        if residual > 1e-9 * (1.0 + norm(&target)) {
            return Err(ModelError::EmptyMultiplierSet { residual });
        }
        Ok(projected)
    }
}

impl SaddleProblem<QuadraticObjective> {
    /// Assembles the bordered KKT matrix `[[Q, Aᵀ], [A, 0]]` and right-hand
    /// side `(−q, b)`.
    pub fn kkt_system(&self) -> (Matrix, Vec<f64>) {
        let (n, m) = (self.n(), self.m());
        let q = self.objective.hessian();
        let a = &self.constraint.a;
        let mut k = Matrix::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = q[(i, j)];
            }
        }
        for r in 0..m {
            for c in 0..n {
                k[(n + r, c)] = a[(r, c)];
                k[(c, n + r)] = a[(r, c)];
            }
        }
        let mut rhs: Vec<f64> = self.objective.linear().iter().map(|v| -v).collect();
        rhs.extend_from_slice(&self.constraint.b);
        (k, rhs)
    }

    /// Solves `Qξ + Aᵀη = −q`, `Aξ = b`.
    ///
    /// The bordered system is first attacked with partially pivoted
    /// elimination. A rank-deficient system falls back to its minimum-norm
    /// least-squares solution, which yields the minimum-norm multiplier when
    /// `ker Aᵀ` is non-trivial. Inconsistent systems report whether the
    /// constraints are infeasible or the objective is unbounded.
    pub fn kkt_solve(&self) -> Result<SaddlePoint, ModelError> {
        let (n, m) = (self.n(), self.m());
        let (k, rhs) = self.kkt_system();
        let rhs_scale = 1.0 + norm(&rhs);
        let directions = dual_kernel_basis(&self.constraint.a);

        let (solution, least_squares) = match linalg::lu_solve(&k, &rhs, 1e-12) {
            Some(s) => (s, false),
            None => (linalg::symmetric_pinv_solve(&k, &rhs, 1e-12), true),
        };
        let residual = norm(&linalg::sub(&k.mul_vec(&solution), &rhs));
        if !(residual <= 1e-9 * rhs_scale) {
            let x_ls = linalg::least_squares_min_norm(&self.constraint.a, &self.constraint.b, 1e-12);
            let feas = norm(&self.constraint.residual(&x_ls));
            let reason = if feas > 1e-9 * (1.0 + norm(&self.constraint.b)) {
                NoSaddleReason::Infeasible { residual: feas }
            } else {
                NoSaddleReason::Unbounded { residual }
            };
            return Err(ModelError::NoSaddlePoint(reason));
        }

        let xi = solution[..n].to_vec();
        let eta = solution[n..n + m].to_vec();
        let (stationarity_residual, feasibility_residual) = self.kkt_residuals(&xi, &eta);
        let multiplier_min_norm = least_squares && !directions.is_empty();
        Ok(SaddlePoint {
            xi,
            eta,
            stationarity_residual,
            feasibility_residual,
            multiplier_min_norm,
            multiplier_directions: directions,
        })
    }

    /// Saddle point if it exists and is certified to [`SADDLE_CERT_TOL`].
    pub fn certified_saddle(&self) -> Result<SaddlePoint, ModelError> {
        let sp = self.kkt_solve()?;
        if !sp.is_certified() {
            return Err(ModelError::NoSaddlePoint(NoSaddleReason::Unbounded {
                residual: sp.stationarity_residual.max(sp.feasibility_residual),
            }));
        }
        Ok(sp)
    }
}

/// Orthonormal basis of `ker Aᵀ` (eigenvectors of `AAᵀ` at zero).
fn dual_kernel_basis(a: &Matrix) -> Vec<Vec<f64>> {
    let m = a.rows();
    if m == 0 {
        return Vec::new();
    }
    let eig = linalg::symmetric_eigen(&a.outer_gram());
    let cutoff = 1e-12 * eig.max().abs().max(1.0);
    (0..m).filter(|&k| eig.values[k].abs() <= cutoff).map(|k| (0..m).map(|i| eig.vectors[(i, k)]).collect()).collect()
}
