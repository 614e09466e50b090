//! Solvers for the point `x* ∈ S_r`.
//!
//! Two constructions are available and can cross-check each other:
//!
//! - [`fixed_point_solve`]: damped iteration of `F(x) = −rΦ(x)/‖Φ(x)‖`,
//!   renormalized onto `S_r` after every step. At the solution `x* = y*`
//!   and `y*` is the minimizer of `⟨Φ(x*), ·⟩` over `B_r`, which is exactly
//!   `F(x*)`.
//! - [`saddle_solve`]: alternating exact best responses for the payoff
//!   `J(x, y) = ⟨Φ(x), x − y⟩`. The `x` step minimizes the convexified
//!   `(L/2)‖x‖² + J(x, y)` over `B_r` ([`minimize_j`]); the `y` step is the
//!   closed-form maximizer of `J(x, ·)` ([`best_response_y`]).
//!
//! Neither iteration carries a convergence proof; every result is a
//! certificate with residuals, and the `verify` module checks it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{
    compute_m, estimate_gamma, estimate_theta, CertifyOptions, ConstantsCertificate,
};
use crate::fields::VectorFieldSpec;
use crate::linalg::{
    operator_norm, project_ball, to_sphere, vector_serde, Vector, DEFAULT_NORM_TOL,
};
use crate::SCHEMA_VERSION;

pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Smallest damping factor the fixed-point iteration will use.
pub const DAMPING_FLOOR: f64 = 1.0 / 64.0;
/// Relative slack on `r ≤ r_max`, absorbing rounding in `σ/(2M)`.
const RADIUS_SLACK: f64 = 1e-12;
const INNER_MAX_ITER: usize = 100_000;
const CYCLE_WINDOW: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("radius {r} exceeds the domain radius rho = {rho}")]
    RadiusExceedsDomain { r: f64, rho: f64 },
    #[error(
        "radius {r} exceeds the admissible radius r_max = {r_max} (use an override to experiment)"
    )]
    RadiusNotAdmissible { r: f64, r_max: f64 },
    #[error("Theorem 2.3 gate: Phi(0) = 0, no admissible radius exists")]
    GateClosed,
    #[error("field vanishes at a solver iterate (|Phi(x)| = {norm:e}); the radius is probably not admissible")]
    FieldVanishes { norm: f64 },
    #[error("Theorem 2.4 requires Psi'(0) = 0, but |Psi'(0)| = {0:e}")]
    JacobianNotVanishing(f64),
    #[error("shift direction must be a unit vector of dimension {expected}")]
    BadDirection { expected: usize },
}

/// `J(x, y) = ⟨Φ(x), x − y⟩`.
pub fn payoff(field: &VectorFieldSpec, x: &Vector, y: &Vector) -> f64 {
    field.eval(x).dot(&(x - y))
}

/// `J'_x(x, y) = Φ(x) + Φ'(x)ᵀ(x − y)`.
pub fn gradient_jx(field: &VectorFieldSpec, x: &Vector, y: &Vector) -> Vector {
    field.eval(x) + field.jacobian(x).transpose() * (x - y)
}

fn default_vanish_tol(field: &VectorFieldSpec) -> f64 {
    1e-12 * (1.0 + field.eval(&Vector::zeros(field.dim())).norm())
}

/// `−r Φ(x)/‖Φ(x)‖`, the unique maximizer of `J(x, ·)` over `B_r`.
pub fn best_response_y(
    field: &VectorFieldSpec,
    x: &Vector,
    r: f64,
    vanish_tol: f64,
) -> Result<Vector, SolveError> {
    let phi = field.eval(x);
    let norm = phi.norm();
    if norm <= vanish_tol {
        return Err(SolveError::FieldVanishes { norm });
    }
    Ok(phi * (-r / norm))
}

/// A validated saddle problem: field, radius and the Lipschitz constant `L`
/// of `J'_x(·, y)` (taken as `M` from the certificate).
#[derive(Debug, Clone)]
pub struct SaddleProblem {
    pub field: VectorFieldSpec,
    pub r: f64,
    pub l: f64,
}

impl SaddleProblem {
    /// Rejects `r > r_max` unless `allow_override` is set; `r ≤ ρ` is always
    /// enforced since the field is only defined on `B_ρ`.
    pub fn new(
        field: VectorFieldSpec,
        cert: &ConstantsCertificate,
        r: f64,
        allow_override: bool,
    ) -> Result<Self, SolveError> {
        check_radius(&field, r, cert.r_max, allow_override)?;
        Ok(Self {
            field,
            r,
            l: cert.m,
        })
    }
}

pub fn check_radius(
    field: &VectorFieldSpec,
    r: f64,
    r_max: f64,
    allow_override: bool,
) -> Result<(), SolveError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(SolveError::InvalidRadius(r));
    }
    if r > field.rho() * (1.0 + RADIUS_SLACK) {
        return Err(SolveError::RadiusExceedsDomain {
            r,
            rho: field.rho(),
        });
    }
    if !allow_override {
        if r_max <= 0.0 {
            return Err(SolveError::GateClosed);
        }
        if r > r_max * (1.0 + RADIUS_SLACK) {
            return Err(SolveError::RadiusNotAdmissible { r, r_max });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub x: Vector,
    pub iterations: usize,
    pub converged: bool,
    /// Projected-gradient residual `‖x − P(x − ∇g(x)/(2L))‖` at exit.
    pub residual: f64,
    /// Smallest `‖Lx + J'_x(x,y)‖` seen at iterates strictly inside
    /// `B_{r − tol}`; `None` if every iterate was on the sphere.
    pub min_interior_gradient: Option<f64>,
}

/// Unique minimizer of `J(·, y)` over `B_r`, found by projected gradient on
/// `g(x) = (L/2)‖x‖² + J(x, y)` with step `1/(2L)`.
///
/// `L = 0` only happens for constant fields, where `J(·, y)` is linear and
/// the minimizer is `−r Φ(0)/‖Φ(0)‖` in closed form.
pub fn minimize_j(
    field: &VectorFieldSpec,
    y: &Vector,
    r: f64,
    l: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MinimizeResult, SolveError> {
    let origin = Vector::zeros(field.dim());
    if l <= 0.0 {
        let x = best_response_y(field, &origin, r, default_vanish_tol(field))?;
        return Ok(MinimizeResult {
            x,
            iterations: 0,
            converged: true,
            residual: 0.0,
            min_interior_gradient: None,
        });
    }

    let grad_g = |x: &Vector| gradient_jx(field, x, y) + x * l;
    let step = 1.0 / (2.0 * l);

    let g0 = gradient_jx(field, &origin, y);
    let mut x = to_sphere(&(-g0), r).unwrap_or(origin);
    let mut min_interior: Option<f64> = None;
    let mut residual = f64::INFINITY;
    for k in 0..max_iter {
        let grad = grad_g(&x);
        if x.norm() < r - tol {
            let g = grad.norm();
            min_interior = Some(min_interior.map_or(g, |m: f64| m.min(g)));
        }
        let next = project_ball(&(&x - &grad * step), r);
        residual = (&next - &x).norm();
        x = next;
        if residual <= tol {
            return Ok(MinimizeResult {
                x,
                iterations: k + 1,
                converged: true,
                residual,
                min_interior_gradient: min_interior,
            });
        }
    }
    Ok(MinimizeResult {
        x,
        iterations: max_iter,
        converged: false,
        residual,
        min_interior_gradient: min_interior,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    FixedPoint,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖x* + rΦ(x*)/‖Φ(x*)‖‖`
    pub fixed_point: f64,
    /// `|‖x*‖ − r|`
    pub sphere: f64,
    /// `⟨Φ(x*), x*⟩ + r‖Φ(x*)‖`, the closed-form Stampacchia sup.
    pub stampacchia: f64,
    /// `|J(x*, y*)|`; the saddle value is 0 at a solution since `x* = y*`.
    pub saddle_gap: f64,
    /// `‖x* − y*‖`
    pub xy_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCertificate {
    pub schema_version: u32,
    pub solver: SolverKind,
    pub field: String,
    pub r: f64,
    #[serde(with = "vector_serde")]
    pub x_star: Vector,
    #[serde(with = "vector_serde")]
    pub y_star: Vector,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    pub residuals: Residuals,
    /// Per-iteration convergence measure: `‖x_k − F(x_k)‖` for the
    /// fixed-point solver, `‖x_k − y_k‖` for the saddle solver.
    pub trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

/// Residual bundle at a candidate pair.
pub fn residuals(field: &VectorFieldSpec, x: &Vector, y: &Vector, r: f64) -> Residuals {
    let phi = field.eval(x);
    let phi_norm = phi.norm();
    let fixed_point = if phi_norm > 0.0 {
        (x + &phi * (r / phi_norm)).norm()
    } else {
        f64::INFINITY
    };
    Residuals {
        fixed_point,
        sphere: (x.norm() - r).abs(),
        stampacchia: phi.dot(x) + r * phi_norm,
        saddle_gap: phi.dot(&(x - y)).abs(),
        xy_gap: (x - y).norm(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOptions {
    pub damping_t0: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Default `1e-12·(1 + ‖Φ(0)‖)`.
    pub vanish_tol: Option<f64>,
    /// Starting point, rescaled onto `S_r`. Default: `F(0)`.
    pub start: Option<Vector>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            damping_t0: 1.0,
            tol: DEFAULT_SOLVER_TOL,
            max_iter: DEFAULT_MAX_ITER,
            vanish_tol: None,
            start: None,
        }
    }
}

/// Damped iteration `x_{k+1} = r·normalize((1−t)x_k + tF(x_k))`.
///
/// A step that increases `‖x − F(x)‖` is rejected and `t` is halved, down to
/// [`DAMPING_FLOOR`], at which point steps are accepted unconditionally.
pub fn fixed_point_solve(
    field: &VectorFieldSpec,
    r: f64,
    opts: &FixedPointOptions,
) -> Result<SolutionCertificate, SolveError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(SolveError::InvalidRadius(r));
    }
    let origin = Vector::zeros(field.dim());
    let vanish = opts.vanish_tol.unwrap_or_else(|| default_vanish_tol(field));
    if field.eval(&origin).norm() <= vanish {
        return Err(SolveError::GateClosed);
    }
    let map = |x: &Vector| best_response_y(field, x, r, vanish);

    let (mut x, mut iterations) = match opts.start.as_ref().and_then(|s| to_sphere(s, r)) {
        Some(s) => (s, 0),
        None => (map(&origin)?, 1),
    };
    let mut fx = map(&x)?;
    let mut res = (&x - &fx).norm();
    let mut trace = vec![res];
    let mut t = opts.damping_t0.clamp(DAMPING_FLOOR, 1.0);

    while res > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let blend = &x * (1.0 - t) + &fx * t;
        let cand = to_sphere(&blend, r).unwrap_or_else(|| fx.clone());
        let f_cand = map(&cand)?;
        let r_cand = (&cand - &f_cand).norm();
        if r_cand > res && t > DAMPING_FLOOR {
            t = (t * 0.5).max(DAMPING_FLOOR);
            trace.push(res);
            continue;
        }
        x = cand;
        fx = f_cand;
        res = r_cand;
        trace.push(res);
    }

    let converged = res <= opts.tol;
    Ok(SolutionCertificate {
        schema_version: SCHEMA_VERSION,
        solver: SolverKind::FixedPoint,
        field: field.label().to_owned(),
        r,
        residuals: residuals(field, &x, &fx, r),
        x_star: x,
        y_star: fx,
        iterations,
        converged,
        tol: opts.tol,
        trace,
        diagnostic: (!converged).then(|| {
            format!("no convergence after {iterations} iterations; last residual {res:e}")
        }),
        seed: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub inner_max_iter: usize,
    pub vanish_tol: Option<f64>,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_SOLVER_TOL,
            max_iter: DEFAULT_MAX_ITER,
            inner_max_iter: INNER_MAX_ITER,
            vanish_tol: None,
        }
    }
}

/// Alternating best responses `x_{k+1} = argmin J(·, y_k)`,
/// `y_{k+1} = argmax J(x_{k+1}, ·)` over `B_r`, from `y_0 = −rΦ(0)/‖Φ(0)‖`.
///
/// Stops when `‖x_k − y_k‖ ≤ tol` and `‖y_k − y_{k−1}‖ ≤ tol`. A return to a
/// recent `(x, y)` without convergence is reported as a cycle.
pub fn saddle_solve(
    problem: &SaddleProblem,
    opts: &SaddleOptions,
) -> Result<SolutionCertificate, SolveError> {
    let SaddleProblem { field, r, l } = problem;
    let (r, l) = (*r, *l);
    let origin = Vector::zeros(field.dim());
    let vanish = opts.vanish_tol.unwrap_or_else(|| default_vanish_tol(field));
    if field.eval(&origin).norm() <= vanish {
        return Err(SolveError::GateClosed);
    }
    let inner_tol = (opts.tol * 1e-2).max(1e-15);

    let mut y = best_response_y(field, &origin, r, vanish)?;
    let mut x = y.clone();
    let mut trace = Vec::new();
    let mut history: Vec<(Vector, Vector)> = Vec::new();
    let mut diagnostic = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let inner = minimize_j(field, &y, r, l, inner_tol, opts.inner_max_iter)?;
        if !inner.converged {
            diagnostic = Some(format!(
                "inner minimization stalled at iteration {iterations} (residual {:e})",
                inner.residual
            ));
        }
        x = inner.x;
        let y_next = best_response_y(field, &x, r, vanish)?;
        let gap = (&x - &y_next).norm();
        let moved = (&y_next - &y).norm();
        y = y_next;
        trace.push(gap);
        if gap <= opts.tol && moved <= opts.tol {
            converged = true;
            break;
        }
        let cycled = history
            .iter()
            .rev()
            .skip(1)
            .any(|(hx, hy)| (hx - &x).norm() + (hy - &y).norm() <= opts.tol);
        if cycled {
            diagnostic = Some(format!(
                "cycle detected in (x, y) trace at iteration {iterations}"
            ));
            break;
        }
        history.push((x.clone(), y.clone()));
        if history.len() > CYCLE_WINDOW {
            history.remove(0);
        }
    }
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("no convergence after {iterations} iterations"));
    }
    if converged {
        diagnostic = None;
    }

    Ok(SolutionCertificate {
        schema_version: SCHEMA_VERSION,
        solver: SolverKind::Saddle,
        field: field.label().to_owned(),
        r,
        residuals: residuals(field, &x, &y, r),
        x_star: x,
        y_star: y,
        iterations,
        converged,
        tol: opts.tol,
        trace,
        diagnostic,
        seed: None,
    })
}

/// Distance between the two solvers' `x*`.
pub fn cross_agreement(a: &SolutionCertificate, b: &SolutionCertificate) -> f64 {
    (&a.x_star - &b.x_star).norm()
}

#[derive(Debug, Clone)]
pub struct ShiftedField {
    /// `Φ = Ψ − w`.
    pub field: VectorFieldSpec,
    pub w: Vector,
    pub theta1: f64,
    pub gamma1: f64,
    pub m1: f64,
}

/// Builds `Φ = Ψ − w` with `w = Ψ(0) + 2M₁ρ·d`, the equality case of
/// `‖w − Ψ(0)‖ ≥ 2M₁ρ`, for `Ψ` with `Ψ'(0) = 0`. Since `Φ'(0) = 0`,
/// `σ = ‖Φ(0)‖ = 2M₁ρ` and the admissible radius is all of `ρ`.
pub fn theorem_2_4_shift(
    psi: &VectorFieldSpec,
    d: &Vector,
    opts: &CertifyOptions,
) -> Result<ShiftedField, SolveError> {
    let n = psi.dim();
    if d.len() != n || (d.norm() - 1.0).abs() > 1e-9 {
        return Err(SolveError::BadDirection { expected: n });
    }
    let origin = Vector::zeros(n);
    let psi0 = psi.eval(&origin);
    let jac0 = operator_norm(&psi.jacobian(&origin), DEFAULT_NORM_TOL).value;
    if jac0 > 1e-12 * (1.0 + psi0.norm()) {
        return Err(SolveError::JacobianNotVanishing(jac0));
    }
    let rho = psi.rho();
    let theta1 = estimate_theta(psi, opts.theta_samples, opts.refine_steps, opts.seed).value;
    let gamma1 = estimate_gamma(
        psi,
        opts.gamma_samples,
        opts.refine_steps,
        opts.seed.wrapping_add(1),
    )
    .value;
    let m1 = compute_m(theta1, gamma1, rho);
    let w = &psi0 + d * (2.0 * m1 * rho);
    let field = psi.shifted(&w).with_label("shifted");
    Ok(ShiftedField {
        field,
        w,
        theta1,
        gamma1,
        m1,
    })
}
