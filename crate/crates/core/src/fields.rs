//! Vector fields on a closed ball `B_ρ` and the built-in problem families.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{operator_norm, Matrix, Vector, DEFAULT_NORM_TOL};

type EvalFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type JacobianFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// Slack allowed when checking that evaluation points lie in `B_ρ`.
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("domain radius must be positive and finite, got {0}")]
    NonPositiveRadius(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0} contains a non-finite entry")]
    NonFinite(&'static str),
    #[error("finite-difference step must satisfy 0 < h < rho, got {0}")]
    InvalidStep(f64),
}

/// Upper bounds on `sup ‖Φ'‖` and the Lipschitz constant of `Φ'` over `B_ρ`,
/// known in closed form for the built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConstants {
    pub theta: f64,
    pub gamma: f64,
}

/// A `C^{1,1}` vector field `Φ: B_ρ → R^n`.
///
/// Cloning is cheap; evaluators are shared. Evaluation must be pure since
/// the sampling loops call it from several threads.
#[derive(Clone)]
pub struct VectorFieldSpec {
    dim: usize,
    rho: f64,
    label: String,
    evaluator: EvalFn,
    jacobian: Option<JacobianFn>,
    analytic: Option<AnalyticConstants>,
}

impl fmt::Debug for VectorFieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFieldSpec")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("rho", &self.rho)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("analytic", &self.analytic)
            .finish()
    }
}

impl VectorFieldSpec {
    pub fn new<F>(dim: usize, rho: f64, evaluator: F) -> Result<Self, FieldError>
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(FieldError::ZeroDimension);
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(FieldError::NonPositiveRadius(rho));
        }
        Ok(Self {
            dim,
            rho,
            label: "custom".to_owned(),
            evaluator: Arc::new(evaluator),
            jacobian: None,
            analytic: None,
        })
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn with_analytic_constants(mut self, constants: AnalyticConstants) -> Self {
        self.analytic = Some(constants);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn analytic_constants(&self) -> Option<AnalyticConstants> {
        self.analytic
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    fn check_domain(&self, x: &Vector) {
        debug_assert_eq!(x.len(), self.dim, "point dimension");
        debug_assert!(
            x.norm() <= self.rho * (1.0 + DOMAIN_SLACK) + DOMAIN_SLACK,
            "field '{}' evaluated outside B_rho: |x| = {}, rho = {}",
            self.label,
            x.norm(),
            self.rho
        );
    }

    /// `Φ(x)`.
    pub fn eval(&self, x: &Vector) -> Vector {
        self.check_domain(x);
        (self.evaluator)(x)
    }

    /// `Φ'(x)`, analytic when available, else central differences with the
    /// default step.
    pub fn jacobian(&self, x: &Vector) -> Matrix {
        self.check_domain(x);
        match &self.jacobian {
            Some(j) => j(x),
            None => finite_diff_jacobian(self, x, default_fd_step(x, self.rho))
                .expect("default step is valid"),
        }
    }

    /// `Φ − w`, keeping the Jacobian and constants of `Φ`.
    pub fn shifted(&self, w: &Vector) -> Self {
        let inner = self.evaluator.clone();
        let w = w.clone();
        Self {
            dim: self.dim,
            rho: self.rho,
            label: format!("{} - w", self.label),
            evaluator: Arc::new(move |x| inner(x) - &w),
            jacobian: self.jacobian.clone(),
            analytic: self.analytic,
        }
    }
}

/// `h = 1e-5·(1 + ‖x‖)`, capped so the stencil fits inside `B_ρ`.
pub fn default_fd_step(x: &Vector, rho: f64) -> f64 {
    (1e-5 * (1.0 + x.norm())).min(0.25 * rho)
}

/// Central-difference Jacobian. Near the boundary (`‖x‖ + h > ρ`) the
/// stencil centre is pulled radially inward to `‖c‖ = ρ − h`, which keeps
/// every evaluation inside `B_ρ` at the cost of an `O(γh)` bias.
pub fn finite_diff_jacobian(
    field: &VectorFieldSpec,
    x: &Vector,
    h: f64,
) -> Result<Matrix, FieldError> {
    let rho = field.rho();
    if !(h > 0.0 && h < rho) {
        return Err(FieldError::InvalidStep(h));
    }
    let norm = x.norm();
    let centre = if norm + h <= rho {
        x.clone()
    } else {
        x * ((rho - h) / norm)
    };
    let n = field.dim();
    let mut jac = Matrix::zeros(n, n);
    for j in 0..n {
        let mut plus = centre.clone();
        plus[j] += h;
        let mut minus = centre.clone();
        minus[j] -= h;
        let col = ((field.evaluator)(&plus) - (field.evaluator)(&minus)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

fn check_finite_vec(v: &Vector, what: &'static str) -> Result<(), FieldError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(FieldError::NonFinite(what))
    }
}

fn check_affine_data(a: &Matrix, b: &Vector) -> Result<(), FieldError> {
    let n = b.len();
    if n == 0 {
        return Err(FieldError::ZeroDimension);
    }
    if a.nrows() != n {
        return Err(FieldError::DimensionMismatch {
            what: "A rows",
            expected: n,
            got: a.nrows(),
        });
    }
    if a.ncols() != n {
        return Err(FieldError::DimensionMismatch {
            what: "A columns",
            expected: n,
            got: a.ncols(),
        });
    }
    if !a.iter().all(|x| x.is_finite()) {
        return Err(FieldError::NonFinite("A"));
    }
    check_finite_vec(b, "b")
}

/// `Φ(x) = b`.
pub fn make_constant_field(b: Vector, rho: f64) -> Result<VectorFieldSpec, FieldError> {
    check_finite_vec(&b, "b")?;
    let n = b.len();
    let value = b.clone();
    Ok(VectorFieldSpec::new(n, rho, move |_| value.clone())?
        .with_jacobian(move |_| Matrix::zeros(n, n))
        .with_analytic_constants(AnalyticConstants {
            theta: 0.0,
            gamma: 0.0,
        })
        .with_label("constant"))
}

/// `Φ(x) = Ax + b`.
pub fn make_affine_field(a: Matrix, b: Vector, rho: f64) -> Result<VectorFieldSpec, FieldError> {
    check_affine_data(&a, &b)?;
    let theta = operator_norm(&a, DEFAULT_NORM_TOL).value;
    let jac = a.clone();
    Ok(VectorFieldSpec::new(b.len(), rho, move |x| &a * x + &b)?
        .with_jacobian(move |_| jac.clone())
        .with_analytic_constants(AnalyticConstants { theta, gamma: 0.0 })
        .with_label("affine"))
}

/// The smooth perturbation `s(x)_i = sin(x_{(i+1) mod n})`.
///
/// `s'(x)` is a cyclic permutation of `diag(cos x)`, so `sup ‖s'‖ = 1` (at
/// the origin) and `‖s'(x) − s'(v)‖ = max_i |cos x_i − cos v_i|`, whose
/// Lipschitz constant on `B_ρ` is `sin(min(ρ, π/2))`.
pub fn smooth_bump(x: &Vector) -> Vector {
    let n = x.len();
    Vector::from_fn(n, |i, _| x[(i + 1) % n].sin())
}

pub fn smooth_bump_jacobian(x: &Vector) -> Matrix {
    let n = x.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        let j = (i + 1) % n;
        m[(i, j)] += x[j].cos();
    }
    m
}

pub fn smooth_bump_bounds(rho: f64) -> (f64, f64) {
    (1.0, rho.min(std::f64::consts::FRAC_PI_2).sin())
}

/// `Φ(x) = Ax + b + ε·s(x)` with `s` from [`smooth_bump`].
pub fn make_smooth_perturbed_field(
    a: Matrix,
    b: Vector,
    eps: f64,
    rho: f64,
) -> Result<VectorFieldSpec, FieldError> {
    check_affine_data(&a, &b)?;
    if !eps.is_finite() {
        return Err(FieldError::NonFinite("eps"));
    }
    let (sup_ds, lip_ds) = smooth_bump_bounds(rho);
    let theta = operator_norm(&a, DEFAULT_NORM_TOL).value + eps.abs() * sup_ds;
    let gamma = eps.abs() * lip_ds;
    let jac = a.clone();
    Ok(
        VectorFieldSpec::new(b.len(), rho, move |x| &a * x + &b + smooth_bump(x) * eps)?
            .with_jacobian(move |x| &jac + smooth_bump_jacobian(x) * eps)
            .with_analytic_constants(AnalyticConstants { theta, gamma })
            .with_label("affine_plus_smooth"),
    )
}

/// `Φ(x)_i = x_i² + b_i`, the gradient of `Σ x_i³/3 + ⟨b, x⟩`.
///
/// `Φ'(x) = diag(2x)`, so `θ = 2ρ` and `γ = 2`; `Φ'(0) = 0`.
pub fn make_gradient_quadratic_field(b: Vector, rho: f64) -> Result<VectorFieldSpec, FieldError> {
    check_finite_vec(&b, "b")?;
    let n = b.len();
    Ok(
        VectorFieldSpec::new(n, rho, move |x| x.map(|v| v * v) + &b)?
            .with_jacobian(move |x| Matrix::from_diagonal(&(x * 2.0)))
            .with_analytic_constants(AnalyticConstants {
                theta: 2.0 * rho,
                gamma: 2.0,
            })
            .with_label("gradient_quadratic"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn constant_field_values() {
        let f = make_constant_field(v(&[1.0, 0.0]), 1.0).unwrap();
        assert_eq!(f.eval(&v(&[0.3, 0.4])), v(&[1.0, 0.0]));
        assert_eq!(f.jacobian(&v(&[0.3, 0.4])), Matrix::zeros(2, 2));
        let zero = make_constant_field(v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(zero.eval(&v(&[0.0, 0.0])), v(&[0.0, 0.0]));
    }

    #[test]
    fn affine_field_values() {
        let f = make_affine_field(Matrix::identity(2, 2), v(&[2.0, 0.0]), 2.0).unwrap();
        assert_eq!(f.eval(&v(&[1.0, 1.0])), v(&[3.0, 1.0]));
        let c = f.analytic_constants().unwrap();
        assert_abs_diff_eq!(c.theta, 1.0, epsilon = 1e-12);
        assert_eq!(c.gamma, 0.0);
    }

    #[test]
    fn zero_matrix_affine_matches_constant() {
        let f = make_affine_field(Matrix::zeros(2, 2), v(&[1.0, -1.0]), 1.0).unwrap();
        let g = make_constant_field(v(&[1.0, -1.0]), 1.0).unwrap();
        let x = v(&[0.2, -0.7]);
        assert_eq!(f.eval(&x), g.eval(&x));
        assert_eq!(f.jacobian(&x), g.jacobian(&x));
        assert_eq!(f.analytic_constants(), g.analytic_constants());
    }

    #[test]
    fn perturbed_with_zero_eps_is_affine() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]);
        let b = v(&[1.0, 2.0]);
        let p = make_smooth_perturbed_field(a.clone(), b.clone(), 0.0, 1.0).unwrap();
        let f = make_affine_field(a, b, 1.0).unwrap();
        let x = v(&[0.3, -0.6]);
        assert_eq!(p.eval(&x), f.eval(&x));
        assert_eq!(p.jacobian(&x), f.jacobian(&x));
        assert_eq!(p.analytic_constants(), f.analytic_constants());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = make_affine_field(Matrix::identity(2, 2), v(&[1.0, 2.0, 3.0]), 1.0).unwrap_err();
        assert!(matches!(err, FieldError::DimensionMismatch { .. }));
    }

    #[test]
    fn invalid_radius_and_step() {
        assert_eq!(
            make_constant_field(v(&[1.0]), 0.0).unwrap_err(),
            FieldError::NonPositiveRadius(0.0)
        );
        let f = make_constant_field(v(&[1.0]), 1.0).unwrap();
        assert!(matches!(
            finite_diff_jacobian(&f, &v(&[0.0]), 0.0),
            Err(FieldError::InvalidStep(_))
        ));
        assert!(matches!(
            finite_diff_jacobian(&f, &v(&[0.0]), -1e-3),
            Err(FieldError::InvalidStep(_))
        ));
    }

    #[test]
    fn finite_differences_of_constant_and_affine() {
        let f = make_constant_field(v(&[1.0, 3.0]), 1.0).unwrap();
        let jac = finite_diff_jacobian(&f, &v(&[0.1, 0.2]), 1e-5).unwrap();
        assert_eq!(jac, Matrix::zeros(2, 2));

        let a = Matrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let g = make_affine_field(a.clone(), v(&[0.0, 1.0]), 1.0).unwrap();
        let jac = finite_diff_jacobian(&g, &v(&[0.1, 0.2]), 1e-5).unwrap();
        assert!((jac - a).norm() < 1e-9);
    }

    #[test]
    fn finite_differences_stay_inside_near_boundary() {
        let a = Matrix::identity(2, 2);
        let f = make_smooth_perturbed_field(a, v(&[1.0, 0.0]), 0.5, 1.0).unwrap();
        let x = v(&[0.6, 0.8]);
        let jac = finite_diff_jacobian(&f, &x, 1e-5).unwrap();
        // bias is O(γ h)
        assert!((jac - f.jacobian(&x)).norm() < 1e-4);
    }

    #[test]
    fn perturbed_jacobian_matches_finite_differences() {
        let a = Matrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, -0.4, 0.5, 1.0, 0.0, 0.3, -1.0]);
        let f = make_smooth_perturbed_field(a, v(&[1.0, 0.0, -1.0]), 0.7, 1.0).unwrap();
        let x = v(&[0.2, -0.3, 0.4]);
        let fd = finite_diff_jacobian(&f, &x, 1e-5).unwrap();
        assert!((fd - f.jacobian(&x)).norm() < 1e-6);
    }

    #[test]
    fn quadratic_field_constants() {
        let f = make_gradient_quadratic_field(Vector::zeros(2), 0.5).unwrap();
        assert_eq!(f.jacobian(&Vector::zeros(2)), Matrix::zeros(2, 2));
        assert_eq!(
            f.analytic_constants(),
            Some(AnalyticConstants {
                theta: 1.0,
                gamma: 2.0
            })
        );
        assert!((f.eval(&v(&[0.3, -0.2])) - v(&[0.09, 0.04])).norm() < 1e-15);
    }

    #[test]
    fn shifted_field_keeps_derivative() {
        let f = make_gradient_quadratic_field(Vector::zeros(2), 0.5).unwrap();
        let g = f.shifted(&v(&[4.0, 0.0]));
        let x = v(&[0.1, 0.2]);
        assert_eq!(g.eval(&x), f.eval(&x) - v(&[4.0, 0.0]));
        assert_eq!(g.jacobian(&x), f.jacobian(&x));
        assert_eq!(g.analytic_constants(), f.analytic_constants());
    }

    #[test]
    fn user_field_without_jacobian_uses_differences() {
        let f = VectorFieldSpec::new(2, 1.0, |x| Vector::from_fn(2, |i, _| x[i].powi(3))).unwrap();
        assert!(!f.has_analytic_jacobian());
        let jac = f.jacobian(&v(&[0.5, -0.2]));
        assert_abs_diff_eq!(jac[(0, 0)], 0.75, epsilon = 1e-8);
        assert_abs_diff_eq!(jac[(1, 1)], 0.12, epsilon = 1e-8);
        assert_abs_diff_eq!(jac[(0, 1)], 0.0, epsilon = 1e-12);
    }
}
