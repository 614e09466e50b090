//! Dense kernels: projection onto a ball, spectral norm, and the
//! ball-constrained least-squares subproblem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative tolerance used for [`operator_norm`] when callers have no opinion.
pub const DEFAULT_NORM_TOL: f64 = 1e-12;
/// Relative tolerance on `|‖y‖ − ρ|` in the boundary secular equation.
pub const DEFAULT_LSQ_TOL: f64 = 1e-10;

const NORM_MAX_ITER: usize = 20_000;
const SECULAR_MAX_ITER: usize = 500;

/// Serializes a [`Vector`] as a plain JSON array.
pub mod vector_serde {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// Like [`vector_serde`] for `Option<Vector>`.
pub mod opt_vector_serde {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vector>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_seq(v.iter()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vector>, D::Error> {
        Ok(Option::<Vec<f64>>::deserialize(d)?.map(Vector::from_vec))
    }
}

/// Euclidean projection of `x` onto the closed ball of radius `r` centred at 0.
pub fn project_ball(x: &Vector, r: f64) -> Vector {
    let norm = x.norm();
    if norm <= r {
        x.clone()
    } else {
        x * (r / norm)
    }
}

/// Scales `x` onto the sphere of radius `r`. Returns `None` for the zero vector.
pub fn to_sphere(x: &Vector, r: f64) -> Option<Vector> {
    let norm = x.norm();
    if norm == 0.0 || !norm.is_finite() {
        None
    } else {
        Some(x * (r / norm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Largest singular value of `a` by power iteration on `AᵀA`.
///
/// Two independent starts are run (the heaviest coordinate axis and the
/// all-ones direction) and the larger estimate wins, so a start that happens
/// to be orthogonal to the dominant right singular vector is harmless.
pub fn operator_norm(a: &Matrix, tol: f64) -> NormEstimate {
    operator_norm_with_limit(a, tol, NORM_MAX_ITER)
}

pub fn operator_norm_with_limit(a: &Matrix, tol: f64, max_iter: usize) -> NormEstimate {
    let n = a.ncols();
    if n == 0 || a.iter().all(|&v| v == 0.0) {
        return NormEstimate {
            value: 0.0,
            converged: true,
            iterations: 0,
        };
    }
    let gram = a.transpose() * a;

    let heaviest = (0..n)
        .max_by(|&i, &j| {
            a.column(i)
                .norm_squared()
                .total_cmp(&a.column(j).norm_squared())
        })
        .unwrap_or(0);
    let mut axis = Vector::zeros(n);
    axis[heaviest] = 1.0;
    // Slightly tilted so it is never an exact eigenvector of a diagonal AᵀA.
    let ones = Vector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);

    let mut best = NormEstimate {
        value: 0.0,
        converged: true,
        iterations: 0,
    };
    for start in [axis, ones] {
        let est = power_iterate(&gram, start, tol, max_iter);
        best.iterations += est.iterations;
        if est.value > best.value {
            best.value = est.value;
            best.converged = est.converged;
        }
    }
    best
}

fn power_iterate(gram: &Matrix, start: Vector, tol: f64, max_iter: usize) -> NormEstimate {
    let mut v = start.normalize();
    let mut previous = f64::NAN;
    for k in 1..=max_iter {
        let w = gram * &v;
        let rayleigh = v.dot(&w).max(0.0);
        let sigma = rayleigh.sqrt();
        let w_norm = w.norm();
        if w_norm == 0.0 {
            return NormEstimate {
                value: 0.0,
                converged: true,
                iterations: k,
            };
        }
        v = w / w_norm;
        if (sigma - previous).abs() <= tol * sigma {
            // One more Rayleigh quotient at the updated vector.
            let polished = v.dot(&(gram * &v)).max(0.0).sqrt();
            return NormEstimate {
                value: polished.max(sigma),
                converged: true,
                iterations: k,
            };
        }
        previous = sigma;
    }
    NormEstimate {
        value: previous,
        converged: false,
        iterations: max_iter,
    }
}

/// Minimizer of `‖c − Aᵀy‖` over `‖y‖ ≤ ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallLsqSolution {
    #[serde(with = "vector_serde")]
    pub y_star: Vector,
    /// Lagrange multiplier `λ` of the ball constraint.
    pub multiplier: f64,
    /// `‖c − Aᵀ y_star‖`.
    pub objective: f64,
    pub on_boundary: bool,
}

/// Solves `min ‖c − Aᵀy‖` subject to `‖y‖ ≤ ρ`.
///
/// The minimum-norm unconstrained solution is used when it is feasible.
/// Otherwise the multiplier `λ > 0` with `‖(AAᵀ + λI)⁻¹Ac‖ = ρ` is found by
/// Newton's method on `1/ρ − 1/‖y(λ)‖`, safeguarded by bisection on the
/// bracket `[0, ‖Ac‖/ρ]`.
pub fn ball_constrained_lsq(a: &Matrix, c: &Vector, rho: f64, tol: f64) -> BallLsqSolution {
    let n = c.len();
    let b = a.transpose();
    let svd = b.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => unreachable!("SVD was requested with both factors"),
    };
    let s = svd.singular_values;
    let s_max = s.max();
    let cutoff = s_max * (n.max(1) as f64) * f64::EPSILON;
    let beta = u.transpose() * c;

    // Active spectral components: (singular value, coefficient, right vector).
    let comps: Vec<(f64, f64, Vector)> = (0..s.len())
        .filter(|&i| s[i] > cutoff)
        .map(|i| (s[i], beta[i], v_t.row(i).transpose()))
        .collect();

    let y_of = |lambda: f64| -> Vector {
        let mut y = Vector::zeros(n);
        for (si, bi, vi) in &comps {
            y.axpy(si * bi / (si * si + lambda), vi, 1.0);
        }
        y
    };
    let objective_of = |y: &Vector| (c - &b * y).norm();

    let y_min_norm = y_of(0.0);
    if y_min_norm.norm() <= rho {
        let objective = objective_of(&y_min_norm);
        return BallLsqSolution {
            y_star: y_min_norm,
            multiplier: 0.0,
            objective,
            on_boundary: false,
        };
    }

    let ac_norm = (a * c).norm();
    let mut lo = 0.0_f64;
    let mut hi = ac_norm / rho;
    let mut lambda = 0.0_f64;
    let mut y = y_min_norm;
    for _ in 0..SECULAR_MAX_ITER {
        let ny = y.norm();
        if (ny - rho).abs() <= tol * rho {
            break;
        }
        if ny > rho {
            lo = lambda;
        } else {
            hi = lambda;
        }
        if hi - lo <= f64::EPSILON * hi.max(f64::MIN_POSITIVE) {
            break;
        }
        // d‖y‖/dλ = −Σ s²β²/(s²+λ)³ / ‖y‖
        let dnorm: f64 = -comps
            .iter()
            .map(|(si, bi, _)| {
                let d = si * si + lambda;
                (si * bi).powi(2) / (d * d * d)
            })
            .sum::<f64>()
            / ny;
        let psi = 1.0 / rho - 1.0 / ny;
        let dpsi = dnorm / (ny * ny);
        let mut next = if dpsi != 0.0 {
            lambda - psi / dpsi
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        lambda = next;
        y = y_of(lambda);
    }
    let objective = objective_of(&y);
    BallLsqSolution {
        y_star: y,
        multiplier: lambda,
        objective,
        on_boundary: true,
    }
}

/// `(‖(AAᵀ + λI)y − Ac‖, |λ(‖y‖ − ρ)|)` for a computed solution.
pub fn lsq_kkt_residuals(a: &Matrix, c: &Vector, rho: f64, sol: &BallLsqSolution) -> (f64, f64) {
    let n = c.len();
    let lhs = (a * a.transpose() + Matrix::identity(n, n) * sol.multiplier) * &sol.y_star;
    let stationarity = (lhs - a * c).norm();
    let slackness = (sol.multiplier * (sol.y_star.norm() - rho)).abs();
    (stationarity, slackness)
}
