//! Constants `θ, γ, M, σ, δ` and the admissible radius.
//!
//! `θ = sup ‖Φ'(x)‖` and `γ = Lip(Φ')` over `B_ρ` come from the field's
//! analytic bounds when it carries them; otherwise they are sampled and the
//! result is a lower bound, which makes `r_max` an optimistic estimate. The
//! verification module is the a-posteriori check in that case.
//!
//! `σ = inf_{‖y‖≤ρ} sup_{‖u‖=1} |⟨Φ(0),u⟩ − ⟨Φ'(0)u,y⟩|` is computed through
//! the dual-norm identity `sup_{‖u‖=1} |⟨c,u⟩ − ⟨Au,y⟩| = ‖c − Aᵀy‖`, i.e. as
//! a ball-constrained least-squares problem.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::VectorFieldSpec;
use crate::linalg::{
    ball_constrained_lsq, operator_norm, project_ball, vector_serde, BallLsqSolution, Matrix,
    Vector, DEFAULT_LSQ_TOL,
};
use crate::qmc::BallSampler;
use crate::solve::gradient_jx;
use crate::SCHEMA_VERSION;

/// Norm tolerance inside sampling loops; looser than the default to keep
/// thousands of power iterations cheap.
const SAMPLING_NORM_TOL: f64 = 1e-10;
/// Candidates kept for local refinement after the global sampling pass.
const REFINE_CANDIDATES: usize = 8;
/// `σ` at or below `SIGMA_ZERO_TOL·(1 + ‖Φ(0)‖)` is treated as zero.
pub const SIGMA_ZERO_TOL: f64 = 1e-12;
/// Allowed disagreement between the two `δ`/`σ` routes, relative to `1 + σ`.
pub const DELTA_SIGMA_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("Theorem 2.3 gate: Φ(0)=0, so no radius r > 0 admits a solution")]
    PhiVanishesAtOrigin,
    #[error("internal inconsistency: delta = {delta} but sigma = {sigma}")]
    DeltaSigmaMismatch { delta: f64, sigma: f64 },
    #[error("internal inconsistency: sampled dual norm {sampled} exceeds closed form {closed}")]
    DualNormViolated { sampled: f64, closed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    SampledLowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub theta_samples: usize,
    pub gamma_samples: usize,
    /// Compass-search iterations applied to the best sampled candidates.
    pub refine_steps: usize,
    pub seed: u64,
    pub lsq_tol: f64,
    /// Unit vectors sampled to cross-check the dual-norm identity at the
    /// `δ` witness; 0 disables the check.
    pub dual_norm_samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            theta_samples: 1000,
            gamma_samples: 1000,
            refine_steps: 30,
            seed: 0,
            lsq_tol: DEFAULT_LSQ_TOL,
            dual_norm_samples: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantsProvenance {
    pub theta: Provenance,
    pub gamma: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetsUsed {
    pub theta_samples: usize,
    pub gamma_samples: usize,
    pub refine_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsCertificate {
    pub schema_version: u32,
    pub field: String,
    pub dimension: usize,
    pub rho: f64,
    pub theta: f64,
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub sigma: f64,
    pub delta: f64,
    pub r_max: f64,
    /// Minimizing `y` in the definition of `σ`.
    #[serde(with = "vector_serde")]
    pub sigma_witness: Vector,
    pub provenance: ConstantsProvenance,
    pub budgets: BudgetsUsed,
}

impl ConstantsCertificate {
    /// `σ > 0` (up to [`SIGMA_ZERO_TOL`]), i.e. the Theorem 2.3 gate is open.
    pub fn gate_open(&self) -> bool {
        self.r_max > 0.0
    }
}

/// `M = 2(θ + ργ)`.
pub fn compute_m(theta: f64, gamma: f64, rho: f64) -> f64 {
    2.0 * (theta + rho * gamma)
}

/// `r_max = min(ρ, σ/(2M))`; `ρ` when `M = 0` and `σ > 0`; `0` when `σ = 0`.
pub fn admissible_radius(sigma: f64, m: f64, rho: f64) -> f64 {
    if sigma <= 0.0 {
        0.0
    } else if m <= 0.0 {
        rho
    } else {
        rho.min(sigma / (2.0 * m))
    }
}

/// Local maximization by compass search over a point set mapped through
/// `project`, halving the step whenever no axis move improves.
fn compass_ascent<F, P>(
    start: Vector,
    mut step: f64,
    steps: usize,
    value: F,
    project: P,
) -> (Vector, f64)
where
    F: Fn(&Vector) -> f64,
    P: Fn(Vector) -> Vector,
{
    let dim = start.len();
    let mut best_x = start;
    let mut best_v = value(&best_x);
    for _ in 0..steps {
        let mut improved = false;
        'dirs: for j in 0..dim {
            for sign in [1.0, -1.0] {
                let mut cand = best_x.clone();
                cand[j] += sign * step;
                let cand = project(cand);
                let v = value(&cand);
                if v > best_v {
                    best_x = cand;
                    best_v = v;
                    improved = true;
                    break 'dirs;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best_x, best_v)
}

fn top_candidates<T: Clone>(scored: &[(f64, T)], k: usize) -> Vec<(f64, T)> {
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    // Stable: ties keep index order.
    idx.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));
    idx.into_iter().take(k).map(|i| scored[i].clone()).collect()
}

/// Sampled lower bound on `sup_{x∈B_ρ} ‖Φ'(x)‖`.
pub fn sample_theta(field: &VectorFieldSpec, budget: usize, refine_steps: usize, seed: u64) -> f64 {
    let rho = field.rho();
    let sampler = BallSampler::new(field.dim(), seed);
    let norm_at = |x: &Vector| operator_norm(&field.jacobian(x), SAMPLING_NORM_TOL).value;

    let mut scored: Vec<(f64, Vector)> = (0..budget as u64)
        .into_par_iter()
        .map(|i| {
            let x = sampler.ball(i, rho);
            (norm_at(&x), x)
        })
        .collect();
    let origin = Vector::zeros(field.dim());
    scored.push((norm_at(&origin), origin));

    top_candidates(&scored, REFINE_CANDIDATES)
        .into_par_iter()
        .map(|(_, x)| {
            compass_ascent(x, 0.1 * rho, refine_steps, norm_at, |c| {
                project_ball(&c, rho)
            })
            .1
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .chain(scored.iter().map(|s| s.0))
        .fold(0.0, f64::max)
}

/// Sampled lower bound on the Lipschitz constant of `Φ'` over `B_ρ`.
///
/// Pairs `(x, v)` are drawn at separations spanning three decades of `ρ`,
/// then the best pairs are refined by compass search over both endpoints.
pub fn sample_gamma(field: &VectorFieldSpec, budget: usize, refine_steps: usize, seed: u64) -> f64 {
    let rho = field.rho();
    let n = field.dim();
    let points = BallSampler::new(n, seed);
    let dirs = BallSampler::new(n, seed.wrapping_add(0x5EED));
    let scales = [1.0, 0.1, 1e-2, 1e-3];

    // Pair stacked as one 2n-vector so compass search can move both ends.
    let ratio = |pair: &Vector| -> f64 {
        let x = pair.rows(0, n).into_owned();
        let v = pair.rows(n, n).into_owned();
        let dist = (&x - &v).norm();
        if dist < 1e-9 * rho {
            return 0.0;
        }
        operator_norm(
            &(field.jacobian(&x) - field.jacobian(&v)),
            SAMPLING_NORM_TOL,
        )
        .value
            / dist
    };
    let project_pair = |pair: Vector| -> Vector {
        let x = project_ball(&pair.rows(0, n).into_owned(), rho);
        let v = project_ball(&pair.rows(n, n).into_owned(), rho);
        let mut out = Vector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&x);
        out.rows_mut(n, n).copy_from(&v);
        out
    };

    let scored: Vec<(f64, Vector)> = (0..budget as u64)
        .into_par_iter()
        .map(|i| {
            let x = points.ball(i, rho);
            let h = scales[(i as usize) % scales.len()] * rho;
            let v = project_ball(&(&x + dirs.sphere(i, h)), rho);
            let mut pair = Vector::zeros(2 * n);
            pair.rows_mut(0, n).copy_from(&x);
            pair.rows_mut(n, n).copy_from(&v);
            (ratio(&pair), pair)
        })
        .collect();

    top_candidates(&scored, REFINE_CANDIDATES)
        .into_par_iter()
        .map(|(_, pair)| {
            let sep = (pair.rows(0, n) - pair.rows(n, n)).norm();
            compass_ascent(pair, 0.25 * sep, refine_steps, ratio, project_pair).1
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .chain(scored.iter().map(|s| s.0))
        .fold(0.0, f64::max)
}

/// `θ`: analytic when the field carries it, else [`sample_theta`].
pub fn estimate_theta(
    field: &VectorFieldSpec,
    budget: usize,
    refine_steps: usize,
    seed: u64,
) -> Estimate {
    match field.analytic_constants() {
        Some(c) => Estimate {
            value: c.theta,
            provenance: Provenance::Analytic,
        },
        None => Estimate {
            value: sample_theta(field, budget, refine_steps, seed),
            provenance: Provenance::SampledLowerBound,
        },
    }
}

/// `γ`: analytic when the field carries it, else [`sample_gamma`].
pub fn estimate_gamma(
    field: &VectorFieldSpec,
    budget: usize,
    refine_steps: usize,
    seed: u64,
) -> Estimate {
    match field.analytic_constants() {
        Some(c) => Estimate {
            value: c.gamma,
            provenance: Provenance::Analytic,
        },
        None => Estimate {
            value: sample_gamma(field, budget, refine_steps, seed),
            provenance: Provenance::SampledLowerBound,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaResult {
    pub value: f64,
    pub witness: Vector,
    pub lsq: BallLsqSolution,
}

/// `σ` over `B_radius` as `min_{‖y‖≤radius} ‖Φ(0) − Φ'(0)ᵀy‖`.
pub fn compute_sigma(field: &VectorFieldSpec, radius: f64, tol: f64) -> SigmaResult {
    let origin = Vector::zeros(field.dim());
    let lsq = ball_constrained_lsq(&field.jacobian(&origin), &field.eval(&origin), radius, tol);
    SigmaResult {
        value: lsq.objective,
        witness: lsq.y_star.clone(),
        lsq,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaResult {
    pub delta: f64,
    pub witness: Vector,
    /// Sampled `sup_{‖u‖=1} |⟨J'_x(0,y),u⟩|` at the witness, if requested.
    pub sampled_dual_norm: Option<f64>,
}

/// `δ = inf_{y∈B_radius} ‖J'_x(0,y)‖` for `J(x,y) = ⟨Φ(x), x − y⟩`.
///
/// The affine map `y ↦ J'_x(0,y)` is recovered by probing the gradient
/// routine itself, so this route shares no code with [`compute_sigma`]
/// beyond the least-squares kernel. The two must agree; a disagreement is
/// reported as an internal inconsistency.
pub fn compute_delta(
    field: &VectorFieldSpec,
    radius: f64,
    dual_norm_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<DeltaResult, CertifyError> {
    let n = field.dim();
    let origin = Vector::zeros(n);
    let offset = gradient_jx(field, &origin, &origin);
    // J'_x(0,y) = offset − K y; column j of K from a probe along e_j.
    let probe = radius.min(field.rho());
    let mut k = Matrix::zeros(n, n);
    for j in 0..n {
        let mut y = Vector::zeros(n);
        y[j] = probe;
        k.set_column(j, &((&offset - gradient_jx(field, &origin, &y)) / probe));
    }
    // min ‖offset − K y‖ is the least-squares problem with A = Kᵀ.
    let lsq = ball_constrained_lsq(&k.transpose(), &offset, radius, tol);
    let delta = lsq.objective;

    let sigma = compute_sigma(field, radius, tol).value;
    if (delta - sigma).abs() > DELTA_SIGMA_TOL * (1.0 + sigma) {
        return Err(CertifyError::DeltaSigmaMismatch { delta, sigma });
    }

    let sampled_dual_norm = (dual_norm_samples > 0).then(|| {
        let grad = &offset - &k * &lsq.y_star;
        let dirs = BallSampler::new(n, seed.wrapping_add(0xD0A1));
        (0..dual_norm_samples as u64)
            .into_par_iter()
            .map(|i| grad.dot(&dirs.sphere(i, 1.0)).abs())
            .reduce(|| 0.0, f64::max)
    });
    if let Some(sampled) = sampled_dual_norm {
        if sampled > delta * (1.0 + 1e-12) + 1e-12 {
            return Err(CertifyError::DualNormViolated {
                sampled,
                closed: delta,
            });
        }
    }
    Ok(DeltaResult {
        delta,
        witness: lsq.y_star,
        sampled_dual_norm,
    })
}

/// A radius `r* ∈ (0, ρ]` with `σ(B_{r*}) ≥ ‖Φ(0)‖/2 > 0`.
///
/// Uses `‖Φ(0) − Φ'(0)ᵀy‖ ≥ ‖Φ(0)‖ − r*‖Φ'(0)‖` for `‖y‖ ≤ r*`.
pub fn find_positive_sigma_radius(field: &VectorFieldSpec) -> Result<f64, CertifyError> {
    let origin = Vector::zeros(field.dim());
    let phi0 = field.eval(&origin).norm();
    if phi0 == 0.0 {
        return Err(CertifyError::PhiVanishesAtOrigin);
    }
    let jac0 = operator_norm(&field.jacobian(&origin), crate::linalg::DEFAULT_NORM_TOL).value;
    Ok(if jac0 > 0.0 {
        field.rho().min(phi0 / (2.0 * jac0))
    } else {
        field.rho()
    })
}

/// Full constants certificate for `field` on its own domain `B_ρ`.
pub fn certify(
    field: &VectorFieldSpec,
    opts: &CertifyOptions,
) -> Result<ConstantsCertificate, CertifyError> {
    let rho = field.rho();
    let theta = estimate_theta(field, opts.theta_samples, opts.refine_steps, opts.seed);
    let gamma = estimate_gamma(
        field,
        opts.gamma_samples,
        opts.refine_steps,
        opts.seed.wrapping_add(1),
    );
    let m = compute_m(theta.value, gamma.value, rho);

    let sigma = compute_sigma(field, rho, opts.lsq_tol);
    let delta = compute_delta(field, rho, opts.dual_norm_samples, opts.seed, opts.lsq_tol)?;

    let phi0 = field.eval(&Vector::zeros(field.dim())).norm();
    let sigma_value = if sigma.value <= SIGMA_ZERO_TOL * (1.0 + phi0) {
        0.0
    } else {
        sigma.value
    };
    Ok(ConstantsCertificate {
        schema_version: SCHEMA_VERSION,
        field: field.label().to_owned(),
        dimension: field.dim(),
        rho,
        theta: theta.value,
        gamma: gamma.value,
        m,
        sigma: sigma_value,
        delta: delta.delta,
        r_max: admissible_radius(sigma_value, m, rho),
        sigma_witness: sigma.witness,
        provenance: ConstantsProvenance {
            theta: theta.provenance,
            gamma: gamma.provenance,
        },
        budgets: BudgetsUsed {
            theta_samples: opts.theta_samples,
            gamma_samples: opts.gamma_samples,
            refine_steps: opts.refine_steps,
            seed: opts.seed,
        },
    })
}

/// Unit-sphere sampling estimate of `sup_{‖u‖=1} |⟨c,u⟩ − ⟨Au,y⟩|`; used by
/// tests and diagnostics as an independent check of the dual-norm identity.
pub fn sampled_dual_norm(a: &Matrix, c: &Vector, y: &Vector, samples: usize, seed: u64) -> f64 {
    let dirs = BallSampler::new(c.len(), seed);
    (0..samples as u64)
        .map(|i| {
            let u = dirs.sphere(i, 1.0);
            (c.dot(&u) - (a * &u).dot(y)).abs()
        })
        .fold(0.0, f64::max)
}
