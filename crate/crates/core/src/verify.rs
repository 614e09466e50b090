//! A-posteriori verification of a candidate `x*`.
//!
//! The strict double inequality holds on a continuum, so it is checked by
//! sampling with an exclusion ball of radius `exclusion_eps` around `x*`
//! (the margin tends to 0 there). All probes draw from index-addressable
//! quasi-random streams and reduce in index order, so reports are
//! bit-for-bit reproducible regardless of thread count.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::VectorFieldSpec;
use crate::linalg::{opt_vector_serde, project_ball, vector_serde, Vector};
use crate::qmc::BallSampler;
use crate::solve::{fixed_point_solve, payoff, FixedPointOptions};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("budget `{0}` must be at least 1")]
    InvalidBudget(&'static str),
    #[error("candidate has dimension {got}, field has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("radius must satisfy 0 < r <= rho, got {0}")]
    InvalidRadius(f64),
}

/// `sup_{y∈B_r} ⟨Φ(x), x − y⟩ = ⟨Φ(x), x⟩ + r‖Φ(x)‖`; `≤ 0` iff `x` solves
/// the Stampacchia inequality on `B_r`.
pub fn stampacchia_residual(field: &VectorFieldSpec, x: &Vector, r: f64) -> f64 {
    let phi = field.eval(x);
    phi.dot(x) + r * phi.norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MintyEstimate {
    /// Best `⟨Φ(y), x − y⟩` found: a lower bound on the true sup.
    pub estimate: f64,
    pub starts: usize,
    #[serde(with = "vector_serde")]
    pub argmax: Vector,
}

fn minty_h(field: &VectorFieldSpec, x: &Vector, y: &Vector) -> f64 {
    field.eval(y).dot(&(x - y))
}

fn minty_ascent(
    field: &VectorFieldSpec,
    x: &Vector,
    r: f64,
    start: Vector,
    iters: usize,
) -> (f64, Vector) {
    let mut y = start;
    let mut h = minty_h(field, x, &y);
    let mut step = r;
    for _ in 0..iters {
        let grad = field.jacobian(&y).transpose() * (x - &y) - field.eval(&y);
        let gnorm = grad.norm();
        if gnorm == 0.0 {
            break;
        }
        let mut s = (2.0 * step).min(r / gnorm * 2.0);
        let mut accepted = false;
        for _ in 0..40 {
            let cand = project_ball(&(&y + &grad * s), r);
            let hc = minty_h(field, x, &cand);
            if hc > h + 1e-4 * grad.dot(&(&cand - &y)).max(0.0) {
                y = cand;
                h = hc;
                step = s;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (h, y)
}

/// Estimate of `sup_{y∈B_r} ⟨Φ(y), x − y⟩` by quasi-random screening followed
/// by projected-gradient ascent with backtracking from `x` itself and the
/// best `starts − 1` screened points.
pub fn minty_sup(
    field: &VectorFieldSpec,
    x: &Vector,
    r: f64,
    starts: usize,
    seed: u64,
) -> MintyEstimate {
    const ASCENT_ITERS: usize = 200;
    const SCREEN_PER_START: usize = 16;
    let sampler = BallSampler::new(field.dim(), seed);
    let screen = (starts * SCREEN_PER_START) as u64;
    let mut screened: Vec<(f64, Vector)> = (0..screen)
        .into_par_iter()
        .map(|i| {
            let y = if i % 2 == 0 {
                sampler.ball(i, r)
            } else {
                sampler.sphere(i, r)
            };
            (minty_h(field, x, &y), y)
        })
        .collect();
    let mut order: Vec<usize> = (0..screened.len()).collect();
    order.sort_by(|&a, &b| screened[b].0.total_cmp(&screened[a].0));
    let mut seeds = vec![project_ball(x, r)];
    seeds.extend(
        order
            .iter()
            .take(starts.saturating_sub(1))
            .map(|&i| screened[i].1.clone()),
    );

    let ascended: Vec<(f64, Vector)> = seeds
        .into_par_iter()
        .map(|s| minty_ascent(field, x, r, s, ASCENT_ITERS))
        .collect();
    screened.extend(ascended);
    let (estimate, argmax) = screened.into_iter().fold(
        (f64::NEG_INFINITY, Vector::zeros(field.dim())),
        |best, cur| {
            if cur.0 > best.0 {
                cur
            } else {
                best
            }
        },
    );
    MintyEstimate {
        estimate,
        starts,
        argmax,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleViReport {
    pub samples: usize,
    /// Largest `max{⟨Φ(x*),x*−y⟩, ⟨Φ(y),x*−y⟩}` seen; must be `< 0`.
    pub worst_margin: f64,
    #[serde(with = "vector_serde")]
    pub witness: Vector,
    /// Largest margin divided by `‖y − x*‖`.
    pub worst_normalized_margin: f64,
    pub exclusion_eps: f64,
}

fn double_vi_margin(
    field: &VectorFieldSpec,
    phi_star: &Vector,
    x_star: &Vector,
    y: &Vector,
) -> f64 {
    let diff = x_star - y;
    phi_star.dot(&diff).max(field.eval(y).dot(&diff))
}

/// Samples `y ∈ B_r` (interior, sphere, and log-spaced shells around `x*`)
/// outside the exclusion ball and records the worst double-VI margin.
pub fn double_vi_check(
    field: &VectorFieldSpec,
    x_star: &Vector,
    r: f64,
    samples: usize,
    seed: u64,
    exclusion_eps: f64,
) -> DoubleViReport {
    let sampler = BallSampler::new(field.dim(), seed);
    let near = BallSampler::new(field.dim(), seed.wrapping_add(0xA11CE));
    let phi_star = field.eval(x_star);
    let evaluated: Vec<Option<(f64, f64, Vector)>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let y = match i % 10 {
                0..=3 => sampler.ball(i, r),
                4..=6 => sampler.sphere(i, r),
                _ => {
                    let dist = near.log_radius(i, exclusion_eps, 2.0 * r);
                    project_ball(&(x_star + near.sphere(i, dist)), r)
                }
            };
            let dist = (&y - x_star).norm();
            if dist < exclusion_eps {
                return None;
            }
            let m = double_vi_margin(field, &phi_star, x_star, &y);
            Some((m, m / dist, y))
        })
        .collect();

    let mut report = DoubleViReport {
        samples: 0,
        worst_margin: f64::NEG_INFINITY,
        witness: x_star.clone(),
        worst_normalized_margin: f64::NEG_INFINITY,
        exclusion_eps,
    };
    for (m, normalized, y) in evaluated.into_iter().flatten() {
        report.samples += 1;
        if m > report.worst_margin {
            report.worst_margin = m;
            report.witness = y;
        }
        report.worst_normalized_margin = report.worst_normalized_margin.max(normalized);
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest of `J(x*,y) − J(x*,y*)` and `J(x*,y*) − J(x,y*)`.
    pub worst: f64,
    pub tol: f64,
}

/// Counts sampled pairs violating `J(x*,y) ≤ J(x*,y*) ≤ J(x,y*)` by more
/// than `tol`.
pub fn saddle_check(
    field: &VectorFieldSpec,
    x_star: &Vector,
    y_star: &Vector,
    r: f64,
    samples: usize,
    seed: u64,
    tol: f64,
) -> SaddleReport {
    let xs = BallSampler::new(field.dim(), seed);
    let ys = BallSampler::new(field.dim(), seed.wrapping_add(0xB0B));
    let value = payoff(field, x_star, y_star);
    let phi_star = field.eval(x_star);
    let gaps: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let (x, y) = if i % 2 == 0 {
                (xs.ball(i, r), ys.ball(i, r))
            } else {
                (xs.sphere(i, r), ys.sphere(i, r))
            };
            let upper = phi_star.dot(&(x_star - &y)) - value;
            let lower = value - payoff(field, &x, y_star);
            upper.max(lower)
        })
        .collect();
    SaddleReport {
        samples,
        violations: gaps.iter().filter(|&&g| g > tol).count(),
        worst: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub starts: usize,
    pub converged: usize,
    pub non_converged: usize,
    pub clusters: usize,
    pub max_pairwise_distance: f64,
    /// First endpoint of each cluster.
    pub representatives: Vec<Vec<f64>>,
    /// Diagnostics of failed starts, by start index.
    pub failures: Vec<String>,
}

/// Runs the fixed-point solver from quasi-random starts on `S_r` and clusters
/// the converged endpoints at `cluster_radius`.
pub fn uniqueness_probe(
    field: &VectorFieldSpec,
    r: f64,
    starts: usize,
    seed: u64,
    solver_tol: f64,
    cluster_radius: f64,
) -> UniquenessReport {
    let sampler = BallSampler::new(field.dim(), seed);
    let outcomes: Vec<Result<Vector, String>> = (0..starts as u64)
        .into_par_iter()
        .map(|i| {
            let opts = FixedPointOptions {
                tol: solver_tol,
                start: Some(sampler.sphere(i, r)),
                ..FixedPointOptions::default()
            };
            match fixed_point_solve(field, r, &opts) {
                Ok(c) if c.converged => Ok(c.x_star),
                Ok(c) => Err(format!(
                    "start {i}: {}",
                    c.diagnostic.unwrap_or_else(|| "not converged".into())
                )),
                Err(e) => Err(format!("start {i}: {e}")),
            }
        })
        .collect();

    let mut endpoints = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(x) => endpoints.push(x),
            Err(e) => failures.push(e),
        }
    }
    let mut reps: Vec<Vector> = Vec::new();
    for x in &endpoints {
        if !reps.iter().any(|c| (c - x).norm() <= cluster_radius) {
            reps.push(x.clone());
        }
    }
    let mut diameter = 0.0_f64;
    for (i, a) in endpoints.iter().enumerate() {
        for b in &endpoints[i + 1..] {
            diameter = diameter.max((a - b).norm());
        }
    }
    UniquenessReport {
        starts,
        converged: endpoints.len(),
        non_converged: failures.len(),
        clusters: reps.len(),
        max_pairwise_distance: diameter,
        representatives: reps.iter().map(|v| v.iter().copied().collect()).collect(),
        failures,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolatingPair {
    #[serde(with = "vector_serde")]
    pub x: Vector,
    #[serde(with = "vector_serde")]
    pub y: Vector,
    /// `⟨Φ(x) − Φ(y), x − y⟩ < 0`.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonotonicityClass {
    MonotoneOnSamples,
    NonMonotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub classification: MonotonicityClass,
    pub violating_pair: Option<ViolatingPair>,
}

/// Looks for `x, y ∈ B_ρ` with `⟨Φ(x) − Φ(y), x − y⟩ < −tol`: first random
/// pairs, then pairs `c ± h·v` along the most negative eigenvector of the
/// symmetric part of `Φ'(c)` at sampled centres.
pub fn monotonicity_probe(
    field: &VectorFieldSpec,
    rho: f64,
    samples: usize,
    seed: u64,
    tol: f64,
) -> MonotonicityReport {
    let rho = rho.min(field.rho());
    let xs = BallSampler::new(field.dim(), seed);
    let ys = BallSampler::new(field.dim(), seed.wrapping_add(0xC0FFEE));
    let pair_value = |x: &Vector, y: &Vector| (field.eval(x) - field.eval(y)).dot(&(x - y));

    let random: Vec<Option<ViolatingPair>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (xs.ball(i, rho), ys.ball(i, rho));
            let value = pair_value(&x, &y);
            (value < -tol).then_some(ViolatingPair { x, y, value })
        })
        .collect();
    let guided_count = samples.min(64) as u64;
    let guided: Vec<Option<ViolatingPair>> = (0..guided_count)
        .into_par_iter()
        .map(|i| {
            let centre = xs.ball(i, 0.5 * rho);
            let jac = field.jacobian(&centre);
            let sym = (&jac + jac.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym);
            let (k, &lambda) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))?;
            if lambda >= 0.0 {
                return None;
            }
            let dir = eig.eigenvectors.column(k).into_owned() * (0.25 * rho);
            let (x, y) = (&centre + &dir, &centre - &dir);
            let value = pair_value(&x, &y);
            (value < -tol).then_some(ViolatingPair { x, y, value })
        })
        .collect();

    let violating_pair = random.into_iter().chain(guided).flatten().next();
    MonotonicityReport {
        samples,
        classification: if violating_pair.is_some() {
            MonotonicityClass::NonMonotone
        } else {
            MonotonicityClass::MonotoneOnSamples
        },
        violating_pair,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub samples: usize,
    pub minty_starts: usize,
    pub uniqueness_starts: usize,
    pub monotonicity_samples: usize,
    /// Threshold for `minty_sup ≤ tol`.
    pub tol: f64,
    pub saddle_tol: f64,
    /// Default `1e-6·r`.
    pub exclusion_eps: Option<f64>,
    pub cluster_radius: f64,
    pub solver_tol: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 10_000,
            minty_starts: 32,
            uniqueness_starts: 50,
            monotonicity_samples: 10_000,
            tol: 1e-8,
            saddle_tol: 1e-9,
            exclusion_eps: None,
            cluster_radius: 1e-6,
            solver_tol: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub field: String,
    pub r: f64,
    #[serde(with = "vector_serde")]
    pub x_star: Vector,
    #[serde(with = "opt_vector_serde", default)]
    pub y_star: Option<Vector>,
    pub double_vi: DoubleViReport,
    pub stampacchia_sup: f64,
    pub minty_sup: MintyEstimate,
    pub saddle_check: SaddleReport,
    pub uniqueness: UniquenessReport,
    pub monotonicity: MonotonicityReport,
    pub tol: f64,
    pub seed: u64,
    pub passed: bool,
}

impl VerificationReport {
    /// One `(check, passed, detail)` row per criterion, for tabular output.
    pub fn rows(&self) -> Vec<(&'static str, bool, String)> {
        vec![
            (
                "double VI worst margin < 0",
                self.double_vi.worst_margin < 0.0,
                format!(
                    "{:.3e} over {} samples",
                    self.double_vi.worst_margin, self.double_vi.samples
                ),
            ),
            (
                "Minty sup <= tol",
                self.minty_sup.estimate <= self.tol,
                format!("{:.3e} (tol {:.1e})", self.minty_sup.estimate, self.tol),
            ),
            (
                "saddle violations = 0",
                self.saddle_check.violations == 0,
                format!(
                    "{} of {} (worst {:.3e})",
                    self.saddle_check.violations,
                    self.saddle_check.samples,
                    self.saddle_check.worst
                ),
            ),
            (
                "uniqueness clusters = 1",
                self.uniqueness.clusters == 1,
                format!(
                    "{} clusters from {} converged starts, diameter {:.3e}",
                    self.uniqueness.clusters,
                    self.uniqueness.converged,
                    self.uniqueness.max_pairwise_distance
                ),
            ),
        ]
    }
}

/// Runs every probe on a candidate solution. `y_star` defaults to `x_star`.
pub fn verify_solution(
    field: &VectorFieldSpec,
    x_star: &Vector,
    y_star: Option<&Vector>,
    r: f64,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    for (name, n) in [
        ("samples", opts.samples),
        ("minty_starts", opts.minty_starts),
        ("uniqueness_starts", opts.uniqueness_starts),
        ("monotonicity_samples", opts.monotonicity_samples),
    ] {
        if n == 0 {
            return Err(VerifyError::InvalidBudget(name));
        }
    }
    if x_star.len() != field.dim() {
        return Err(VerifyError::DimensionMismatch {
            expected: field.dim(),
            got: x_star.len(),
        });
    }
    if !(r > 0.0 && r <= field.rho() * (1.0 + 1e-12)) {
        return Err(VerifyError::InvalidRadius(r));
    }
    let seed = opts.seed;
    let eps = opts.exclusion_eps.unwrap_or(1e-6 * r);
    let y_ref = y_star.unwrap_or(x_star);

    let double_vi = double_vi_check(field, x_star, r, opts.samples, seed, eps);
    let stampacchia_sup = stampacchia_residual(field, x_star, r);
    let minty = minty_sup(field, x_star, r, opts.minty_starts, seed.wrapping_add(1));
    let saddle = saddle_check(
        field,
        x_star,
        y_ref,
        r,
        opts.samples,
        seed.wrapping_add(2),
        opts.saddle_tol,
    );
    let uniqueness = uniqueness_probe(
        field,
        r,
        opts.uniqueness_starts,
        seed.wrapping_add(3),
        opts.solver_tol,
        opts.cluster_radius,
    );
    let monotonicity = monotonicity_probe(
        field,
        field.rho(),
        opts.monotonicity_samples,
        seed.wrapping_add(4),
        1e-12,
    );

    let passed = double_vi.worst_margin < 0.0
        && minty.estimate <= opts.tol
        && saddle.violations == 0
        && uniqueness.clusters == 1;
    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        field: field.label().to_owned(),
        r,
        x_star: x_star.clone(),
        y_star: y_star.cloned(),
        double_vi,
        stampacchia_sup,
        minty_sup: minty,
        saddle_check: saddle,
        uniqueness,
        monotonicity,
        tol: opts.tol,
        seed,
        passed,
    })
}
