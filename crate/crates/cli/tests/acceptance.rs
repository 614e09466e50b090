//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Oracles here are independent of the library code paths
//! they check.

use std::f64::consts::TAU;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smallball_core::certify::{
    certify, compute_delta, compute_sigma, find_positive_sigma_radius, CertifyOptions,
};
use smallball_core::fields::{
    make_affine_field, make_constant_field, make_gradient_quadratic_field,
    make_smooth_perturbed_field,
};
use smallball_core::linalg::project_ball;
use smallball_core::problem::parse_problem;
use smallball_core::solve::{
    cross_agreement, fixed_point_solve, gradient_jx, minimize_j, payoff, saddle_solve,
    theorem_2_4_shift, FixedPointOptions, SaddleOptions, SaddleProblem, SolutionCertificate,
};
use smallball_core::verify::{
    double_vi_check, monotonicity_probe, saddle_check, stampacchia_residual, verify_solution,
    MonotonicityClass, VerifyOptions,
};
use smallball_core::{Matrix, Vector, VectorFieldSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn opts() -> CertifyOptions {
    CertifyOptions::default()
}

fn fp(field: &VectorFieldSpec, r: f64) -> Result<SolutionCertificate, String> {
    let c =
        fixed_point_solve(field, r, &FixedPointOptions::default()).map_err(|e| e.to_string())?;
    check(c.converged, || {
        format!("fixed point did not converge at r={r}")
    })?;
    Ok(c)
}

fn saddle(field: &VectorFieldSpec, r: f64) -> Result<SolutionCertificate, String> {
    let cert = certify(field, &opts()).map_err(|e| e.to_string())?;
    let p = SaddleProblem::new(field.clone(), &cert, r, false).map_err(|e| e.to_string())?;
    let c = saddle_solve(&p, &SaddleOptions::default()).map_err(|e| e.to_string())?;
    check(c.converged, || format!("saddle did not converge at r={r}"))?;
    Ok(c)
}

fn uniform_sphere(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vector {
    loop {
        let u = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = u.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return u * (r / norm);
        }
    }
}

fn uniform_ball(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vector {
    let rad = r * rng.random::<f64>().powf(1.0 / n as f64);
    uniform_sphere(rng, n, rad)
}

/// 10⁶-point brute-force minimum of `‖c − Aᵀy‖` over `B_ρ` in 2-D: a
/// 500×1000 polar grid, then a 707×707 grid zoomed on its best point.
fn grid_sigma_2d(a: &Matrix, c: &Vector, rho: f64) -> f64 {
    let at = a.transpose();
    let obj = |p: &Vector| (c - &at * p).norm();
    let mut best = (f64::INFINITY, v(&[0.0, 0.0]));
    for i in 0..=500 {
        let rad = rho * i as f64 / 500.0;
        for j in 0..1000 {
            let t = TAU * j as f64 / 1000.0;
            let p = v(&[rad * t.cos(), rad * t.sin()]);
            let o = obj(&p);
            if o < best.0 {
                best = (o, p);
            }
        }
    }
    let half = 4.0 * rho * TAU / 1000.0;
    let centre = best.1.clone();
    for i in 0..707 {
        for j in 0..707 {
            let d = v(&[
                -half + 2.0 * half * i as f64 / 706.0,
                -half + 2.0 * half * j as f64 / 706.0,
            ]);
            best.0 = best.0.min(obj(&project_ball(&(&centre + d), rho)));
        }
    }
    best.0
}

/// Random field on `B_1` in dimension `n`: affine or affine plus the smooth
/// perturbation, with `‖b‖ ∈ [1.5, 3]`.
fn random_field(rng: &mut ChaCha8Rng, n: usize) -> VectorFieldSpec {
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-0.6..0.6));
    let norm = rng.random_range(1.5..3.0);
    let b = uniform_sphere(rng, n, norm);
    if rng.random_bool(0.5) {
        make_affine_field(a, b, 1.0).unwrap()
    } else {
        make_smooth_perturbed_field(a, b, rng.random_range(-0.3..0.3), 1.0).unwrap()
    }
}

fn c1_constant_closed_form() -> Outcome {
    let f = make_constant_field(v(&[1.0, 0.0]), 1.0).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for r in [0.1, 0.5, 1.0] {
        let c = fp(&f, r)?;
        check((&c.x_star - v(&[-r, 0.0])).norm() <= 1e-12, || {
            format!("x* = {:?} at r={r}", c.x_star.as_slice())
        })?;
        check(c.residuals.fixed_point <= 1e-12, || {
            format!("residual {:e}", c.residuals.fixed_point)
        })?;
        let rep = double_vi_check(&f, &c.x_star, r, 10_000, 0, 1e-6 * r);
        check(rep.worst_margin < 0.0, || {
            format!("worst margin {:e} at r={r}", rep.worst_margin)
        })?;
        worst = worst.max(rep.worst_margin);
    }
    Ok(format!(
        "x* = (−r,0) for r ∈ {{0.1,0.5,1}}, worst margin {worst:.2e}"
    ))
}

fn c2_affine_monotone() -> Outcome {
    let f = make_affine_field(Matrix::identity(2, 2), v(&[2.0, 0.0]), 1.0).unwrap();
    let cert = certify(&f, &opts()).map_err(|e| e.to_string())?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    check(
        close(cert.theta, 1.0)
            && close(cert.gamma, 0.0)
            && close(cert.m, 2.0)
            && close(cert.sigma, 1.0)
            && close(cert.r_max, 0.25),
        || {
            format!(
                "θ={} γ={} M={} σ={} r_max={}",
                cert.theta, cert.gamma, cert.m, cert.sigma, cert.r_max
            )
        },
    )?;
    let grid = grid_sigma_2d(&Matrix::identity(2, 2), &v(&[2.0, 0.0]), 1.0);
    check((cert.sigma - grid).abs() <= 1e-4, || {
        format!("σ {} vs grid {grid}", cert.sigma)
    })?;
    let a = fp(&f, 0.25)?;
    let b = saddle(&f, 0.25)?;
    for c in [&a, &b] {
        check((&c.x_star - v(&[-0.25, 0.0])).norm() <= 1e-8, || {
            format!("{:?} x* = {:?}", c.solver, c.x_star.as_slice())
        })?;
    }
    let agree = cross_agreement(&a, &b);
    check(agree <= 1e-8, || format!("agreement {agree:e}"))?;
    Ok(format!(
        "θ=1 γ=0 M=2 σ=1 (grid {grid:.6}) r_max=0.25, agreement {agree:.1e}"
    ))
}

fn c3_nonmonotone() -> Outcome {
    let f =
        make_affine_field(Matrix::from_diagonal(&v(&[1.0, -0.2])), v(&[2.0, 0.0]), 1.0).unwrap();
    let mono = monotonicity_probe(&f, 1.0, 10_000, 0, 1e-12);
    check(
        mono.classification == MonotonicityClass::NonMonotone,
        || "no violating pair found".into(),
    )?;
    let cert = certify(&f, &opts()).map_err(|e| e.to_string())?;
    let a = fp(&f, cert.r_max)?;
    let b = saddle(&f, cert.r_max)?;
    check(cross_agreement(&a, &b) <= 1e-8, || {
        "solvers disagree".into()
    })?;
    let rep = verify_solution(
        &f,
        &a.x_star,
        Some(&a.y_star),
        cert.r_max,
        &VerifyOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    check(rep.double_vi.worst_margin < 0.0, || {
        format!("worst margin {:e}", rep.double_vi.worst_margin)
    })?;
    check(rep.minty_sup.estimate <= 1e-8, || {
        format!("minty {:e}", rep.minty_sup.estimate)
    })?;
    check(
        rep.uniqueness.starts == 50 && rep.uniqueness.converged == 50,
        || format!("{} of 50 starts converged", rep.uniqueness.converged),
    )?;
    check(rep.uniqueness.clusters == 1, || {
        format!("{} clusters", rep.uniqueness.clusters)
    })?;
    check(rep.uniqueness.max_pairwise_distance <= 1e-8, || {
        format!("diameter {:e}", rep.uniqueness.max_pairwise_distance)
    })?;
    check(rep.passed, || "verification failed".into())?;
    let pair = mono.violating_pair.unwrap();
    Ok(format!(
        "violation {:.3e}; r_max={} verified, minty {:.1e}, 1 cluster, diameter {:.1e}",
        pair.value, cert.r_max, rep.minty_sup.estimate, rep.uniqueness.max_pairwise_distance
    ))
}

fn c4_minimize_on_sphere() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut done = 0;
    let mut worst_sphere = 0.0_f64;
    while done < 20 {
        let n = 2 + done % 3;
        let f = random_field(&mut rng, n);
        let cert = certify(&f, &opts()).map_err(|e| e.to_string())?;
        if !cert.gate_open() {
            continue;
        }
        let r = cert.r_max * rng.random_range(0.1..=1.0);
        let y = uniform_ball(&mut rng, n, r);
        let res = minimize_j(&f, &y, r, cert.m, 1e-14, 200_000).map_err(|e| e.to_string())?;
        let xh = res.x;
        let off = (xh.norm() - r).abs();
        worst_sphere = worst_sphere.max(off);
        check(off <= 1e-8, || {
            format!("instance {done}: |‖x̂‖ − r| = {off:e}")
        })?;
        let jh = payoff(&f, &xh, &y);
        let mut tested = 0;
        while tested < 100 {
            let x = match tested % 3 {
                0 => uniform_ball(&mut rng, n, r),
                1 => uniform_sphere(&mut rng, n, r),
                _ => {
                    let dist = r * 10f64.powf(rng.random_range(-5.0..0.0));
                    project_ball(&(&xh + uniform_sphere(&mut rng, n, dist)), r)
                }
            };
            if (&x - &xh).norm() < 1e-6 {
                continue;
            }
            let jx = payoff(&f, &x, &y);
            check(jh < jx, || {
                format!("instance {done}: J(x̂,y)={jh} ≥ J(x,y)={jx}")
            })?;
            tested += 1;
        }
        done += 1;
    }
    Ok(format!("20 instances, max |‖x̂‖ − r| = {worst_sphere:.1e}"))
}

fn c5_gradient_fd() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0_f64;
    for k in 0..100 {
        let n = 2 + k % 3;
        let f = if k % 4 == 3 {
            make_gradient_quadratic_field(uniform_sphere(&mut rng, n, 1.0), 1.0).unwrap()
        } else {
            random_field(&mut rng, n)
        };
        let x = uniform_ball(&mut rng, n, 0.9);
        let y = uniform_ball(&mut rng, n, 1.0);
        let g = gradient_jx(&f, &x, &y);
        let h = 1e-5;
        let fd = Vector::from_fn(n, |i, _| {
            let mut e = Vector::zeros(n);
            e[i] = h;
            let up = &x + &e;
            let dn = &x - &e;
            (f.eval(&up).dot(&(&up - &y)) - f.eval(&dn).dot(&(&dn - &y))) / (2.0 * h)
        });
        let rel = (&g - &fd).norm() / g.norm();
        worst = worst.max(rel);
        check(rel <= 1e-5, || format!("case {k}: relative error {rel:e}"))?;
    }
    Ok(format!("100 cases, max relative error {worst:.1e}"))
}

fn family_documents() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "constant",
            r#"{"family":"constant","dimension":3,"rho":1,"parameters":{"b":[1,-0.5,0.25]}}"#,
        ),
        (
            "affine",
            r#"{"family":"affine","dimension":2,"rho":1,"parameters":{"A":[[1,0],[0,1]],"b":[2,0]}}"#,
        ),
        (
            "affine (σ from interior)",
            r#"{"family":"affine","dimension":2,"rho":2,"parameters":{"A":[[2,1],[0,1]],"b":[0.5,0.3]}}"#,
        ),
        (
            "affine_plus_smooth",
            r#"{"family":"affine_plus_smooth","dimension":3,"rho":1,"parameters":{"A":[[1,0.2,0],[0,-0.2,0.1],[0.3,0,0.5]],"b":[2,0,1],"eps":0.1}}"#,
        ),
        (
            "gradient_quadratic",
            r#"{"family":"gradient_quadratic","dimension":2,"rho":0.5,"parameters":{"b":[1,0.5]}}"#,
        ),
        (
            "shifted",
            r#"{"family":"shifted","dimension":2,"rho":0.5,"parameters":{"d":[1,0]}}"#,
        ),
    ]
}

fn sampled_sup(rng: &mut ChaCha8Rng, a: &Matrix, c: &Vector, y: &Vector) -> f64 {
    let n = c.len();
    (0..100_000)
        .map(|_| {
            let u = uniform_sphere(rng, n, 1.0);
            (c.dot(&u) - (a * &u).dot(y)).abs()
        })
        .fold(0.0, f64::max)
}

fn c6_dual_norm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_ds = 0.0_f64;
    let mut worst_gap = 0.0_f64;
    for (name, doc) in family_documents() {
        let (f, _) = parse_problem(doc).map_err(|e| format!("{name}: {e}"))?;
        let sigma = compute_sigma(&f, f.rho(), 1e-10);
        let delta = compute_delta(&f, f.rho(), 0, 0, 1e-10).map_err(|e| format!("{name}: {e}"))?;
        let ds = (delta.delta - sigma.value).abs();
        worst_ds = worst_ds.max(ds);
        check(ds <= 1e-10, || {
            format!("{name}: δ={} σ={}", delta.delta, sigma.value)
        })?;
        let n = f.dim();
        let origin = Vector::zeros(n);
        let (a, c) = (f.jacobian(&origin), f.eval(&origin));
        let mut ys = vec![sigma.witness.clone()];
        ys.extend((0..3).map(|_| uniform_ball(&mut rng, n, f.rho())));
        for y in ys {
            let exact = (&c - a.transpose() * &y).norm();
            let sampled = sampled_sup(&mut rng, &a, &c, &y);
            let gap = (exact - sampled).abs();
            worst_gap = worst_gap.max(gap);
            check(gap <= 1e-3, || {
                format!("{name}: sampled {sampled} vs ‖c − Aᵀy‖ {exact}")
            })?;
        }
    }
    Ok(format!(
        "6 built-in instances, max |δ − σ| = {worst_ds:.1e}, max sampling gap {worst_gap:.1e}"
    ))
}

fn c7_stampacchia_sampling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for k in 0..20 {
        let n = 2 + k % 3;
        let f = random_field(&mut rng, n);
        let r = rng.random_range(0.05..=1.0);
        let x = uniform_ball(&mut rng, n, r);
        let value = stampacchia_residual(&f, &x, r);
        let phi = f.eval(&x);
        // Linear in y, so the sup over B_r is attained on S_r.
        let sampled = (0..100_000)
            .map(|_| phi.dot(&(&x - uniform_sphere(&mut rng, n, r))))
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = (value - sampled).abs();
        worst = worst.max(gap / (1.0 + value.abs()));
        check(sampled <= value + 1e-12, || {
            format!("case {k}: sample {sampled} above closed form {value}")
        })?;
        check(gap <= 1e-3 * (1.0 + value.abs()), || {
            format!("case {k}: closed {value} vs sampled {sampled}")
        })?;
    }
    Ok(format!("20 cases, max scaled gap {worst:.1e}"))
}

fn c8_gate() -> Outcome {
    let lin = make_affine_field(
        Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
        v(&[0.0, 0.0]),
        1.0,
    )
    .unwrap();
    let cert = certify(&lin, &opts()).map_err(|e| e.to_string())?;
    check(cert.sigma == 0.0 && cert.r_max == 0.0, || {
        format!("σ={} r_max={}", cert.sigma, cert.r_max)
    })?;

    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let p = dir.path().join("linear.json");
    std::fs::write(
        &p,
        r#"{"family":"affine","dimension":2,"rho":1,"parameters":{"A":[[1,2],[0,1]],"b":[0,0]}}"#,
    )
    .map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_smallball-vi"))
        .arg("certify")
        .arg(&p)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.code() == Some(2), || {
        format!("certify exit {:?}", out.status.code())
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..20 {
        let n = 2 + k % 3;
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
        let norm = rng.random_range(0.01..2.0);
        let b = uniform_sphere(&mut rng, n, norm);
        let f = make_affine_field(a, b.clone(), 1.0).unwrap();
        let r_star = find_positive_sigma_radius(&f).map_err(|e| e.to_string())?;
        let s = compute_sigma(&f, r_star, 1e-10).value;
        check(r_star > 0.0 && s >= b.norm() / 2.0, || {
            format!("case {k}: r*={r_star} σ={s} ‖Φ(0)‖={}", b.norm())
        })?;
    }
    Ok("Φ(x)=Ax gives σ=0, r_max=0, certify exit 2; 20 cases σ(B_r*) ≥ ‖Φ(0)‖/2".into())
}

fn c9_theorem_2_4() -> Outcome {
    let rho = 0.5;
    let psi = make_gradient_quadratic_field(v(&[0.0, 0.0]), rho).unwrap();
    let shift = theorem_2_4_shift(&psi, &v(&[1.0, 0.0]), &opts()).map_err(|e| e.to_string())?;
    let psi0 = psi.eval(&Vector::zeros(2));
    let dist = (&shift.w - psi0).norm();
    check((dist - 2.0 * shift.m1 * rho).abs() <= 1e-12, || {
        format!("‖w − Ψ(0)‖ = {dist}, 2M₁ρ = {}", 2.0 * shift.m1 * rho)
    })?;
    let f = shift.field;
    let cert = certify(&f, &opts()).map_err(|e| e.to_string())?;
    check(cert.r_max == rho, || format!("r_max = {}", cert.r_max))?;
    let a = fp(&f, rho)?;
    let b = saddle(&f, rho)?;
    check(cross_agreement(&a, &b) <= 1e-8, || {
        "solvers disagree".into()
    })?;
    let rep = verify_solution(
        &f,
        &a.x_star,
        Some(&a.y_star),
        rho,
        &VerifyOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    check(rep.passed, || {
        format!(
            "verification failed: margin {:e}",
            rep.double_vi.worst_margin
        )
    })?;
    Ok(format!(
        "M₁={} w={:?}, r_max=ρ=0.5, x*={:?} verified",
        shift.m1,
        shift.w.as_slice(),
        a.x_star.as_slice()
    ))
}

fn c10_saddle() -> Outcome {
    // r = 0 means "use r_max".
    let cases: [(&str, VectorFieldSpec, f64); 4] = [
        (
            "constant",
            make_constant_field(v(&[1.0, 0.0]), 1.0).unwrap(),
            0.5,
        ),
        (
            "affine",
            make_affine_field(Matrix::identity(2, 2), v(&[2.0, 0.0]), 1.0).unwrap(),
            0.25,
        ),
        (
            "nonmonotone",
            make_affine_field(Matrix::from_diagonal(&v(&[1.0, -0.2])), v(&[2.0, 0.0]), 1.0)
                .unwrap(),
            0.25,
        ),
        (
            "smooth 3-D",
            make_smooth_perturbed_field(
                Matrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.0, -0.3, 0.2, 0.1, 0.0, 0.4]),
                v(&[2.0, -1.0, 0.5]),
                0.2,
                1.0,
            )
            .unwrap(),
            0.0,
        ),
    ];
    let mut total = 0;
    for (name, f, r) in cases {
        let r = if r > 0.0 {
            r
        } else {
            certify(&f, &opts()).map_err(|e| e.to_string())?.r_max
        };
        for c in [fp(&f, r)?, saddle(&f, r)?] {
            let rep = saddle_check(&f, &c.x_star, &c.y_star, r, 10_000, 10, 1e-9);
            check(rep.violations == 0, || {
                format!(
                    "{name} {:?}: {} violations (worst {:e})",
                    c.solver, rep.violations, rep.worst
                )
            })?;
            total += 1;
            let bad = -&c.x_star;
            let neg = saddle_check(&f, &bad, &bad, r, 10_000, 10, 1e-9);
            check(neg.violations >= 1, || {
                format!("{name}: negative control found no violation")
            })?;
        }
    }
    Ok(format!(
        "{total} converged pairs clean over 10⁴ samples; perturbed controls all violate"
    ))
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let p = dir.path().join("p.json");
    std::fs::write(&p, r#"{"family":"affine","dimension":2,"rho":1,"parameters":{"A":[[1,0],[0,-0.2]],"b":[2,0]},"seed":9}"#)
        .map_err(|e| e.to_string())?;
    let sol = dir.path().join("sol.json");
    let run = |args: &[&std::ffi::OsStr], threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_smallball-vi"))
            .args(args)
            .env("SMALLBALL_VI_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())
    };
    let solve_args = [
        "solve".as_ref(),
        p.as_os_str(),
        "--out".as_ref(),
        sol.as_os_str(),
    ];
    check(run(&solve_args, "1")?.status.success(), || {
        "solve failed".into()
    })?;
    let mut compared = 0;
    for args in [
        vec!["certify".as_ref(), p.as_os_str()],
        vec!["solve".as_ref(), p.as_os_str()],
        vec!["verify".as_ref(), p.as_os_str(), sol.as_os_str()],
    ] {
        let a = run(&args, "1")?;
        let b = run(&args, "1")?;
        let c = run(&args, "3")?;
        check(a.status.success(), || format!("{:?} failed", args[0]))?;
        check(
            !a.stdout.is_empty() && a.stdout == b.stdout && a.stdout == c.stdout,
            || format!("{:?} output differs", args[0]),
        )?;
        compared += 1;
    }
    Ok(format!(
        "{compared} commands byte-identical across repeated runs and thread counts"
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("constant-field closed form", c1_constant_closed_form),
        ("affine monotone instance", c2_affine_monotone),
        ("nonmonotone instance", c3_nonmonotone),
        ("minimize_J sphere localization", c4_minimize_on_sphere),
        ("gradient correctness", c5_gradient_fd),
        ("dual-norm and δ = σ identity", c6_dual_norm),
        ("Stampacchia closed form", c7_stampacchia_sampling),
        ("σ = 0 gate", c8_gate),
        ("shifted quadratic pipeline", c9_theorem_2_4),
        ("saddle inequalities", c10_saddle),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
