//! Built-in end-to-end scenarios: certify, solve with both solvers at the
//! admissible radius, verify.

use std::io::Write;

use serde::Serialize;

use smallball_core::verify::{verify_solution, MonotonicityClass, VerificationReport};
use smallball_core::{ConstantsCertificate, SCHEMA_VERSION};

use crate::{
    certify_loaded, load_problem_text, render_table, solve_at, solve_failure, to_json,
    verify_options, Cli, CliError, DocInfo, Emitter, SolveOutput, SolverChoice,
};

pub struct Demo {
    pub name: &'static str,
    pub summary: &'static str,
    pub document: &'static str,
    /// The scenario also requires a monotonicity violation witness.
    pub expect_nonmonotone: bool,
}

pub const DEMOS: [Demo; 4] = [
    Demo {
        name: "constant",
        summary: "Φ ≡ (1,0) on B_1; x* = −r·b/‖b‖",
        document: r#"{"family":"constant","dimension":2,"rho":1.0,"parameters":{"b":[1.0,0.0]}}"#,
        expect_nonmonotone: false,
    },
    Demo {
        name: "affine",
        summary: "Φ(x) = x + (2,0) on B_1; r_max = 0.25, x* = (−0.25,0)",
        document: r#"{"family":"affine","dimension":2,"rho":1.0,"parameters":{"A":[[1.0,0.0],[0.0,1.0]],"b":[2.0,0.0]}}"#,
        expect_nonmonotone: false,
    },
    Demo {
        name: "nonmonotone",
        summary:
            "Φ(x) = diag(1,−0.2)x + (2,0) on B_1; not monotone, still uniquely solvable on S_r",
        document: r#"{"family":"affine","dimension":2,"rho":1.0,"parameters":{"A":[[1.0,0.0],[0.0,-0.2]],"b":[2.0,0.0]}}"#,
        expect_nonmonotone: true,
    },
    Demo {
        name: "thm24-quadratic",
        summary: "Φ = Ψ − w with Ψ(x) = (x₁²,x₂²), ρ = 0.5, w = Ψ(0) + 2M₁ρ·e₁; solved at r = ρ",
        document: r#"{"family":"shifted","dimension":2,"rho":0.5,"parameters":{"d":[1.0,0.0]}}"#,
        expect_nonmonotone: false,
    },
];

pub fn find(name: &str) -> Option<&'static Demo> {
    DEMOS.iter().find(|d| d.name == name)
}

#[derive(Debug, Serialize)]
pub struct DemoReport {
    pub schema_version: u32,
    pub demo: String,
    pub certificate: ConstantsCertificate,
    pub solve: SolveOutput,
    pub verification: VerificationReport,
    pub passed: bool,
}

pub(crate) fn cmd_demo(
    cli: &Cli,
    name: &str,
    em: &mut Emitter,
    stderr: &mut dyn Write,
) -> Result<Option<DocInfo>, CliError> {
    let Some(demo) = find(name) else {
        let names: Vec<&str> = DEMOS.iter().map(|d| d.name).collect();
        return Err(CliError::Input(format!(
            "unknown demo `{name}`; available: {}",
            names.join(", ")
        )));
    };
    let samples = crate::positive_samples(cli.samples)?;
    let loaded = load_problem_text(demo.document, cli.seed)?;
    let cert = certify_loaded(cli, &loaded)?;
    if !cert.gate_open() {
        return Err(CliError::Gate(crate::gate_message(&cert)));
    }
    let solve = solve_at(
        &loaded.field,
        &cert,
        cert.r_max,
        SolverChoice::Both,
        false,
        cli.tol,
        loaded.config.seed,
    )?;
    let solve_problem = solve_failure(&solve, cli.tol);
    let x = &solve.solutions[0];
    let opts = verify_options(&loaded.config, samples, cli.tol.min(1e-12));
    let verification = verify_solution(&loaded.field, &x.x_star, Some(&x.y_star), x.r, &opts)?;
    let monotone_ok = !demo.expect_nonmonotone
        || verification.monotonicity.classification == MonotonicityClass::NonMonotone;
    let passed = solve_problem.is_none() && verification.passed && monotone_ok;

    let mut text = format!("demo {}: {}\n", demo.name, demo.summary);
    text.push_str(&format!(
        "certify  θ={:.6} γ={:.6} M={:.6} σ={:.6} r_max={:.6}\n",
        cert.theta, cert.gamma, cert.m, cert.sigma, cert.r_max
    ));
    for c in &solve.solutions {
        text.push_str(&format!(
            "solve    {:?}: x*={:?} iterations={} converged={} fixed-point residual={:.3e}\n",
            c.solver,
            c.x_star.as_slice(),
            c.iterations,
            c.converged,
            c.residuals.fixed_point
        ));
    }
    if let Some(a) = solve.agreement {
        text.push_str(&format!("solve    agreement {a:.3e}\n"));
    }
    if let Some(msg) = &solve_problem {
        text.push_str(&format!("solve    FAILED: {msg}\n"));
    }
    text.push_str(&render_table(&verification));
    if !monotone_ok {
        text.push_str("FAIL expected a monotonicity violation witness, none found\n");
    }
    text.push_str(if passed {
        "demo passed\n"
    } else {
        "demo FAILED\n"
    });

    let report = DemoReport {
        schema_version: SCHEMA_VERSION,
        demo: demo.name.to_owned(),
        certificate: cert,
        solve,
        verification,
        passed,
    };
    if cli.out.is_some() {
        em.emit(&to_json(&report))?;
        em.note(&text, stderr);
    } else {
        em.emit(&text)?;
    }
    if !passed {
        return Err(CliError::Numeric(format!("demo {} failed", demo.name)));
    }
    Ok(Some(DocInfo {
        sha256: loaded.sha256,
        seed: loaded.config.seed,
    }))
}
