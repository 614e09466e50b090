//! Command-line front end: certify, solve, verify, sweep and demo.
//!
//! Exit codes: 0 success, 1 input error, 2 gate violation (σ = 0 or
//! `r > r_max`), 3 non-convergence or failed verification.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use smallball_core::certify::certify;
use smallball_core::problem::ProblemConfig;
use smallball_core::solve::{
    cross_agreement, fixed_point_solve, saddle_solve, FixedPointOptions, SaddleOptions,
    SaddleProblem, SolutionCertificate, SolveError,
};
use smallball_core::verify::{verify_solution, VerificationReport, VerifyError, VerifyOptions};
use smallball_core::{ConstantsCertificate, Vector, VectorFieldSpec, SCHEMA_VERSION};

pub mod demos;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_GATE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Worker-count environment variable; absent means one thread.
pub const THREADS_ENV: &str = "SMALLBALL_VI_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Gate(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Gate(_) => EXIT_GATE,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::GateClosed
            | SolveError::RadiusNotAdmissible { .. }
            | SolveError::FieldVanishes { .. } => CliError::Gate(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "smallball-vi",
    version,
    about = "Double variational inequalities on small balls"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Overrides the seed in the problem document.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Solver tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Sampling budget: θ/γ samples for certify, verification samples otherwise.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Write the report here instead of stdout, plus `<out>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    FixedPoint,
    Saddle,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute θ, γ, M, σ, δ and the admissible radius.
    Certify { problem: PathBuf },
    /// Solve the double VI on the sphere of radius r.
    Solve {
        problem: PathBuf,
        /// Radius, or `max` for the certified admissible radius.
        #[arg(long, default_value = "max")]
        r: String,
        #[arg(long, value_enum, default_value_t = SolverChoice::Both)]
        solver: SolverChoice,
        /// Allow r above the admissible radius (still at most ρ).
        #[arg(long)]
        override_radius: bool,
    },
    /// Check a solution file against the problem.
    Verify { problem: PathBuf, solution: PathBuf },
    /// Solve and verify over geometric radii in (r_max/100, r_max]; CSV output.
    Sweep {
        problem: PathBuf,
        #[arg(long = "r-grid")]
        r_grid: usize,
    },
    /// Run a built-in scenario end to end.
    Demo { name: String },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Certify { .. } => "certify",
            Command::Solve { .. } => "solve",
            Command::Verify { .. } => "verify",
            Command::Sweep { .. } => "sweep",
            Command::Demo { .. } => "demo",
        }
    }
}

/// Output of `solve`: one certificate per solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub schema_version: u32,
    pub r: f64,
    pub r_max: f64,
    pub override_radius: bool,
    pub solutions: Vec<SolutionCertificate>,
    /// `‖x*_fixed-point − x*_saddle‖` when both solvers ran.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub agreement: Option<f64>,
}

/// `solve` output or a bare solution certificate.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SolutionFile {
    Output(SolveOutput),
    Single(SolutionCertificate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub document_sha256: String,
    pub seed: u64,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
}

struct Loaded {
    field: VectorFieldSpec,
    config: ProblemConfig,
    sha256: String,
}

fn load_problem(path: &Path, seed: Option<u64>) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    load_problem_text(&text, seed).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_problem_text(text: &str, seed: Option<u64>) -> Result<Loaded, CliError> {
    let mut config =
        ProblemConfig::from_json_str(text).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let field = config
        .build_field()
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(Loaded {
        field,
        config,
        sha256: hex::encode(Sha256::digest(text.as_bytes())),
    })
}

fn positive_samples(samples: Option<usize>) -> Result<Option<usize>, CliError> {
    match samples {
        Some(0) => Err(CliError::Input("--samples must be at least 1".into())),
        s => Ok(s),
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports are serializable");
    s.push('\n');
    s
}

/// Sink for the primary report: `--out` file or stdout.
struct Emitter<'a> {
    out: Option<&'a Path>,
    stdout: &'a mut dyn Write,
    written: Vec<PathBuf>,
}

impl Emitter<'_> {
    fn emit(&mut self, text: &str) -> Result<(), CliError> {
        match self.out {
            Some(p) => {
                fs::write(p, text)
                    .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display())))?;
                self.written.push(p.to_path_buf());
            }
            None => self
                .stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Input(format!("cannot write stdout: {e}")))?,
        }
        Ok(())
    }

    /// Human-readable text goes to stdout only when the report went to a file.
    fn note(&mut self, text: &str, stderr: &mut dyn Write) {
        let sink: &mut dyn Write = if self.out.is_some() {
            &mut *self.stdout
        } else {
            stderr
        };
        let _ = sink.write_all(text.as_bytes());
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Runs `cli` inside a rayon pool sized by [`THREADS_ENV`].
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                CliError::Input(format!(
                    "{THREADS_ENV} must be a positive integer, got `{v}`"
                ))
            })?,
        Err(_) => 1,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let result = pool.install(|| run_in_pool(cli, &mut out, &mut err));
    let _ = stdout.write_all(&out);
    let _ = stderr.write_all(&err);
    result
}

fn run_in_pool(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        return Err(CliError::Input(format!(
            "--tol must be positive, got {}",
            cli.tol
        )));
    }
    let started = now_unix();
    let mut em = Emitter {
        out: cli.out.as_deref(),
        stdout,
        written: Vec::new(),
    };
    let outcome = match &cli.command {
        Command::Certify { problem } => cmd_certify(cli, problem, &mut em, stderr),
        Command::Solve {
            problem,
            r,
            solver,
            override_radius,
        } => cmd_solve(cli, problem, r, *solver, *override_radius, &mut em, stderr),
        Command::Verify { problem, solution } => {
            cmd_verify(cli, problem, solution, &mut em, stderr)
        }
        Command::Sweep { problem, r_grid } => cmd_sweep(cli, problem, *r_grid, &mut em, stderr),
        Command::Demo { name } => demos::cmd_demo(cli, name, &mut em, stderr),
    };
    let doc = match outcome {
        Ok(d) => d,
        // Input errors produce no report, so no manifest either.
        Err(e @ CliError::Input(_)) => return Err(e),
        Err(e) => {
            write_manifest(cli, &em, started, None)?;
            return Err(e);
        }
    };
    write_manifest(cli, &em, started, doc)?;
    Ok(())
}

/// Hash and seed of the problem document behind a run.
struct DocInfo {
    sha256: String,
    seed: u64,
}

fn write_manifest(
    cli: &Cli,
    em: &Emitter,
    started: u64,
    doc: Option<DocInfo>,
) -> Result<(), CliError> {
    let Some(out) = cli.out.as_deref() else {
        return Ok(());
    };
    let (sha, seed) = doc.map(|d| (d.sha256, d.seed)).unwrap_or_default();
    let manifest = RunManifest {
        command: cli.command.name().to_owned(),
        document_sha256: sha,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        started_unix: started,
        finished_unix: now_unix(),
        outputs: em.written.clone(),
    };
    let path = manifest_path(out);
    fs::write(&path, to_json(&manifest))
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn certify_loaded(cli: &Cli, loaded: &Loaded) -> Result<ConstantsCertificate, CliError> {
    let mut opts = loaded.config.certify_options();
    if let Some(s) = positive_samples(cli.samples)? {
        opts.theta_samples = s;
        opts.gamma_samples = s;
    }
    certify(&loaded.field, &opts).map_err(|e| CliError::Numeric(e.to_string()))
}

fn gate_message(cert: &ConstantsCertificate) -> String {
    format!(
        "Theorem 2.3 gate: Φ(0)=0 (σ = {:e}), so no radius r > 0 admits a solution",
        cert.sigma
    )
}

fn cmd_certify(
    cli: &Cli,
    problem: &Path,
    em: &mut Emitter,
    _stderr: &mut dyn Write,
) -> Result<Option<DocInfo>, CliError> {
    let loaded = load_problem(problem, cli.seed)?;
    let cert = certify_loaded(cli, &loaded)?;
    em.emit(&to_json(&cert))?;
    if !cert.gate_open() {
        return Err(CliError::Gate(gate_message(&cert)));
    }
    Ok(Some(DocInfo {
        sha256: loaded.sha256,
        seed: loaded.config.seed,
    }))
}

fn parse_radius(r: &str, r_max: f64) -> Result<f64, CliError> {
    if r.eq_ignore_ascii_case("max") {
        return Ok(r_max);
    }
    r.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v > 0.0)
        .ok_or_else(|| {
            CliError::Input(format!("--r must be a positive number or `max`, got `{r}`"))
        })
}

/// Runs the chosen solver(s) at `r`; the result carries all certificates
/// whether or not they converged.
pub fn solve_at(
    field: &VectorFieldSpec,
    cert: &ConstantsCertificate,
    r: f64,
    solver: SolverChoice,
    override_radius: bool,
    tol: f64,
    seed: u64,
) -> Result<SolveOutput, CliError> {
    if !override_radius && !cert.gate_open() {
        return Err(CliError::Gate(gate_message(cert)));
    }
    let mut solutions = Vec::new();
    if solver != SolverChoice::Saddle {
        smallball_core::solve::check_radius(field, r, cert.r_max, override_radius)?;
        let opts = FixedPointOptions {
            tol,
            ..FixedPointOptions::default()
        };
        let mut c = fixed_point_solve(field, r, &opts)?;
        c.seed = Some(seed);
        solutions.push(c);
    }
    if solver != SolverChoice::FixedPoint {
        let problem = SaddleProblem::new(field.clone(), cert, r, override_radius)?;
        let opts = SaddleOptions {
            tol,
            ..SaddleOptions::default()
        };
        let mut c = saddle_solve(&problem, &opts)?;
        c.seed = Some(seed);
        solutions.push(c);
    }
    let agreement = (solutions.len() == 2).then(|| cross_agreement(&solutions[0], &solutions[1]));
    Ok(SolveOutput {
        schema_version: SCHEMA_VERSION,
        r,
        r_max: cert.r_max,
        override_radius,
        solutions,
        agreement,
    })
}

/// Tolerance for the `both` cross-agreement check.
pub fn agreement_tol(tol: f64) -> f64 {
    10.0 * tol
}

fn solve_failure(out: &SolveOutput, tol: f64) -> Option<String> {
    for c in &out.solutions {
        if !c.converged {
            return Some(format!(
                "{:?} solver did not converge: {}",
                c.solver,
                c.diagnostic.as_deref().unwrap_or("no diagnostic")
            ));
        }
    }
    match out.agreement {
        Some(a) if a > agreement_tol(tol) => Some(format!(
            "solvers disagree: ‖x*_fp − x*_saddle‖ = {a:e} > {:e}",
            agreement_tol(tol)
        )),
        _ => None,
    }
}

fn cmd_solve(
    cli: &Cli,
    problem: &Path,
    r: &str,
    solver: SolverChoice,
    override_radius: bool,
    em: &mut Emitter,
    _stderr: &mut dyn Write,
) -> Result<Option<DocInfo>, CliError> {
    let loaded = load_problem(problem, cli.seed)?;
    let cert = certify_loaded(cli, &loaded)?;
    let radius = parse_radius(r, cert.r_max)?;
    if r.eq_ignore_ascii_case("max") && !cert.gate_open() {
        return Err(CliError::Gate(gate_message(&cert)));
    }
    let out = solve_at(
        &loaded.field,
        &cert,
        radius,
        solver,
        override_radius,
        cli.tol,
        loaded.config.seed,
    )?;
    em.emit(&to_json(&out))?;
    if let Some(msg) = solve_failure(&out, cli.tol) {
        return Err(CliError::Numeric(msg));
    }
    Ok(Some(DocInfo {
        sha256: loaded.sha256,
        seed: loaded.config.seed,
    }))
}

pub fn verify_options(config: &ProblemConfig, samples: Option<usize>, tol: f64) -> VerifyOptions {
    let samples = samples.unwrap_or(config.budgets.verify_samples);
    VerifyOptions {
        samples,
        minty_starts: config.budgets.minty_starts,
        monotonicity_samples: samples,
        solver_tol: tol,
        seed: config.seed,
        ..VerifyOptions::default()
    }
}

/// Renders the pass/fail table of a report.
pub fn render_table(report: &VerificationReport) -> String {
    let mut s = String::new();
    for (check, ok, detail) in report.rows() {
        s.push_str(&format!(
            "{:<4} {:<28} {}\n",
            if ok { "PASS" } else { "FAIL" },
            check,
            detail
        ));
    }
    if let Some(p) = &report.monotonicity.violating_pair {
        s.push_str(&format!(
            "note monotonicity violated at x={:?}, y={:?} (value {:.3e})\n",
            p.x.as_slice(),
            p.y.as_slice(),
            p.value
        ));
    }
    s.push_str(if report.passed {
        "verification passed\n"
    } else {
        "verification FAILED\n"
    });
    s
}

fn cmd_verify(
    cli: &Cli,
    problem: &Path,
    solution: &Path,
    em: &mut Emitter,
    stderr: &mut dyn Write,
) -> Result<Option<DocInfo>, CliError> {
    let samples = positive_samples(cli.samples)?;
    let loaded = load_problem(problem, cli.seed)?;
    let text = fs::read_to_string(solution)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", solution.display())))?;
    let sol: SolutionCertificate = match serde_json::from_str::<SolutionFile>(&text)
        .map_err(|e| CliError::Input(format!("{}: not a solution file: {e}", solution.display())))?
    {
        SolutionFile::Output(o) => o
            .solutions
            .into_iter()
            .next()
            .ok_or_else(|| CliError::Input(format!("{}: no solutions", solution.display())))?,
        SolutionFile::Single(c) => c,
    };
    let opts = verify_options(&loaded.config, samples, cli.tol.min(1e-12));
    let report = verify_solution(&loaded.field, &sol.x_star, Some(&sol.y_star), sol.r, &opts)?;
    em.emit(&to_json(&report))?;
    em.note(&render_table(&report), stderr);
    if !report.passed {
        return Err(CliError::Numeric("verification failed".into()));
    }
    Ok(Some(DocInfo {
        sha256: loaded.sha256,
        seed: loaded.config.seed,
    }))
}

/// `k` radii `r_max·100^{−(k−1−i)/k}`, `i = 0..k`, increasing to `r_max`.
pub fn geometric_radii(r_max: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| r_max * 100f64.powf(-((k - 1 - i) as f64) / k as f64))
        .collect()
}

pub fn sweep_header(n: usize) -> String {
    let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    format!(
        "r,{},fixed_point_residual,stampacchia,worst_margin,converged",
        xs.join(",")
    )
}

struct SweepRow {
    r: f64,
    x: Vector,
    fixed_point_residual: f64,
    stampacchia: f64,
    worst_margin: f64,
    ok: bool,
}

fn cmd_sweep(
    cli: &Cli,
    problem: &Path,
    k: usize,
    em: &mut Emitter,
    stderr: &mut dyn Write,
) -> Result<Option<DocInfo>, CliError> {
    if k == 0 {
        return Err(CliError::Input("--r-grid must be at least 1".into()));
    }
    let samples = positive_samples(cli.samples)?;
    let loaded = load_problem(problem, cli.seed)?;
    let cert = certify_loaded(cli, &loaded)?;
    if !cert.gate_open() {
        return Err(CliError::Gate(gate_message(&cert)));
    }
    // Reduced verification budget per row.
    let base = verify_options(&loaded.config, samples, cli.tol.min(1e-12));
    let vopts = VerifyOptions {
        samples: (base.samples / 10).max(100),
        monotonicity_samples: (base.samples / 10).max(100),
        minty_starts: base.minty_starts.min(8),
        uniqueness_starts: 10,
        ..base
    };
    let mut rows = Vec::with_capacity(k);
    for r in geometric_radii(cert.r_max, k) {
        let fp = FixedPointOptions {
            tol: cli.tol,
            ..FixedPointOptions::default()
        };
        let c = fixed_point_solve(&loaded.field, r, &fp)?;
        let report = verify_solution(&loaded.field, &c.x_star, Some(&c.y_star), r, &vopts)?;
        rows.push(SweepRow {
            r,
            x: c.x_star.clone(),
            fixed_point_residual: c.residuals.fixed_point,
            stampacchia: c.residuals.stampacchia,
            worst_margin: report.double_vi.worst_margin,
            ok: c.converged && report.passed,
        });
    }
    let mut csv = sweep_header(loaded.field.dim());
    csv.push('\n');
    for row in &rows {
        let xs: Vec<String> = row.x.iter().map(|v| format!("{v:e}")).collect();
        csv.push_str(&format!(
            "{:e},{},{:e},{:e},{:e},{}\n",
            row.r,
            xs.join(","),
            row.fixed_point_residual,
            row.stampacchia,
            row.worst_margin,
            row.ok
        ));
    }
    em.emit(&csv)?;
    let failed = rows.iter().filter(|r| !r.ok).count();
    if failed > 0 {
        em.note(
            &format!("{failed} of {k} radii failed solve or verification\n"),
            stderr,
        );
        return Err(CliError::Numeric(format!(
            "{failed} of {k} sweep rows failed"
        )));
    }
    Ok(Some(DocInfo {
        sha256: loaded.sha256,
        seed: loaded.config.seed,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii_are_geometric_and_end_at_r_max() {
        let r = geometric_radii(0.25, 4);
        assert_eq!(r.len(), 4);
        assert_eq!(r[3], 0.25);
        assert!(r[0] > 0.25 / 100.0);
        for w in r.windows(2) {
            assert!((w[1] / w[0] - 100f64.powf(0.25)).abs() < 1e-12);
        }
        assert!(geometric_radii(1.0, 0).is_empty());
    }

    #[test]
    fn header_lists_components() {
        assert_eq!(
            sweep_header(3),
            "r,x1,x2,x3,fixed_point_residual,stampacchia,worst_margin,converged"
        );
    }

    #[test]
    fn radius_argument() {
        assert_eq!(parse_radius("max", 0.3).unwrap(), 0.3);
        assert_eq!(parse_radius("0.1", 0.3).unwrap(), 0.1);
        assert!(parse_radius("-1", 0.3).is_err());
        assert!(parse_radius("abc", 0.3).is_err());
    }

    #[test]
    fn solve_errors_map_to_exit_codes() {
        assert_eq!(
            CliError::from(SolveError::GateClosed).exit_code(),
            EXIT_GATE
        );
        assert_eq!(
            CliError::from(SolveError::RadiusNotAdmissible {
                r: 0.9,
                r_max: 0.25
            })
            .exit_code(),
            EXIT_GATE
        );
        assert_eq!(
            CliError::from(SolveError::RadiusExceedsDomain { r: 2.0, rho: 1.0 }).exit_code(),
            EXIT_INPUT
        );
    }

    #[test]
    fn manifest_sits_next_to_report() {
        assert_eq!(
            manifest_path(Path::new("/tmp/a.json")),
            PathBuf::from("/tmp/a.json.manifest.json")
        );
    }
}
