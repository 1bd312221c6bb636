//! The `gtransit` command line: `solve`, `verify` and `trace`.
//!
//! Exit codes: 0 success, 1 I/O or schema error, 2 inadmissible problem,
//! 3 solver failure (a partial certificate is still written), 4 failed
//! verification.
//!
//! Trace CSV columns: `kind,step,sample,index,x0..,b0..,f0..` where `kind`
//! is `traj` (base point `index` after `sample / samples` of continuation
//! step `step`) or `grid` (audit point `index` of the final bisection),
//! `x` is the source point, `b` its β-image and `f` the fiber coordinates
//! of the arrow.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::bisection::{Bisection, SampleGrid};
use crate::flows::GeneratorFamily;
use crate::groupoid::{multiply, Arrow};
use crate::symplectic::{
    defect_report, lagrangian_tolerance, solve_symplectic_with_options, DEFECT_GRID,
    POISSON_TOLERANCE,
};
use crate::transitivity::{
    admissible, residuals, solve_with_options, support_summary, Certificate, SolveOptions,
    SolveOutcome, Status, TransitivityProblem,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INADMISSIBLE: i32 = 2;
pub const EXIT_FAILED: i32 = 3;
pub const EXIT_REJECTED: i32 = 4;

/// Reported and recomputed residuals must agree this closely.
pub const RESIDUAL_REPRODUCTION: f64 = 1e-12;

const SUPPORT_GRID: usize = 24;
const TRACE_GRID: usize = 16;
const TRACE_SAMPLES: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "gtransit", version, about = "Bisections transporting finitely many points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file and write a certificate.
    Solve(SolveArgs),
    /// Re-check a certificate against its problem.
    Verify(VerifyArgs),
    /// Solve and dump trajectories and the final displacement field as CSV.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Overrides the seed of the problem file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points per axis of the support and defect audits.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Record wall-clock time in the certificate (breaks byte determinism).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Problem file.
    #[arg(long)]
    pub input: PathBuf,
    /// Certificate file.
    #[arg(long, alias = "output")]
    pub certificate: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// CSV destination.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points per axis of the displacement grid.
    #[arg(long, default_value_t = TRACE_GRID)]
    pub grid: usize,
    /// Samples per continuation step.
    #[arg(long, default_value_t = TRACE_SAMPLES)]
    pub samples: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Problem(#[from] crate::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// Runs a parsed command; diagnostics go to `err`, verification reports to `out`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a, err),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Trace(a) => cmd_trace(&a, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_IO
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("certificate serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_problem(path: &Path, seed: Option<u64>) -> Result<TransitivityProblem, CliError> {
    let mut p: TransitivityProblem = read_json(path)?;
    if let Some(s) = seed {
        p.seed = s;
    }
    p.validate()?;
    Ok(p)
}

fn run_solver(p: &TransitivityProblem, opts: &SolveOptions) -> crate::Result<SolveOutcome> {
    match p.mode {
        GeneratorFamily::Symplectic => solve_symplectic_with_options(p, opts),
        GeneratorFamily::General => solve_with_options(p, opts),
    }
}

fn report_violations(p: &TransitivityProblem, err: &mut dyn Write) -> Option<Certificate> {
    let violations = admissible(p);
    if violations.is_empty() {
        return None;
    }
    for v in &violations {
        let _ = writeln!(err, "inadmissible: {v}");
    }
    Some(Certificate::inadmissible(p, violations))
}

pub fn cmd_solve(args: &SolveArgs, err: &mut dyn Write) -> Result<i32, CliError> {
    let p = load_problem(&args.input, args.seed)?;
    if let Some(cert) = report_violations(&p, err) {
        write_json(&args.output, &cert)?;
        return Ok(EXIT_INADMISSIBLE);
    }
    let opts = SolveOptions {
        audit_grid: args.grid.unwrap_or(SUPPORT_GRID),
        record_trace: false,
        defect_grid: args.grid.unwrap_or(DEFECT_GRID),
    };
    let start = Instant::now();
    let mut outcome = run_solver(&p, &opts)?;
    if args.timing {
        outcome.certificate.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    write_json(&args.output, &outcome.certificate)?;
    if outcome.certificate.is_solved() {
        Ok(EXIT_OK)
    } else {
        if let Some(e) = &outcome.certificate.error {
            let _ = writeln!(err, "solver failed: {e}");
        }
        Ok(EXIT_FAILED)
    }
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check {
            name,
            passed,
            detail,
        }
    }
}

/// Independent re-check of a certificate: the chain is rebuilt from the
/// serialized primitives and every reported quantity is recomputed.
pub fn verify_certificate(
    p: &TransitivityProblem,
    cert: &Certificate,
    grid: Option<usize>,
) -> Vec<Check> {
    let mut checks = vec![
        Check::new(
            "status",
            cert.status == Status::Solved,
            format!("{:?}", cert.status),
        ),
        Check::new(
            "instance",
            cert.instance == p.instance,
            format!("certificate {}, problem {}", cert.instance, p.instance),
        ),
        Check::new(
            "seed",
            cert.seed == p.seed,
            format!("certificate {}, problem {}", cert.seed, p.seed),
        ),
    ];
    let sigma = match Bisection::from_chain(p.instance, cert.chain.clone()) {
        Ok(s) => s,
        Err(e) => {
            checks.push(Check::new("chain", false, e.to_string()));
            return checks;
        }
    };
    checks.push(Check::new(
        "chain",
        true,
        format!("{} primitives", sigma.chain.len()),
    ));

    match residuals(&sigma, p) {
        Ok(fresh) => {
            let reproduced = fresh.len() == cert.residuals.len()
                && fresh
                    .iter()
                    .zip(&cert.residuals)
                    .all(|(a, b)| (a - b).abs() <= RESIDUAL_REPRODUCTION);
            let worst = fresh.iter().copied().fold(0.0, f64::max);
            let within = fresh.iter().all(|&r| r <= p.tolerances.residual);
            checks.push(Check::new(
                "residuals",
                reproduced && within,
                format!(
                    "max {worst:e} (tolerance {:e}), reported values {}",
                    p.tolerances.residual,
                    if reproduced { "reproduced" } else { "not reproduced" }
                ),
            ));
        }
        Err(e) => checks.push(Check::new("residuals", false, e.to_string())),
    }

    match support_summary(&sigma, p, grid.unwrap_or(SUPPORT_GRID)) {
        Ok(s) => checks.push(Check::new(
            "support",
            s.ok(),
            format!(
                "{} balls, inside neighborhoods: {}, {} of {} audit points moved outside the balls",
                s.balls, s.inside_neighborhoods, s.empirical_outside, s.grid_points
            ),
        )),
        Err(e) => checks.push(Check::new("support", false, e.to_string())),
    }

    if p.mode == GeneratorFamily::Symplectic {
        match defect_report(&sigma, grid.unwrap_or(DEFECT_GRID)) {
            Ok(d) => {
                let lag_tol = lagrangian_tolerance(&p.instance);
                checks.push(Check::new(
                    "lagrangian",
                    d.lagrangian_defect <= lag_tol,
                    format!("defect {:e} (tolerance {lag_tol:e})", d.lagrangian_defect),
                ));
                checks.push(Check::new(
                    "poisson",
                    d.poisson_defect <= POISSON_TOLERANCE,
                    format!(
                        "defect {:e} (tolerance {POISSON_TOLERANCE:e})",
                        d.poisson_defect
                    ),
                ));
            }
            Err(e) => checks.push(Check::new("defects", false, e.to_string())),
        }
    }
    checks
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let p = load_problem(&args.input, args.seed)?;
    let cert: Certificate = read_json(&args.certificate)?;
    let checks = verify_certificate(&p, &cert, args.grid);
    for c in &checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        let _ = writeln!(out, "{mark} {}: {}", c.name, c.detail);
    }
    Ok(if checks.iter().all(|c| c.passed) {
        EXIT_OK
    } else {
        EXIT_REJECTED
    })
}

fn arrow_row(kind: &str, step: usize, sample: usize, index: usize, a: &Arrow) -> Vec<String> {
    let mut row = vec![
        kind.to_string(),
        step.to_string(),
        sample.to_string(),
        index.to_string(),
    ];
    for v in a
        .source_coords()
        .into_iter()
        .chain(a.target_coords())
        .chain(a.fiber_coords())
    {
        row.push(v.to_string());
    }
    row
}

fn scaled(increment: &Bisection, s: f64) -> Bisection {
    let mut b = increment.clone();
    for p in &mut b.chain {
        p.time *= s;
    }
    b
}

pub fn cmd_trace(args: &TraceArgs, err: &mut dyn Write) -> Result<i32, CliError> {
    let p = load_problem(&args.input, args.seed)?;
    if report_violations(&p, err).is_some() {
        return Ok(EXIT_INADMISSIBLE);
    }
    let opts = SolveOptions {
        audit_grid: 0,
        record_trace: true,
        defect_grid: 0,
    };
    let outcome = run_solver(&p, &opts)?;
    let trace = outcome.trace.unwrap_or_default();

    let d = p.instance.base_dim();
    let k = p.instance.fiber_dim();
    let mut header: Vec<String> = ["kind", "step", "sample", "index"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..d).map(|i| format!("x{i}")));
    header.extend((0..d).map(|i| format!("b{i}")));
    header.extend((0..k).map(|i| format!("f{i}")));

    let mut w = csv::Writer::from_path(&args.output)?;
    w.write_record(&header)?;
    let samples = args.samples.max(1);
    if let Some(first) = trace.arrows.first() {
        for (i, a) in first.iter().enumerate() {
            w.write_record(arrow_row("traj", 0, 0, i, a))?;
        }
    }
    for (step, (inc, prev)) in trace.increments.iter().zip(&trace.arrows).enumerate() {
        for s in 1..=samples {
            let partial = scaled(inc, s as f64 / samples as f64);
            for (i, g) in prev.iter().enumerate() {
                let a = multiply(&partial.eval(&g.target_coords())?, g)?;
                w.write_record(arrow_row("traj", step + 1, s, i, &a))?;
            }
        }
    }
    let balls = outcome.bisection.apriori_support();
    let pad = 0.25 * balls.iter().map(|b| b.radius).fold(0.0, f64::max);
    if let Some(grid) = SampleGrid::around(&balls, pad, args.grid) {
        for (j, x) in grid.points().enumerate() {
            let a = outcome.bisection.eval(&x)?;
            w.write_record(arrow_row("grid", 0, 0, j, &a))?;
        }
    }
    w.flush().map_err(|source| CliError::Io {
        path: args.output.display().to_string(),
        source,
    })?;
    if outcome.certificate.is_solved() {
        Ok(EXIT_OK)
    } else {
        if let Some(e) = &outcome.certificate.error {
            let _ = writeln!(err, "solver failed: {e}");
        }
        Ok(EXIT_FAILED)
    }
}
