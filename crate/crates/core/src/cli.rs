//! Command-line front end.
//!
//! Every command prints one JSON report to stdout. Reports contain no
//! timestamps or host information, so identical inputs and seeds produce
//! byte-identical output.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O or internal error |
//! | 2 | usage error (bad flags) |
//! | 3 | malformed input file |
//! | 4 | validation failure: not Hermitian, not PD, not a contraction, invalid POVM |
//! | 5 | tolerance failure: a numerical check exceeded its bound |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

use crate::dilation::{
    naimark_dilate, power_dilation_with, telescoping_quadratic, PowerDilationOptions, CONTRACTION_TOL,
    DEFAULT_POWER_TOL, POVM_TOL,
};
use crate::error::Error;
use crate::factorization::{DilationFactorization, FactorizeOptions, DEFAULT_RANK_TOL, DEFAULT_RESIDUAL_TOL};
use crate::gaussian::{build_sampler, clt_tolerance, estimate_all_pairs, DRAWS_PER_BLOCK, NORMAL_ALGORITHM};
use crate::io::{self, FactorFile, InputError};
use crate::kernel::{OperatorKernel, DEFAULT_PD_TOL};
use crate::linalg::CVector;
use crate::random::random_vector;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_TOLERANCE: i32 = 5;

/// Absolute tolerance for the telescoping-versus-direct comparison.
const TELESCOPING_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "opkernel",
    version,
    about = "Operator-valued positive definite kernels and their dilations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check positive definiteness of a kernel file through its block Gram matrix.
    CheckPd(CheckPdArgs),
    /// Compute a minimal factorization K(s,t) = V_s*·V_t.
    Factorize(FactorizeArgs),
    /// Power dilation A^n = V*·U^n·V of a contraction on the window {0..N}.
    DilateContraction(DilateArgs),
    /// Naimark dilation of a finite POVM.
    Naimark(NaimarkArgs),
    /// Sample the Gaussian process with covariance K and compare the empirical covariance.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct CheckPdArgs {
    /// Kernel JSON file.
    pub kernel: PathBuf,
    /// Relative PD tolerance: accept when min eig ≥ −tol·(1 + ‖G‖_fro).
    #[arg(long, default_value_t = DEFAULT_PD_TOL)]
    pub tol: f64,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    pub kernel: PathBuf,
    /// Rank truncation and PD tolerance, relative to the largest Gram eigenvalue.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub tol: f64,
    /// Bound on max ‖K(s,t) − V_s*V_t‖_fro relative to 1 + ‖G‖_fro.
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_TOL)]
    pub residual_tol: f64,
    /// Write the factors as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DilateArgs {
    /// JSON file holding a square matrix as rows of [re, im] pairs.
    pub matrix: PathBuf,
    /// Window length N; the kernel lives on {0, …, N}.
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    /// Slack on the contraction condition ‖A‖ ≤ 1 + tol.
    #[arg(long, default_value_t = CONTRACTION_TOL)]
    pub tol: f64,
    /// Bound on ‖A^n − V*U^nV‖_fro for a power to count as certified.
    #[arg(long, default_value_t = DEFAULT_POWER_TOL)]
    pub identity_tol: f64,
    /// Seed for the random telescoping test vectors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random telescoping checks.
    #[arg(long, default_value_t = 20)]
    pub checks: usize,
    /// Replace U by the unitary factor of its polar decomposition.
    #[arg(long)]
    pub polar: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NaimarkArgs {
    /// POVM JSON file.
    pub povm: PathBuf,
    /// Bound on every dilation defect.
    #[arg(long, default_value_t = POVM_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    pub kernel: PathBuf,
    /// Number of joint draws M.
    #[arg(long, default_value_t = 200_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// PD and rank tolerance used for the factorization.
    #[arg(long, default_value_t = DEFAULT_PD_TOL)]
    pub tol: f64,
    /// Write every joint draw as CSV to this file.
    #[arg(long)]
    pub emit_draws: Option<PathBuf>,
    /// Write the empirical covariance blocks as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Report to print despite the failure.
    pub report: Option<Value>,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            report: None,
        }
    }

    fn with_report(mut self, report: Value) -> Self {
        self.report = Some(report);
        self
    }
}

/// Exit code for a numerical error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ResidualExceeded { .. } | Error::PowerIdentityFailed { .. } | Error::DilationDefect { .. } => {
            EXIT_TOLERANCE
        }
        Error::NoConvergence(_) | Error::IndexOutOfRange { .. } | Error::KernelMismatch => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure::new(exit_code(&err), err.to_string())
    }
}

impl From<InputError> for Failure {
    fn from(err: InputError) -> Self {
        match err {
            InputError::Io { .. } => Failure::new(EXIT_IO, err.to_string()),
            InputError::Parse(_) => Failure::new(EXIT_PARSE, err.to_string()),
            InputError::Invalid(e) => Failure::from(e),
        }
    }
}

type Outcome = std::result::Result<Value, Failure>;

/// Entry point used by the binary.
pub fn main_entry() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{rendered}");
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::CheckPd(a) => cmd_check_pd(a),
        Command::Factorize(a) => cmd_factorize(a),
        Command::DilateContraction(a) => cmd_dilate_contraction(a),
        Command::Naimark(a) => cmd_naimark(a),
        Command::Sample(a) => cmd_sample(a),
    };
    let (report, code, message) = match outcome {
        Ok(report) => {
            let code = if report["pass"] == Value::Bool(true) {
                EXIT_OK
            } else {
                EXIT_TOLERANCE
            };
            (Some(report), code, None)
        }
        Err(f) => (f.report, f.code, Some(f.message)),
    };
    if let Some(report) = report {
        let text = render(&report);
        if writeln!(stdout, "{text}").is_err() {
            return EXIT_IO;
        }
    }
    if let Some(message) = message {
        let _ = writeln!(stderr, "error: {message}");
    }
    code
}

fn render(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

struct Input {
    bytes: Vec<u8>,
    digest: String,
    path: String,
}

fn load(path: &Path) -> std::result::Result<Input, Failure> {
    let bytes = io::read_bytes(path)?;
    Ok(Input {
        digest: io::sha256_digest(&bytes),
        path: path.display().to_string(),
        bytes,
    })
}

fn envelope(command: &str, input: &Input, args: Value, tolerances: Value, seed: Option<u64>) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "input": { "path": input.path, "digest": input.digest },
        "args": args,
        "tolerances": tolerances,
        "seed": seed,
    })
}

fn finish(mut report: Value, results: Value, pass: bool) -> Value {
    report["results"] = results;
    report["pass"] = Value::Bool(pass);
    report
}

fn write_file(path: &Path, contents: &[u8]) -> std::result::Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn write_report(path: Option<&PathBuf>, report: &Value) -> std::result::Result<(), Failure> {
    match path {
        Some(p) => write_file(p, format!("{}\n", render(report)).as_bytes()),
        None => Ok(()),
    }
}

fn check_tol(name: &str, value: f64) -> std::result::Result<(), Failure> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_USAGE,
            format!("--{name} must be a finite non-negative number"),
        ))
    }
}

fn cmd_check_pd(a: &CheckPdArgs) -> Outcome {
    check_tol("tol", a.tol)?;
    let input = load(&a.kernel)?;
    let kernel = io::read_kernel(&input.bytes)?;
    let check = kernel.is_positive_definite(a.tol)?;
    let report = finish(
        envelope("check-pd", &input, json!({}), json!({ "pd": a.tol }), None),
        json!({
            "labels": kernel.index_set().labels(),
            "dim": kernel.dim(),
            "min_eig": check.min_eig,
            "threshold": check.threshold,
            "gram_norm_fro": check.gram_norm,
            "positive_definite": check.positive,
        }),
        check.positive,
    );
    write_report(a.out.as_ref(), &report)?;
    if !check.positive {
        return Err(Failure::new(
            EXIT_VALIDATION,
            format!(
                "kernel is not positive definite: minimum eigenvalue {:.6e}",
                check.min_eig
            ),
        )
        .with_report(report));
    }
    Ok(report)
}

fn factorize_input(
    kernel: OperatorKernel,
    rank_tol: f64,
    residual_tol: f64,
) -> std::result::Result<DilationFactorization, Failure> {
    Ok(DilationFactorization::new(
        Arc::new(kernel),
        FactorizeOptions { rank_tol, residual_tol },
    )?)
}

fn cmd_factorize(a: &FactorizeArgs) -> Outcome {
    check_tol("tol", a.tol)?;
    check_tol("residual-tol", a.residual_tol)?;
    let input = load(&a.kernel)?;
    let kernel = io::read_kernel(&input.bytes)?;
    let fact = factorize_input(kernel, a.tol, a.residual_tol)?;
    let file = FactorFile::from_factorization(&fact);
    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&file).expect("factors serialize");
        write_file(out, format!("{text}\n").as_bytes())?;
    }
    let bound = a.residual_tol * (1.0 + fact.gram_norm());
    Ok(finish(
        envelope(
            "factorize",
            &input,
            json!({ "out": a.out.as_ref().map(|p| p.display().to_string()) }),
            json!({ "rank": a.tol, "residual": a.residual_tol }),
            None,
        ),
        json!({
            "labels": file.labels,
            "dim": fact.dim(),
            "rank": fact.rank(),
            "residual": fact.residual(),
            "residual_bound": bound,
            "gram_norm_fro": fact.gram_norm(),
            "truncation_threshold": fact.truncation_tol(),
            "eigenvalues": fact.eigenvalues(),
        }),
        fact.residual() <= bound,
    ))
}

fn cmd_dilate_contraction(a: &DilateArgs) -> Outcome {
    check_tol("tol", a.tol)?;
    check_tol("identity-tol", a.identity_tol)?;
    let input = load(&a.matrix)?;
    let matrix = io::read_matrix(&input.bytes)?;
    let opts = PowerDilationOptions {
        power_tol: a.identity_tol,
        norm_tol: a.tol,
        polar: a.polar,
        ..PowerDilationOptions::default()
    };
    let dil = power_dilation_with(&matrix, a.window, &opts)?;
    let kernel = dil.factorization().kernel();

    let residuals: Vec<Value> = dil
        .power_residuals()
        .iter()
        .enumerate()
        .map(|(i, r)| json!({ "n": i + 1, "residual": r, "certified": i < dil.max_power() }))
        .collect();

    let mut rng = ChaCha20Rng::seed_from_u64(a.seed);
    let (mut max_diff, mut min_value) = (0.0f64, f64::INFINITY);
    for _ in 0..a.checks {
        let h: Vec<CVector> = (0..=a.window).map(|_| random_vector(&mut rng, matrix.rows())).collect();
        let tele = telescoping_quadratic(&matrix, &h)?;
        let direct = kernel.quadratic_form(&h)?.re;
        max_diff = max_diff.max((tele - direct).abs());
        min_value = min_value.min(tele);
    }
    let telescoping_ok = a.checks == 0 || (max_diff <= TELESCOPING_TOL && min_value >= -TELESCOPING_TOL);
    let pass = telescoping_ok && dil.max_power() == a.window;

    let report = finish(
        envelope(
            "dilate-contraction",
            &input,
            json!({ "window": a.window, "checks": a.checks, "polar": a.polar }),
            json!({
                "contraction": a.tol,
                "power_identity": a.identity_tol,
                "rank": opts.rank_tol,
                "telescoping": TELESCOPING_TOL,
            }),
            Some(a.seed),
        ),
        json!({
            "dim": matrix.rows(),
            "spectral_norm": dil.model().spectral_norm(),
            "rank": dil.factorization().rank(),
            "shift_defect": dil.shift_defect(),
            "max_power": dil.max_power(),
            "power_residuals": residuals,
            "telescoping": {
                "checks": a.checks,
                "max_abs_difference": if a.checks == 0 { Value::Null } else { json!(max_diff) },
                "min_value": if a.checks == 0 { Value::Null } else { json!(min_value) },
                "pass": telescoping_ok,
            },
        }),
        pass,
    );
    write_report(a.out.as_ref(), &report)?;
    Ok(report)
}

fn cmd_naimark(a: &NaimarkArgs) -> Outcome {
    check_tol("tol", a.tol)?;
    let input = load(&a.povm)?;
    let povm = io::read_povm(&input.bytes)?;
    let dil = naimark_dilate(&povm, a.tol)?;
    let defects = dil.defects();
    let atoms: Vec<Value> = (0..povm.atoms().len())
        .map(|j| -> std::result::Result<Value, Failure> {
            let p = dil.projection(j);
            let compression = (povm.effect(j) - &dil.compress_indices(&[j])?).norm_fro();
            Ok(json!({
                "atom": povm.atoms().label(j),
                "compression_defect": compression,
                "selfadjoint_defect": (p - &p.adjoint()).norm_fro(),
                "idempotent_defect": (p - &(p * p)).norm_fro(),
            }))
        })
        .collect::<std::result::Result<_, _>>()?;
    let report = finish(
        envelope("naimark", &input, json!({}), json!({ "defect": a.tol }), None),
        json!({
            "dim": povm.dim(),
            "rank": dil.rank(),
            "isometry_defect": defects.isometry,
            "selfadjoint_defect": defects.selfadjoint,
            "idempotent_defect": defects.idempotent,
            "orthogonality_defect": defects.orthogonality,
            "completeness_defect": defects.completeness,
            "compression_defect": defects.compression,
            "atoms": atoms,
        }),
        defects.max() <= a.tol,
    );
    write_report(a.out.as_ref(), &report)?;
    Ok(report)
}

fn cmd_sample(a: &SampleArgs) -> Outcome {
    check_tol("tol", a.tol)?;
    if a.samples == 0 {
        return Err(Failure::new(EXIT_USAGE, "--samples must be at least 1"));
    }
    let input = load(&a.kernel)?;
    let kernel = io::read_kernel(&input.bytes)?;
    let fact = factorize_input(kernel, a.tol, DEFAULT_RESIDUAL_TOL)?;
    let cov = estimate_all_pairs(&fact, a.seed, a.samples, true)?;
    let labels = &cov.labels;
    let m = labels.len();
    let cov_tol = clt_tolerance(a.samples);
    let mean_tol = 4.0 / (a.samples as f64).sqrt();

    if let Some(path) = &a.emit_draws {
        let file = std::fs::File::create(path)
            .map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))?;
        let mut sampler = build_sampler(&fact, a.seed);
        io::write_draws_csv(&mut sampler, a.samples, std::io::BufWriter::new(file))
            .map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))?;
    }
    if let Some(path) = &a.out {
        let mut blocks = serde_json::Map::new();
        for s in 0..m {
            for t in 0..m {
                blocks.insert(
                    format!("{}|{}", labels[s], labels[t]),
                    json!(io::matrix_to_json(&cov.estimate(s, t).matrix)),
                );
            }
        }
        let doc = json!({
            "dim": fact.dim(),
            "labels": labels,
            "samples": a.samples,
            "seed": a.seed,
            "blocks": blocks,
        });
        write_file(path, format!("{}\n", render(&doc)).as_bytes())?;
    }

    let pairs: Vec<Value> = cov
        .estimates
        .iter()
        .map(|e| {
            json!({
                "s": labels[e.s],
                "t": labels[e.t],
                "max_abs_error": e.max_abs_error,
                "std_error": e.std_error,
            })
        })
        .collect();
    let cov_ok = cov.max_abs_error() <= cov_tol;
    let mean_ok = cov.mean_max_abs <= mean_tol;
    let report = finish(
        envelope(
            "sample",
            &input,
            json!({
                "samples": a.samples,
                "emit_draws": a.emit_draws.as_ref().map(|p| p.display().to_string()),
                "out": a.out.as_ref().map(|p| p.display().to_string()),
            }),
            json!({
                "pd": a.tol,
                "residual": DEFAULT_RESIDUAL_TOL,
                "covariance": cov_tol,
                "mean": mean_tol,
            }),
            Some(a.seed),
        ),
        json!({
            "rank": fact.rank(),
            "normal_generator": NORMAL_ALGORITHM,
            "draws_per_block": DRAWS_PER_BLOCK,
            "max_abs_error": cov.max_abs_error(),
            "max_std_error": cov.max_std_error(),
            "mean_max_abs": cov.mean_max_abs,
            "covariance_pass": cov_ok,
            "mean_pass": mean_ok,
            "pairs": pairs,
        }),
        cov_ok && mean_ok,
    );
    Ok(report)
}
