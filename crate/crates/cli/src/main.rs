//! `fnmat`: approximate degrees, witness matrices, entry estimators and
//! hardness instances from the command line.
//!
//! Every command prints one JSON document (or CSV for `bench` and
//! `estimate --format csv`). Failures print `{"schema_version", "error":
//! {"kind", "message"}}` on stderr and exit nonzero: 2 for usage errors, 1 for
//! everything else.

mod bench;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fnmat_core::SCHEMA_VERSION;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(name = "fnmat", version, about = "Approximate degrees and entries of matrix functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads; 1 forces the sequential path.
    #[arg(long, global = true, env = "FNMAT_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Smallest degree d with Val(f, d) <= eps.
    ApproxDegree {
        #[arg(long)]
        function: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = ParityArg::None)]
        parity: ParityArg,
    },
    /// Build, verify or certify witness matrices.
    #[command(subcommand)]
    Witness(WitnessCmd),
    /// Estimate <i|f(A)|j> for a sparse Hermitian matrix file.
    Estimate(EstimateArgs),
    /// Generate or verify hardness instances.
    #[command(subcommand)]
    Hardness(HardnessCmd),
    /// Sweep a function family and emit scaling data.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ParityArg {
    None,
    Odd,
    Even,
}

impl From<ParityArg> for fnmat_core::Parity {
    fn from(p: ParityArg) -> Self {
        match p {
            ParityArg::None => fnmat_core::Parity::None,
            ParityArg::Odd => fnmat_core::Parity::Odd,
            ParityArg::Even => fnmat_core::Parity::Even,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum WitnessCmd {
    /// Witness matrix for the odd or even part of f at accuracy eps.
    Build {
        #[arg(long)]
        function: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = ParityArg::Odd)]
        parity: ParityArg,
    },
    /// Re-check a certificate from its matrix alone.
    Verify {
        #[arg(long)]
        certificate: PathBuf,
        /// Defaults to the function recorded in the certificate.
        #[arg(long)]
        function: Option<String>,
    },
    /// Lower bound on the approximate degree from a tridiagonal matrix.
    Certify {
        /// Tridiagonal matrix JSON `{"n", "diag", "offdiag"}`.
        #[arg(long, conflicts_with = "nff", required_unless_present = "nff")]
        matrix: Option<PathBuf>,
        /// Use the size-2m matrix with equally spaced spectrum.
        #[arg(long)]
        nff: Option<usize>,
        #[arg(long)]
        function: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = ParityArg::Odd)]
        parity: ParityArg,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Walk,
    Contour,
    Oracle,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Sparse matrix JSON `{"n", "entries": [[i, j, re, im], ...]}` (upper triangle).
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub function: String,
    #[arg(long)]
    pub i: usize,
    #[arg(long)]
    pub j: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Walk)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub fail_prob: f64,
    /// Polynomial degree for exact and walk; read from polynomial specs.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Upper bound on the spectral norm (contour).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Contour radius (contour); defaults to the oracle-measured column norm.
    #[arg(long)]
    pub big_lambda: Option<f64>,
    /// Path budget for the exact method.
    #[arg(long, default_value_t = fnmat_core::estimators::DEFAULT_EXACT_BUDGET)]
    pub budget: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    Parity,
    Forrelation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Odd,
    Even,
}

#[derive(Subcommand, Debug)]
pub enum HardnessCmd {
    /// Write a replayable instance bundle.
    Gen {
        #[arg(long, value_enum)]
        family: FamilyKind,
        #[arg(long)]
        function: String,
        /// Bit string for the parity family, e.g. 1011.
        #[arg(long)]
        bits: Option<String>,
        #[arg(long, value_enum, default_value_t = VariantArg::Odd)]
        variant: VariantArg,
        /// Uniform edge weight; witness weights are used when absent.
        #[arg(long)]
        weight: Option<f64>,
        /// Qubit count for the Forrelation family.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Re-derive a bundle's identity.
    Verify {
        #[arg(long)]
        bundle: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchMethod {
    Witness,
    Exact,
    Walk,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// sin, cos, exp (swept over t) or power, cheb (swept over d).
    #[arg(long)]
    pub family: String,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sweep: Vec<f64>,
    #[arg(long, value_enum, default_value_t = BenchMethod::Witness)]
    pub method: BenchMethod,
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub fail_prob: f64,
    /// Dimension of the random test matrix.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Row sparsity of the random test matrix.
    #[arg(long, default_value_t = 4)]
    pub sparsity: usize,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), code: 1 }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: "usage", message: message.into(), code: 2 }
    }

    fn to_json(&self) -> Value {
        json!({ "schema_version": SCHEMA_VERSION, "error": { "kind": self.kind, "message": self.message } })
    }
}

/// What a command produced.
pub enum Output {
    Json(Value),
    Csv(String),
    /// A verdict document plus the error reported because the check failed.
    Rejected(Value, CliError),
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::new("io", format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{}", text.trim_end()).and_then(|_| stdout.flush()) {
                // a closed pipe (e.g. `| head`) is not a failure of the command
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::new("io", format!("cannot write stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn render(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes") + "\n"
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::usage("thread count must be positive"));
        }
        fnmat_core::exec::init_threads(n);
    }
    match commands::dispatch(&cli)? {
        Output::Json(v) => emit(&render(&v), &cli.common.out),
        Output::Csv(s) => emit(&s, &cli.common.out),
        Output::Rejected(v, err) => {
            emit(&render(&v), &cli.common.out)?;
            Err(err)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.code)
        }
    }
}
