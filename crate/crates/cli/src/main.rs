//! `lwelab`: generate keys and LWE instances, run attacks and lattice
//! tools, and execute the claim-check suite. JSON on stdout or `--out`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lwelab_core::{Error, Mode};

#[derive(Parser, Debug)]
#[command(name = "lwelab", version, about = "Learning-with-errors toolkit")]
pub struct Cli {
    /// Seed for every random choice; falls back to LWELAB_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Enforce preconditions instead of reporting them.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Key generation, encryption and decryption.
    #[command(subcommand)]
    Crypto(CryptoCmd),
    /// Generate and verify LWE samples.
    #[command(subcommand)]
    Lwe(LweCmd),
    /// Recover secrets from a sample file.
    #[command(subcommand)]
    Attack(AttackCmd),
    /// Lattice reduction, closest vectors and smoothing parameters.
    #[command(subcommand)]
    Lattice(LatticeCmd),
    /// Discrete Gaussian sampling.
    #[command(subcommand)]
    Dgs(DgsCmd),
    /// The classical worst-case procedures.
    #[command(subcommand)]
    Worstcase(WorstcaseCmd),
    /// Run the numeric claim checks.
    Checks(ChecksArgs),
    /// Time the main operations.
    Bench(BenchArgs),
}

#[derive(Subcommand, Debug)]
pub enum CryptoCmd {
    Keygen(KeygenArgs),
    Encrypt(EncryptArgs),
    Decrypt(DecryptArgs),
    /// Empirical decryption error rate under fresh keys.
    ErrorRate(ErrorRateArgs),
    /// Exact subset-sum distance from uniform over Z_p^(n+1).
    Leftover(LeftoverArgs),
}

#[derive(Args, Debug)]
pub struct KeygenArgs {
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long)]
    pub p: Option<u64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Share the matrix A through a common random seed.
    #[arg(long)]
    pub shared: bool,
    #[arg(long)]
    pub crs_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EncryptArgs {
    /// Key file written by `crypto keygen`.
    #[arg(long)]
    pub key: PathBuf,
    /// Message as a string of 0s and 1s.
    #[arg(long)]
    pub bits: String,
}

#[derive(Args, Debug)]
pub struct DecryptArgs {
    #[arg(long)]
    pub key: PathBuf,
    /// Ciphertexts as JSON lines.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct ErrorRateArgs {
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct LeftoverArgs {
    #[arg(long, default_value_t = 5)]
    pub p: u64,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 14)]
    pub l: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
}

#[derive(Subcommand, Debug)]
pub enum LweCmd {
    /// Write samples as JSON lines after a header line.
    Generate(GenerateArgs),
    /// Mean-cosine statistic of a candidate on continuous samples.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 67)]
    pub p: u64,
    /// Width of Psi_alpha noise.
    #[arg(long, conflicts_with = "eps")]
    pub alpha: Option<f64>,
    /// Bernoulli noise rate (p = 2 only).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 256)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Discrete)]
    pub mode: ModeArg,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Discrete,
    Continuous,
    Uniform,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Candidate secret, comma separated.
    #[arg(long)]
    pub secret: String,
}

#[derive(Subcommand, Debug)]
pub enum AttackCmd {
    /// Maximum likelihood over all secrets.
    Ml(AttackArgs),
    /// Gaussian elimination with majority voting (p = 2).
    Gauss(GaussArgs),
    /// Blockwise reduction (p = 2).
    Bkw(BkwArgs),
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[arg(long)]
    pub samples: PathBuf,
}

#[derive(Args, Debug)]
pub struct GaussArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Votes per coordinate.
    #[arg(long, default_value_t = 31)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct BkwArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub b: usize,
}

#[derive(Subcommand, Debug)]
pub enum LatticeCmd {
    /// Determinant, successive minima and smoothing parameter.
    Info(LatticeArgs),
    /// LLL-reduced basis.
    Reduce(LatticeArgs),
    /// Exact closest vector and Babai's answer.
    Cvp(CvpArgs),
}

#[derive(Args, Debug)]
pub struct LatticeArgs {
    /// Basis file `{"n": int, "columns": [[real]]}`.
    #[arg(long)]
    pub lattice: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct CvpArgs {
    #[arg(long)]
    pub lattice: PathBuf,
    /// Comma-separated coordinates.
    #[arg(long)]
    pub target: String,
}

#[derive(Subcommand, Debug)]
pub enum DgsCmd {
    /// Lattice vectors from D_{L,r} as JSON lines.
    Sample(DgsSampleArgs),
    /// rho_r(L + c) / (r^n det L*) and eta_eps.
    ShiftCheck(ShiftCheckArgs),
}

#[derive(Args, Debug)]
pub struct DgsSampleArgs {
    #[arg(long)]
    pub lattice: PathBuf,
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Use the continuous-Gaussian bootstrap sampler.
    #[arg(long)]
    pub bootstrap: bool,
}

#[derive(Args, Debug)]
pub struct ShiftCheckArgs {
    #[arg(long)]
    pub lattice: PathBuf,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub shift: String,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
}

#[derive(Subcommand, Debug)]
pub enum WorstcaseCmd {
    /// Closest vector of L* through LWE equations sampled on L = (L*)*.
    Cvp(WorstcaseCvpArgs),
    /// Short independent vectors from discrete Gaussian samples.
    Givp(GivpArgs),
    /// Fraction of D_{L,r} samples off the span of the first basis vector.
    Escape(EscapeArgs),
    /// Iterate the classical step over shrinking widths.
    Descent(DescentArgs),
}

#[derive(Args, Debug)]
pub struct WorstcaseCvpArgs {
    /// Basis of L*.
    #[arg(long)]
    pub lattice: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 5)]
    pub p: u64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub r: f64,
    /// Equations handed to the likelihood solver.
    #[arg(long, default_value_t = 400)]
    pub m: usize,
}

#[derive(Args, Debug)]
pub struct GivpArgs {
    #[arg(long)]
    pub lattice: PathBuf,
    /// Target width; defaults to sqrt(2) eta_0.1(L).
    #[arg(long)]
    pub phi: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EscapeArgs {
    #[arg(long)]
    pub lattice: PathBuf,
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct DescentArgs {
    #[arg(long)]
    pub lattice: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub p: u64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub r: f64,
    #[arg(long, default_value_t = 2)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 300)]
    pub m: usize,
}

#[derive(Args, Debug)]
pub struct ChecksArgs {
    /// `all`, check ids, or check numbers.
    #[arg(default_value = "all")]
    pub selection: Vec<String>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

pub struct Context {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub mode: Mode,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::UnsupportedModulus(_) | Error::Io(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, String> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("LWELAB_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| format!("LWELAB_SEED is not a 64-bit integer: {v:?}")),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let seed = match resolve_seed(cli.seed) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let ctx = Context {
        seed,
        out: cli.out,
        mode: if cli.strict { Mode::Strict } else { Mode::Diagnostic },
    };
    match commands::run(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
