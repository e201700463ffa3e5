use clap::{Args, Parser, Subcommand};
use eisen_cli::cache::FileCache;
use eisen_cli::commands::{self as cmd, Globals};
use eisen_cli::render;
use eisen_core::kronecker::KeStore;
use eisen_core::{Error, Result};
use serde_json::Value;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "eisen", version, about = "Eisenstein-Kronecker series, Dedekind sums, partial zeta and L-values")]
struct Cli {
    /// Job configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Working precision in bits.
    #[arg(long, global = true)]
    prec: Option<u32>,
    /// Absolute error target.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Series cache file (JSON lines).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Emit JSON (the default; kept for scripts).
    #[arg(long, global = true)]
    json: bool,
    /// Include every summand in zeta output.
    #[arg(long, global = true)]
    verbose_terms: bool,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Add wall-clock timing to the output (makes it nondeterministic).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kronecker-Eisenstein series K^{p,q}(z, 𝔍, s).
    Ke(KeCli),
    /// Generalized Dedekind sum D^{I,J}(z, A, Λ(𝔍)).
    Dsum(DsumCli),
    /// Equivariance and closedness of the cocycle on random tuples.
    CocycleTest(CocycleCli),
    /// Smoothed partial zeta value from a job config.
    Zeta,
    /// Hecke L-value from a job config.
    Lvalue,
    /// Minimal polynomial search for a decimal value.
    Recognize(RecognizeCli),
    /// Built-in invariant checks.
    Selftest,
}

#[derive(Args)]
struct KeCli {
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    d: i64,
    #[arg(long)]
    p: u32,
    #[arg(long, default_value_t = 0)]
    q: u32,
    #[arg(long, allow_hyphen_values = true)]
    z: String,
    /// Generator of the lattice ideal.
    #[arg(long, default_value = "1")]
    lattice: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    s: f64,
}

#[derive(Args)]
struct DsumCli {
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    d: i64,
    /// Comma-separated exponents.
    #[arg(long)]
    i: String,
    #[arg(long)]
    j: String,
    #[arg(long, allow_hyphen_values = true)]
    z: String,
    /// Matrix rows separated by ';'.
    #[arg(long, allow_hyphen_values = true)]
    a: String,
    #[arg(long, default_value = "1")]
    base: String,
    #[arg(long)]
    smooth: Option<String>,
    /// Also evaluate by the unfactored coset sum.
    #[arg(long)]
    direct: bool,
}

#[derive(Args)]
struct CocycleCli {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    d: i64,
    #[arg(long = "p-ideal", default_value = "1+i")]
    p_ideal: String,
    #[arg(long, default_value_t = 20)]
    tuples: usize,
    #[arg(long, default_value_t = 1)]
    p: u32,
    #[arg(long, default_value_t = 0)]
    q: u32,
    #[arg(long, default_value_t = 1e-20)]
    tol: f64,
}

#[derive(Args)]
struct RecognizeCli {
    #[arg(long, allow_hyphen_values = true)]
    value: String,
    #[arg(long, allow_hyphen_values = true)]
    im: Option<String>,
    #[arg(long, default_value_t = 8)]
    degree: usize,
    #[arg(long, default_value = "100000000")]
    height: String,
}

fn run(cli: &Cli) -> Result<(Value, bool)> {
    let mut store: Option<Arc<FileCache>> = None;
    let job = match (&cli.command, &cli.config) {
        (Command::Zeta | Command::Lvalue, Some(path)) => Some(cmd::load_job(&path.to_string_lossy())?),
        (Command::Zeta | Command::Lvalue, None) => return Err(Error::Validation("--config is required".into())),
        _ => None,
    };
    let cache_path = cli.cache.clone().or_else(|| job.as_ref().and_then(|j| j.1.cache.clone().map(PathBuf::from)));
    if let Some(p) = &cache_path {
        store = Some(Arc::new(FileCache::open(p)?));
    }
    let g = Globals {
        prec: cli.prec,
        eps: cli.eps,
        seed: cli.seed,
        verbose_terms: cli.verbose_terms,
        store: store.clone().map(|s| s as Arc<dyn KeStore>),
    };
    let out = match &cli.command {
        Command::Ke(a) => {
            let args = cmd::KeArgs { d: a.d, p: a.p, q: a.q, z: a.z.clone(), lattice: a.lattice.clone(), s: a.s };
            (cmd::cmd_ke(&g, &args)?, true)
        }
        Command::Dsum(a) => {
            let args = cmd::DsumArgs {
                d: a.d,
                i: a.i.clone(),
                j: a.j.clone(),
                z: a.z.clone(),
                a: a.a.clone(),
                base: a.base.clone(),
                smooth: a.smooth.clone(),
                direct: a.direct,
            };
            (cmd::cmd_dsum(&g, &args)?, true)
        }
        Command::CocycleTest(a) => {
            let args = cmd::CocycleArgs { n: a.n, d: a.d, p_ideal: a.p_ideal.clone(), tuples: a.tuples, p: a.p, q: a.q, tol: a.tol };
            cmd::cmd_cocycle_test(&g, &args)?
        }
        Command::Zeta => {
            let (text, job) = job.as_ref().unwrap();
            (cmd::cmd_zeta(&g, text, job)?, true)
        }
        Command::Lvalue => {
            let (text, job) = job.as_ref().unwrap();
            (cmd::cmd_lvalue(&g, text, job)?, true)
        }
        Command::Recognize(a) => {
            let args = cmd::RecognizeArgs { re: a.value.clone(), im: a.im.clone(), degree: a.degree, height: a.height.clone() };
            (cmd::cmd_recognize(&g, &args)?, true)
        }
        Command::Selftest => cmd::cmd_selftest(&g),
    };
    if let Some(s) = &store {
        eprintln!("cache {}: {} entries, {} unreadable records skipped", s.path().display(), s.len(), s.skipped);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: thread pool: {e}");
        }
    }
    let start = Instant::now();
    match run(&cli) {
        Ok((mut v, ok)) => {
            if cli.timing {
                v["timing_seconds"] = serde_json::json!(start.elapsed().as_secs_f64());
            }
            print!("{}", render(&v));
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let v = serde_json::json!({"error": {"kind": kind(&e), "message": e.to_string(), "exit_code": e.exit_code()}});
            print!("{}", render(&v));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Validation(_) => "validation",
        Error::UnsupportedField(_) => "unsupported_field",
        Error::GeneralPosition(_) => "general_position",
        Error::Precision(_) => "precision",
        Error::SearchExhausted(_) => "search_exhausted",
        Error::Singular(_) => "singular",
        Error::Cache(_) => "cache",
    }
}
