use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use irka_lab::error::{Error, Result};
use irka_lab::fixpoint;
use irka_lab::generate;
use irka_lab::irka::{InitStrategy, IrkaConfig};
use irka_lab::lti::{read_system_file, system_to_json};
use irka_lab::report::{self, CertifyMode, RunConfig, RunReport};

#[derive(Parser)]
#[command(name = "irka-lab", version, about = "IRKA model reduction with fixed-point certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated SSS system file.
    Gen(GenArgs),
    /// Reduce a system with IRKA and write a JSON run report.
    Reduce(ReduceArgs),
    /// Run IRKA from many seeded starts and cluster the fixed points.
    Sweep(SweepArgs),
    /// Re-certify the final model stored in a run report.
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    #[value(name = "random_sss")]
    RandomSss,
    #[value(name = "rc_ladder")]
    RcLadder,
    #[value(name = "diagonal")]
    Diagonal,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Order (ignored for `diagonal`, which takes it from --poles).
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, env = "IRKA_LAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Diagonal shift of `-(G G^T + delta I)` for random_sss.
    #[arg(long, default_value_t = generate::DEFAULT_DELTA)]
    delta: f64,
    /// Series resistance for rc_ladder.
    #[arg(long, default_value_t = 1.0)]
    resistance: f64,
    /// Comma-separated negative poles for diagonal.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    poles: Vec<f64>,
    /// Comma-separated nonnegative residues for diagonal.
    #[arg(long, value_delimiter = ',')]
    residues: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Logspace,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Certify {
    Auto,
    Off,
}

#[derive(Args)]
struct RunArgs {
    /// System file (JSON).
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_sweeps: usize,
    #[arg(long, value_enum, default_value_t = Init::Logspace)]
    init: Init,
    #[arg(long, env = "IRKA_LAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Certify::Auto)]
    certify: Certify,
    #[arg(long, default_value_t = 1e-8)]
    perturb_eps: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            irka: IrkaConfig {
                r: self.r,
                tol: self.tol,
                max_sweeps: self.max_sweeps,
                init: match self.init {
                    Init::Logspace => InitStrategy::MirrorSpectrumLogspace,
                    Init::Random => InitStrategy::RandomLoguniform,
                },
                perturb_eps: self.perturb_eps,
            },
            seed: self.seed,
            certify: match self.certify {
                Certify::Auto => CertifyMode::Auto,
                Certify::Off => CertifyMode::Off,
            },
        }
    }
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Omit per-phase timings so reports are byte-for-byte reproducible.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    count: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Cluster summary CSV; defaults to the --out path with a .csv extension.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    system: PathBuf,
    /// Run report produced by `reduce`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            context: format!("writing {}", path.display()),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen(args: &GenArgs) -> Result<ExitCode> {
    let sys = match args.kind {
        Kind::RandomSss => generate::random_sss(args.n, args.seed, args.delta)?,
        Kind::RcLadder => generate::rc_ladder(args.n, args.resistance)?,
        Kind::Diagonal => generate::diagonal(&args.poles, &args.residues)?,
    };
    let mut text = system_to_json(&sys);
    text.push('\n');
    emit(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn reduce(args: &ReduceArgs) -> Result<ExitCode> {
    let (sys, bytes) = read_system_file(&args.run.system)?;
    let rep = report::run_reduce(&sys, &bytes, &args.run.config(), !args.no_timings)?;
    emit(args.run.out.as_deref(), &rep.to_json())?;
    if rep.trace.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: {}", rep.trace.ensure_converged().unwrap_err());
        Ok(ExitCode::from(2))
    }
}

fn sweep(args: &SweepArgs) -> Result<ExitCode> {
    let (sys, bytes) = read_system_file(&args.run.system)?;
    let rep = report::basin_sweep(&sys, &bytes, &args.run.config(), args.count, args.jobs)?;
    emit(args.run.out.as_deref(), &rep.to_json())?;
    let csv_path = args
        .csv
        .clone()
        .or_else(|| args.run.out.as_ref().map(|p| p.with_extension("csv")));
    if let Some(path) = csv_path {
        emit(Some(&path), &rep.summary_csv())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn certify(args: &CertifyArgs) -> Result<ExitCode> {
    let (sys, bytes) = read_system_file(&args.system)?;
    let text = std::fs::read_to_string(&args.report).map_err(|source| Error::Io {
        context: format!("reading {}", args.report.display()),
        source,
    })?;
    let rep: RunReport = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: format!("parsing report {}", args.report.display()),
        source,
    })?;
    if rep.input_digest != report::digest(&bytes) {
        eprintln!("warning: system file digest differs from the one recorded in the report");
    }
    let cert = fixpoint::certify(&sys, &rep.trace.final_model)?;
    let mut out = serde_json::to_string_pretty(&cert).expect("certificate serialization cannot fail");
    out.push('\n');
    emit(args.out.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Reduce(a) => reduce(a),
        Command::Sweep(a) => sweep(a),
        Command::Certify(a) => certify(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
