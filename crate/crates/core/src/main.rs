use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use levy_fk::config::{AsymptoticsMode, MethodKind, OutputFormat, RunConfig};
use levy_fk::run::{self, Overrides};
use levy_fk::verify::{self, Suite};
use levy_fk::{report, Error, Result};

#[derive(Parser)]
#[command(name = "lfk", version, about = "Feynman-Kac, PIDE and semiclassical asymptotics for Levy-driven equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever method the configuration names.
    Run(RunArgs),
    /// Monte Carlo Feynman-Kac estimates.
    Fk(RunArgs),
    /// Grid solution of the PIDE.
    Pide(RunArgs),
    /// Euler-Lagrange extremal and its action.
    Variational(RunArgs),
    /// Prefactors, drift predictions and hbar sweeps.
    Asymptotics {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Run the acceptance suite.
    Verify {
        #[arg(default_value = "fast")]
        suite: String,
    },
    /// Merge CSV artifacts into one table per method.
    Report {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Bin,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Prefactor,
    Drift,
    Sweep,
}

fn overrides(args: &RunArgs, method: Option<MethodKind>, mode: Option<Mode>) -> Overrides {
    Overrides {
        seed: args.seed,
        out: args.out.clone(),
        format: args.format.map(|f| match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Bin => OutputFormat::Bin,
        }),
        method,
        mode: mode.map(|m| match m {
            Mode::Prefactor => AsymptoticsMode::Prefactor,
            Mode::Drift => AsymptoticsMode::Drift,
            Mode::Sweep => AsymptoticsMode::Sweep,
        }),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("LFK_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("LFK_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))
}

fn execute(args: &RunArgs, method: Option<MethodKind>, mode: Option<Mode>) -> Result<()> {
    let file = RunConfig::load(&args.config)?;
    let cfg = run::resolve(file, &overrides(args, method, mode))?;
    let artifact = run::run(&cfg)?;
    match &cfg.output.path {
        Some(path) => eprintln!("wrote {} ({} bytes)", path.display(), artifact.body.len()),
        None => std::io::stdout().write_all(&artifact.body).map_err(|e| Error::Io(e.to_string()))?,
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    configure_threads()?;
    match &cli.command {
        Command::Run(a) => execute(a, None, None)?,
        Command::Fk(a) => execute(a, Some(MethodKind::Fk), None)?,
        Command::Pide(a) => execute(a, Some(MethodKind::Pide), None)?,
        Command::Variational(a) => execute(a, Some(MethodKind::Variational), None)?,
        Command::Asymptotics { mode, args } => execute(args, Some(MethodKind::Asymptotics), *mode)?,
        Command::Verify { suite } => {
            let suite: Suite = suite.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
            let outcomes = verify::run_suite(suite);
            print!("{}", verify::format_table(&outcomes));
            if !outcomes.iter().all(|o| o.passed) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report { inputs, out } => {
            let text = report::merge(inputs)?.render();
            match out {
                Some(p) => run::write_atomic(p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match dispatch(&Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
